#pragma once

#include "sparse_score/sampler.hpp"
#include "sparse_score/types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparse_score::cli {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataFormat { csv, idx };
DataFormat data_format_from_string(const std::string& name);

/// Reads an n x d matrix. csv: one sample per row, an optional header row of
/// non-numeric names. idx: unsigned-byte IDX tensor, flattened row-major per
/// sample and scaled to [0, 1]. Throws IngestError on malformed input.
Matrix ingest(const std::filesystem::path& path, DataFormat format);
Matrix read_csv_matrix(const std::filesystem::path& path);
Matrix read_idx(const std::filesystem::path& path);

/// Writes rows with a header. Values use the shortest round-trip form.
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header);

/// Minimal RFC-4180 table writer: quotes fields containing , " or newlines.
/// Rows are buffered and written by close(), which throws on I/O failure.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, const std::vector<std::string>& header);
  CsvWriter& field(const std::string& v);
  CsvWriter& field(const char* v) { return field(std::string(v)); }
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  void end_row();
  void close();

 private:
  std::filesystem::path path_;
  std::string buf_;
  bool first_in_row_ = true;
};

std::string format_double(double v);

/// Trajectory tensor: one JSON header line, then (T+1) x n x d little-endian
/// float64 values ordered by step, chain, coordinate.
void write_trajectories(const std::filesystem::path& path, const SampleRun& run);

struct TrajectoryTensor {
  std::int64_t steps = 0;  // T + 1 slices
  std::int64_t chains = 0;
  std::int64_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::vector<Matrix> slices;
};
TrajectoryTensor read_trajectories(const std::filesystem::path& path);

}  // namespace sparse_score::cli
