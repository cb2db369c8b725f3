#include "sparse_score_cli/io.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sparse_score::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && ptr == end && !s.empty();
}

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void write_le_double(std::ostream& out, double v) {
  static_assert(sizeof(double) == 8);
  auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes.data(), 8);
}

double read_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{p[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string quote_csv(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

DataFormat data_format_from_string(const std::string& name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "idx") return DataFormat::idx;
  throw std::invalid_argument("unknown data format '" + name + "'");
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("ingest: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_double(fields[j], row[j])) numeric = false;
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = fields.size();  // header row
        continue;
      }
      throw IngestError("ingest: " + path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw IngestError("ingest: " + path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(width) + " fields, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestError("ingest: " + path.string() + " has no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Matrix read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("ingest: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw IngestError("ingest: " + path.string() + ": truncated IDX header");
  if (bytes[0] != 0 || bytes[1] != 0) throw IngestError("ingest: " + path.string() + ": bad IDX magic");
  if (bytes[2] != 0x08) throw IngestError("ingest: " + path.string() + ": only unsigned-byte IDX is supported");
  const std::size_t ndim = bytes[3];
  if (ndim < 1) throw IngestError("ingest: " + path.string() + ": IDX tensor has no dimensions");
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() < header) throw IngestError("ingest: " + path.string() + ": truncated IDX header");

  std::size_t n = read_be32(bytes.data() + 4);
  std::size_t per = 1;
  for (std::size_t k = 1; k < ndim; ++k) per *= read_be32(bytes.data() + 4 + 4 * k);
  if (bytes.size() - header != n * per) {
    throw IngestError("ingest: " + path.string() + ": payload has " + std::to_string(bytes.size() - header) +
                      " bytes, header implies " + std::to_string(n * per));
  }
  Matrix m(static_cast<Index>(n), static_cast<Index>(per));
  const unsigned char* p = bytes.data() + header;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < per; ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = static_cast<double>(p[i * per + j]) / 255.0;
    }
  }
  return m;
}

Matrix ingest(const std::filesystem::path& path, DataFormat format) {
  return format == DataFormat::csv ? read_csv_matrix(path) : read_idx(path);
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header) {
  if (static_cast<Index>(header.size()) != m.cols()) {
    throw std::invalid_argument("write_csv_matrix: header width does not match the matrix");
  }
  CsvWriter w(path, header);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) w.field(m(i, j));
    w.end_row();
  }
  w.close();
}

CsvWriter::CsvWriter(std::filesystem::path path, const std::vector<std::string>& header)
    : path_(std::move(path)) {
  for (const std::string& h : header) field(h);
  end_row();
}

CsvWriter& CsvWriter::field(const std::string& v) {
  if (!first_in_row_) buf_ += ',';
  buf_ += quote_csv(v);
  first_in_row_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(format_double(v)); }

CsvWriter& CsvWriter::field(long long v) { return field(std::to_string(v)); }

void CsvWriter::end_row() {
  buf_ += '\n';
  first_in_row_ = true;
}

void CsvWriter::close() {
  std::ofstream out(path_, std::ios::binary);
  out << buf_;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path_.string());
}

void write_trajectories(const std::filesystem::path& path, const SampleRun& run) {
  if (!run.recorded()) throw std::invalid_argument("write_trajectories: run has no recorded trajectories");
  const Index d = run.trajectories.front().cols();
  nlohmann::json header = {
      {"format", "sparse_score.trajectory"},
      {"version", 1},
      {"dtype", "float64"},
      {"endianness", "little"},
      {"order", {"step", "chain", "coord"}},
      {"shape", {run.trajectories.size(), run.n, d}},
      {"seed", run.seed},
      {"T", run.T},
      {"eta", run.eta},
      {"eps", run.eps},
      {"grid", run.grid},
  };
  std::ofstream out(path, std::ios::binary);
  out << header.dump() << '\n';
  for (const Matrix& slice : run.trajectories) {
    for (Index i = 0; i < slice.rows(); ++i) {
      for (Index j = 0; j < d; ++j) write_le_double(out, slice(i, j));
    }
  }
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

TrajectoryTensor read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("trajectory: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestError("trajectory: missing header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("trajectory: bad header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "sparse_score.trajectory") {
    throw IngestError("trajectory: " + path.string() + " is not a trajectory tensor");
  }
  TrajectoryTensor t;
  const auto shape = header.at("shape");
  t.steps = shape.at(0).get<std::int64_t>();
  t.chains = shape.at(1).get<std::int64_t>();
  t.dim = shape.at(2).get<std::int64_t>();
  t.seed = header.at("seed").get<std::uint64_t>();
  t.grid = header.at("grid").get<std::vector<double>>();

  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected = static_cast<std::size_t>(t.steps * t.chains * t.dim) * 8;
  if (payload.size() != expected) {
    throw IngestError("trajectory: " + path.string() + ": payload has " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(expected));
  }
  const unsigned char* p = payload.data();
  for (std::int64_t s = 0; s < t.steps; ++s) {
    Matrix slice(t.chains, t.dim);
    for (Index i = 0; i < t.chains; ++i) {
      for (Index j = 0; j < t.dim; ++j) {
        slice(i, j) = read_le_double(p);
        p += 8;
      }
    }
    t.slices.push_back(std::move(slice));
  }
  return t;
}

}  // namespace sparse_score::cli
