#pragma once

#include <filesystem>
#include <string>

namespace sparse_score::cli {

struct ToyPlotInputs {
  std::filesystem::path data_csv;
  std::filesystem::path baseline_trajectories;
  std::filesystem::path regularized_trajectories;
  std::string baseline_title = "baseline (r = 0)";
  std::string regularized_title = "regularized";
  int max_paths = 40;
};

/// Three panels (data, baseline paths, regularized paths) in an oblique 3-D
/// projection with x on the vertical axis. Reads only the given artifacts.
void plot_toy_svg(const ToyPlotInputs& in, const std::filesystem::path& out);

}  // namespace sparse_score::cli
