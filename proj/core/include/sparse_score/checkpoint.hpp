#pragma once

#include "sparse_score/scorenet.hpp"

#include <filesystem>
#include <string>

namespace sparse_score {

inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint: layer name -> {shape, row-major data}, plus kappa, the
/// frozen Fourier frequencies, constraints, architecture and a config hash.
/// Doubles are written in shortest round-trip form, so save/load is exact.
std::string checkpoint_to_json(const ScoreModel& model, const std::string& config_hash = "");
ScoreModel checkpoint_from_json(const std::string& text, std::string* config_hash = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model,
                     const std::string& config_hash = "");
ScoreModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace sparse_score
