#pragma once

#include "sparse_score/types.hpp"

#include <cstdint>
#include <random>

namespace sparse_score {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Results never depend on the
/// order in which streams are consumed, so per-chain or per-task work can be
/// scheduled freely.
Rng make_stream(std::uint64_t seed, std::uint64_t stream = 0);

/// Fills an rows x cols matrix with standard normal draws, row by row.
Matrix standard_normal(Rng& rng, Index rows, Index cols);

double uniform01(Rng& rng);

}  // namespace sparse_score
