#pragma once

#include "sparse_score/rng.hpp"
#include "sparse_score/types.hpp"

#include <cstdint>
#include <vector>

namespace sparse_score {

struct Architecture {
  Index dim = 3;
  std::vector<Index> hidden{64, 64, 64};
  Index time_feat_dim = 16;
  double fourier_scale = 30.0;

  Index input_dim() const { return dim + time_feat_dim; }
  /// Throws std::invalid_argument on an unusable shape.
  void validate() const;
};

/// Feasible-set parameters: ||theta||_1 <= l1_radius (enforced by projection in
/// the trainer) and ||s(x, t)||_1 <= output_l1_cap (enforced inside forward).
struct Constraints {
  double l1_radius = 1.0;
  double output_l1_cap = 1.0;
  bool output_cap = true;
};

/// Time-conditioned ReLU MLP s_theta(x, t) with a scalar output scale kappa.
/// The effective score is kappa * forward(x, t).
///
/// All weights and biases live in one flat vector. Layer k occupies a
/// column-major (out x in) weight block followed by its bias.
class ScoreModel {
 public:
  ScoreModel() = default;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, Gaussian
  /// Fourier frequencies with standard deviation arch.fourier_scale.
  static ScoreModel init(const Architecture& arch, std::uint64_t seed, double kappa = 1.0,
                         Constraints constraints = {});

  /// Assembles a model from explicit parts; shapes are checked.
  static ScoreModel from_parts(const Architecture& arch, Vector theta, Vector frequencies,
                               double kappa, Constraints constraints);

  const Architecture& architecture() const { return arch_; }
  const Constraints& constraints() const { return constraints_; }
  Constraints& constraints() { return constraints_; }

  Index dim() const { return arch_.dim; }
  Index param_count() const { return theta_.size(); }
  std::size_t layer_count() const { return offsets_.size(); }

  const Vector& theta() const { return theta_; }
  Vector& theta() { return theta_; }
  const Vector& frequencies() const { return freqs_; }

  double kappa() const { return kappa_; }
  void set_kappa(double kappa);

  Index layer_in(std::size_t k) const { return shapes_[k].second; }
  Index layer_out(std::size_t k) const { return shapes_[k].first; }
  Index weight_offset(std::size_t k) const { return offsets_[k]; }
  Index bias_offset(std::size_t k) const { return offsets_[k] + layer_out(k) * layer_in(k); }

  Eigen::Map<const Matrix> weight(std::size_t k) const;
  Eigen::Map<const Vector> bias(std::size_t k) const;

 private:
  void build_layout();

  Architecture arch_;
  Constraints constraints_;
  Vector theta_;
  Vector freqs_;
  double kappa_ = 1.0;
  std::vector<std::pair<Index, Index>> shapes_;  // (out, in)
  std::vector<Index> offsets_;
};

/// Same shapes as the owning model's parameters.
struct GradientBundle {
  Vector d_theta;
  double d_kappa = 0.0;

  GradientBundle& operator+=(const GradientBundle& other);
  GradientBundle& operator*=(double factor);
};

/// Intermediate values of one batched forward pass, kept for backward.
/// Batches are stored one sample per column.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] = network input, [k] = relu(pre[k-1])
  std::vector<Matrix> preacts;      // hidden-layer pre-activations
  Matrix raw;                       // network output before the cap
  Vector cap_l1;                    // ||raw_i||_1 per sample
  Matrix out;                       // capped output s
};

/// frequencies f_k drawn once from N(0, scale^2); the count is width / 2.
Vector draw_fourier_frequencies(Index width, double scale, Rng& rng);

/// [sin(2 pi f_k t) ..., cos(2 pi f_k t) ...].
Vector fourier_features(double t, const Vector& frequencies);

/// s_theta(x, t) without the kappa factor. Throws std::invalid_argument on a
/// shape mismatch.
Vector forward(const ScoreModel& model, const Vector& x, double t);

/// Row-wise forward over an n x d batch with per-row times. The result is n x d.
Matrix forward_batch(const ScoreModel& model, const Matrix& x, const Vector& t,
                     ForwardCache* cache = nullptr);

/// Same, with one shared time for every row.
Matrix forward_batch(const ScoreModel& model, const Matrix& x, double t,
                     ForwardCache* cache = nullptr);

/// Gradient of <upstream, kappa * forward(x, t)> w.r.t. theta and kappa.
GradientBundle backward(const ScoreModel& model, const Vector& x, double t, const Vector& upstream);

/// Gradient of sum_i <upstream_i, kappa * s_i> for the batch held in `cache`.
/// `upstream` is n x d, rows aligned with the forward batch.
GradientBundle backward_batch(const ScoreModel& model, const ForwardCache& cache,
                              const Matrix& upstream);

double l1_norm(const Vector& v);

/// Euclidean projection onto {v : ||v||_1 <= radius} by soft-thresholding at
/// the exact threshold (found by sorting magnitudes).
Vector project_l1(const Vector& theta, double radius);

}  // namespace sparse_score
