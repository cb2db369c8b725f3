#pragma once

#include "sparse_score/rng.hpp"
#include "sparse_score/types.hpp"

#include <string>
#include <vector>

namespace sparse_score {

enum class TargetKind { gaussian, gaussian_mixture, gaussian_uniform_product };

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& name);

struct MixtureComponent {
  double weight = 1.0;
  Vector mean;
  Vector var;  // diagonal covariance
};

/// Analytic data density q_0 with diagonal structure. Every kind has a closed
/// form for its VE-smoothed marginal q_t = q_0 * N(0, sigma_t^2 I), which makes
/// it usable as a ground-truth oracle for scores, densities and KL.
class TargetDensity {
 public:
  static TargetDensity gaussian(Vector mean, Vector var);
  static TargetDensity mixture(std::vector<MixtureComponent> components);
  /// Coordinates listed in `gaussian_coords` are N(mean_j, var_j); every other
  /// coordinate j is uniform on [lower_j, upper_j]. All vectors have length dim.
  static TargetDensity gaussian_uniform(std::vector<int> gaussian_coords, Vector mean, Vector var,
                                        Vector lower, Vector upper);

  TargetKind kind() const { return kind_; }
  Index dim() const { return dim_; }

  const Vector& mean() const { return mean_; }
  const Vector& var() const { return var_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  const std::vector<bool>& gaussian_mask() const { return is_gaussian_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  /// Exact first and second moments of q_0 per coordinate.
  Vector moment_mean() const;
  Vector moment_var() const;
  /// M = E ||X_0||^2.
  double second_moment() const;

 private:
  TargetDensity() = default;
  void validate() const;

  TargetKind kind_ = TargetKind::gaussian;
  Index dim_ = 0;
  Vector mean_;
  Vector var_;
  std::vector<MixtureComponent> components_;
  std::vector<bool> is_gaussian_;
  Vector lower_;
  Vector upper_;
};

/// A point together with the VE noise level it is evaluated at.
struct PerturbedQuery {
  Vector x;
  double sigma_t = 0.0;
};

/// n i.i.d. draws from q_0, one per row.
Matrix sample(const TargetDensity& target, Index n, Rng& rng);

/// Draws from q_t: x_0 ~ q_0 plus sigma_t * N(0, I).
Matrix sample_perturbed(const TargetDensity& target, Index n, double sigma_t, Rng& rng);

/// Denoising target -(x_t - x0) / sigma_t^2.
Vector conditional_score(const Vector& x_t, const Vector& x0, double sigma_t);

/// grad_x log q_t(x). sigma_t = 0 evaluates the unsmoothed density.
Vector true_score(const TargetDensity& target, const PerturbedQuery& q);
Vector true_score(const TargetDensity& target, const Vector& x, double sigma_t);

/// Row-wise true_score for an n x d batch sharing one noise level.
Matrix true_score_batch(const TargetDensity& target, const Matrix& x, double sigma_t);

/// Normalized log q_t(x).
double log_density(const TargetDensity& target, const PerturbedQuery& q);
double log_density(const TargetDensity& target, const Vector& x, double sigma_t);

/// KL(N(mean_p, diag var_p) || N(mean_q, diag var_q)) in nats.
double gaussian_kl_diag(const Vector& mean_p, const Vector& var_p, const Vector& mean_q,
                        const Vector& var_q);

/// Fits a diagonal Gaussian to `samples` by moments and returns KL(fit || target).
/// Throws std::invalid_argument unless target is gaussian and n > d;
/// std::domain_error if a fitted variance falls below 1e-12.
double kl_gaussian_moments(const Matrix& samples, const TargetDensity& target);

/// Per-coordinate sample mean and unbiased variance.
void column_moments(const Matrix& samples, Vector& mean, Vector& var);

namespace detail {
/// log Phi(u) for the standard normal CDF, accurate deep into the lower tail.
double log_ndtr(double u);
}  // namespace detail

}  // namespace sparse_score
