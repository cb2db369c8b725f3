#include "sparse_score/target.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sparse_score {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

double log_normal_pdf(double u) { return -0.5 * u * u - kLogSqrt2Pi; }

double ndtr(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

/// log(Phi(beta) - Phi(alpha)) for alpha < beta, without cancellation in
/// either tail.
double log_ndtr_diff(double alpha, double beta) {
  if (beta <= 0.0) {
    const double lb = detail::log_ndtr(beta);
    const double la = detail::log_ndtr(alpha);
    return lb + std::log1p(-std::exp(la - lb));
  }
  if (alpha >= 0.0) {
    const double la = detail::log_ndtr(-alpha);
    const double lb = detail::log_ndtr(-beta);
    return la + std::log1p(-std::exp(lb - la));
  }
  return std::log1p(-(ndtr(alpha) + ndtr(-beta)));
}

// Uniform[a, b] convolved with N(0, s^2), one coordinate.
double uniform_log_density(double x, double a, double b, double s) {
  if (s == 0.0) {
    return (x >= a && x <= b) ? -std::log(b - a) : -std::numeric_limits<double>::infinity();
  }
  return log_ndtr_diff((a - x) / s, (b - x) / s) - std::log(b - a);
}

double uniform_score(double x, double a, double b, double s) {
  if (s == 0.0) {
    return 0.0;
  }
  const double alpha = (a - x) / s;
  const double beta = (b - x) / s;
  const double log_mass = log_ndtr_diff(alpha, beta);
  return (std::exp(log_normal_pdf(alpha) - log_mass) - std::exp(log_normal_pdf(beta) - log_mass)) / s;
}

double gaussian_log_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

void check_dim(const TargetDensity& target, Index n, const char* what) {
  if (n != target.dim()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(n) + ", target has " +
                                std::to_string(target.dim()) + ")");
  }
}

// Per-component log N(x; mu_k, v_k + s2) + log w_k.
Vector mixture_log_terms(const TargetDensity& target, const Vector& x, double s2) {
  const auto& comps = target.components();
  Vector terms(static_cast<Index>(comps.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    double acc = std::log(comps[k].weight);
    for (Index j = 0; j < x.size(); ++j) {
      acc += gaussian_log_density(x(j), comps[k].mean(j), comps[k].var(j) + s2);
    }
    terms(static_cast<Index>(k)) = acc;
  }
  return terms;
}

}  // namespace

namespace detail {

double log_ndtr(double u) {
  if (u > 0.0) {
    return std::log1p(-0.5 * std::erfc(u / std::numbers::sqrt2));
  }
  if (u > -30.0) {
    return std::log(0.5 * std::erfc(-u / std::numbers::sqrt2));
  }
  // Asymptotic expansion of the Mills ratio; the truncated series is accurate
  // to well below double precision this far out.
  const double inv2 = 1.0 / (u * u);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return log_normal_pdf(u) - std::log(-u) + std::log(series);
}

}  // namespace detail

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::gaussian:
      return "gaussian";
    case TargetKind::gaussian_mixture:
      return "gaussian_mixture";
    case TargetKind::gaussian_uniform_product:
      return "gaussian_uniform_product";
  }
  return "unknown";
}

TargetKind target_kind_from_string(const std::string& name) {
  if (name == "gaussian") return TargetKind::gaussian;
  if (name == "gaussian_mixture") return TargetKind::gaussian_mixture;
  if (name == "gaussian_uniform_product") return TargetKind::gaussian_uniform_product;
  throw std::invalid_argument("unknown target kind '" + name + "'");
}

TargetDensity TargetDensity::gaussian(Vector mean, Vector var) {
  TargetDensity t;
  t.kind_ = TargetKind::gaussian;
  t.dim_ = mean.size();
  t.mean_ = std::move(mean);
  t.var_ = std::move(var);
  t.validate();
  return t;
}

TargetDensity TargetDensity::mixture(std::vector<MixtureComponent> components) {
  TargetDensity t;
  t.kind_ = TargetKind::gaussian_mixture;
  t.dim_ = components.empty() ? 0 : components.front().mean.size();
  t.components_ = std::move(components);
  t.validate();
  return t;
}

TargetDensity TargetDensity::gaussian_uniform(std::vector<int> gaussian_coords, Vector mean,
                                              Vector var, Vector lower, Vector upper) {
  TargetDensity t;
  t.kind_ = TargetKind::gaussian_uniform_product;
  t.dim_ = mean.size();
  t.is_gaussian_.assign(static_cast<std::size_t>(t.dim_), false);
  for (int j : gaussian_coords) {
    if (j < 0 || j >= t.dim_) {
      throw std::invalid_argument("gaussian_uniform: gaussian coordinate " + std::to_string(j) +
                                  " out of range");
    }
    t.is_gaussian_[static_cast<std::size_t>(j)] = true;
  }
  t.mean_ = std::move(mean);
  t.var_ = std::move(var);
  t.lower_ = std::move(lower);
  t.upper_ = std::move(upper);
  t.validate();
  return t;
}

void TargetDensity::validate() const {
  if (dim_ < 1) {
    throw std::invalid_argument("TargetDensity: dimension must be positive");
  }
  switch (kind_) {
    case TargetKind::gaussian:
      if (var_.size() != dim_) throw std::invalid_argument("gaussian: mean/var length mismatch");
      if ((var_.array() <= 0.0).any()) throw std::invalid_argument("gaussian: variances must be > 0");
      break;
    case TargetKind::gaussian_mixture: {
      double total = 0.0;
      for (const auto& c : components_) {
        if (c.mean.size() != dim_ || c.var.size() != dim_) {
          throw std::invalid_argument("mixture: component dimension mismatch");
        }
        if (!(c.weight > 0.0)) throw std::invalid_argument("mixture: weights must be > 0");
        if ((c.var.array() <= 0.0).any()) throw std::invalid_argument("mixture: variances must be > 0");
        total += c.weight;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mixture: weights must sum to 1");
      }
      break;
    }
    case TargetKind::gaussian_uniform_product:
      if (var_.size() != dim_ || lower_.size() != dim_ || upper_.size() != dim_) {
        throw std::invalid_argument("gaussian_uniform: parameter length mismatch");
      }
      for (Index j = 0; j < dim_; ++j) {
        if (is_gaussian_[static_cast<std::size_t>(j)]) {
          if (!(var_(j) > 0.0)) throw std::invalid_argument("gaussian_uniform: variances must be > 0");
        } else if (!(lower_(j) < upper_(j))) {
          throw std::invalid_argument("gaussian_uniform: need lower < upper on uniform coordinates");
        }
      }
      break;
  }
}

Vector TargetDensity::moment_mean() const {
  switch (kind_) {
    case TargetKind::gaussian:
      return mean_;
    case TargetKind::gaussian_mixture: {
      Vector m = Vector::Zero(dim_);
      for (const auto& c : components_) m += c.weight * c.mean;
      return m;
    }
    case TargetKind::gaussian_uniform_product: {
      Vector m(dim_);
      for (Index j = 0; j < dim_; ++j) {
        m(j) = is_gaussian_[static_cast<std::size_t>(j)] ? mean_(j) : 0.5 * (lower_(j) + upper_(j));
      }
      return m;
    }
  }
  return {};
}

Vector TargetDensity::moment_var() const {
  switch (kind_) {
    case TargetKind::gaussian:
      return var_;
    case TargetKind::gaussian_mixture: {
      const Vector m = moment_mean();
      Vector v = Vector::Zero(dim_);
      for (const auto& c : components_) {
        v += c.weight * (c.var.array() + (c.mean - m).array().square()).matrix();
      }
      return v;
    }
    case TargetKind::gaussian_uniform_product: {
      Vector v(dim_);
      for (Index j = 0; j < dim_; ++j) {
        const double w = upper_(j) - lower_(j);
        v(j) = is_gaussian_[static_cast<std::size_t>(j)] ? var_(j) : w * w / 12.0;
      }
      return v;
    }
  }
  return {};
}

double TargetDensity::second_moment() const {
  return moment_var().sum() + moment_mean().squaredNorm();
}

Matrix sample(const TargetDensity& target, Index n, Rng& rng) {
  if (n < 1) {
    throw std::invalid_argument("sample: n must be at least 1");
  }
  const Index d = target.dim();
  Matrix out(n, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (target.kind()) {
    case TargetKind::gaussian: {
      const Vector sd = target.var().array().sqrt();
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) out(i, j) = target.mean()(j) + sd(j) * normal(rng);
      }
      break;
    }
    case TargetKind::gaussian_mixture: {
      const auto& comps = target.components();
      std::vector<double> weights;
      weights.reserve(comps.size());
      for (const auto& c : comps) weights.push_back(c.weight);
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      for (Index i = 0; i < n; ++i) {
        const auto& c = comps[pick(rng)];
        for (Index j = 0; j < d; ++j) out(i, j) = c.mean(j) + std::sqrt(c.var(j)) * normal(rng);
      }
      break;
    }
    case TargetKind::gaussian_uniform_product: {
      const auto& mask = target.gaussian_mask();
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
          if (mask[static_cast<std::size_t>(j)]) {
            out(i, j) = target.mean()(j) + std::sqrt(target.var()(j)) * normal(rng);
          } else {
            const double lo = target.lower()(j);
            out(i, j) = lo + (target.upper()(j) - lo) * uniform01(rng);
          }
        }
      }
      break;
    }
  }
  return out;
}

Matrix sample_perturbed(const TargetDensity& target, Index n, double sigma_t, Rng& rng) {
  Matrix x = sample(target, n, rng);
  x += sigma_t * standard_normal(rng, n, target.dim());
  return x;
}

Vector conditional_score(const Vector& x_t, const Vector& x0, double sigma_t) {
  if (x_t.size() != x0.size()) {
    throw std::invalid_argument("conditional_score: x_t and x0 differ in length");
  }
  if (!(sigma_t > 0.0)) {
    throw std::domain_error("conditional_score: sigma_t must be positive");
  }
  return -(x_t - x0) / (sigma_t * sigma_t);
}

Vector true_score(const TargetDensity& target, const Vector& x, double sigma_t) {
  check_dim(target, x.size(), "true_score");
  if (!(sigma_t >= 0.0)) {
    throw std::domain_error("true_score: sigma_t must be non-negative");
  }
  const double s2 = sigma_t * sigma_t;
  const Index d = target.dim();
  Vector g(d);
  switch (target.kind()) {
    case TargetKind::gaussian:
      g = -((x - target.mean()).array() / (target.var().array() + s2)).matrix();
      break;
    case TargetKind::gaussian_mixture: {
      const Vector terms = mixture_log_terms(target, x, s2);
      const double mx = terms.maxCoeff();
      const Vector resp = (terms.array() - mx).exp().matrix();
      const double norm = resp.sum();
      g.setZero();
      const auto& comps = target.components();
      for (std::size_t k = 0; k < comps.size(); ++k) {
        const double r = resp(static_cast<Index>(k)) / norm;
        g -= r * ((x - comps[k].mean).array() / (comps[k].var.array() + s2)).matrix();
      }
      break;
    }
    case TargetKind::gaussian_uniform_product: {
      const auto& mask = target.gaussian_mask();
      for (Index j = 0; j < d; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
          g(j) = -(x(j) - target.mean()(j)) / (target.var()(j) + s2);
        } else {
          g(j) = uniform_score(x(j), target.lower()(j), target.upper()(j), sigma_t);
        }
      }
      break;
    }
  }
  return g;
}

Vector true_score(const TargetDensity& target, const PerturbedQuery& q) {
  return true_score(target, q.x, q.sigma_t);
}

Matrix true_score_batch(const TargetDensity& target, const Matrix& x, double sigma_t) {
  check_dim(target, x.cols(), "true_score_batch");
  Matrix out(x.rows(), x.cols());
  if (target.kind() == TargetKind::gaussian) {
    const Eigen::RowVectorXd inv = (target.var().array() + sigma_t * sigma_t).inverse().transpose();
    out = -((x.rowwise() - target.mean().transpose()).array().rowwise() * inv.array()).matrix();
    return out;
  }
  for (Index i = 0; i < x.rows(); ++i) {
    out.row(i) = true_score(target, Vector(x.row(i).transpose()), sigma_t).transpose();
  }
  return out;
}

double log_density(const TargetDensity& target, const Vector& x, double sigma_t) {
  check_dim(target, x.size(), "log_density");
  if (!(sigma_t >= 0.0)) {
    throw std::domain_error("log_density: sigma_t must be non-negative");
  }
  const double s2 = sigma_t * sigma_t;
  const Index d = target.dim();
  switch (target.kind()) {
    case TargetKind::gaussian: {
      double acc = 0.0;
      for (Index j = 0; j < d; ++j) acc += gaussian_log_density(x(j), target.mean()(j), target.var()(j) + s2);
      return acc;
    }
    case TargetKind::gaussian_mixture: {
      const Vector terms = mixture_log_terms(target, x, s2);
      const double mx = terms.maxCoeff();
      return mx + std::log((terms.array() - mx).exp().sum());
    }
    case TargetKind::gaussian_uniform_product: {
      const auto& mask = target.gaussian_mask();
      double acc = 0.0;
      for (Index j = 0; j < d; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
          acc += gaussian_log_density(x(j), target.mean()(j), target.var()(j) + s2);
        } else {
          acc += uniform_log_density(x(j), target.lower()(j), target.upper()(j), sigma_t);
        }
      }
      return acc;
    }
  }
  return 0.0;
}

double log_density(const TargetDensity& target, const PerturbedQuery& q) {
  return log_density(target, q.x, q.sigma_t);
}

double gaussian_kl_diag(const Vector& mean_p, const Vector& var_p, const Vector& mean_q,
                        const Vector& var_q) {
  const auto ratio = var_p.array() / var_q.array();
  const auto mean_term = (mean_p - mean_q).array().square() / var_q.array();
  return 0.5 * (ratio + mean_term - 1.0 - ratio.log()).sum();
}

void column_moments(const Matrix& samples, Vector& mean, Vector& var) {
  const double n = static_cast<double>(samples.rows());
  mean = samples.colwise().mean().transpose();
  var = (samples.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / (n - 1.0);
}

double kl_gaussian_moments(const Matrix& samples, const TargetDensity& target) {
  if (target.kind() != TargetKind::gaussian) {
    throw std::invalid_argument("kl_gaussian_moments: target must be gaussian");
  }
  if (samples.cols() != target.dim()) {
    throw std::invalid_argument("kl_gaussian_moments: dimension mismatch");
  }
  if (samples.rows() <= samples.cols()) {
    throw std::invalid_argument("kl_gaussian_moments: need more samples than dimensions");
  }
  Vector mean;
  Vector var;
  column_moments(samples, mean, var);
  if ((var.array() < 1e-12).any()) {
    throw std::domain_error("kl_gaussian_moments: degenerate samples (fitted variance < 1e-12)");
  }
  return std::max(0.0, gaussian_kl_diag(mean, var, target.mean(), target.var()));
}

}  // namespace sparse_score
