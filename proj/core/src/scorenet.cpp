#include "sparse_score/scorenet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sparse_score {

void Architecture::validate() const {
  if (dim < 1) throw std::invalid_argument("Architecture: dim must be positive");
  if (time_feat_dim < 2 || time_feat_dim % 2 != 0) {
    throw std::invalid_argument("Architecture: time_feat_dim must be even and >= 2");
  }
  for (Index h : hidden) {
    if (h < 1) throw std::invalid_argument("Architecture: hidden widths must be positive");
  }
}

void ScoreModel::build_layout() {
  shapes_.clear();
  offsets_.clear();
  Index in = arch_.input_dim();
  Index offset = 0;
  auto add = [&](Index out) {
    shapes_.emplace_back(out, in);
    offsets_.push_back(offset);
    offset += out * in + out;
    in = out;
  };
  for (Index h : arch_.hidden) add(h);
  add(arch_.dim);
  if (theta_.size() != offset) theta_ = Vector::Zero(offset);
}

ScoreModel ScoreModel::init(const Architecture& arch, std::uint64_t seed, double kappa,
                            Constraints constraints) {
  arch.validate();
  ScoreModel m;
  m.arch_ = arch;
  m.constraints_ = constraints;
  m.build_layout();
  m.set_kappa(kappa);

  Rng rng = make_stream(seed, 0x11a7);
  for (std::size_t k = 0; k < m.layer_count(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_in(k)));
    std::uniform_real_distribution<double> u(-bound, bound);
    const Index begin = m.weight_offset(k);
    const Index end = m.bias_offset(k) + m.layer_out(k);
    for (Index i = begin; i < end; ++i) m.theta_(i) = u(rng);
  }
  Rng freq_rng = make_stream(seed, 0xf0e1);
  m.freqs_ = draw_fourier_frequencies(arch.time_feat_dim, arch.fourier_scale, freq_rng);
  return m;
}

ScoreModel ScoreModel::from_parts(const Architecture& arch, Vector theta, Vector frequencies,
                                  double kappa, Constraints constraints) {
  arch.validate();
  ScoreModel m;
  m.arch_ = arch;
  m.constraints_ = constraints;
  m.theta_ = std::move(theta);
  const Index expected = [&] {
    Index in = arch.input_dim();
    Index total = 0;
    for (Index h : arch.hidden) {
      total += h * in + h;
      in = h;
    }
    return total + arch.dim * in + arch.dim;
  }();
  if (m.theta_.size() != expected) {
    throw std::invalid_argument("ScoreModel: theta has " + std::to_string(m.theta_.size()) +
                                " entries, architecture needs " + std::to_string(expected));
  }
  if (frequencies.size() * 2 != arch.time_feat_dim) {
    throw std::invalid_argument("ScoreModel: frequency count does not match time_feat_dim");
  }
  m.freqs_ = std::move(frequencies);
  m.build_layout();
  m.set_kappa(kappa);
  return m;
}

void ScoreModel::set_kappa(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("ScoreModel: kappa must be positive");
  kappa_ = kappa;
}

Eigen::Map<const Matrix> ScoreModel::weight(std::size_t k) const {
  return {theta_.data() + weight_offset(k), layer_out(k), layer_in(k)};
}

Eigen::Map<const Vector> ScoreModel::bias(std::size_t k) const {
  return {theta_.data() + bias_offset(k), layer_out(k)};
}

GradientBundle& GradientBundle::operator+=(const GradientBundle& other) {
  if (d_theta.size() == 0) {
    d_theta = other.d_theta;
  } else {
    d_theta += other.d_theta;
  }
  d_kappa += other.d_kappa;
  return *this;
}

GradientBundle& GradientBundle::operator*=(double factor) {
  d_theta *= factor;
  d_kappa *= factor;
  return *this;
}

Vector draw_fourier_frequencies(Index width, double scale, Rng& rng) {
  if (width < 2 || width % 2 != 0) {
    throw std::invalid_argument("fourier features: width must be even and >= 2");
  }
  std::normal_distribution<double> normal(0.0, scale);
  Vector f(width / 2);
  for (Index k = 0; k < f.size(); ++k) f(k) = normal(rng);
  return f;
}

Vector fourier_features(double t, const Vector& frequencies) {
  const Index half = frequencies.size();
  Vector out(2 * half);
  for (Index k = 0; k < half; ++k) {
    const double angle = 2.0 * std::numbers::pi * frequencies(k) * t;
    out(k) = std::sin(angle);
    out(half + k) = std::cos(angle);
  }
  return out;
}

namespace {

Matrix forward_columns(const ScoreModel& model, Matrix input, ForwardCache* cache) {
  const std::size_t layers = model.layer_count();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.activations.clear();
  c.preacts.clear();
  c.activations.reserve(layers);
  c.preacts.reserve(layers - 1);
  c.activations.push_back(std::move(input));

  for (std::size_t k = 0; k + 1 < layers; ++k) {
    Matrix pre = model.weight(k) * c.activations.back();
    pre.colwise() += model.bias(k);
    c.activations.push_back(pre.cwiseMax(0.0));
    c.preacts.push_back(std::move(pre));
  }
  c.raw = model.weight(layers - 1) * c.activations.back();
  c.raw.colwise() += model.bias(layers - 1);

  c.cap_l1 = c.raw.cwiseAbs().colwise().sum().transpose();
  c.out = c.raw;
  const Constraints& cons = model.constraints();
  if (cons.output_cap) {
    for (Index i = 0; i < c.out.cols(); ++i) {
      const double divisor = std::max(1.0, c.cap_l1(i) / cons.output_l1_cap);
      if (divisor > 1.0) c.out.col(i) /= divisor;
    }
  }
  return c.out.transpose();
}

Matrix build_input(const ScoreModel& model, const Matrix& x, const std::function<double(Index)>& time) {
  if (x.cols() != model.dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, model dimension is " + std::to_string(model.dim()));
  }
  const Index d = model.dim();
  Matrix input(model.architecture().input_dim(), x.rows());
  input.topRows(d) = x.transpose();
  for (Index i = 0; i < x.rows(); ++i) {
    input.col(i).tail(model.frequencies().size() * 2) = fourier_features(time(i), model.frequencies());
  }
  return input;
}

}  // namespace

Matrix forward_batch(const ScoreModel& model, const Matrix& x, const Vector& t, ForwardCache* cache) {
  if (t.size() != x.rows()) {
    throw std::invalid_argument("forward_batch: need one time per row");
  }
  return forward_columns(model, build_input(model, x, [&](Index i) { return t(i); }), cache);
}

Matrix forward_batch(const ScoreModel& model, const Matrix& x, double t, ForwardCache* cache) {
  // Features are identical across rows; compute them once.
  if (x.cols() != model.dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, model dimension is " + std::to_string(model.dim()));
  }
  Matrix input(model.architecture().input_dim(), x.rows());
  input.topRows(model.dim()) = x.transpose();
  const Vector feats = fourier_features(t, model.frequencies());
  input.bottomRows(feats.size()).colwise() = feats;
  return forward_columns(model, std::move(input), cache);
}

Vector forward(const ScoreModel& model, const Vector& x, double t) {
  if (x.size() != model.dim()) {
    throw std::invalid_argument("forward: point has length " + std::to_string(x.size()) +
                                ", model dimension is " + std::to_string(model.dim()));
  }
  Matrix row = x.transpose();
  return forward_batch(model, row, t).row(0).transpose();
}

GradientBundle backward_batch(const ScoreModel& model, const ForwardCache& cache,
                              const Matrix& upstream) {
  if (upstream.rows() != cache.out.cols() || upstream.cols() != model.dim()) {
    throw std::invalid_argument("backward: upstream shape does not match the forward batch");
  }
  const double kappa = model.kappa();
  const Matrix up = upstream.transpose();  // d x n

  GradientBundle g;
  g.d_kappa = up.cwiseProduct(cache.out).sum();
  g.d_theta = Vector::Zero(model.param_count());

  // Gradient w.r.t. the capped output, then through the cap onto the raw output.
  Matrix grad = kappa * up;
  const Constraints& cons = model.constraints();
  if (cons.output_cap) {
    for (Index i = 0; i < grad.cols(); ++i) {
      const double l1 = cache.cap_l1(i);
      if (l1 <= cons.output_l1_cap) continue;
      const auto y = cache.raw.col(i);
      const double inner = grad.col(i).dot(y);
      const Vector sign = y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
      grad.col(i) = (cons.output_l1_cap / l1) * (grad.col(i) - sign * (inner / l1));
    }
  }

  for (std::size_t k = model.layer_count(); k-- > 0;) {
    const Matrix& in = cache.activations[k];
    Eigen::Map<Matrix> dW(g.d_theta.data() + model.weight_offset(k), model.layer_out(k), model.layer_in(k));
    Eigen::Map<Vector> db(g.d_theta.data() + model.bias_offset(k), model.layer_out(k));
    dW.noalias() = grad * in.transpose();
    db = grad.rowwise().sum();
    if (k == 0) break;
    Matrix back = model.weight(k).transpose() * grad;
    // ReLU subgradient is 0 at the kink.
    grad = back.cwiseProduct((cache.preacts[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

GradientBundle backward(const ScoreModel& model, const Vector& x, double t, const Vector& upstream) {
  if (upstream.size() != model.dim()) {
    throw std::invalid_argument("backward: upstream length does not match model dimension");
  }
  ForwardCache cache;
  Matrix row = x.transpose();
  forward_batch(model, row, t, &cache);
  return backward_batch(model, cache, upstream.transpose());
}

double l1_norm(const Vector& v) { return v.cwiseAbs().sum(); }

Vector project_l1(const Vector& theta, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_l1: radius must be positive");
  if (l1_norm(theta) <= radius) return theta;

  std::vector<double> mags(static_cast<std::size_t>(theta.size()));
  for (Index i = 0; i < theta.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(theta(i));
  std::sort(mags.begin(), mags.end(), std::greater<>());

  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumsum += mags[j];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (mags[j] - candidate > 0.0) {
      tau = candidate;
    } else {
      break;
    }
  }
  Vector out(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    const double shrunk = std::abs(theta(i)) - tau;
    out(i) = shrunk > 0.0 ? std::copysign(shrunk, theta(i)) : 0.0;
  }
  // Rounding in the threshold can leave the norm a few ulps above the radius.
  const double norm = l1_norm(out);
  if (norm > radius) out *= radius / norm;
  return out;
}

}  // namespace sparse_score
