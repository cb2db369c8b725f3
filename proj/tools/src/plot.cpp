#include "sparse_score_cli/plot.hpp"

#include "sparse_score_cli/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sparse_score::cli {

namespace {

constexpr double kPanel = 320.0;
constexpr double kMargin = 24.0;
constexpr double kTitle = 22.0;

struct Point2 {
  double u;
  double v;
};

// Cabinet projection: y to the right, x up, z receding at 30 degrees.
Point2 project(double x, double y, double z) {
  const double c = 0.5 * std::cos(std::numbers::pi / 6.0);
  const double s = 0.5 * std::sin(std::numbers::pi / 6.0);
  return {y + c * z, x + s * z};
}

Point2 project_row(const Matrix& m, Index i) {
  const double z = m.cols() > 2 ? m(i, 2) : 0.0;
  return project(m(i, 0), m(i, 1), z);
}

struct Frame {
  double umin = std::numeric_limits<double>::infinity();
  double umax = -std::numeric_limits<double>::infinity();
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();

  void include(Point2 p) {
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) return;
    umin = std::min(umin, p.u);
    umax = std::max(umax, p.u);
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
};

class Panel {
 public:
  Panel(double x0, const Frame& f) : x0_(x0), f_(f) {
    // Equal scaling on both axes so the thin direction stays thin.
    const double span = std::max({f.umax - f.umin, f.vmax - f.vmin, 1e-9});
    scale_ = (kPanel - 2.0 * kMargin) / span;
  }
  double sx(double u) const { return x0_ + kMargin + (u - f_.umin) * scale_; }
  double sy(double v) const { return kTitle + kPanel - kMargin - (v - f_.vmin) * scale_; }

 private:
  double x0_;
  Frame f_;
  double scale_ = 1.0;
};

void axes(std::ostream& out, const Panel& p, const Frame& f) {
  const Point2 o = project(0, 0, 0);
  const double len = 0.25 * std::max(f.umax - f.umin, f.vmax - f.vmin);
  const struct {
    Point2 tip;
    const char* label;
  } ax[] = {{project(len, 0, 0), "x"}, {project(0, len, 0), "y"}, {project(0, 0, len), "z"}};
  for (const auto& a : ax) {
    out << "<line x1='" << p.sx(o.u) << "' y1='" << p.sy(o.v) << "' x2='" << p.sx(a.tip.u) << "' y2='"
        << p.sy(a.tip.v) << "' stroke='#888' stroke-width='1'/>\n";
    out << "<text x='" << p.sx(a.tip.u) + 3 << "' y='" << p.sy(a.tip.v) - 3
        << "' font-size='11' fill='#555'>" << a.label << "</text>\n";
  }
}

void title(std::ostream& out, double x0, const std::string& text) {
  out << "<text x='" << x0 + kPanel / 2.0 << "' y='16' font-size='13' text-anchor='middle'>" << text
      << "</text>\n";
}

void paths(std::ostream& out, const Panel& p, const TrajectoryTensor& t, int max_paths, const char* colour) {
  const Index chains = std::min<Index>(t.chains, max_paths);
  for (Index i = 0; i < chains; ++i) {
    out << "<polyline fill='none' stroke='" << colour << "' stroke-opacity='0.55' stroke-width='0.8' points='";
    for (const Matrix& slice : t.slices) {
      const Point2 q = project_row(slice, i);
      if (!std::isfinite(q.u) || !std::isfinite(q.v)) break;
      out << p.sx(q.u) << ',' << p.sy(q.v) << ' ';
    }
    out << "'/>\n";
    const Point2 end = project_row(t.slices.back(), i);
    out << "<circle cx='" << p.sx(end.u) << "' cy='" << p.sy(end.v) << "' r='1.6' fill='" << colour << "'/>\n";
  }
}

}  // namespace

void plot_toy_svg(const ToyPlotInputs& in, const std::filesystem::path& out_path) {
  const Matrix data = read_csv_matrix(in.data_csv);
  const TrajectoryTensor base = read_trajectories(in.baseline_trajectories);
  const TrajectoryTensor reg = read_trajectories(in.regularized_trajectories);
  if (data.cols() < 2 || base.dim != data.cols() || reg.dim != data.cols()) {
    throw std::invalid_argument("plot: data and trajectories must share a dimension of at least 2");
  }

  // One frame for all panels so they are directly comparable. Paths start far
  // out at sigma_1 scale, so the frame covers the data and the path endpoints.
  Frame f;
  for (Index i = 0; i < data.rows(); ++i) f.include(project_row(data, i));
  for (const TrajectoryTensor* t : {&base, &reg}) {
    const Index chains = std::min<Index>(t->chains, in.max_paths);
    for (const Matrix& slice : t->slices) {
      for (Index i = 0; i < chains; ++i) f.include(project_row(slice, i));
    }
  }

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  const double width = 3.0 * kPanel;
  const double height = kPanel + kTitle;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' viewBox='0 0 " << width << ' ' << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";

  const Panel p0(0.0, f);
  title(svg, 0.0, "data");
  axes(svg, p0, f);
  for (Index i = 0; i < data.rows(); ++i) {
    const Point2 q = project_row(data, i);
    svg << "<circle cx='" << p0.sx(q.u) << "' cy='" << p0.sy(q.v) << "' r='1.2' fill='#1f77b4' fill-opacity='0.5'/>\n";
  }

  const Panel p1(kPanel, f);
  title(svg, kPanel, in.baseline_title);
  axes(svg, p1, f);
  paths(svg, p1, base, in.max_paths, "#d62728");

  const Panel p2(2.0 * kPanel, f);
  title(svg, 2.0 * kPanel, in.regularized_title);
  axes(svg, p2, f);
  paths(svg, p2, reg, in.max_paths, "#2ca02c");

  svg << "</svg>\n";

  std::ofstream out(out_path, std::ios::binary);
  out << svg.str();
  out.close();
  if (!out) throw std::runtime_error("cannot write " + out_path.string());
}

}  // namespace sparse_score::cli
