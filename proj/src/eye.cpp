#include "sirep/eye.hpp"

#include "sirep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace sirep {

EyeDiagram fold_eye(const Waveform& w) {
  const std::size_t spu = w.samples_per_ui();
  const std::size_t n_ui = w.ui_count();
  EyeDiagram eye;
  eye.ui_ps = w.ui_ps;
  eye.dt_ps = w.dt_ps;
  eye.traces.resize(static_cast<Eigen::Index>(n_ui), static_cast<Eigen::Index>(spu));
  for (std::size_t k = 0; k < n_ui; ++k)
    for (std::size_t j = 0; j < spu; ++j)
      eye.traces(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = w.samples[k * spu + j];
  return eye;
}

nlohmann::json to_json(const WindowFit& fit) {
  return {{"height_mV", 1000.0 * fit.height_v},
          {"width_ps", fit.width_ps},
          {"area_mVps", fit.area_mvps()},
          {"center_time_ps", fit.center_time_ps},
          {"center_voltage_mV", 1000.0 * fit.center_voltage_v}};
}

namespace {

// Calls f(cell, v_start, v_end) for every linear piece of the folded trace.
// Cell j spans [j, j+1] in sample units; the last cell of a row joins the
// first sample of the next row.
template <typename F>
void for_each_segment(const EyeDiagram& eye, F&& f) {
  const Eigen::Index rows = eye.traces.rows();
  const Eigen::Index cols = eye.traces.cols();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c + 1 < cols; ++c) f(c, eye.traces(r, c), eye.traces(r, c + 1));
    if (r + 1 < rows) f(cols - 1, eye.traces(r, cols - 1), eye.traces(r + 1, 0));
  }
}

// Sub-interval of s in [0, 1] where v0 + s (v1 - v0) lies in [lo, hi].
bool band_interval(double v0, double v1, double lo, double hi, double& s_begin, double& s_end) {
  if (v0 == v1) {
    if (v0 < lo || v0 > hi) return false;
    s_begin = 0.0;
    s_end = 1.0;
    return true;
  }
  double a = (lo - v0) / (v1 - v0);
  double b = (hi - v0) / (v1 - v0);
  if (a > b) std::swap(a, b);
  if (b < 0.0 || a > 1.0) return false;
  s_begin = std::max(a, 0.0);
  s_end = std::min(b, 1.0);
  return true;
}

}  // namespace

WindowFit max_window_area(const EyeDiagram& eye, const WindowSearch& search) {
  const Eigen::Index cols = eye.traces.cols();
  WindowFit best;
  best.height_v = search.height_v;
  best.width_ps = -1.0;
  if (cols == 0 || eye.traces.rows() == 0) {
    best.width_ps = 0.0;
    best.center_time_ps = 0.5 * eye.ui_ps;
    return best;
  }
  const double ui_units = eye.ui_ps / eye.dt_ps;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> first_block(static_cast<std::size_t>(cols));
  std::vector<double> last_block(static_cast<std::size_t>(cols));
  std::vector<double> right_min(static_cast<std::size_t>(cols) + 1);
  const Eigen::VectorXd col_max = eye.traces.colwise().maxCoeff();
  const Eigen::VectorXd col_min = eye.traces.colwise().minCoeff();

  for (int vi = -search.voltage_steps; vi <= search.voltage_steps; ++vi) {
    const double vc = vi * search.voltage_step_v;
    const double lo = vc - 0.5 * search.height_v;
    const double hi = vc + 0.5 * search.height_v;
    std::fill(first_block.begin(), first_block.end(), inf);
    std::fill(last_block.begin(), last_block.end(), -inf);
    for_each_segment(eye, [&](Eigen::Index cell, double v0, double v1) {
      double s0, s1;
      if (!band_interval(v0, v1, lo, hi, s0, s1)) return;
      const auto j = static_cast<std::size_t>(cell);
      const double start = static_cast<double>(cell) + s0;
      const double end = static_cast<double>(cell) + s1;
      if (start < first_block[j]) first_block[j] = start;
      if (end > last_block[j]) last_block[j] = end;
    });
    right_min[static_cast<std::size_t>(cols)] = inf;
    for (Eigen::Index j = cols; j-- > 0;) {
      const auto u = static_cast<std::size_t>(j);
      right_min[u] = std::min(right_min[u + 1], first_block[u]);
    }
    double left_max = -inf;
    for (Eigen::Index i = 0; i < cols; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (i > 0) left_max = std::max(left_max, last_block[u - 1]);
      // The window must sit inside the eye: traces pass above and below it.
      if (!(col_max(i) > hi && col_min(i) < lo)) continue;
      const double t = static_cast<double>(i);
      double half = std::min(t, ui_units - t);
      half = std::min(half, right_min[u] - t);
      half = std::min(half, t - left_max);
      half = std::max(half, 0.0);
      const double width = 2.0 * half * eye.dt_ps;
      const double center_t = t * eye.dt_ps;
      bool better = width > best.width_ps;
      if (!better && width == best.width_ps) {
        const double dt_new = std::abs(center_t - 0.5 * eye.ui_ps);
        const double dt_old = std::abs(best.center_time_ps - 0.5 * eye.ui_ps);
        if (dt_new < dt_old) {
          better = true;
        } else if (dt_new == dt_old) {
          const double av = std::abs(vc), ab = std::abs(best.center_voltage_v);
          better = av < ab || (av == ab && vc < best.center_voltage_v);
        }
      }
      if (better) {
        best.width_ps = width;
        best.center_time_ps = center_t;
        best.center_voltage_v = vc;
      }
    }
  }
  if (best.width_ps < 0.0) {
    best.width_ps = 0.0;
    best.center_time_ps = 0.5 * eye.ui_ps;
    best.center_voltage_v = 0.0;
  }
  return best;
}

int label_validity(const EyeDiagram& eye, const WindowSearch& search) {
  return max_window_area(eye, search).width_ps > search.required_width_ps ? 1 : 0;
}

bool rectangle_touches_trace(const EyeDiagram& eye, double t0, double t1, double v0, double v1) {
  bool hit = false;
  for_each_segment(eye, [&](Eigen::Index cell, double a, double b) {
    if (hit) return;
    // Clip the parametric segment against both slabs.
    const double ta = static_cast<double>(cell) * eye.dt_ps;
    double s_lo = 0.0, s_hi = 1.0;
    const double s_t0 = (t0 - ta) / eye.dt_ps;
    const double s_t1 = (t1 - ta) / eye.dt_ps;
    s_lo = std::max(s_lo, s_t0);
    s_hi = std::min(s_hi, s_t1);
    if (s_lo > s_hi) return;
    double b0, b1;
    if (!band_interval(a, b, v0, v1, b0, b1)) return;
    if (std::max(s_lo, b0) <= std::min(s_hi, b1)) hit = true;
  });
  return hit;
}

double vertical_opening(const EyeDiagram& eye) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < eye.traces.cols(); ++c) {
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    bool any_up = false, any_down = false;
    for (Eigen::Index r = 0; r < eye.traces.rows(); ++r) {
      const double v = eye.traces(r, c);
      if (v >= 0.0) {
        upper = std::min(upper, v);
        any_up = true;
      } else {
        lower = std::max(lower, v);
        any_down = true;
      }
    }
    if (!any_up) upper = 0.0;
    if (!any_down) lower = 0.0;
    best = std::max(best, upper - lower);
  }
  return best;
}

std::string render_eye_svg(const EyeDiagram& eye, const WindowFit& fit, const std::string& title) {
  constexpr double kW = 800.0, kH = 500.0, kMargin = 40.0;
  double vmin = -0.1, vmax = 0.1;
  if (eye.traces.size() > 0) {
    vmin = std::min(vmin, eye.traces.minCoeff());
    vmax = std::max(vmax, eye.traces.maxCoeff());
  }
  const double pad = 0.05 * (vmax - vmin);
  vmin -= pad;
  vmax += pad;
  auto x_of = [&](double t) { return kMargin + (kW - 2 * kMargin) * t / eye.ui_ps; };
  auto y_of = [&](double v) { return kMargin + (kH - 2 * kMargin) * (vmax - v) / (vmax - vmin); };

  std::ostringstream svg;
  char buf[64];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, " (window %.1f ps, area %.1f mV*ps)", fit.width_ps, fit.area_mvps());
  svg << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << buf
      << "</text>\n";
  svg << "<g fill=\"none\" stroke=\"steelblue\" stroke-width=\"0.6\" stroke-opacity=\"0.5\">\n";
  for (Eigen::Index r = 0; r < eye.traces.rows(); ++r) {
    svg << "<polyline points=\"";
    for (Eigen::Index c = 0; c < eye.traces.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x_of(static_cast<double>(c) * eye.dt_ps), y_of(eye.traces(r, c)));
      svg << buf;
    }
    if (r + 1 < eye.traces.rows()) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", x_of(eye.ui_ps), y_of(eye.traces(r + 1, 0)));
      svg << buf;
    }
    svg << "\"/>\n";
  }
  svg << "</g>\n";
  if (fit.width_ps > 0.0) {
    const double x0 = x_of(fit.center_time_ps - 0.5 * fit.width_ps);
    const double x1 = x_of(fit.center_time_ps + 0.5 * fit.width_ps);
    const double y0 = y_of(fit.center_voltage_v + 0.5 * fit.height_v);
    const double y1 = y_of(fit.center_voltage_v - 0.5 * fit.height_v);
    std::snprintf(buf, sizeof buf, "%.2f", x0);
    svg << "<rect x=\"" << buf;
    std::snprintf(buf, sizeof buf, "%.2f", y0);
    svg << "\" y=\"" << buf;
    std::snprintf(buf, sizeof buf, "%.2f", x1 - x0);
    svg << "\" width=\"" << buf;
    std::snprintf(buf, sizeof buf, "%.2f", y1 - y0);
    svg << "\" height=\"" << buf << "\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sirep
