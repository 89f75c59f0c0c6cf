#pragma once

#include "sirep/waveform.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>

namespace sirep {

/// One row per UI. Consecutive rows are consecutive UIs of the same trace, so
/// the last sample of row k connects to the first sample of row k+1.
struct EyeDiagram {
  Eigen::MatrixXd traces;
  double ui_ps = 100.0;
  double dt_ps = 1.0;

  std::size_t rows() const { return static_cast<std::size_t>(traces.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(traces.cols()); }
};

EyeDiagram fold_eye(const Waveform& w);

/// Window of fixed height. The open rectangle
/// (center_time +- width/2) x (center_voltage +- height/2) touches no trace.
struct WindowFit {
  double height_v = 0.080;
  double width_ps = 0.0;
  double center_time_ps = 0.0;
  double center_voltage_v = 0.0;

  double area_vps() const { return height_v * width_ps; }
  double area_mvps() const { return 1000.0 * height_v * width_ps; }
};

nlohmann::json to_json(const WindowFit& fit);

/// Placement grid and labeling threshold for the window search. A placement
/// counts only when, at its center time, some trace lies above the window and
/// some below it.
struct WindowSearch {
  double height_v = 0.080;
  double required_width_ps = 35.0;
  int voltage_steps = 250;       // centers at i * voltage_step_v for |i| <= voltage_steps
  double voltage_step_v = 0.001;
  // Center times are the sample instants 0, dt, ..., ui - dt. The window must
  // stay inside [0, ui].
};

/// Widest window over the placement grid. Ties prefer the center time closest
/// to ui/2, then the smallest |center voltage|, then the lower voltage.
WindowFit max_window_area(const EyeDiagram& eye, const WindowSearch& search = {});

/// 1 when a window of the required width fits without touching any trace.
int label_validity(const EyeDiagram& eye, const WindowSearch& search = {});

/// Exhaustive check of every piecewise-linear trace segment against the closed
/// rectangle [t0, t1] x [v0, v1].
bool rectangle_touches_trace(const EyeDiagram& eye, double t0, double t1, double v0, double v1);

/// Largest vertical gap around 0 V over all sample instants: min of the
/// positive trace values minus max of the negative ones, maximized over time.
double vertical_opening(const EyeDiagram& eye);

/// Standalone SVG: every trace as a polyline plus the fitted window in red.
std::string render_eye_svg(const EyeDiagram& eye, const WindowFit& fit, const std::string& title);

}  // namespace sirep
