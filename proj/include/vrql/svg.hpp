#pragma once

#include <string>
#include <vector>

#include "vrql/experiment.hpp"
#include "vrql/solver.hpp"

namespace vrql {

struct PlotStyle {
  int width = 800;
  int height = 560;
  std::string title;
};

// Standalone SVG 1.1 scatter of log error against log discount complexity:
// per-trial points, per-gamma means, the OLS fit line, and dashed reference
// lines of slope -lambda and slope 0 anchored at the mean-point centroid.
// Byte-deterministic for fixed input. Fit and reference lines appear only
// with at least two distinct gamma values.
std::string render_scaling_svg(const std::vector<ExperimentRow>& rows, double lambda,
                               const PlotStyle& style = {});

// Standalone SVG 1.1 staircase of error (log scale) against samples consumed,
// with epoch boundaries marked. Byte-deterministic for fixed input.
std::string render_trace_svg(const RunRecord& record, const PlotStyle& style = {});

}  // namespace vrql
