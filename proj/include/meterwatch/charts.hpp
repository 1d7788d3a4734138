#pragma once

// Static SVG charts of daily profiles. Every plotted profile is one
// <polyline> whose class names its role ("day", "mean", "anomaly"), so the
// series can be counted without rendering.

#include <cstddef>
#include <span>
#include <string>

#include "meterwatch/pipeline.hpp"

namespace meterwatch::charts {

/// One panel per cluster: member days as thin lines, the centroid thick.
std::string cluster_chart(const pipeline::Analysis& a);

/// One panel per meter with its centroids overlaid.
std::string centroid_chart(std::span<const pipeline::Analysis> meters);

/// One panel per top-ranked day: the day in red over the black centroid it
/// is nearest to.
std::string anomaly_chart(const pipeline::Analysis& a, std::size_t top_n);

}  // namespace meterwatch::charts
