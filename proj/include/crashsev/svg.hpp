#pragma once

#include <string>
#include <vector>

#include "crashsev/attribution.hpp"

namespace crashsev::svg {

// Horizontal bar chart of per-feature importance scores, rendered in the
// order given (callers pass features already ranked).
struct BarEntry {
    std::string label;
    double value = 0.0;
};
std::string importance_bars(const std::vector<BarEntry>& entries, const std::string& title);

// One plot row per feature: every instance contributes a dot at x = phi,
// colored by that instance's raw feature value (low -> blue, high -> red,
// scaled per feature over its observed min..max). Vertical jitter inside a
// row is a pure function of (feature, instance) index, so output is stable.
struct DotSeries {
    std::string feature;
    std::vector<double> phi;    // one entry per instance
    std::vector<double> value;  // raw feature values, same length as phi
};
std::string summary_dot_plot(const std::vector<DotSeries>& series, const std::string& title);

// Additive-contribution waterfall for a single prediction: a marker at the
// base value, one arrow per feature (positive pushes red, negative blue),
// and a marker at the resulting model output. The root element carries
// data-base, data-fx and data-sum-phi attributes so the additivity identity
// can be checked from the file alone.
std::string force_plot(const attribution::ForceData& fd, const std::string& title);

}  // namespace crashsev::svg
