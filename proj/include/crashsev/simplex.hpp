#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crashsev::simplexmap {

// A point on the probability simplex plus the indices carrying mass.
struct SimplexOutput {
    std::vector<double> probabilities;
    std::vector<std::size_t> support;  // indices with probability > 0
};

// Euclidean projection of z onto the probability simplex (sort-and-threshold).
// Sorting ties break by index, so the result is deterministic.
SimplexOutput sparsemax(std::span<const double> z);

// Gradient of sparsemax: on the support, upstream minus the support mean;
// zero off the support.
std::vector<double> sparsemax_backward(const SimplexOutput& output,
                                       std::span<const double> upstream);

// alpha-entmax for alpha in [1, 2]. alpha = 1 is softmax, alpha = 2 is
// sparsemax (exact sort-based path); anything in between solves
// p_i = [(alpha-1) z_i - tau]_+^(1/(alpha-1)) by bisection on tau.
SimplexOutput entmax(std::span<const double> z, double alpha);

// Closed-form Jacobian-vector product on the support:
//   g = s .* (v - <s, v>/sum(s))   with s_i = p_i^(2 - alpha).
std::vector<double> entmax_backward(const SimplexOutput& output,
                                    std::span<const double> upstream, double alpha);

}  // namespace crashsev::simplexmap
