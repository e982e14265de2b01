#include "crashsev/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crashsev/errors.hpp"

namespace crashsev::simplexmap {

namespace {

SimplexOutput softmax_exact(std::span<const double> z) {
    SimplexOutput out;
    out.probabilities.resize(z.size());
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.probabilities[i] = std::exp(z[i] - mx);
        sum += out.probabilities[i];
    }
    out.support.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.probabilities[i] /= sum;
        out.support[i] = i;
    }
    return out;
}

void check_input(std::span<const double> z) {
    if (z.empty()) throw ContractError("simplex mapping: empty input vector");
    for (double v : z)
        if (!std::isfinite(v)) throw ContractError("simplex mapping: non-finite input");
}

}  // namespace

SimplexOutput sparsemax(std::span<const double> z) {
    check_input(z);
    const std::size_t n = z.size();
    if (n == 2) {
        // closed form; evaluated literally so 2-D results are reproducible
        // bit for bit against the formula
        const double p0 = std::clamp((z[0] - z[1] + 1.0) / 2.0, 0.0, 1.0);
        SimplexOutput out;
        out.probabilities = {p0, 1.0 - p0};
        for (std::size_t i = 0; i < 2; ++i)
            if (out.probabilities[i] > 0.0) out.support.push_back(i);
        return out;
    }
    // The mapping is translation invariant; shifting by max(z) pins the top
    // entry to 0 so the +1 in the support test cannot be rounded away when
    // the inputs are astronomically large.
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    std::vector<double> zs(n);
    for (std::size_t i = 0; i < n; ++i) zs[i] = z[i] - zmax;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (zs[a] != zs[b]) return zs[a] > zs[b];
        return a < b;
    });

    // largest k with 1 + k*z_(k) > cumulative sum of the top k entries;
    // the valid k form a prefix, so the last hit wins
    double cumsum = 0.0;
    double tau = 0.0;
    std::size_t k_support = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double zk = zs[order[k - 1]];
        cumsum += zk;
        if (1.0 + static_cast<double>(k) * zk > cumsum) {
            k_support = k;
            tau = (cumsum - 1.0) / static_cast<double>(k);
        }
    }

    SimplexOutput out;
    out.probabilities.assign(n, 0.0);
    for (std::size_t r = 0; r < k_support; ++r) {
        const std::size_t i = order[r];
        out.probabilities[i] = std::max(0.0, zs[i] - tau);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (out.probabilities[i] > 0.0) out.support.push_back(i);
    return out;
}

std::vector<double> sparsemax_backward(const SimplexOutput& output,
                                       std::span<const double> upstream) {
    return entmax_backward(output, upstream, 2.0);
}

SimplexOutput entmax(std::span<const double> z, double alpha) {
    check_input(z);
    if (alpha < 1.0 || alpha > 2.0)
        throw ContractError("entmax: alpha must be in [1, 2]");
    if (alpha == 1.0) return softmax_exact(z);
    if (alpha == 2.0) return sparsemax(z);

    const std::size_t n = z.size();
    const double am1 = alpha - 1.0;
    const double inv_am1 = 1.0 / am1;

    // p_i = [t_i - tau]_+^(1/(alpha-1)) with t_i = (alpha-1) z_i, shifted so
    // max(t) = 0 (translation invariance; keeps the unit bracket below from
    // collapsing at large magnitudes). sum(p) is decreasing in tau; it is 0
    // at tau = 0 and >= 1 at tau = -1, so bisect in between.
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = am1 * (z[i] - zmax);
    double lo = -1.0, hi = 0.0;
    auto mass = [&](double tau) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = t[i] - tau;
            if (d > 0.0) s += std::pow(d, inv_am1);
        }
        return s;
    };
    // fixed iteration count: bracket width 1 halved 64 times is far below the
    // 1e-12 tolerance on tau, and the loop stays bit-deterministic
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass(mid) >= 1.0)
            lo = mid;
        else
            hi = mid;
    }
    const double tau = lo;

    SimplexOutput out;
    out.probabilities.assign(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = t[i] - tau;
        if (d > 0.0) {
            out.probabilities[i] = std::pow(d, inv_am1);
            sum += out.probabilities[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.probabilities[i] /= sum;
        if (out.probabilities[i] > 0.0) out.support.push_back(i);
    }
    return out;
}

std::vector<double> entmax_backward(const SimplexOutput& output,
                                    std::span<const double> upstream, double alpha) {
    const std::size_t n = output.probabilities.size();
    if (upstream.size() != n) throw ShapeError("entmax_backward: upstream size mismatch");
    std::vector<double> s(n, 0.0);
    double s_sum = 0.0, sv_sum = 0.0;
    for (std::size_t i : output.support) {
        const double p = output.probabilities[i];
        s[i] = alpha == 2.0 ? 1.0 : std::pow(p, 2.0 - alpha);
        s_sum += s[i];
        sv_sum += s[i] * upstream[i];
    }
    std::vector<double> g(n, 0.0);
    if (s_sum <= 0.0) return g;
    const double mean = sv_sum / s_sum;
    for (std::size_t i : output.support) g[i] = s[i] * (upstream[i] - mean);
    return g;
}

}  // namespace crashsev::simplexmap
