#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mms/field.hpp"
#include "mms/space.hpp"

namespace mms {

enum class CriticalKernel { CriticalV, Commutator };

/// Restricted double sum of the critical integrand over region x region,
/// diagonal excluded. CriticalV uses |df|^p / (rho^p V(x, rho)), Commutator
/// uses |df|^p / V(x, rho)^2. Returns the raw p-th-power sum.
inline double critical_besov_local(const Space& space, const ScalarField& f, double p,
                                   const std::vector<std::uint32_t>& region,
                                   CriticalKernel kernel = CriticalKernel::CriticalV) {
    check_field(space, f);
    if (!(p >= 1.0)) throw std::invalid_argument("critical_besov_local: p must be >= 1");
    std::vector<char> in_region(space.size(), 0);
    for (std::uint32_t x : region) in_region[x] = 1;
    std::vector<double> row_sum(region.size(), 0.0);
    parallel_for(region.size(), [&](std::size_t ri) {
        std::uint32_t i = region[ri];
        BallIndex bi = space.build_ball_index(i);
        const double* row = space.dist_row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < space.size(); ++j) {
            if (j == i || !in_region[j]) continue;
            double rho = row[j];
            double V = bi.volume(rho);
            double num = space.weight(i) * space.weight(j) * std::pow(std::abs(f[i] - f[j]), p);
            acc += kernel == CriticalKernel::CriticalV ? num / (std::pow(rho, p) * V)
                                                       : num / (V * V);
        }
        row_sum[ri] = acc;
    });
    double total = 0.0;
    for (double v : row_sum) total += v;
    return total;
}

inline double critical_besov_local(const Space& space, const ScalarField& f, double p,
                                   CriticalKernel kernel = CriticalKernel::CriticalV) {
    std::vector<std::uint32_t> all(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    return critical_besov_local(space, f, p, all, kernel);
}

enum class ConstancyVerdict { ConstantCompatible, Divergent, Inconclusive };

inline const char* verdict_name(ConstancyVerdict v) {
    switch (v) {
        case ConstancyVerdict::ConstantCompatible: return "constant-compatible";
        case ConstancyVerdict::Divergent: return "divergent";
        default: return "inconclusive";
    }
}

struct ConstancyTolerances {
    double abs_tol_factor = 1e-12;  // times (data scale)^p
    double slope_tol = 0.1;         // per level, relative to the first-level value
    double r2_min = 0.95;
};

/// Refinement diagnostics: the critical sums a_k across dyadic grid levels,
/// their linear fit in the level index, and the resulting verdict.
struct RefinementVerdict {
    std::vector<int> levels;
    std::vector<double> a;          // critical sums, one per level
    double slope = 0.0;             // fitted d a / d level
    double relative_slope = 0.0;    // slope / a[first]
    double r_squared = 0.0;
    double abs_tol = 0.0;
    ConstancyVerdict verdict = ConstancyVerdict::Inconclusive;
};

namespace detail {
inline void fit_line(const std::vector<int>& xs, const std::vector<double>& ys, double& slope,
                     double& r2) {
    std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    slope = sxy / sxx;
    double ss_res = syy - sxy * sxy / sxx;
    r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
}
}  // namespace detail

/// Computes a_k = critical sum on grid(dim, 2^k) for the sampled rule at each
/// level and classifies: constant-compatible when every a_k sits below the
/// scale-adjusted absolute tolerance, divergent when the per-level growth
/// relative to the first level exceeds slope_tol with fit quality at least
/// r2_min, inconclusive otherwise. Inconclusive is a first-class outcome;
/// a nonconstant field whose critical sum converges lands there.
inline RefinementVerdict detect_constant(
    std::size_t dim, const std::function<ScalarField(const Space&)>& field_rule, double p,
    CriticalKernel kernel, const std::vector<int>& levels, ConstancyTolerances tol = {}) {
    if (levels.size() < 3) throw std::invalid_argument("detect_constant: need at least 3 levels");
    RefinementVerdict out;
    out.levels = levels;
    double data_scale = 0.0;
    for (int k : levels) {
        Space space = generate_grid(dim, std::size_t(1) << k);
        ScalarField f = field_rule(space);
        check_field(space, f);
        double lo = *std::min_element(f.begin(), f.end());
        double hi = *std::max_element(f.begin(), f.end());
        data_scale = std::max(data_scale, hi - lo);
        out.a.push_back(critical_besov_local(space, f, p, kernel));
    }
    out.abs_tol = tol.abs_tol_factor * std::pow(data_scale, p);
    double amax = *std::max_element(out.a.begin(), out.a.end());
    detail::fit_line(out.levels, out.a, out.slope, out.r_squared);
    if (amax <= out.abs_tol) {
        out.verdict = ConstancyVerdict::ConstantCompatible;
        return out;
    }
    out.relative_slope = out.a.front() > 0.0 ? out.slope / out.a.front() : 0.0;
    if (out.relative_slope > tol.slope_tol && out.r_squared >= tol.r2_min)
        out.verdict = ConstancyVerdict::Divergent;
    return out;
}

}  // namespace mms
