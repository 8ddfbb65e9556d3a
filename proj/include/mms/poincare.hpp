#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mms/oscillation.hpp"
#include "mms/rng.hpp"

namespace mms {

struct PoincareBallRatio {
    std::uint32_t center = 0;
    double radius = 0.0;
    double ratio = 0.0;
    std::string field;
};

/// Best-constant evidence for the (1,p) ball inequality. c_hat is a max over
/// sampled configurations, hence a lower estimate of the true constant; balls
/// with a vanishing right-hand side and nonvanishing left-hand side are
/// flagged, never dropped.
struct PoincareReport {
    double p = 2.0;
    double lambda = 1.0;
    int window = 3;
    double c_hat = 0.0;
    long infinite_flags = 0;
    long evaluated = 0;
    std::vector<PoincareBallRatio> worst;  // per-field argmax
};

/// ratio = m_f(z,r) / [ r (avg of lip_hat^p over B(z, lambda r))^(1/p) ] per
/// sampled ball and test field. Radii run over the actual breakpoints of each
/// sampled center so every average is exact.
inline PoincareReport poincare_sweep(const Space& space,
                                     const std::vector<std::pair<std::string, ScalarField>>& fields,
                                     double p, double lambda, std::size_t center_samples,
                                     std::uint64_t seed, int window = 3) {
    if (fields.empty()) throw std::invalid_argument("poincare_sweep: empty test family");
    if (!(lambda >= 1.0)) throw std::invalid_argument("poincare_sweep: lambda must be >= 1");
    PoincareReport rep;
    rep.p = p;
    rep.lambda = lambda;
    rep.window = window;
    std::size_t n = space.size();
    std::vector<std::uint32_t> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(centers);
    if (centers.size() > center_samples) centers.resize(center_samples);

    for (const auto& [fname, f] : fields) {
        check_field(space, f);
        ScalarField lip = lip_hat_field(space, f, window);
        ScalarField lip_p(n);
        for (std::size_t i = 0; i < n; ++i) lip_p[i] = std::pow(lip[i], p);
        PoincareBallRatio worst;
        worst.field = fname;
        for (std::uint32_t z : centers) {
            const BallIndex& bi = space.ball_index(z);
            // prefix sums of w and w lip^p in distance order from z
            std::size_t m = bi.radii.size();
            std::vector<double> wsum(n), fsum(n), lsum(n);
            double W = 0.0, F = 0.0, LP = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                std::uint32_t y = bi.order[k];
                W += space.weight(y);
                F += space.weight(y) * f[y];
                LP += space.weight(y) * lip_p[y];
                wsum[k] = W;
                fsum[k] = F;
                lsum[k] = LP;
            }
            for (std::size_t k = 0; k < m; ++k) {
                double r = bi.radii[k];
                std::uint32_t cnt = bi.count_prefix[k];
                double Wb = wsum[cnt - 1];
                double avg = fsum[cnt - 1] / Wb;
                double lhs = 0.0;
                for (std::uint32_t idx = 0; idx < cnt; ++idx)
                    lhs += space.weight(bi.order[idx]) * std::abs(f[bi.order[idx]] - avg);
                lhs /= Wb;
                std::uint32_t cnt_l = bi.count_at(bi.level_of(lambda * r));
                double rhs = r * std::pow(lsum[cnt_l - 1] / wsum[cnt_l - 1], 1.0 / p);
                ++rep.evaluated;
                if (rhs == 0.0) {
                    if (lhs > 0.0) ++rep.infinite_flags;
                    continue;
                }
                double ratio = lhs / rhs;
                if (ratio > rep.c_hat) rep.c_hat = ratio;
                if (ratio > worst.ratio) worst = {z, r, ratio, fname};
            }
        }
        rep.worst.push_back(worst);
    }
    return rep;
}

/// Macroscopic comparison: oscillation at scale s against averaged
/// oscillations at a smaller scale r over the lambda~-dilated ball.
/// ratio = m_f(z,s) / [ (s/r) (avg_{B(z, lambda~ s)} m_f(., r)^p)^(1/p) ].
/// A vanishing right side with a positive left side returns +inf (flagged by
/// the sweep); this only happens when r resolves no structure inside the
/// dilated ball.
inline double macro_poincare(const Space& space, const ScalarField& f,
                             const std::vector<double>& m_f_at_r, std::size_t z, double s, double r,
                             double lambda_tilde, double p) {
    if (!(r > 0.0 && r < s)) throw std::invalid_argument("macro_poincare: need 0 < r < s");
    if (!(lambda_tilde >= 2.0)) throw std::invalid_argument("macro_poincare: lambda~ must be >= 2");
    double lhs = mean_oscillation(space, f, z, s);
    const BallIndex& bi = space.ball_index(z);
    int level = bi.level_of(lambda_tilde * s);
    std::uint32_t cnt = bi.count_at(level);
    double S = 0.0;
    for (std::uint32_t k = 0; k < cnt; ++k)
        S += space.weight(bi.order[k]) * std::pow(m_f_at_r[bi.order[k]], p);
    double rhs = (s / r) * std::pow(S / bi.mass_at(level), 1.0 / p);
    if (rhs == 0.0) return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return lhs / rhs;
}

inline double macro_poincare(const Space& space, const ScalarField& f, std::size_t z, double s,
                             double r, double lambda_tilde = 2.0, double p = 2.0) {
    check_field(space, f);
    std::vector<double> mfr(space.size());
    parallel_for(space.size(), [&](std::size_t x) { mfr[x] = mean_oscillation(space, f, x, r); });
    return macro_poincare(space, f, mfr, z, s, r, lambda_tilde, p);
}

struct MacroSweepEntry {
    double s = 0.0, r = 0.0;
    double max_ratio = 0.0;
    long flags = 0;
};

struct MacroSweepReport {
    double p = 2.0;
    double lambda_tilde = 2.0;
    double max_ratio = 0.0;
    long infinite_flags = 0;
    std::vector<MacroSweepEntry> entries;
};

/// Sweep over a log grid of scale pairs (s, r) with s/r in scale_ratios and
/// sampled centers.
inline MacroSweepReport macro_sweep(const Space& space, const ScalarField& f,
                                    const std::vector<double>& scale_ratios,
                                    std::size_t center_samples, std::uint64_t seed,
                                    double lambda_tilde = 2.0, double p = 2.0,
                                    std::size_t s_steps = 4) {
    check_field(space, f);
    MacroSweepReport rep;
    rep.p = p;
    rep.lambda_tilde = lambda_tilde;
    std::size_t n = space.size();
    std::vector<std::uint32_t> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(centers);
    if (centers.size() > center_samples) centers.resize(center_samples);
    double s_max = space.diameter() / lambda_tilde;
    for (double ratio : scale_ratios) {
        double r_min = space.min_gap();
        double s_lo = std::max(ratio * r_min, s_max / std::pow(2.0, double(s_steps - 1)));
        for (std::size_t step = 0; step < s_steps; ++step) {
            double s = s_lo * std::pow(s_max / s_lo, s_steps == 1 ? 0.0
                                                                  : double(step) / double(s_steps - 1));
            double r = s / ratio;
            if (!(r > 0.0 && r < s) || r < r_min) continue;
            std::vector<double> mfr(n);
            parallel_for(n, [&](std::size_t x) { mfr[x] = mean_oscillation(space, f, x, r); });
            MacroSweepEntry e;
            e.s = s;
            e.r = r;
            for (std::uint32_t z : centers) {
                double q = macro_poincare(space, f, mfr, z, s, r, lambda_tilde, p);
                if (std::isinf(q)) {
                    ++e.flags;
                    ++rep.infinite_flags;
                } else {
                    e.max_ratio = std::max(e.max_ratio, q);
                }
            }
            rep.max_ratio = std::max(rep.max_ratio, e.max_ratio);
            rep.entries.push_back(e);
        }
    }
    return rep;
}

}  // namespace mms
