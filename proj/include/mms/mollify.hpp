#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mms/norms.hpp"
#include "mms/oscillation.hpp"

namespace mms {

/// Greedy maximal t-separated set, scanning points in index order: a point is
/// accepted iff it is at distance >= t from every center accepted so far.
/// Maximality means every point lies within t of some center.
inline std::vector<std::uint32_t> t_net(const Space& space, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("t_net: t must be positive");
    std::vector<std::uint32_t> centers;
    for (std::size_t i = 0; i < space.size(); ++i) {
        const double* row = space.dist_row(i);
        bool ok = true;
        for (std::uint32_t c : centers)
            if (row[c] < t) {
                ok = false;
                break;
            }
        if (ok) centers.push_back(static_cast<std::uint32_t>(i));
    }
    return centers;
}

/// Lipschitz partition of unity at scale t: piecewise-linear bumps
/// phi~_i(x) = clamp((1 + gamma - rho(x, x_i)/t) / gamma, 0, 1), normalized.
/// phi~_i = 1 inside B(x_i, t) and 0 outside B(x_i, (1+gamma)t); net
/// maximality keeps the normalizing denominator >= 1 everywhere.
struct Partition {
    double t = 0.0;
    double gamma = 1.0;
    std::vector<std::uint32_t> centers;
    // sparse rows: phi[i] lists (point, value) with value > 0
    std::vector<std::vector<std::pair<std::uint32_t, double>>> phi;

    /// measured sup_i max_{x != y} |phi_i(x) - phi_i(y)| / rho(x,y), times t
    double lipschitz_constant_times_t(const Space& space) const {
        double worst = 0.0;
        std::size_t n = space.size();
        std::vector<double> dense(n);
        for (std::size_t ci = 0; ci < centers.size(); ++ci) {
            std::fill(dense.begin(), dense.end(), 0.0);
            for (auto [x, v] : phi[ci]) dense[x] = v;
            for (std::size_t x = 0; x < n; ++x) {
                const double* row = space.dist_row(x);
                for (std::size_t y = x + 1; y < n; ++y) {
                    double d = std::abs(dense[x] - dense[y]);
                    if (d > 0.0) worst = std::max(worst, d / row[y]);
                }
            }
        }
        return worst * t;
    }
};

inline Partition partition(const Space& space, double t, double gamma = 1.0) {
    if (!(t > 0.0)) throw std::invalid_argument("partition: t must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("partition: gamma must be positive");
    Partition part;
    part.t = t;
    part.gamma = gamma;
    part.centers = t_net(space, t);
    std::size_t n = space.size();
    std::vector<double> denom(n, 0.0);
    std::vector<std::vector<std::pair<std::uint32_t, double>>> raw(part.centers.size());
    for (std::size_t ci = 0; ci < part.centers.size(); ++ci) {
        const double* row = space.dist_row(part.centers[ci]);
        for (std::size_t x = 0; x < n; ++x) {
            double v = (1.0 + gamma - row[x] / t) / gamma;
            v = std::clamp(v, 0.0, 1.0);
            if (v > 0.0) {
                raw[ci].push_back({static_cast<std::uint32_t>(x), v});
                denom[x] += v;
            }
        }
    }
    for (double d : denom)
        if (!(d >= 1.0 - 1e-12))
            throw std::logic_error("partition: normalizing denominator below 1 despite net maximality");
    part.phi.resize(raw.size());
    for (std::size_t ci = 0; ci < raw.size(); ++ci) {
        part.phi[ci].reserve(raw[ci].size());
        for (auto [x, v] : raw[ci]) part.phi[ci].push_back({x, v / denom[x]});
    }
    return part;
}

/// Phi_t f(x) = sum_i phi_i(x) <f>_{B(x_i, t)}: a convex combination of ball
/// averages, linear in f, constant-preserving, sup-norm contracting.
inline ScalarField mollify(const Space& space, const ScalarField& f, const Partition& part) {
    check_field(space, f);
    ScalarField out(space.size(), 0.0);
    for (std::size_t ci = 0; ci < part.centers.size(); ++ci) {
        double avg = ball_average(space, f, part.centers[ci], part.t);
        for (auto [x, v] : part.phi[ci]) out[x] += v * avg;
    }
    return out;
}

inline ScalarField mollify(const Space& space, const ScalarField& f, double t, double gamma = 1.0) {
    return mollify(space, f, partition(space, t, gamma));
}

/// Empirical ratio statistics for the mollifier comparison lemmas. Pairs and
/// scales where both sides vanish are skipped; a vanishing denominator with a
/// nonvanishing numerator is counted separately and never dropped silently.
struct MollifierBounds {
    double t = 0.0, gamma = 1.0;
    double a = 2.0;      // close-pair threshold rho <= a t
    double b = 0.0;      // oscillation scale in (a): b = 1 + gamma + 2a
    double c = 0.0;      // oscillation scale in (b): c = max(1 + b, 3 + 2 gamma)
    double ratio_pointwise = 0.0;   // (a) |dPhi f| t / (rho m_f(x, b t))
    double ratio_oscillation = 0.0; // (b) m_{Phi f}(z,r) t / (min(r,t) m_f(z, c max(r,t)))
    double ratio_averaged = 0.0;    // (c) m_{Phi f}(z,r) vs averaged m_f(.,r)^p
    double ratio_weak_norm = 0.0;   // (d) |m_{Phi f}|_{L^{p,inf}} / |m_f|_{L^{p,inf}}
    long skipped_zero_zero = 0;
    long flagged_zero_denominator = 0;
};

inline MollifierBounds verify_mollifier_bounds(const Space& space, const ScalarField& f, double t,
                                               double gamma, const std::vector<double>& r_grid,
                                               double p = 2.0) {
    check_field(space, f);
    MollifierBounds out;
    out.t = t;
    out.gamma = gamma;
    out.b = 1.0 + gamma + 2.0 * out.a;
    out.c = std::max(1.0 + out.b, 3.0 + 2.0 * gamma);
    std::size_t n = space.size();
    Partition part = partition(space, t, gamma);
    ScalarField phif = mollify(space, f, part);

    // (a) close pairs
    std::vector<double> mf_bt(n);
    parallel_for(n, [&](std::size_t x) { mf_bt[x] = mean_oscillation(space, f, x, out.b * t); });
    for (std::size_t x = 0; x < n; ++x) {
        const double* row = space.dist_row(x);
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x || row[y] > out.a * t) continue;
            double num = std::abs(phif[x] - phif[y]) * t;
            double den = row[y] * mf_bt[x];
            if (den == 0.0) {
                if (num > 1e-12 * t)
                    ++out.flagged_zero_denominator;
                else
                    ++out.skipped_zero_zero;
                continue;
            }
            out.ratio_pointwise = std::max(out.ratio_pointwise, num / den);
        }
    }

    // (b) and (c) over the scale grid
    const double lambda_tilde = 2.0;
    for (double r : r_grid) {
        if (!(r > 0.0)) throw std::invalid_argument("verify_mollifier_bounds: r must be positive");
        std::vector<double> mphi(n), mf_cr(n), mf_r(n);
        parallel_for(n, [&](std::size_t z) {
            mphi[z] = mean_oscillation(space, phif, z, r);
            mf_cr[z] = mean_oscillation(space, f, z, out.c * std::max(r, t));
            mf_r[z] = mean_oscillation(space, f, z, r);
        });
        for (std::size_t z = 0; z < n; ++z) {
            double num = mphi[z] * t;
            double den = std::min(r, t) * mf_cr[z];
            if (den == 0.0) {
                if (num > 0.0)
                    ++out.flagged_zero_denominator;
                else
                    ++out.skipped_zero_zero;
            } else {
                out.ratio_oscillation = std::max(out.ratio_oscillation, num / den);
            }
            // (c): averaged same-scale comparison
            const BallIndex& bi = space.ball_index(z);
            int level = bi.level_of(out.c * lambda_tilde * std::max(r, t));
            std::uint32_t cnt = bi.count_at(level);
            double S = 0.0;
            for (std::uint32_t k = 0; k < cnt; ++k)
                S += space.weight(bi.order[k]) * std::pow(mf_r[bi.order[k]], p);
            double avg = std::pow(S / bi.mass_at(level), 1.0 / p);
            if (avg == 0.0) {
                if (mphi[z] > 0.0)
                    ++out.flagged_zero_denominator;
                else
                    ++out.skipped_zero_zero;
            } else {
                out.ratio_averaged = std::max(out.ratio_averaged, mphi[z] / avg);
            }
        }
    }

    // (d) weak norms
    double wf = weak_norm(space, f, p).norm;
    double wphi = weak_norm(space, phif, p).norm;
    if (wf > 0.0) out.ratio_weak_norm = wphi / wf;
    return out;
}

}  // namespace mms
