#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mms/oscillation.hpp"

namespace mms {

enum class BesovKernel { Volume, Power };

/// Besov seminorm with weight kernel lambda(x,y) = V(x, rho(x,y)) (closed
/// ball, so y is included) or rho(x,y)^d. Double sum over ordered pairs,
/// diagonal excluded.
inline double besov_seminorm(const Space& space, const ScalarField& f, double s, double p,
                             BesovKernel kernel = BesovKernel::Volume, double power_d = 0.0) {
    check_field(space, f);
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("besov: s must be in (0, 1]");
    if (!(p >= 1.0)) throw std::invalid_argument("besov: p must be >= 1");
    if (kernel == BesovKernel::Power && !(power_d > 0.0))
        throw std::invalid_argument("besov: power kernel needs d > 0");
    std::size_t n = space.size();
    std::vector<double> row_sum(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        BallIndex bi = space.build_ball_index(i);
        const double* row = space.dist_row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double rho = row[j];
            double lam = kernel == BesovKernel::Volume ? bi.volume(rho) : std::pow(rho, power_d);
            acc += space.weight(i) * space.weight(j) * std::pow(std::abs(f[i] - f[j]), p) /
                   (std::pow(rho, s * p) * lam);
        }
        row_sum[i] = acc;
    });
    double total = 0.0;
    for (double v : row_sum) total += v;
    return std::pow(total, 1.0 / p);
}

/// Seminorm with the V(x,y)^2 kernel.
inline double commutator_besov(const Space& space, const ScalarField& f, double p) {
    check_field(space, f);
    if (!(p >= 1.0)) throw std::invalid_argument("commutator_besov: p must be >= 1");
    std::size_t n = space.size();
    std::vector<double> row_sum(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        BallIndex bi = space.build_ball_index(i);
        const double* row = space.dist_row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double V = bi.volume(row[j]);
            acc += space.weight(i) * space.weight(j) * std::pow(std::abs(f[i] - f[j]), p) / (V * V);
        }
        row_sum[i] = acc;
    });
    double total = 0.0;
    for (double v : row_sum) total += v;
    return std::pow(total, 1.0 / p);
}

/// nu_p of the super-level set {(x,t) : m_f(x,t) > kappa} (or >= when
/// strict = false). Exact: per point, the profile is piecewise constant, so
/// the t-integral of t^(-p-1) over qualifying intervals is a finite sum.
inline double level_measure(const Space& space, const std::vector<OscillationProfile>& profiles,
                            double p, double kappa, bool strict = true) {
    if (!(kappa > 0.0)) throw std::invalid_argument("level_measure: kappa must be positive");
    if (!(p > 0.0)) throw std::invalid_argument("level_measure: p must be positive");
    double total = 0.0;
    for (const auto& prof : profiles) {
        double wx = space.weight(prof.point);
        std::size_t m = prof.breakpoints.size();
        for (std::size_t k = 1; k < m; ++k) {
            double v = prof.values[k];
            bool in = strict ? v > kappa : v >= kappa;
            if (!in) continue;
            double lo = prof.breakpoints[k];
            if (k + 1 < m)
                total += wx * (std::pow(lo, -p) - std::pow(prof.breakpoints[k + 1], -p)) / p;
            else
                total += wx * std::pow(lo, -p) / p;
        }
    }
    return total;
}

inline double level_measure(const Space& space, const ScalarField& f, double p, double kappa,
                            bool strict = true) {
    return level_measure(space, profile_all(space, f), p, kappa, strict);
}

/// Distinct positive oscillation values with their level measures and scores.
struct KappaCurve {
    std::vector<double> values;          // ascending
    std::vector<double> level_measures;  // nu_p({m_f >= value}), non-increasing
    std::vector<double> scores;          // value * level_measure^(1/p)

    std::size_t size() const { return values.size(); }
};

struct WeakNormResult {
    double norm = 0.0;
    KappaCurve curve;
};

/// sup_kappa kappa * nu_p({m_f > kappa})^(1/p). The level function is a
/// right-continuous step function of kappa that only drops at oscillation
/// values, so the sup is attained as a left limit there; evaluating the
/// >= form at each distinct value is exact. Implemented by decomposing nu_p
/// into per-interval atoms and suffix-summing over sorted values.
inline WeakNormResult weak_norm(const Space& space, const ScalarField& f, double p,
                                const std::vector<OscillationProfile>* profiles = nullptr) {
    check_field(space, f);
    if (!(p > 0.0)) throw std::invalid_argument("weak_norm: p must be positive");
    std::vector<OscillationProfile> local;
    if (!profiles) {
        local = profile_all(space, f);
        profiles = &local;
    }
    std::vector<std::pair<double, double>> atoms;  // (m value, nu mass of its interval)
    for (const auto& prof : *profiles) {
        double wx = space.weight(prof.point);
        std::size_t m = prof.breakpoints.size();
        for (std::size_t k = 1; k < m; ++k) {
            if (prof.values[k] <= 0.0) continue;
            double lo = prof.breakpoints[k];
            double mass = k + 1 < m
                              ? wx * (std::pow(lo, -p) - std::pow(prof.breakpoints[k + 1], -p)) / p
                              : wx * std::pow(lo, -p) / p;
            atoms.push_back({prof.values[k], mass});
        }
    }
    WeakNormResult out;
    if (atoms.empty()) return out;
    std::sort(atoms.begin(), atoms.end());
    std::size_t a = atoms.size();
    std::vector<double> suffix(a + 1, 0.0);
    for (std::size_t k = a; k-- > 0;) suffix[k] = suffix[k + 1] + atoms[k].second;
    for (std::size_t k = 0; k < a;) {
        double v = atoms[k].first;
        double nu = suffix[k];
        double score = v * std::pow(nu, 1.0 / p);
        out.curve.values.push_back(v);
        out.curve.level_measures.push_back(nu);
        out.curve.scores.push_back(score);
        out.norm = std::max(out.norm, score);
        while (k < a && atoms[k].first == v) ++k;
    }
    return out;
}

/// Score at the smallest curve value >= window_fraction * max value. On a
/// finite space the literal kappa -> 0 limit is an artifact of the smallest
/// resolvable oscillation, so the tail is read off at a resolution-tied
/// window instead; refinement studies track this windowed score across
/// scales.
inline double kappa_curve_tail(const KappaCurve& curve, double window_fraction = 0.05) {
    if (curve.size() == 0) return 0.0;
    double threshold = window_fraction * curve.values.back();
    for (std::size_t k = 0; k < curve.size(); ++k)
        if (curve.values[k] >= threshold) return curve.scores[k];
    return curve.scores.back();
}

}  // namespace mms
