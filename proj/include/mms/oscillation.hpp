#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mms/field.hpp"
#include "mms/parallel.hpp"
#include "mms/space.hpp"

namespace mms {

inline double ball_average(const Space& space, const ScalarField& f, std::size_t x, double t) {
    if (t < 0.0) throw std::invalid_argument("ball_average: negative radius");
    const BallIndex& bi = space.ball_index(x);
    int level = bi.level_of(t);
    std::uint32_t c = bi.count_at(level);
    double s = 0.0;
    for (std::uint32_t k = 0; k < c; ++k) s += space.weight(bi.order[k]) * f[bi.order[k]];
    return s / bi.mass_at(level);
}

inline double mean_oscillation(const Space& space, const ScalarField& f, std::size_t x, double t) {
    if (t < 0.0) throw std::invalid_argument("mean_oscillation: negative radius");
    const BallIndex& bi = space.ball_index(x);
    int level = bi.level_of(t);
    std::uint32_t c = bi.count_at(level);
    double W = bi.mass_at(level);
    double s = 0.0;
    for (std::uint32_t k = 0; k < c; ++k) s += space.weight(bi.order[k]) * f[bi.order[k]];
    double avg = s / W;
    double osc = 0.0;
    for (std::uint32_t k = 0; k < c; ++k)
        osc += space.weight(bi.order[k]) * std::abs(f[bi.order[k]] - avg);
    return osc / W;
}

/// The map t -> m_f(x,t) as a right-continuous step function: values[k] holds
/// on [breakpoints[k], breakpoints[k+1]), the last value on [d_m, inf).
/// breakpoints[0] = 0 and values[0] = 0 (singleton ball).
struct OscillationProfile {
    std::uint32_t point = 0;
    std::vector<double> breakpoints;
    std::vector<double> values;

    double value_at(double t) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
        return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
    }
};

namespace detail {

/// Fenwick tree over f-ranks carrying (weight, weight*f) prefix sums.
class OscFenwick {
public:
    explicit OscFenwick(std::size_t n) : w_(n + 1, 0.0), wf_(n + 1, 0.0) {}

    void add(std::size_t rank, double w, double wf) {
        for (std::size_t i = rank + 1; i < w_.size(); i += i & (~i + 1)) {
            w_[i] += w;
            wf_[i] += wf;
        }
    }

    // sums over ranks < r
    void prefix(std::size_t r, double& w, double& wf) const {
        w = 0.0;
        wf = 0.0;
        for (std::size_t i = r; i > 0; i -= i & (~i + 1)) {
            w += w_[i];
            wf += wf_[i];
        }
    }

private:
    std::vector<double> w_, wf_;
};

struct FieldRanks {
    std::vector<double> sorted_f;        // f values ascending
    std::vector<std::uint32_t> rank_of;  // point -> rank in (f, index) order

    FieldRanks(const Space& space, const ScalarField& f) {
        std::size_t n = space.size();
        std::vector<std::uint32_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
        std::stable_sort(idx.begin(), idx.end(),
                         [&f](std::uint32_t a, std::uint32_t b) { return f[a] < f[b]; });
        sorted_f.resize(n);
        rank_of.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            sorted_f[r] = f[idx[r]];
            rank_of[idx[r]] = static_cast<std::uint32_t>(r);
        }
    }

    // number of points with f value <= v
    std::size_t count_le(double v) const {
        return static_cast<std::size_t>(
            std::upper_bound(sorted_f.begin(), sorted_f.end(), v) - sorted_f.begin());
    }
};

inline OscillationProfile profile_impl(const Space& space, const ScalarField& f, std::size_t x,
                                       const BallIndex& bi, const FieldRanks& ranks) {
    std::size_t n = space.size();
    OscillationProfile prof;
    prof.point = static_cast<std::uint32_t>(x);
    prof.breakpoints.reserve(bi.radii.size() + 1);
    prof.values.reserve(bi.radii.size() + 1);
    prof.breakpoints.push_back(0.0);
    prof.values.push_back(0.0);
    OscFenwick fen(n);
    double W = 0.0, S = 0.0;
    std::size_t next = 0;
    fen.add(ranks.rank_of[bi.order[0]], space.weight(bi.order[0]),
            space.weight(bi.order[0]) * f[bi.order[0]]);
    W += space.weight(bi.order[0]);
    S += space.weight(bi.order[0]) * f[bi.order[0]];
    ++next;
    for (std::size_t k = 0; k < bi.radii.size(); ++k) {
        while (next < bi.count_prefix[k]) {
            std::uint32_t y = bi.order[next];
            double w = space.weight(y);
            fen.add(ranks.rank_of[y], w, w * f[y]);
            W += w;
            S += w * f[y];
            ++next;
        }
        double avg = S / W;
        double wle, sle;
        fen.prefix(ranks.count_le(avg), wle, sle);
        double osc = (avg * wle - sle) + ((S - sle) - avg * (W - wle));
        prof.breakpoints.push_back(bi.radii[k]);
        prof.values.push_back(std::max(osc, 0.0) / W);
    }
    return prof;
}

}  // namespace detail

inline OscillationProfile profile(const Space& space, const ScalarField& f, std::size_t x) {
    detail::FieldRanks ranks(space, f);
    return detail::profile_impl(space, f, x, space.ball_index(x), ranks);
}

/// Profiles of every point; the rank table is shared and points run in
/// parallel. Ball indexes are built transiently, so memory stays O(n) beyond
/// the output.
inline std::vector<OscillationProfile> profile_all(const Space& space, const ScalarField& f) {
    check_field(space, f);
    detail::FieldRanks ranks(space, f);
    std::vector<OscillationProfile> out(space.size());
    parallel_for(space.size(), [&](std::size_t x) {
        BallIndex bi = space.build_ball_index(x);
        out[x] = detail::profile_impl(space, f, x, bi, ranks);
    });
    return out;
}

enum class WindowVariant { Min, Max };

/// Discrete pointwise Lipschitz constant: min over the first K breakpoints of
/// max_{rho(x,y) <= d_k} |f(x)-f(y)| / d_k. The Max variant replaces min by
/// max over the same window (diagnostic only).
inline double lip_hat(const Space& space, const ScalarField& f, std::size_t x, int window = 3,
                      WindowVariant variant = WindowVariant::Min) {
    if (window < 1) throw std::invalid_argument("lip_hat: window must be >= 1");
    const BallIndex& bi = space.ball_index(x);
    std::size_t kk = std::min<std::size_t>(window, bi.radii.size());
    if (kk == 0) return 0.0;
    double best = variant == WindowVariant::Min ? std::numeric_limits<double>::infinity() : 0.0;
    double run_max = 0.0;
    std::size_t next = 1;
    for (std::size_t k = 0; k < kk; ++k) {
        while (next < bi.count_prefix[k]) {
            run_max = std::max(run_max, std::abs(f[bi.order[next]] - f[x]));
            ++next;
        }
        double cand = run_max / bi.radii[k];
        best = variant == WindowVariant::Min ? std::min(best, cand) : std::max(best, cand);
    }
    return best;
}

/// min over the first K breakpoints of m_f(x, d_k)/d_k; the window is shared
/// with lip_hat so that g_hat <= 2 lip_hat holds exactly scale by scale.
inline double g_hat(const Space& space, const ScalarField& f, std::size_t x, int window = 3,
                    WindowVariant variant = WindowVariant::Min) {
    if (window < 1) throw std::invalid_argument("g_hat: window must be >= 1");
    const BallIndex& bi = space.ball_index(x);
    std::size_t kk = std::min<std::size_t>(window, bi.radii.size());
    if (kk == 0) return 0.0;
    double best = variant == WindowVariant::Min ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
        std::uint32_t c = bi.count_prefix[k];
        double W = bi.mass_prefix[k];
        double s = 0.0;
        for (std::uint32_t t = 0; t < c; ++t) s += space.weight(bi.order[t]) * f[bi.order[t]];
        double avg = s / W;
        double osc = 0.0;
        for (std::uint32_t t = 0; t < c; ++t)
            osc += space.weight(bi.order[t]) * std::abs(f[bi.order[t]] - avg);
        double cand = (osc / W) / bi.radii[k];
        best = variant == WindowVariant::Min ? std::min(best, cand) : std::max(best, cand);
    }
    return best;
}

/// Field of lip_hat values.
inline ScalarField lip_hat_field(const Space& space, const ScalarField& f, int window = 3,
                                 WindowVariant variant = WindowVariant::Min) {
    check_field(space, f);
    ScalarField out(space.size());
    parallel_for(space.size(), [&](std::size_t x) { out[x] = lip_hat(space, f, x, window, variant); });
    return out;
}

/// Centered Hardy-Littlewood maximal operator, rescaled form:
/// M_q h(x) = max over ball levels k >= 0 (the singleton included) of
/// (average of h^q over the closed ball)^(1/q). Exact via prefix sums.
inline ScalarField maximal(const Space& space, const ScalarField& h, double q = 1.0) {
    check_field(space, h);
    if (!(q > 0.0)) throw std::invalid_argument("maximal: q must be positive");
    for (double v : h)
        if (v < 0.0) throw std::invalid_argument("maximal: negative entry in h");
    ScalarField out(space.size());
    parallel_for(space.size(), [&](std::size_t x) {
        BallIndex bi = space.build_ball_index(x);
        double best = std::pow(h[x], q);
        double W = 0.0, S = 0.0;
        std::size_t next = 0;
        for (std::size_t k = 0; k < bi.radii.size(); ++k) {
            while (next < bi.count_prefix[k]) {
                std::uint32_t y = bi.order[next];
                W += space.weight(y);
                S += space.weight(y) * std::pow(h[y], q);
                ++next;
            }
            best = std::max(best, S / W);
        }
        out[x] = std::pow(best, 1.0 / q);
    });
    return out;
}

}  // namespace mms
