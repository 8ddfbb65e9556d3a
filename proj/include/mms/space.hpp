#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "mms/parallel.hpp"
#include "mms/rng.hpp"

namespace mms {

/// Per-point ball index: distances to the other points sorted ascending and
/// deduplicated into breakpoints, with cumulative counts and masses. Closed
/// balls are constant on [radii[k], radii[k+1]), so every scale integral over
/// t reduces to a finite sum over breakpoints.
struct BallIndex {
    std::vector<std::uint32_t> order;        // all points sorted by (distance, index); order[0] is the point itself
    std::vector<double> radii;               // distinct positive distances, ascending
    std::vector<std::uint32_t> count_prefix; // number of points with distance <= radii[k]
    std::vector<double> mass_prefix;         // measure of the closed ball at radii[k]
    double self_mass = 0.0;                  // measure of the singleton ball (t < radii[0])

    /// index into radii of the largest breakpoint <= t, or -1 for the singleton ball
    int level_of(double t) const {
        auto it = std::upper_bound(radii.begin(), radii.end(), t);
        return static_cast<int>(it - radii.begin()) - 1;
    }

    std::uint32_t count_at(int level) const {
        return level < 0 ? 1u : count_prefix[static_cast<std::size_t>(level)];
    }

    double mass_at(int level) const {
        return level < 0 ? self_mass : mass_prefix[static_cast<std::size_t>(level)];
    }

    /// V(x, t) with the closed-ball convention
    double volume(double t) const { return mass_at(level_of(t)); }
};

struct DimensionFit {
    double c_mu = 1.0;      // estimated doubling constant
    double d_lower = 0.0;   // smallest fitted volume-growth exponent
    double d_upper = 0.0;   // largest fitted volume-growth exponent
    std::size_t sample_count = 0;
};

/// Finite metric measure space: dense symmetric quasi-metric, positive point
/// masses, quasi-metric constant a0 (a0 = 1 for a genuine metric). Immutable
/// after construction; ball indexes are built lazily and cached.
class Space {
public:
    Space(std::vector<double> dist, std::vector<double> weight, double a0,
          std::string label = "", std::vector<double> coords = {}, std::size_t coord_dim = 0)
        : n_(weight.size()),
          dist_(std::move(dist)),
          weight_(std::move(weight)),
          a0_(a0),
          label_(std::move(label)),
          coords_(std::move(coords)),
          coord_dim_(coord_dim),
          index_(n_),
          index_mutex_(std::make_unique<std::mutex>()) {
        validate();
    }

    std::size_t size() const { return n_; }
    double dist(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
    const double* dist_row(std::size_t i) const { return dist_.data() + i * n_; }
    const std::vector<double>& dist_matrix() const { return dist_; }
    double weight(std::size_t i) const { return weight_[i]; }
    const std::vector<double>& weights() const { return weight_; }
    double a0() const { return a0_; }
    const std::string& label() const { return label_; }
    double total_mass() const { return total_mass_; }
    double diameter() const { return diameter_; }
    double min_gap() const { return min_gap_; }  // smallest positive distance

    bool has_coords() const { return coord_dim_ > 0; }
    std::size_t coord_dim() const { return coord_dim_; }
    double coord(std::size_t i, std::size_t k) const { return coords_[i * coord_dim_ + k]; }

    /// Builds the ball index for one point without touching the cache.
    BallIndex build_ball_index(std::size_t x) const {
        BallIndex bi;
        const double* row = dist_row(x);
        bi.order.resize(n_);
        std::iota(bi.order.begin(), bi.order.end(), 0u);
        std::stable_sort(bi.order.begin(), bi.order.end(),
                         [row](std::uint32_t a, std::uint32_t b) { return row[a] < row[b]; });
        bi.self_mass = weight_[x];
        double mass = weight_[bi.order[0]];
        for (std::size_t k = 1; k < n_; ++k) {
            double d = row[bi.order[k]];
            mass += weight_[bi.order[k]];
            if (k + 1 == n_ || row[bi.order[k + 1]] != d) {
                bi.radii.push_back(d);
                bi.count_prefix.push_back(static_cast<std::uint32_t>(k + 1));
                bi.mass_prefix.push_back(mass);
            }
        }
        return bi;
    }

    /// Cached ball index (reference valid for the space lifetime).
    const BallIndex& ball_index(std::size_t x) const {
        std::lock_guard<std::mutex> lock(*index_mutex_);
        if (!index_[x]) index_[x] = std::make_shared<BallIndex>(build_ball_index(x));
        return *index_[x];
    }

private:
    void validate() {
        if (n_ == 0) throw std::invalid_argument("space: no points");
        if (dist_.size() != n_ * n_) throw std::invalid_argument("space: distance matrix is not n*n");
        if (!(a0_ >= 1.0)) throw std::invalid_argument("space: a0 must be >= 1");
        diameter_ = 0.0;
        min_gap_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i) {
            if (!(weight_[i] > 0.0) || !std::isfinite(weight_[i]))
                throw std::invalid_argument("space: weights must be strictly positive");
            if (dist(i, i) != 0.0) throw std::invalid_argument("space: nonzero diagonal");
            for (std::size_t j = i + 1; j < n_; ++j) {
                double d = dist(i, j);
                if (!std::isfinite(d)) throw std::invalid_argument("space: non-finite distance");
                if (d != dist(j, i)) throw std::invalid_argument("space: asymmetric distance matrix");
                if (!(d > 0.0)) throw std::invalid_argument("space: zero distance between distinct points");
                diameter_ = std::max(diameter_, d);
                min_gap_ = std::min(min_gap_, d);
            }
        }
        total_mass_ = std::accumulate(weight_.begin(), weight_.end(), 0.0);
        check_quasi_triangle();
    }

    void check_quasi_triangle() const {
        const double slack = a0_ * (1.0 + 1e-9);
        auto check = [&](std::size_t i, std::size_t j, std::size_t k) {
            if (dist(i, k) > slack * (dist(i, j) + dist(j, k)))
                throw std::invalid_argument("space: quasi-triangle inequality violated beyond a0");
        };
        if (n_ <= 256) {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = 0; j < n_; ++j)
                    for (std::size_t k = 0; k < n_; ++k) check(i, j, k);
        } else {
            Rng rng(0x5eed5eedULL);
            for (int t = 0; t < 100000; ++t) {
                std::size_t i = rng.below(n_), j = rng.below(n_), k = rng.below(n_);
                check(i, j, k);
            }
        }
    }

    std::size_t n_;
    std::vector<double> dist_;
    std::vector<double> weight_;
    double a0_;
    std::string label_;
    std::vector<double> coords_;  // row-major, n_ x coord_dim_; empty if no embedding
    std::size_t coord_dim_;
    double total_mass_ = 0.0;
    double diameter_ = 0.0;
    double min_gap_ = 0.0;
    mutable std::vector<std::shared_ptr<BallIndex>> index_;
    std::unique_ptr<std::mutex> index_mutex_;
};

/// Closed-ball membership and volume.
struct Ball {
    std::vector<std::uint32_t> members;  // sorted by point index
    double volume = 0.0;
};

inline Ball ball(const Space& space, std::size_t x, double t) {
    if (x >= space.size()) throw std::invalid_argument("ball: invalid point id");
    if (t < 0.0) throw std::invalid_argument("ball: negative radius");
    const BallIndex& bi = space.ball_index(x);
    int level = bi.level_of(t);
    Ball b;
    b.members.assign(bi.order.begin(), bi.order.begin() + bi.count_at(level));
    std::sort(b.members.begin(), b.members.end());
    b.volume = bi.mass_at(level);
    return b;
}

// ---------------------------------------------------------------------------
// generators

inline Space build_space(std::vector<double> dist, std::vector<double> weight, double a0,
                         std::string label = "", std::vector<double> coords = {},
                         std::size_t coord_dim = 0) {
    return Space(std::move(dist), std::move(weight), a0, std::move(label), std::move(coords),
                 coord_dim);
}

/// Uniform lattice in [0,1]^dim with side points per axis, Euclidean metric,
/// weights summing to 1. Distances come from integer offsets so that congruent
/// point pairs get bit-identical values and breakpoints merge exactly.
inline Space generate_grid(std::size_t dim, std::size_t side) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("grid: dim must be 1, 2, or 3");
    if (side < 2) throw std::invalid_argument("grid: side must be >= 2");
    std::size_t n = 1;
    for (std::size_t k = 0; k < dim; ++k) n *= side;
    double h = 1.0 / static_cast<double>(side - 1);
    std::vector<std::int64_t> idx(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i;
        for (std::size_t k = dim; k-- > 0;) {
            idx[i * dim + k] = static_cast<std::int64_t>(rem % side);
            rem /= side;
        }
    }
    std::vector<double> dist(n * n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::int64_t sq = 0;
            for (std::size_t k = 0; k < dim; ++k) {
                std::int64_t d = idx[i * dim + k] - idx[j * dim + k];
                sq += d * d;
            }
            dist[i * n + j] = h * std::sqrt(static_cast<double>(sq));
        }
    });
    std::vector<double> coords(n * dim);
    for (std::size_t i = 0; i < n * dim; ++i) coords[i] = h * static_cast<double>(idx[i]);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    return Space(std::move(dist), std::move(w), 1.0,
                 "grid(" + std::to_string(dim) + "," + std::to_string(side) + ")",
                 std::move(coords), dim);
}

struct GraphEdge {
    std::uint32_t u, v;
    double length;
};

/// Shortest-path metric of a weighted undirected graph (binary-heap Dijkstra
/// from every source). Edge lengths must be positive; a disconnected graph is
/// an error because distances would be infinite.
inline Space generate_graph(std::size_t n, const std::vector<GraphEdge>& edges,
                            std::vector<double> weight) {
    if (weight.size() != n) throw std::invalid_argument("graph: weight count mismatch");
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
    for (const auto& e : edges) {
        if (e.u >= n || e.v >= n || e.u == e.v) throw std::invalid_argument("graph: bad edge");
        if (!(e.length > 0.0)) throw std::invalid_argument("graph: edge length must be positive");
        adj[e.u].push_back({e.v, e.length});
        adj[e.v].push_back({e.u, e.length});
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n * n, inf);
    std::vector<int> error_flag(n, 0);
    parallel_for(n, [&](std::size_t s) {
        std::vector<double> d(n, inf);
        d[s] = 0.0;
        using QE = std::pair<double, std::uint32_t>;
        std::priority_queue<QE, std::vector<QE>, std::greater<QE>> q;
        q.push({0.0, static_cast<std::uint32_t>(s)});
        while (!q.empty()) {
            auto [dd, u] = q.top();
            q.pop();
            if (dd > d[u]) continue;
            for (auto [v, len] : adj[u]) {
                if (d[u] + len < d[v]) {
                    d[v] = d[u] + len;
                    q.push({d[v], v});
                }
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(d[j])) error_flag[s] = 1;
            dist[s * n + j] = d[j];
        }
    });
    for (std::size_t s = 0; s < n; ++s)
        if (error_flag[s]) throw std::invalid_argument("graph: disconnected (infinite distances)");
    // symmetrize against heap tie-break noise; shortest-path metric is symmetric
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = std::min(dist[i * n + j], dist[j * n + i]);
            dist[i * n + j] = dist[j * n + i] = d;
        }
    return Space(std::move(dist), std::move(weight), 1.0, "graph(" + std::to_string(n) + ")");
}

/// Lattice in the first Heisenberg group with the gauge distance
/// d(p,q) = (((dx^2+dy^2)^2 + 16 dz~^2)^(1/4) where dz~ carries the group
/// twist. The gauge with factor 16 satisfies the plain triangle inequality,
/// so a0 = 1; the constructor re-verifies this on random triples anyway.
/// The vertical spacing is step^2 to match the gauge scaling.
inline Space generate_heisenberg(std::size_t side, double step = 0.0) {
    if (side < 2) throw std::invalid_argument("heisenberg: side must be >= 2");
    if (step == 0.0) step = 1.0 / static_cast<double>(side - 1);
    if (!(step > 0.0)) throw std::invalid_argument("heisenberg: step must be positive");
    std::size_t n = side * side * side;
    std::vector<double> coords(n * 3);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j)
            for (std::size_t k = 0; k < side; ++k) {
                coords[idx * 3 + 0] = step * static_cast<double>(i);
                coords[idx * 3 + 1] = step * static_cast<double>(j);
                coords[idx * 3 + 2] = step * step * static_cast<double>(k);
                ++idx;
            }
    std::vector<double> dist(n * n, 0.0);
    parallel_for(n, [&](std::size_t a) {
        double x = coords[a * 3], y = coords[a * 3 + 1], z = coords[a * 3 + 2];
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            double dx = coords[b * 3] - x;
            double dy = coords[b * 3 + 1] - y;
            double dz = coords[b * 3 + 2] - z - 0.5 * (x * coords[b * 3 + 1] - y * coords[b * 3]);
            double planar = dx * dx + dy * dy;
            dist[a * n + b] = std::pow(planar * planar + 16.0 * dz * dz, 0.25);
        }
    });
    // the gauge of the group difference is symmetric in exact arithmetic;
    // symmetrize the rounded values
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = 0.5 * (dist[i * n + j] + dist[j * n + i]);
            dist[i * n + j] = dist[j * n + i] = d;
        }
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    return Space(std::move(dist), std::move(w), 1.0, "heisenberg(" + std::to_string(side) + ")",
                 std::move(coords), 3);
}

/// dist -> dist^alpha with alpha in (0,1); weights, a0, and coordinates kept.
inline Space snowflake(const Space& base, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("snowflake: alpha must be in (0,1)");
    std::size_t n = base.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) dist[i * n + j] = std::pow(base.dist(i, j), alpha);
    std::vector<double> coords;
    std::size_t cd = base.coord_dim();
    if (cd > 0) {
        coords.resize(n * cd);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cd; ++k) coords[i * cd + k] = base.coord(i, k);
    }
    return Space(std::move(dist), std::vector<double>(base.weights()), base.a0(),
                 "snowflake(" + base.label() + "," + std::to_string(alpha) + ")",
                 std::move(coords), cd);
}

// ---------------------------------------------------------------------------
// doubling constant and dimension bounds

/// Estimates the doubling constant and two-sided volume-growth exponents.
/// Sampling is interior-dominated: points within diam/8 of the medoid, so the
/// fitted exponents reflect the bulk volume law rather than boundary
/// truncation. Radii for the exponent fit are restricted to the resolvable
/// window [2*min_gap, diam/4]; the doubling ratio V(x,d)/V(x,d/2) runs over
/// all breakpoints d of the sampled points.
inline DimensionFit doubling_and_dimension(const Space& space, std::size_t sample_size,
                                           std::uint64_t seed) {
    if (sample_size < 1) throw std::invalid_argument("doubling_and_dimension: sample_size >= 1");
    std::size_t n = space.size();
    std::size_t medoid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x) {
        double s = 0.0;
        const double* row = space.dist_row(x);
        for (std::size_t y = 0; y < n; ++y) s += space.weight(y) * row[y];
        if (s < best) {
            best = s;
            medoid = x;
        }
    }
    std::vector<std::uint32_t> central;
    for (std::size_t x = 0; x < n; ++x)
        if (space.dist(medoid, x) <= space.diameter() / 8.0) central.push_back(x);
    if (central.empty()) central.push_back(static_cast<std::uint32_t>(medoid));
    Rng rng(seed);
    rng.shuffle(central);
    if (central.size() > sample_size) central.resize(sample_size);

    DimensionFit fit;
    fit.sample_count = central.size();
    double lo_r = 2.0 * space.min_gap();
    double hi_r = space.diameter() / 4.0;
    std::vector<double> slopes;
    for (std::uint32_t x : central) {
        const BallIndex& bi = space.ball_index(x);
        std::size_t m = bi.radii.size();
        for (std::size_t k = 0; k < m; ++k) {
            double d = bi.radii[k];
            double vhalf = bi.volume(0.5 * d * (1.0 + 1e-12));
            fit.c_mu = std::max(fit.c_mu, bi.mass_prefix[k] / vhalf);
        }
        std::vector<std::size_t> window;
        for (std::size_t k = 0; k < m; ++k)
            if (bi.radii[k] >= lo_r && bi.radii[k] <= hi_r) window.push_back(k);
        auto slope_of = [&](std::size_t ka, std::size_t kb) {
            double r = bi.radii[ka], R = bi.radii[kb];
            if (R < 2.0 * r) return;
            slopes.push_back(std::log(bi.mass_prefix[kb] / bi.mass_prefix[ka]) / std::log(R / r));
        };
        if (window.size() <= 64) {
            for (std::size_t a = 0; a < window.size(); ++a)
                for (std::size_t b = a + 1; b < window.size(); ++b) slope_of(window[a], window[b]);
        } else {
            for (int t = 0; t < 2048; ++t) {
                std::size_t a = rng.below(window.size()), b = rng.below(window.size());
                if (bi.radii[window[a]] > bi.radii[window[b]]) std::swap(a, b);
                slope_of(window[a], window[b]);
            }
        }
    }
    if (!slopes.empty()) {
        fit.d_lower = *std::min_element(slopes.begin(), slopes.end());
        fit.d_upper = *std::max_element(slopes.begin(), slopes.end());
    }
    return fit;
}

}  // namespace mms
