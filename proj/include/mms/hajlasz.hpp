#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mms/oscillation.hpp"

namespace mms {

enum class GradientProvenance { Exact, Maximal, TruncationResidual };

inline const char* provenance_name(GradientProvenance p) {
    switch (p) {
        case GradientProvenance::Exact: return "exact";
        case GradientProvenance::Maximal: return "maximal";
        default: return "truncation-residual";
    }
}

/// Candidate gradient h for f with its feasibility ratio. violation is the
/// worst pairwise ratio |f_i - f_j| / (rho_ij (h_i + h_j)) with 0/0 := 0 and
/// x/0 := inf. Scaling h by the violation ratio makes the worst pair tight,
/// so certified_norm = violation * lp_norm is always a valid upper bound on
/// the least feasible L^p norm.
struct GradientCertificate {
    ScalarField h;
    double lp_norm = 0.0;
    double violation = 0.0;
    double certified_norm = 0.0;
    GradientProvenance provenance = GradientProvenance::Exact;
    long iterations = 0;
    bool converged = true;
    double p = 2.0;
};

inline double violation_ratio(const Space& space, const ScalarField& f, const ScalarField& h) {
    std::size_t n = space.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = space.dist_row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            double num = std::abs(f[i] - f[j]);
            if (num == 0.0) continue;
            double den = row[j] * (h[i] + h[j]);
            if (den == 0.0) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, num / den);
        }
    }
    return worst;
}

inline double lp_norm(const Space& space, const ScalarField& h, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i) s += space.weight(i) * std::pow(h[i], p);
    return std::pow(s, 1.0 / p);
}

struct SolveOptions {
    double tol = 1e-8;
    long max_iter = 500000;   // total coordinate sweeps across all phases
    double omega = 1.6;       // over-relaxation for the cyclic dual updates
    std::size_t cap = 512;    // exact path refuses larger spaces
};

namespace detail {

struct PairSystem {
    std::vector<std::uint32_t> pi, pj;
    std::vector<double> c;  // c_ij = |f_i - f_j| / rho_ij, positive entries only

    static PairSystem build(const Space& space, const ScalarField& f) {
        PairSystem ps;
        std::size_t n = space.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = space.dist_row(i);
            for (std::size_t j = i + 1; j < n; ++j) {
                double num = std::abs(f[i] - f[j]);
                if (num > 0.0) {
                    ps.pi.push_back(static_cast<std::uint32_t>(i));
                    ps.pj.push_back(static_cast<std::uint32_t>(j));
                    ps.c.push_back(num / row[j]);
                }
            }
        }
        return ps;
    }

    std::size_t size() const { return c.size(); }

    double violation_of(const ScalarField& h) const {
        double worst = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            double den = h[pi[k]] + h[pj[k]];
            if (den <= 0.0) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, c[k] / den);
        }
        return worst;
    }
};

/// Cyclic dual ascent for min sum w_i h_i^p over {h >= 0, h_i + h_j >= c_ij},
/// p > 1. Each dual coordinate step solves h(s_i + l) + h(s_j + l) = c exactly
/// (closed form for p = 2, safeguarded Newton otherwise), which is the
/// Dykstra-style projection onto that half-space in the geometry induced by
/// the objective. The duality gap against the best violation-scaled feasible
/// iterate certifies the result.
class DualAscent {
public:
    DualAscent(const Space& space, const PairSystem& ps, double p, const SolveOptions& opt)
        : space_(space), ps_(ps), p_(p), opt_(opt), ip_(1.0 / (p - 1.0)),
          lam_(ps.size(), 0.0), s_(space.size(), 0.0) {}

    GradientCertificate run() {
        std::size_t n = space_.size();
        GradientCertificate cert;
        cert.p = p_;
        cert.provenance = GradientProvenance::Exact;
        // feasible start for the primal bound
        ScalarField h0(n, 0.0);
        for (std::size_t k = 0; k < ps_.size(); ++k) {
            h0[ps_.pi[k]] = std::max(h0[ps_.pi[k]], 0.5 * ps_.c[k]);
            h0[ps_.pj[k]] = std::max(h0[ps_.pj[k]], 0.5 * ps_.c[k]);
        }
        best_h_ = h0;
        best_obj_ = objective(h0);

        std::vector<std::uint32_t> work;
        std::vector<char> in_work(ps_.size(), 0);
        long sweeps = 0;
        bool converged = false;
        while (sweeps < opt_.max_iter) {
            // rescan every pair, collecting the active ones
            ++sweeps;
            bool changed = rescan(work, in_work);
            double gap = update_gap();
            if (!changed && gap <= opt_.tol * (1.0 + best_obj_)) {
                converged = true;
                break;
            }
            // inner sweeps over the working set
            for (int inner = 0; inner < 40 && sweeps < opt_.max_iter; ++inner) {
                ++sweeps;
                double moved = sweep(work);
                if (moved <= 1e-15 * (1.0 + max_lam_)) break;
            }
        }
        cert.iterations = sweeps;
        cert.converged = converged;
        cert.h = best_h_;
        cert.lp_norm = std::pow(best_obj_, 1.0 / p_);
        return cert;
    }

private:
    double hstar(double s, double w) const {
        return s <= 0.0 ? 0.0 : std::pow(s / (p_ * w), ip_);
    }

    double psi(double s, double w) const {
        if (s <= 0.0) return 0.0;
        return s * hstar(s, w) * (p_ - 1.0) / p_;
    }

    double objective(const ScalarField& h) const {
        double o = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) o += space_.weight(i) * std::pow(h[i], p_);
        return o;
    }

    // exact 1-D dual coordinate maximizer: smallest l >= 0 with
    // hstar(s0i + l) + hstar(s0j + l) >= c
    double coordinate_opt(double s0i, double s0j, double wi, double wj, double c) const {
        if (hstar(s0i, wi) + hstar(s0j, wj) >= c) return 0.0;
        if (p_ == 2.0) {
            double ai = 1.0 / (2.0 * wi), aj = 1.0 / (2.0 * wj);
            double l = (c - std::max(s0i, 0.0) * ai - std::max(s0j, 0.0) * aj) / (ai + aj);
            // correct for a negative branch if one side stays clamped
            if (s0i + l <= 0.0 || s0j + l <= 0.0) {
                double lB = c / ai - s0i;  // only i active
                if (s0i + lB > 0.0 && s0j + lB <= 0.0) return lB;
                return c / aj - s0j;       // only j active
            }
            return l;
        }
        double lo = 0.0, hi = 1.0 + std::max(-std::min(s0i, s0j), 0.0);
        while (hstar(s0i + hi, wi) + hstar(s0j + hi, wj) < c) {
            lo = hi;
            hi *= 2.0;
        }
        double l = 0.5 * (lo + hi);
        for (int it = 0; it < 80; ++it) {
            double F = hstar(s0i + l, wi) + hstar(s0j + l, wj) - c;
            if (F > 0.0) hi = l; else lo = l;
            double dF = 0.0;
            if (s0i + l > 0.0) dF += ip_ * std::pow((s0i + l) / (p_ * wi), ip_ - 1.0) / (p_ * wi);
            if (s0j + l > 0.0) dF += ip_ * std::pow((s0j + l) / (p_ * wj), ip_ - 1.0) / (p_ * wj);
            double next = dF > 0.0 ? l - F / dF : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - l) <= 1e-16 * (1.0 + std::abs(l))) return next;
            l = next;
        }
        return l;
    }

    void update_pair(std::size_t k) {
        std::uint32_t i = ps_.pi[k], j = ps_.pj[k];
        double li = lam_[k];
        double s0i = s_[i] - li, s0j = s_[j] - li;
        double lopt = coordinate_opt(s0i, s0j, space_.weight(i), space_.weight(j), ps_.c[k]);
        double l = std::max(0.0, li + opt_.omega * (lopt - li));
        lam_[k] = l;
        s_[i] = s0i + l;
        s_[j] = s0j + l;
        max_lam_ = std::max(max_lam_, l);
        moved_ = std::max(moved_, std::abs(l - li));
    }

    bool rescan(std::vector<std::uint32_t>& work, std::vector<char>& in_work) {
        bool changed = false;
        for (std::size_t k = 0; k < ps_.size(); ++k) {
            if (!in_work[k]) {
                double hi = hstar(s_[ps_.pi[k]], space_.weight(ps_.pi[k]));
                double hj = hstar(s_[ps_.pj[k]], space_.weight(ps_.pj[k]));
                if (hi + hj >= ps_.c[k] * (1.0 - 1e-15)) continue;
            }
            moved_ = 0.0;
            update_pair(k);
            if (moved_ > 1e-15 * (1.0 + max_lam_)) changed = true;
            if (lam_[k] > 0.0 && !in_work[k]) {
                in_work[k] = 1;
                work.push_back(static_cast<std::uint32_t>(k));
            }
        }
        return changed;
    }

    double sweep(const std::vector<std::uint32_t>& work) {
        moved_ = 0.0;
        for (std::uint32_t k : work) update_pair(k);
        return moved_;
    }

    double update_gap() {
        std::size_t n = space_.size();
        ScalarField h(n);
        for (std::size_t i = 0; i < n; ++i) h[i] = hstar(s_[i], space_.weight(i));
        double viol = ps_.violation_of(h);
        if (std::isfinite(viol)) {
            if (viol > 1.0)
                for (auto& v : h) v *= viol;
            double obj = objective(h);
            if (obj < best_obj_) {
                best_obj_ = obj;
                best_h_ = h;
            }
        }
        double dual = 0.0;
        for (std::size_t k = 0; k < ps_.size(); ++k) dual += lam_[k] * ps_.c[k];
        for (std::size_t i = 0; i < n; ++i) dual -= psi(s_[i], space_.weight(i));
        return best_obj_ - dual;
    }

    const Space& space_;
    const PairSystem& ps_;
    double p_;
    SolveOptions opt_;
    double ip_;
    std::vector<double> lam_, s_;
    ScalarField best_h_;
    double best_obj_ = std::numeric_limits<double>::infinity();
    double max_lam_ = 0.0;
    double moved_ = 0.0;
};

/// p = 1 path: proximal point on the linear objective. Each outer step
/// minimizes w.h + (sigma/2)|h - z|^2 over the same polyhedron with the same
/// cyclic machinery (the prox subproblem is strictly convex); sigma shrinks
/// when the gap against the scaled LP dual stalls, and a pairwise polish
/// snaps the iterate onto the optimal face. Proximal iteration on a
/// polyhedral objective reaches the optimum after finitely many steps.
class ProxLinear {
public:
    ProxLinear(const Space& space, const PairSystem& ps, const SolveOptions& opt)
        : space_(space), ps_(ps), opt_(opt), lam_(ps.size(), 0.0), s_(space.size(), 0.0) {}

    GradientCertificate run() {
        std::size_t n = space_.size();
        GradientCertificate cert;
        cert.p = 1.0;
        double cmax = 0.0;
        for (double c : ps_.c) cmax = std::max(cmax, c);
        double wmed = space_.total_mass() / static_cast<double>(n);
        double sigma = wmed / (cmax + 1.0);
        ScalarField z(n, 0.0);
        for (std::size_t k = 0; k < ps_.size(); ++k) {
            z[ps_.pi[k]] = std::max(z[ps_.pi[k]], 0.5 * ps_.c[k]);
            z[ps_.pj[k]] = std::max(z[ps_.pj[k]], 0.5 * ps_.c[k]);
        }
        best_h_ = z;
        best_obj_ = objective(z);
        long sweeps = 0;
        bool converged = false;
        double prev_gap = std::numeric_limits<double>::infinity();
        while (sweeps < opt_.max_iter && !converged) {
            // inner: prox subproblem around z
            for (int it = 0; it < 4000 && sweeps < opt_.max_iter; ++it) {
                ++sweeps;
                double moved = 0.0, max_lam = 0.0;
                for (std::size_t k = 0; k < ps_.size(); ++k) {
                    std::uint32_t i = ps_.pi[k], j = ps_.pj[k];
                    double li = lam_[k];
                    double s0i = s_[i] - li, s0j = s_[j] - li;
                    double lopt = coordinate_opt(s0i, s0j, i, j, z, sigma, ps_.c[k]);
                    double l = std::max(0.0, li + opt_.omega * (lopt - li));
                    lam_[k] = l;
                    s_[i] = s0i + l;
                    s_[j] = s0j + l;
                    moved = std::max(moved, std::abs(l - li));
                    max_lam = std::max(max_lam, l);
                }
                if (moved <= 1e-14 * (1.0 + max_lam)) break;
            }
            ScalarField h(n);
            for (std::size_t i = 0; i < n; ++i) h[i] = hstar(s_[i], i, z, sigma);
            track_feasible(h);
            polish();
            // LP dual lower bound: scale lambda into the dual polytope
            double rho = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (s_[i] > space_.weight(i)) rho = std::min(rho, space_.weight(i) / s_[i]);
            double glp = 0.0;
            for (std::size_t k = 0; k < ps_.size(); ++k) glp += lam_[k] * ps_.c[k];
            glp *= rho;
            double gap = best_obj_ - glp;
            if (gap <= opt_.tol * (1.0 + best_obj_)) {
                converged = true;
            } else {
                if (gap > 0.5 * prev_gap) sigma = std::max(sigma * 0.25, 1e-14);
                prev_gap = gap;
                z = h;
            }
        }
        cert.iterations = sweeps;
        cert.converged = converged;
        cert.h = best_h_;
        cert.lp_norm = best_obj_;
        return cert;
    }

private:
    double hstar(double s, std::size_t i, const ScalarField& z, double sigma) const {
        return std::max(0.0, z[i] + (s - space_.weight(i)) / sigma);
    }

    double coordinate_opt(double s0i, double s0j, std::size_t i, std::size_t j,
                          const ScalarField& z, double sigma, double c) const {
        if (hstar(s0i, i, z, sigma) + hstar(s0j, j, z, sigma) >= c) return 0.0;
        double wi = space_.weight(i), wj = space_.weight(j);
        double ki = wi - s0i - sigma * z[i];  // l at which h_i leaves zero
        double kj = wj - s0j - sigma * z[j];
        double lA = 0.5 * (c * sigma - sigma * (z[i] + z[j]) - (s0i - wi) - (s0j - wj));
        if (lA >= ki && lA >= kj) return lA;
        double lB = c * sigma - sigma * z[i] - (s0i - wi);
        if (lB >= ki && lB <= kj) return lB;
        return c * sigma - sigma * z[j] - (s0j - wj);
    }

    double objective(const ScalarField& h) const {
        double o = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) o += space_.weight(i) * h[i];
        return o;
    }

    void track_feasible(ScalarField h) {
        double viol = ps_.violation_of(h);
        if (!std::isfinite(viol)) return;
        if (viol > 1.0)
            for (auto& v : h) v *= viol;
        double obj = objective(h);
        if (obj < best_obj_) {
            best_obj_ = obj;
            best_h_ = h;
        }
    }

    // joint move on each pair with the rest frozen: for a linear objective the
    // segment minimum sits at an endpoint, which snaps vertices exactly
    void polish() {
        std::size_t n = space_.size();
        if (n > 1024) return;
        ScalarField hp = best_h_;
        std::vector<double> lbound(n);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < ps_.size(); ++k) {
                std::uint32_t i = ps_.pi[k], j = ps_.pj[k];
                double li = 0.0, lj = 0.0;
                for (std::size_t k2 = 0; k2 < ps_.size(); ++k2) {
                    if (k2 == k) continue;
                    std::uint32_t a = ps_.pi[k2], b = ps_.pj[k2];
                    if (a == i) li = std::max(li, ps_.c[k2] - hp[b]);
                    if (b == i) li = std::max(li, ps_.c[k2] - hp[a]);
                    if (a == j) lj = std::max(lj, ps_.c[k2] - hp[b]);
                    if (b == j) lj = std::max(lj, ps_.c[k2] - hp[a]);
                }
                double c = ps_.c[k];
                if (li + lj >= c) {
                    hp[i] = li;
                    hp[j] = lj;
                } else if (space_.weight(i) <= space_.weight(j)) {
                    hp[j] = lj;
                    hp[i] = c - lj;
                } else {
                    hp[i] = li;
                    hp[j] = c - li;
                }
            }
        }
        for (auto& v : hp) v = std::max(v, 0.0);
        track_feasible(hp);
    }

    const Space& space_;
    const PairSystem& ps_;
    SolveOptions opt_;
    std::vector<double> lam_, s_;
    ScalarField best_h_;
    double best_obj_ = std::numeric_limits<double>::infinity();
};

}  // namespace detail

/// Least-L^p-norm feasible gradient via convex optimization. Returns a
/// feasible certificate; when the duality gap closes below tol the lp_norm is
/// within tol of the optimum, otherwise the best feasible iterate is returned
/// with converged = false.
inline GradientCertificate solve_exact(const Space& space, const ScalarField& f, double p,
                                       SolveOptions opt = {}) {
    check_field(space, f);
    if (!(p >= 1.0)) throw std::invalid_argument("solve_exact: p must be >= 1");
    if (space.size() > opt.cap)
        throw std::invalid_argument("solve_exact: space exceeds the exact-path cap of " +
                                    std::to_string(opt.cap) + " points");
    detail::PairSystem ps = detail::PairSystem::build(space, f);
    GradientCertificate cert;
    if (ps.size() == 0) {
        cert.h.assign(space.size(), 0.0);
        cert.p = p;
        return cert;
    }
    if (p == 1.0) {
        detail::ProxLinear solver(space, ps, opt);
        cert = solver.run();
    } else {
        detail::DualAscent solver(space, ps, p, opt);
        cert = solver.run();
    }
    cert.violation = violation_ratio(space, f, cert.h);
    cert.certified_norm = cert.violation * cert.lp_norm;
    return cert;
}

/// Feasible-gradient construction from an oscillation field g:
/// h = c * M_{p-eps}(g). The violation against f is reported and the
/// violation-scaled norm is a rigorous upper bound regardless of how loose
/// the constant is.
inline GradientCertificate maximal_gradient(const Space& space, const ScalarField& f,
                                            const ScalarField& g, double p, double eps,
                                            double c = 7.0) {
    check_field(space, f);
    if (!(eps > 0.0 && eps < p - 1.0))
        throw std::invalid_argument("maximal_gradient: need 0 < eps < p - 1");
    ScalarField h = maximal(space, g, p - eps);
    for (auto& v : h) v *= c;
    GradientCertificate cert;
    cert.p = p;
    cert.provenance = GradientProvenance::Maximal;
    cert.h = std::move(h);
    cert.lp_norm = lp_norm(space, cert.h, p);
    cert.violation = violation_ratio(space, f, cert.h);
    cert.certified_norm = cert.violation * cert.lp_norm;
    return cert;
}

struct TruncationResult {
    ScalarField truncated;      // globally 2L-Lipschitz extension (a0 = 1)
    double lipschitz_ratio = 0.0;  // measured sup |df~| / rho
    GradientCertificate residual;  // certificate for f - truncated
};

/// Restricts f to the sublevel set S = {h <= L}, where it is 2L-Lipschitz,
/// and extends by inf-convolution f~(x) = min_{y in S} f(y) + 2 L a0 rho(x,y).
/// The residual f - f~ carries the candidate gradient 4 h 1{h > L}.
inline TruncationResult lipschitz_truncate(const Space& space, const ScalarField& f,
                                           const ScalarField& h, double L, double p = 2.0) {
    check_field(space, f);
    check_field(space, h);
    if (!(L > 0.0)) throw std::invalid_argument("lipschitz_truncate: L must be positive");
    double viol = violation_ratio(space, f, h);
    if (!(viol <= 1.0 + 1e-6))
        throw std::invalid_argument("lipschitz_truncate: h is not a feasible gradient for f");
    std::size_t n = space.size();
    std::vector<std::uint32_t> S;
    for (std::size_t i = 0; i < n; ++i)
        if (h[i] <= L) S.push_back(static_cast<std::uint32_t>(i));
    if (S.empty())
        throw std::invalid_argument("lipschitz_truncate: truncation level below essential infimum of h");
    double K = 2.0 * L * space.a0();
    TruncationResult out;
    out.truncated.resize(n);
    parallel_for(n, [&](std::size_t x) {
        const double* row = space.dist_row(x);
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t y : S) best = std::min(best, f[y] + K * row[y]);
        out.truncated[x] = best;
    });
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = space.dist_row(i);
        for (std::size_t j = i + 1; j < n; ++j)
            out.lipschitz_ratio =
                std::max(out.lipschitz_ratio, std::abs(out.truncated[i] - out.truncated[j]) / row[j]);
    }
    ScalarField resid(n), hr(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = f[i] - out.truncated[i];
        hr[i] = h[i] > L ? 4.0 * h[i] : 0.0;
    }
    out.residual.p = p;
    out.residual.provenance = GradientProvenance::TruncationResidual;
    out.residual.h = std::move(hr);
    out.residual.lp_norm = lp_norm(space, out.residual.h, p);
    out.residual.violation = violation_ratio(space, resid, out.residual.h);
    if (out.residual.lp_norm == 0.0)
        out.residual.certified_norm =
            out.residual.violation == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    else
        out.residual.certified_norm = out.residual.violation * out.residual.lp_norm;
    return out;
}

}  // namespace mms
