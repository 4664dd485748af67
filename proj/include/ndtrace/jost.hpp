#pragma once

#include "ndtrace/coeffs.hpp"
#include "ndtrace/collocation.hpp"
#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/quadrature.hpp"
#include "ndtrace/roots.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ndtrace {

struct JostOptions {
    int panel_nodes = 16;
    double panel_max = 1.0;
    /// C·∫|V| over the discarded far tail.
    double tail_tol = 1e-12;
    /// C·l1_tail(a) target when choosing anchors.
    double anchor_margin = 0.5;
    double ode_tol = 1e-12;
    int stages = 5;
    double h_max = 0.5;
    std::optional<double> anchor_minus, anchor_plus;
    /// Throw ContractionFailure when the Neumann bound at the anchor is >= 1.
    bool require_contraction = true;
};

namespace detail {

inline double kappa_tie(const RootSystem& rs) { return 1e-12 * std::abs(rs.root(0)); }

/// Does root m sit in the sum that is active for displacement d of the
/// rescaled kernel, and with which sign? Returns 0 when inactive.
inline double kernel_sign(const RootSystem& rs, int j, int m, double d, Side side) {
    const double km = rs.kappa(m), kj = rs.kappa(j), tie = kappa_tie(rs);
    if (side == Side::minus) {
        const bool upper = km > kj + tie;
        if (d >= 0.0) return upper ? 0.0 : -1.0;
        return upper ? 1.0 : 0.0;
    }
    const bool lower = km < kj - tie;
    if (d <= 0.0) return lower ? 0.0 : 1.0;
    return lower ? -1.0 : 0.0;
}

}  // namespace detail

/// K_j(x) of the minus-side integral equation (unscaled).
inline CMatrix kj_kernel(const RootSystem& rs, int j, double x) {
    const int N = rs.order();
    CMatrix K = CMatrix::Zero(N, N);
    for (int m = 0; m < N; ++m) {
        const double sg = detail::kernel_sign(rs, j, m, x, Side::minus);
        if (sg != 0.0) K += (sg * std::exp(rs.root(m) * x)) * rs.projection(m);
    }
    return K;
}

/// K_j(d)e^{−ζ_j d} for either side; the plus side is the mirror image.
inline CMatrix rescaled_kernel(const RootSystem& rs, int j, double d, Side side) {
    const int N = rs.order();
    CMatrix K = CMatrix::Zero(N, N);
    for (int m = 0; m < N; ++m) {
        const double sg = detail::kernel_sign(rs, j, m, d, side);
        if (sg != 0.0) K += (sg * std::exp((rs.root(m) - rs.root(j)) * d)) * rs.projection(m);
    }
    return K;
}

/// Last column of the rescaled kernel (V(y) only has a last row).
inline CVector rescaled_kernel_col(const RootSystem& rs, int j, double d, Side side) {
    const int N = rs.order();
    CVector k = CVector::Zero(N);
    for (int m = 0; m < N; ++m) {
        const double sg = detail::kernel_sign(rs, j, m, d, side);
        if (sg != 0.0) k += (sg * std::exp((rs.root(m) - rs.root(j)) * d) * rs.dual_rows()(m, N - 1)) * rs.eigvecs().col(m);
    }
    return k;
}

/// sup_d ‖K_j(d)e^{−ζ_j d}‖_∞ maximised over j, on a scan grid.
inline double kernel_constant(const RootSystem& rs, Side side) {
    const int N = rs.order();
    double gap = INFINITY;
    for (int j = 0; j < N; ++j)
        for (int m = 0; m < N; ++m)
            if (std::abs(rs.kappa(m) - rs.kappa(j)) > detail::kappa_tie(rs))
                gap = std::min(gap, std::abs(rs.kappa(m) - rs.kappa(j)));
    const double D = std::isfinite(gap) ? std::min(50.0, 20.0 / gap) : 1.0;
    auto inf_norm = [](const CMatrix& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); };
    double C = 0.0;
    const int samples = 400;
    for (int j = 0; j < N; ++j) {
        C = std::max(C, inf_norm(rescaled_kernel(rs, j, 0.0, side)));
        C = std::max(C, inf_norm(rescaled_kernel(rs, j, side == Side::minus ? -1e-300 : 1e-300, side)));
        for (int i = 1; i <= samples; ++i) {
            const double d = D * std::pow(double(i) / samples, 2);
            C = std::max(C, inf_norm(rescaled_kernel(rs, j, d, side)));
            C = std::max(C, inf_norm(rescaled_kernel(rs, j, -d, side)));
        }
    }
    return C;
}

/// Anchor a with C·l1_tail(cs, side, a) <= margin. Compact support returns
/// the support edge on that side.
inline double choose_anchor(const RootSystem& rs, const CoefficientSet& cs, Side side, double margin = 0.5) {
    if (cs.is_zero()) return 0.0;
    auto [lo, hi] = cs.support();
    if (side == Side::minus && std::isfinite(lo)) return lo;
    if (side == Side::plus && std::isfinite(hi)) return hi;
    const double C = kernel_constant(rs, side);
    const double sgn = side == Side::minus ? -1.0 : 1.0;
    auto ok = [&](double a) { return C * l1_tail(cs, side, a) <= margin; };
    if (ok(0.0)) return 0.0;
    double fail = 0.0, good = sgn;
    while (!ok(good)) {
        fail = good;
        good *= 2.0;
        if (std::abs(good) > 1e6) throw NoValidAnchor("tail of |V| never drops below the contraction margin");
    }
    for (int it = 0; it < 30 && std::abs(good - fail) > 1e-3 * (1.0 + std::abs(good)); ++it) {
        const double mid = 0.5 * (good + fail);
        (ok(mid) ? good : fail) = mid;
    }
    return good;
}

/// Far end of the tail grid: beyond it C·∫|V| <= tol. Returns `a` when the
/// tail beyond the anchor is already negligible.
inline double tail_start(const RootSystem& rs, const CoefficientSet& cs, Side side, double a, double tol) {
    if (cs.is_zero()) return a;
    auto [lo, hi] = cs.support();
    if (side == Side::minus && std::isfinite(lo)) return std::min(a, lo);
    if (side == Side::plus && std::isfinite(hi)) return std::max(a, hi);
    const double C = kernel_constant(rs, side);
    const double sgn = side == Side::minus ? -1.0 : 1.0;
    auto ok = [&](double x) { return C * l1_tail(cs, side, x) <= tol; };
    if (ok(a)) return a;
    double fail = a, step = 1.0, good = a + sgn * step;
    while (!ok(good)) {
        fail = good;
        step *= 2.0;
        good = a + sgn * step;
        if (step > 1e6) throw NoValidAnchor("far tail of |V| does not become negligible");
    }
    for (int it = 0; it < 20 && std::abs(good - fail) > 0.05; ++it) {
        const double mid = 0.5 * (good + fail);
        (ok(mid) ? good : fail) = mid;
    }
    return good;
}

/// Solution of the discretized tail equation
///   w(x) = p_j − ∫ K_j(x−y)e^{−ζ_j(x−y)} V(y) w(y) dy   over [x_far, a]
/// (or [a, x_far] on the plus side). Stored as the scalar density
/// s(y) = −i^N Σ_k v_k(y) w_k(y) on the panel nodes.
class TailSolution {
public:
    TailSolution() = default;

    /// Tail with V ≡ 0 (or nothing to solve): w ≡ p_j.
    static TailSolution trivial(const RootSystem& rs, int j, Side side) {
        TailSolution t;
        t.rs_ = rs;
        t.j_ = j;
        t.side_ = side;
        return t;
    }

    bool empty() const { return nodes_.empty(); }
    int index() const { return j_; }
    Side side() const { return side_; }
    double norm_bound() const { return bound_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& edges() const { return edges_; }

    CVector w_at(double x) const {
        CVector w = rs_.eigvec(j_);
        if (empty()) return w;
        const CVector c = mode_weights(x) * s_;
        const int N = rs_.order();
        for (int m = 0; m < N; ++m) w -= (c(m) * rs_.dual_rows()(m, N - 1)) * rs_.eigvec(m);
        return w;
    }

    std::vector<CVector> samples() const {
        std::vector<CVector> out;
        for (double x : nodes_) out.push_back(w_at(x));
        return out;
    }

    static TailSolution solve(const RootSystem& rs, const CoefficientSet& cs, int j, Side side,
                              const std::vector<double>& edges, int q, double bound) {
        TailSolution t;
        t.rs_ = rs;
        t.j_ = j;
        t.side_ = side;
        t.q_ = q;
        t.edges_ = edges;
        t.bound_ = bound;
        const GaussRule& g = gauss_legendre(q);
        for (size_t p = 0; p + 1 < edges.size(); ++p) {
            const double c = 0.5 * (edges[p] + edges[p + 1]), h = 0.5 * (edges[p + 1] - edges[p]);
            for (int i = 0; i < q; ++i) t.nodes_.push_back(c + h * g.x[i]);
        }
        const int M = static_cast<int>(t.nodes_.size());
        const int N = rs.order();
        CMatrix A = CMatrix::Identity(M, M);
        CVector f(M);
        const CVector pj = rs.eigvec(j);
        CRow r(N);
        for (int a = 0; a < M; ++a) {
            const CRow crow = cs.perturbation_row(t.nodes_[a]);
            f(a) = (crow * pj)(0);
            if (crow.cwiseAbs().maxCoeff() == 0.0) continue;
            for (int m = 0; m < N; ++m) r(m) = rs.dual_rows()(m, N - 1) * (crow * rs.eigvec(m))(0);
            A.row(a) += r * t.mode_weights(t.nodes_[a]);
        }
        Eigen::PartialPivLU<CMatrix> lu(A);
        t.s_ = lu.solve(f);
        if (!t.s_.allFinite() || (A * t.s_ - f).norm() > 1e-8 * (1.0 + f.norm()))
            throw SingularSystem("tail integral equation is numerically singular");
        return t;
    }

private:
    /// E(m, b) = ∫ σ_m(x−y) e^{(ζ_m−ζ_j)(x−y)} ℓ_b(y) dy, σ_m the kernel sign,
    /// with product integration in the panel that contains x. The kernel
    /// column is Σ_m E(m, b)·(P⁻¹)_{m,N}·p_m.
    CMatrix mode_weights(double x) const {
        const GaussRule& g = gauss_legendre(q_);
        const int N = rs_.order();
        const int M = static_cast<int>(nodes_.size());
        CMatrix E = CMatrix::Zero(N, M);
        std::vector<cplx> rate(N);
        // Kernel signs only depend on the sign of the displacement.
        std::vector<double> sg_neg(N), sg_zero(N), sg_pos(N);
        for (int m = 0; m < N; ++m) {
            rate[m] = rs_.root(m) - rs_.root(j_);
            sg_neg[m] = detail::kernel_sign(rs_, j_, m, -1.0, side_);
            sg_zero[m] = detail::kernel_sign(rs_, j_, m, 0.0, side_);
            sg_pos[m] = detail::kernel_sign(rs_, j_, m, 1.0, side_);
        }
        auto add = [&](double d, double wt, auto&& sink) {
            const std::vector<double>& sg = d < 0 ? sg_neg : (d > 0 ? sg_pos : sg_zero);
            for (int m = 0; m < N; ++m)
                if (sg[m] != 0.0) sink(m, (sg[m] * wt) * std::exp(rate[m] * d));
        };
        const std::vector<double>& local = g.x;
        const std::vector<double> bw = barycentric_weights(local);
        std::vector<double> l;
        for (size_t p = 0; p + 1 < edges_.size(); ++p) {
            const double e0 = edges_[p], e1 = edges_[p + 1];
            const double c = 0.5 * (e0 + e1), h = 0.5 * (e1 - e0);
            const int base = static_cast<int>(p) * q_;
            if (x > e0 && x < e1) {
                for (auto [u0, u1] : {std::pair{e0, x}, std::pair{x, e1}}) {
                    const double cc = 0.5 * (u0 + u1), hh = 0.5 * (u1 - u0);
                    for (int k = 0; k < q_; ++k) {
                        const double y = cc + hh * g.x[k];
                        lagrange_basis(local, bw, (y - c) / h, l);
                        add(x - y, hh * g.w[k], [&](int m, cplx v) {
                            for (int i = 0; i < q_; ++i) E(m, base + i) += l[i] * v;
                        });
                    }
                }
            } else {
                for (int i = 0; i < q_; ++i)
                    add(x - nodes_[base + i], h * g.w[i], [&](int m, cplx v) { E(m, base + i) += v; });
            }
        }
        return E;
    }

    RootSystem rs_;
    int j_ = 0;
    Side side_ = Side::minus;
    int q_ = 16;
    double bound_ = 0.0;
    std::vector<double> edges_, nodes_;
    CVector s_;
};

/// Panel edges for the tail [x_far, a] (ascending).
inline std::vector<double> tail_panels(const RootSystem& rs, const CoefficientSet& cs, double x_far, double a,
                                       const JostOptions& opts) {
    const double lo = std::min(x_far, a), hi = std::max(x_far, a);
    if (!(lo < hi)) return {};
    double spread = 0.0;
    for (int j = 0; j < rs.order(); ++j)
        for (int m = 0; m < rs.order(); ++m) spread = std::max(spread, std::abs(rs.root(m) - rs.root(j)));
    const double h = std::min(opts.panel_max, spread > 0 ? 10.0 / spread : opts.panel_max);
    return panel_edges(lo, hi, cs.breakpoints(), h);
}

/// Tail solve for one index. `edges` spans [x_far, a] (or [a, x_far]).
inline TailSolution solve_w(const RootSystem& rs, const CoefficientSet& cs, int j, Side side, double a,
                            const std::vector<double>& edges, const JostOptions& opts = {}) {
    if (edges.size() < 2) return TailSolution::trivial(rs, j, side);
    const double C = kernel_constant(rs, side);
    const double lo = edges.front(), hi = edges.back();
    double mass = 0.0;
    if (!cs.is_zero()) {
        double err = 0.0;
        auto [slo, shi] = cs.support();
        const double u0 = std::max(lo, slo), u1 = std::min(hi, shi);
        if (u0 < u1)
            mass = detail::integrate_split([&](double y) { return cs.abs_sum(y); }, u0, u1, cs.breakpoints(), 1e-10, &err);
    }
    const double bound = C * mass;
    if (opts.require_contraction && bound >= 1.0)
        throw ContractionFailure("Neumann bound " + std::to_string(bound) + " >= 1 at anchor " + std::to_string(a));
    if (cs.vanishes_on(lo, hi)) return TailSolution::trivial(rs, j, side);
    return TailSolution::solve(rs, cs, j, side, edges, opts.panel_nodes, bound);
}

/// Mesh of one propagation side, reusable across nearby z.
struct SideMesh {
    double anchor = 0.0;
    double x_far = 0.0;
    std::vector<double> tail_edges;
    /// Nodes in propagation order, nodes[0] = anchor.
    std::vector<double> nodes;
    /// free[k]: V ≡ 0 on the interval nodes[k]..nodes[k+1].
    std::vector<char> free;
};

struct JostMesh {
    SideMesh minus, plus;
    double xl = 0.0, xr = 0.0;
};

/// Rescaled solution w_j = e^{−ζ_j x}u_j sampled on a grid.
struct JostSolution {
    int j = 0;
    Side side = Side::minus;
    double anchor = 0.0;
    cplx zeta;
    std::vector<double> grid;
    std::vector<CVector> w_samples;
    double max_defect = 0.0;
    double tail_tolerance = 0.0;
};

/// The n minus-side solutions (j < n) and N−n plus-side solutions (j >= n),
/// evaluable anywhere on the window [xl, xr] and beyond on the tail sides.
class JostSet {
public:
    const RootSystem& roots() const { return ctx_->rs; }
    const CoefficientSet& coeffs() const { return ctx_->cs; }
    const JostMesh& mesh() const { return mesh_; }
    const JostOptions& options() const { return ctx_->opts; }
    double window_left() const { return mesh_.xl; }
    double window_right() const { return mesh_.xr; }
    double anchor(Side s) const { return s == Side::minus ? mesh_.minus.anchor : mesh_.plus.anchor; }
    const TailSolution& tail(int j) const { return tails_.at(j); }

    /// Rescaled columns W(x) = [w_1(x), …, w_N(x)].
    CMatrix rescaled(double x) const {
        const int N = roots().order(), n = roots().n_plus();
        CMatrix W(N, N);
        if (n > 0) W.leftCols(n) = block_at(Side::minus, x);
        if (N - n > 0) W.rightCols(N - n) = block_at(Side::plus, x);
        return W;
    }

    CVector w(int j, double x) const {
        const int n = roots().n_plus();
        if (j < n) return block_at(Side::minus, x).col(j);
        return block_at(Side::plus, x).col(j - n);
    }

    /// Solution record of index j on the given grid (default: stored mesh
    /// nodes inside the window), with ODE defect.
    JostSolution solution(int j, std::vector<double> grid = {}) const {
        const RootSystem& rs = roots();
        JostSolution s;
        s.j = j;
        s.side = j < rs.n_plus() ? Side::minus : Side::plus;
        s.anchor = anchor(s.side);
        s.zeta = rs.root(j);
        s.tail_tolerance = options().tail_tol;
        if (grid.empty()) {
            const auto& nodes = (s.side == Side::minus ? mesh_.minus : mesh_.plus).nodes;
            for (double x : nodes)
                if (x >= mesh_.xl && x <= mesh_.xr) grid.push_back(x);
            std::sort(grid.begin(), grid.end());
        }
        s.grid = grid;
        for (double x : grid) {
            s.w_samples.push_back(w(j, x));
            s.max_defect = std::max(s.max_defect, defect(j, x));
        }
        return s;
    }

    /// Relative residual of w' = (L₀ − ζ_j + V)w at x from a 5-point
    /// difference of the interpolant. Zero near breakpoints.
    double defect(int j, double x) const {
        const RootSystem& rs = roots();
        const double scale = std::max(1.0, std::abs(rs.root(0)));
        const double d = 1e-3 / scale;
        for (double b : coeffs().breakpoints())
            if (std::abs(x - b) < 3 * d) return 0.0;
        if (x - 2 * d < mesh_.xl - 1e-300 || x + 2 * d > mesh_.xr) {
            // Keep the stencil inside the evaluable range.
            const double lo = std::min(mesh_.xl, mesh_.minus.anchor), hi = std::max(mesh_.xr, mesh_.plus.anchor);
            if (x - 2 * d < lo || x + 2 * d > hi) return 0.0;
        }
        const CVector dw = (w(j, x - 2 * d) - 8.0 * w(j, x - d) + 8.0 * w(j, x + d) - w(j, x + 2 * d)) / (12.0 * d);
        const CVector wx = w(j, x);
        CMatrix M = rs.l0_matrix() + coeffs().system_perturbation(x);
        M.diagonal().array() -= rs.root(j);
        const double norm = (std::abs(rs.root(0)) + M.cwiseAbs().rowwise().sum().maxCoeff()) * wx.cwiseAbs().maxCoeff();
        return (dw - M * wx).cwiseAbs().maxCoeff() / std::max(norm, 1e-300);
    }

    static JostSet build(const RootSystem& rs, const CoefficientSet& cs, double xl, double xr,
                         const JostOptions& opts = {}, const JostMesh* reuse = nullptr) {
        if (cs.order() != rs.order()) throw InputError("coefficient order does not match root system");
        if (!(xl <= xr)) throw InputError("window must satisfy xl <= xr");
        JostSet js;
        js.ctx_ = std::make_shared<Ctx>(Ctx{rs, cs, opts, GaussCollocation(opts.stages)});
        const int N = rs.order(), n = rs.n_plus();
        js.tails_.resize(N);
        js.l0_ = rs.l0_matrix();
        if (reuse) {
            js.mesh_ = *reuse;
        } else {
            js.mesh_.xl = xl;
            js.mesh_.xr = xr;
            SideMesh& mm = js.mesh_.minus;
            mm.anchor = opts.anchor_minus.value_or(std::min(choose_anchor(rs, cs, Side::minus, opts.anchor_margin), xl));
            mm.x_far = tail_start(rs, cs, Side::minus, mm.anchor, opts.tail_tol);
            mm.tail_edges = tail_panels(rs, cs, mm.x_far, mm.anchor, opts);
            SideMesh& mp = js.mesh_.plus;
            mp.anchor = opts.anchor_plus.value_or(std::max(choose_anchor(rs, cs, Side::plus, opts.anchor_margin), xr));
            mp.x_far = tail_start(rs, cs, Side::plus, mp.anchor, opts.tail_tol);
            mp.tail_edges = tail_panels(rs, cs, mp.anchor, mp.x_far, opts);
        }
        for (int j = 0; j < N; ++j) {
            const Side side = j < n ? Side::minus : Side::plus;
            const SideMesh& sm = side == Side::minus ? js.mesh_.minus : js.mesh_.plus;
            js.tails_[j] = solve_w(rs, cs, j, side, sm.anchor, sm.tail_edges, opts);
        }
        js.propagate(Side::minus, reuse != nullptr);
        js.propagate(Side::plus, reuse != nullptr);
        return js;
    }

private:
    struct Ctx {
        RootSystem rs;
        CoefficientSet cs;
        JostOptions opts;
        GaussCollocation gl;
    };

    std::vector<int> columns(Side side) const {
        std::vector<int> c;
        const int N = roots().order(), n = roots().n_plus();
        for (int j = side == Side::minus ? 0 : n; j < (side == Side::minus ? n : N); ++j) c.push_back(j);
        return c;
    }

    std::vector<cplx> shifts(Side side) const {
        std::vector<cplx> s;
        for (int j : columns(side)) s.push_back(roots().root(j));
        return s;
    }

    CMatrix system_matrix(double x) const { return l0_ + coeffs().system_perturbation(x); }

    /// Exact propagation across a region where V ≡ 0.
    CMatrix free_step(const CMatrix& Y, double dx, const std::vector<cplx>& sh) const {
        const RootSystem& rs = roots();
        const int N = rs.order();
        CMatrix out(N, Y.cols());
        const CMatrix coef = rs.dual_rows() * Y;
        for (int c = 0; c < Y.cols(); ++c) {
            CVector e(N);
            for (int m = 0; m < N; ++m) {
                const cplx ex = (rs.root(m) - sh[c]) * dx;
                if (ex.real() > 700.0) throw IntegratorFailure("exponent overflow in free propagation");
                e(m) = std::exp(ex) * coef(m, c);
            }
            out.col(c) = rs.eigvecs() * e;
        }
        return out;
    }

    CMatrix gl_step(const CMatrix& Y, double x0, double h, const std::vector<cplx>& sh) const {
        return ctx_->gl.step([this](double x) { return system_matrix(x); }, x0, h, Y, sh);
    }

    void propagate(Side side, bool replay) {
        const auto cols = columns(side);
        if (cols.empty()) return;
        const RootSystem& rs = roots();
        const CoefficientSet& cs = coeffs();
        const int N = rs.order();
        SideMesh& sm = side == Side::minus ? mesh_.minus : mesh_.plus;
        std::vector<CMatrix>& store = side == Side::minus ? W_minus_ : W_plus_;
        const auto sh = shifts(side);
        CMatrix Y(N, cols.size());
        for (size_t c = 0; c < cols.size(); ++c) Y.col(c) = tails_[cols[c]].w_at(sm.anchor);
        store.clear();
        store.push_back(Y);
        if (replay) {
            for (size_t k = 0; k + 1 < sm.nodes.size(); ++k) {
                const double dx = sm.nodes[k + 1] - sm.nodes[k];
                Y = sm.free[k] ? free_step(Y, dx, sh) : gl_step(Y, sm.nodes[k], dx, sh);
                store.push_back(Y);
            }
            return;
        }
        sm.nodes = {sm.anchor};
        sm.free.clear();
        const double target = side == Side::minus ? mesh_.xr : mesh_.xl;
        const double dir = side == Side::minus ? 1.0 : -1.0;
        if (dir * (target - sm.anchor) <= 0.0) return;
        std::vector<double> stops;
        for (double b : cs.breakpoints())
            if (dir * (b - sm.anchor) > 0.0 && dir * (target - b) > 0.0) stops.push_back(b);
        stops.push_back(target);
        std::sort(stops.begin(), stops.end(), [dir](double a, double b) { return dir * a < dir * b; });
        double spread = 0.0;
        for (int j = 0; j < N; ++j)
            for (int m = 0; m < N; ++m) spread = std::max(spread, std::abs(rs.root(m) - rs.root(j)));
        const double tol = options().ode_tol;
        double h = std::min(options().h_max, 2.0 / std::max(spread, 1e-12));
        double x = sm.anchor;
        for (double stop : stops) {
            if (cs.vanishes_on(std::min(x, stop), std::max(x, stop))) {
                Y = free_step(Y, stop - x, sh);
                x = stop;
                sm.nodes.push_back(x);
                sm.free.push_back(1);
                store.push_back(Y);
                continue;
            }
            while (dir * (stop - x) > 0.0) {
                double step = std::min(h, dir * (stop - x));
                const bool last = step == dir * (stop - x);
                const double hs = dir * step;
                const CMatrix full = gl_step(Y, x, hs, sh);
                const CMatrix half = gl_step(Y, x, 0.5 * hs, sh);
                const CMatrix two = gl_step(half, x + 0.5 * hs, 0.5 * hs, sh);
                double err = 0.0;
                for (int c = 0; c < Y.cols(); ++c)
                    err = std::max(err, (full.col(c) - two.col(c)).cwiseAbs().maxCoeff() /
                                            (1.0 + two.col(c).cwiseAbs().maxCoeff()));
                if (!std::isfinite(err)) throw IntegratorFailure("non-finite values during propagation");
                const double fac = err > 0.0 ? 0.9 * std::pow(tol / err, 1.0 / 11.0) : 4.0;
                if (err <= tol) {
                    const double mid = x + 0.5 * hs;
                    x = last ? stop : x + hs;
                    sm.nodes.push_back(mid);
                    sm.free.push_back(0);
                    store.push_back(half);
                    sm.nodes.push_back(x);
                    sm.free.push_back(0);
                    store.push_back(two);
                    Y = two;
                    if (!last) h = std::min(options().h_max, step * std::min(4.0, fac));
                } else {
                    h = step * std::max(0.2, fac);
                    if (h < 1e-10) throw IntegratorFailure("step size underflow in propagation");
                }
            }
        }
    }

    /// Columns of one side at x.
    CMatrix block_at(Side side, double x) const {
        const SideMesh& sm = side == Side::minus ? mesh_.minus : mesh_.plus;
        const std::vector<CMatrix>& store = side == Side::minus ? W_minus_ : W_plus_;
        const auto cols = columns(side);
        const int N = roots().order();
        if (coeffs().is_zero()) {
            // Free problem: the Jost solutions are exactly e^{ζ_j x}p_j.
            CMatrix Y(N, cols.size());
            for (size_t c = 0; c < cols.size(); ++c) Y.col(c) = roots().eigvecs().col(cols[c]);
            return Y;
        }
        const double dir = side == Side::minus ? 1.0 : -1.0;
        if (dir * (x - sm.anchor) <= 0.0) {
            CMatrix Y(N, cols.size());
            for (size_t c = 0; c < cols.size(); ++c) Y.col(c) = tails_[cols[c]].w_at(x);
            return Y;
        }
        if (dir * (x - sm.nodes.back()) > 1e-12 * (1.0 + std::abs(x)))
            throw std::out_of_range("x = " + std::to_string(x) + " lies outside the propagated window");
        // Last node k with dir·(nodes[k] − x) <= 0.
        size_t lo = 0, hi = sm.nodes.size() - 1;
        while (hi - lo > 1) {
            const size_t mid = (lo + hi) / 2;
            (dir * (sm.nodes[mid] - x) <= 0.0 ? lo : hi) = mid;
        }
        size_t k = dir * (sm.nodes[hi] - x) <= 0.0 ? hi : lo;
        if (sm.nodes[k] == x || k + 1 >= sm.nodes.size()) return store[k];
        const double dx = x - sm.nodes[k];
        const auto sh = shifts(side);
        if (sm.free[k]) return free_step(store[k], dx, sh);
        return gl_step(store[k], sm.nodes[k], dx, sh);
    }

    std::shared_ptr<const Ctx> ctx_;
    JostMesh mesh_;
    std::vector<TailSolution> tails_;
    std::vector<CMatrix> W_minus_, W_plus_;
    CMatrix l0_;
};

/// Single-index variant: solution of index j on its own side over [x_min, x_max].
inline JostSolution extend(const RootSystem& rs, const CoefficientSet& cs, int j, double x_min, double x_max,
                           const JostOptions& opts = {}) {
    const JostSet js = JostSet::build(rs, cs, x_min, x_max, opts);
    return js.solution(j);
}

}  // namespace ndtrace
