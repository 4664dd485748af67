#pragma once

#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/fundmat.hpp"
#include "ndtrace/jost.hpp"
#include "ndtrace/quadrature.hpp"
#include "ndtrace/report.hpp"
#include "ndtrace/roots.hpp"
#include "ndtrace/zderiv.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <tuple>
#include <vector>

namespace ndtrace {

/// Free resolvent kernel R₀ from the roots alone.
class FreeKernel {
public:
    explicit FreeKernel(RootSystem rs) : rs_(std::move(rs)) {
        const int N = rs_.order();
        last_col_.resize(N);
        for (int j = 0; j < N; ++j) {
            cplx d = 1.0;
            for (int k = 0; k < N; ++k)
                if (k != j) d *= rs_.root(j) - rs_.root(k);
            last_col_[j] = 1.0 / d;
        }
    }

    const RootSystem& roots() const { return rs_; }

    CMatrix matrix_kernel(double x, double y) const {
        if (x == y) throw InputError("matrix kernel is discontinuous on the diagonal; use a one-sided limit");
        const int N = rs_.order(), n = rs_.n_plus();
        CMatrix R = CMatrix::Zero(N, N);
        const bool below = x < y;
        for (int j = below ? 0 : n; j < (below ? n : N); ++j)
            R += std::exp(rs_.root(j) * (x - y)) * rs_.eigvec(j) * rs_.dual_rows().row(j);
        return below ? CMatrix(-R) : R;
    }

    /// Entry (k, N) of the matrix kernel, k 0-based: ∂_x^k of the scalar
    /// kernel divided by i^N, from the closed form (Pinv)_{jN} = 1/∏_{k≠j}(ζ_j − ζ_k).
    cplx column_entry(int k, double x, double y) const {
        const int N = rs_.order(), n = rs_.n_plus();
        cplx s = 0.0;
        const bool below = x < y;
        for (int j = below ? 0 : n; j < (below ? n : N); ++j)
            s += std::exp(rs_.root(j) * (x - y)) * std::pow(rs_.root(j), k) * last_col_[j];
        return below ? -s : s;
    }

    /// Scalar kernel i^N R₀_{1,N}; for N >= 2 continuous on the diagonal.
    cplx scalar_kernel(double x, double y) const {
        if (x == y && rs_.order() == 1) throw InputError("scalar kernel of order 1 jumps on the diagonal");
        return i_pow(rs_.order()) * column_entry(0, x, y);
    }

    /// R₀(y, y) from the x > y side, built from the LU dual basis so that it
    /// cancels exactly against a free Jost frame.
    cplx diagonal() const {
        const int N = rs_.order(), n = rs_.n_plus();
        cplx s = 0.0;
        for (int j = n; j < N; ++j) s += rs_.eigvecs()(0, j) * rs_.dual_rows()(j, N - 1);
        return i_pow(N) * s;
    }

private:
    RootSystem rs_;
    std::vector<cplx> last_col_;
};

/// R(x, y) = −U(x)P₊G(y) for x < y and U(x)P₋G(y) for x > y, evaluated from
/// the rescaled Jost frame with the exponentials combined first.
class ResolventKernel {
public:
    explicit ResolventKernel(JostSet js, double cond_limit = 1e12) : js_(std::move(js)), cond_limit_(cond_limit) {}

    const JostSet& jost() const { return js_; }
    const RootSystem& roots() const { return js_.roots(); }

    struct Columns {
        CMatrix W, Winv;
    };

    Columns columns(double x) const {
        const FundamentalFrame f = frame(js_, x, cond_limit_);
        return {f.W, f.Winv};
    }

    CMatrix matrix_kernel(double x, double y) const {
        if (x == y) throw InputError("matrix kernel is discontinuous on the diagonal; use a one-sided limit");
        return assemble(columns(x).W, columns(y).Winv, x - y, x < y);
    }

    /// R(x, x − 0) (from_below = false) or R(x, x + 0) (from_below = true,
    /// i.e. the x < y branch).
    CMatrix diagonal_limit(double x, bool x_below_y) const {
        const Columns c = columns(x);
        return assemble(c.W, c.Winv, 0.0, x_below_y);
    }

    cplx scalar_kernel(double x, double y) const {
        if (x == y) {
            if (roots().order() == 1) throw InputError("scalar kernel of order 1 jumps on the diagonal");
            return diagonal(x);
        }
        const int N = roots().order();
        return i_pow(N) * matrix_kernel(x, y)(0, N - 1);
    }

    /// Scalar R(y, y) from the x > y side.
    cplx diagonal(double y) const {
        const Columns c = columns(y);
        const int N = roots().order(), n = roots().n_plus();
        cplx s = 0.0;
        for (int j = n; j < N; ++j) s += c.W(0, j) * c.Winv(j, N - 1);
        return i_pow(N) * s;
    }

private:
    CMatrix assemble(const CMatrix& Wx, const CMatrix& Winvy, double d, bool below) const {
        const RootSystem& rs = roots();
        const int N = rs.order(), n = rs.n_plus();
        CMatrix R = CMatrix::Zero(N, N);
        for (int j = below ? 0 : n; j < (below ? n : N); ++j)
            R += std::exp(rs.root(j) * d) * Wx.col(j) * Winvy.row(j);
        return below ? CMatrix(-R) : R;
    }

    JostSet js_;
    double cond_limit_;
};

/// φ = R f on a set of output points, with φ^{(k)} for k < N from the rows
/// of the matrix kernel.
struct ResolventApplication {
    std::vector<double> x;
    /// derivs(k, i) = φ^{(k)}(x_i).
    CMatrix derivs;
};

/// f is supported in [a, b] ⊂ window of the kernel's Jost set; output points
/// must lie in the window as well.
inline ResolventApplication apply_resolvent(const ResolventKernel& rk, const std::function<cplx(double)>& f,
                                            double a, double b, const std::vector<double>& xs, int panels_per_unit = 4,
                                            int q = 16) {
    const RootSystem& rs = rk.roots();
    const int N = rs.order(), n = rs.n_plus();
    ResolventApplication out;
    out.x = xs;
    out.derivs = CMatrix::Zero(N, xs.size());
    if (!(a < b)) return out;
    const auto edges = panel_edges(a, b, rk.jost().coeffs().breakpoints(), 1.0 / panels_per_unit);
    const GaussRule& g = gauss_legendre(q);
    // Source side of the separable kernel at every panel node: Winv_{jN}(y) f(y).
    struct Node { double y, w; CVector gy; };
    std::vector<std::vector<Node>> panel(edges.size() - 1);
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
        const double c = 0.5 * (edges[p] + edges[p + 1]), h = 0.5 * (edges[p + 1] - edges[p]);
        for (int i = 0; i < q; ++i) {
            const double y = c + h * g.x[i];
            const CVector gy = rk.columns(y).Winv.col(N - 1) * f(y);
            panel[p].push_back({y, h * g.w[i], gy});
        }
    }
    const cplx iN = i_pow(N);
    for (size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        const CMatrix Wx = rk.columns(x).W;
        // acc(j) = ∫ e^{ζ_j(x−y)} Winv_{jN}(y) f(y) dy over the side of x that j uses.
        CVector acc = CVector::Zero(N);
        for (size_t p = 0; p < panel.size(); ++p) {
            const double e0 = edges[p], e1 = edges[p + 1];
            if (x > e0 && x < e1) {
                std::vector<double> loc(q);
                for (int k = 0; k < q; ++k) loc[k] = panel[p][k].y;
                for (auto [u0, u1, upper] : {std::tuple{e0, x, false}, std::tuple{x, e1, true}}) {
                    const double cc = 0.5 * (u0 + u1), hh = 0.5 * (u1 - u0);
                    for (int k = 0; k < q; ++k) {
                        const double y = cc + hh * g.x[k];
                        const auto l = lagrange_basis(loc, y);
                        CVector gy = CVector::Zero(N);
                        for (int m = 0; m < q; ++m) gy += l[m] * panel[p][m].gy;
                        for (int j = upper ? 0 : n; j < (upper ? n : N); ++j)
                            acc(j) += hh * g.w[k] * std::exp(rs.root(j) * (x - y)) * gy(j);
                    }
                }
                continue;
            }
            const bool upper = e0 >= x;
            for (const Node& nd : panel[p])
                for (int j = upper ? 0 : n; j < (upper ? n : N); ++j)
                    acc(j) += nd.w * std::exp(rs.root(j) * (x - nd.y)) * nd.gy(j);
        }
        for (int j = 0; j < N; ++j) {
            const cplx sign = j < n ? -1.0 : 1.0;
            out.derivs.col(i) += (iN * sign * acc(j)) * Wx.col(j);
        }
    }
    return out;
}

/// Max over interior points of |(H − z)φ − f| / max|f|, with φ^{(N)} from a
/// sixth-order difference of φ^{(N−1)} on a uniform output grid.
inline double resolvent_defect(const ResolventKernel& rk, const std::function<cplx(double)>& f, double a, double b,
                               double xl, double xr, int points = 41) {
    const RootSystem& rs = rk.roots();
    const CoefficientSet& cs = rk.jost().coeffs();
    const int N = rs.order();
    const double d = 1e-3;
    std::vector<double> xs;
    std::vector<double> centers;
    for (int i = 0; i < points; ++i) centers.push_back(xl + (xr - xl) * i / (points - 1));
    for (double c : centers)
        for (int s = -3; s <= 3; ++s) xs.push_back(c + s * d);
    const auto phi = apply_resolvent(rk, f, a, b, xs);
    const double c6[] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
    double fmax = 0.0, worst = 0.0;
    for (double c : centers) fmax = std::max(fmax, std::abs(f(c)));
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        const double x = centers[ci];
        bool near_break = false;
        for (double bp : cs.breakpoints()) near_break |= std::abs(x - bp) < 4 * d;
        near_break |= std::abs(x - a) < 4 * d || std::abs(x - b) < 4 * d;
        if (near_break) continue;
        cplx dN = 0.0;
        for (int s = 0; s < 7; ++s) dN += c6[s] * phi.derivs(N - 1, ci * 7 + s);
        dN /= d;
        cplx Hphi = dN / i_pow(N);
        const CVector v = cs.values(x);
        for (int k = 1; k <= N; ++k) Hphi += v(k - 1) * phi.derivs(k - 1, ci * 7 + 3);
        const cplx res = Hphi - rs.z() * phi.derivs(0, ci * 7 + 3) - f(x);
        worst = std::max(worst, std::abs(res));
    }
    return worst / std::max(fmax, 1e-300);
}

struct QuadOptions {
    double rel_tol = 1e-10;
    double panel = 1.0;
    int nodes = 16;
    int max_refinements = 5;
};

struct DiagonalIntegral {
    cplx value;
    double quad_error = 0.0;
    /// |f(x1)|/ρ₋ + |f(x2)|/ρ₊ with f = R − R₀ on the diagonal: the size of
    /// the exponentially decaying remainder beyond the interval.
    double tail_estimate = 0.0;
};

namespace detail {

template <class F>
cplx refined_gauss(F&& f, double x1, double x2, const std::vector<double>& cuts, const QuadOptions& o,
                   double* err_out) {
    double h = o.panel;
    cplx prev = composite_gauss(f, panel_edges(x1, x2, cuts, h), o.nodes);
    for (int k = 0; k < o.max_refinements; ++k) {
        h *= 0.5;
        const cplx next = composite_gauss(f, panel_edges(x1, x2, cuts, h), o.nodes);
        const double err = std::abs(next - prev);
        prev = next;
        if (err <= o.rel_tol * std::max(1.0, std::abs(next)) || err < 1e-15) {
            *err_out = err;
            return next;
        }
        *err_out = err;
    }
    throw QuadratureFailure("diagonal integral did not converge under panel refinement");
}

}  // namespace detail

/// ∫_{x1}^{x2} (R(y,y) − R₀(y,y)) dy with Gauss–Legendre panels split at the
/// coefficient breakpoints and refined until two levels agree.
inline DiagonalIntegral diagonal_difference_integral(const ResolventKernel& rk, const FreeKernel& rk0, double x1,
                                                     double x2, const QuadOptions& o = {}) {
    if (!(x1 < x2)) throw InputError("diagonal integral needs x1 < x2");
    const cplx r0 = rk0.diagonal();
    auto f = [&](double y) { return rk.diagonal(y) - r0; };
    DiagonalIntegral out;
    out.value = detail::refined_gauss(f, x1, x2, rk.jost().coeffs().breakpoints(), o, &out.quad_error);
    const RootSystem& rs = rk.roots();
    const double rho = rs.rho_plus() + rs.rho_minus();
    out.tail_estimate = (std::abs(f(x1)) + std::abs(f(x2))) / rho;
    return out;
}

/// Finite-interval identity: ∫_{x1}^{x2} R(y,y) dy against
///   −Σ_j T_j(x) + Σ_{j>n} T_j(x2) + Σ_{j<=n} T_j(x1),
/// T_j(x) = (G(x)U̇(x))_{jj} = ζ̇_j x + (W⁻¹Ẇ)_{jj}(x), with Ẇ from z-differences.
inline VerificationReport resint_identity_check(const RootSystem& rs, const CoefficientSet& cs, double x1, double x2,
                                                double x, const JostOptions& jo = {}, const QuadOptions& qo = {},
                                                const ZDiffOptions& zo = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (rs.order() < 2) throw InputError("the finite-interval identity needs a continuous diagonal (N >= 2)");
    if (!cs.compact()) throw UnsupportedCoefficients("finite-interval identity is checked for compact support");
    if (rs.near_critical_ray()) throw SpectralPointError("z is on a critical ray; Jost solutions are not analytic there");
    if (!(x1 < x2)) throw InputError("need x1 < x2");
    const double xl = std::min({x1, x2, x}), xr = std::max({x1, x2, x});
    const JostFamily fam(rs, cs, xl, xr, jo);
    const ResolventKernel rk(fam.center());
    double qerr = 0.0;
    const cplx lhs = detail::refined_gauss([&](double y) { return rk.diagonal(y); }, x1, x2, cs.breakpoints(), qo, &qerr);

    const int N = rs.order(), n = rs.n_plus();
    std::vector<double> pts{x, x1, x2};
    auto Wdot = fam.derivative(
        [&](const JostSet& js) {
            CMatrix M(N, 3 * N);
            for (int i = 0; i < 3; ++i) M.middleCols(i * N, N) = js.rescaled(pts[i]);
            return M;
        },
        zo);
    auto T = [&](int i, int j) {
        const CMatrix Winv = frame(fam.center(), pts[i]).Winv;
        const cplx diag = (Winv.row(j) * Wdot.value.middleCols(i * N, N).col(j))(0);
        return rs.root_derivative(j) * pts[i] + diag;
    };
    cplx rhs = 0.0;
    for (int j = 0; j < N; ++j) rhs -= T(0, j);
    for (int j = n; j < N; ++j) rhs += T(2, j);
    for (int j = 0; j < n; ++j) rhs += T(1, j);
    auto rep = VerificationReport::make(Identity::resint, {rs.z()}, lhs, rhs,
                                        std::max(qerr, Wdot.disagreement * std::abs(rhs)));
    rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace ndtrace
