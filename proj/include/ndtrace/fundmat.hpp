#pragma once

#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/jost.hpp"
#include "ndtrace/roots.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ndtrace {

/// U(x) stored as rescaled columns W(x) with log-prefactors ζ_j x, so that
/// U = W·diag(e^{ζ_j x}) and G = U⁻¹ = diag(e^{−ζ_j x})·W⁻¹.
struct FundamentalFrame {
    double x = 0.0;
    cplx z;
    CMatrix W;
    CMatrix Winv;
    std::vector<cplx> exponents;
    cplx logdet;
    double cond = 0.0;

    CMatrix U() const {
        CMatrix out = W;
        for (int j = 0; j < W.cols(); ++j) out.col(j) *= safe_exp(exponents[j]);
        return out;
    }

    CMatrix G() const {
        CMatrix out = Winv;
        for (int j = 0; j < W.cols(); ++j) out.row(j) *= safe_exp(-exponents[j]);
        return out;
    }

private:
    static cplx safe_exp(cplx e) {
        if (std::abs(e.real()) > 300.0) throw NearSingular("frame prefactor e^{ζx} out of representable range");
        return std::exp(e);
    }
};

namespace detail {

/// log det of a small dense matrix via LU pivots.
inline cplx log_det(const CMatrix& A) {
    Eigen::PartialPivLU<CMatrix> lu(A);
    cplx s = 0.0;
    for (int i = 0; i < A.rows(); ++i) s += std::log(lu.matrixLU()(i, i));
    if (lu.permutationP().determinant() < 0) s += cplx(0.0, pi);
    return s;
}

/// 1-norm condition number of A after scaling columns to unit max-norm.
inline double equilibrated_condition(const CMatrix& A) {
    CMatrix S = A;
    for (int j = 0; j < S.cols(); ++j) {
        const double m = S.col(j).cwiseAbs().maxCoeff();
        if (m > 0) S.col(j) /= m;
    }
    Eigen::PartialPivLU<CMatrix> lu(S);
    const CMatrix inv = lu.inverse();
    const double c = S.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
    return std::isfinite(c) ? c : INFINITY;
}

}  // namespace detail

inline FundamentalFrame frame(const JostSet& js, double x, double cond_limit = 1e12) {
    const RootSystem& rs = js.roots();
    FundamentalFrame f;
    f.x = x;
    f.z = rs.z();
    f.W = js.rescaled(x);
    f.cond = detail::equilibrated_condition(f.W);
    if (!(f.cond <= cond_limit))
        throw NearSingular("fundamental matrix is near singular at z = " + RootSystem::format(rs.z()) +
                           " (condition " + std::to_string(f.cond) + "); z is close to an eigenvalue");
    f.Winv = f.W.partialPivLu().inverse();
    cplx sum = 0.0;
    for (int j = 0; j < rs.order(); ++j) {
        f.exponents.push_back(rs.root(j) * x);
        sum += rs.root(j) * x;
    }
    f.logdet = sum + detail::log_det(f.W);
    return f;
}

/// log W₀(x) = log ∏_{j<k}(ζ_k − ζ_j) + (Σζ_j)x.
inline cplx free_wronskian(const RootSystem& rs, double x) {
    cplx sum = 0.0;
    for (auto zeta : rs.roots()) sum += zeta;
    return std::log(rs.vandermonde_det()) + sum * x;
}

struct WronskianValue {
    double x = 0.0;
    cplx z;
    cplx logW;
    cplx logW0;
    cplx delta;
};

/// Δ(x, z) = W(x, z)/W₀(x, z). The prefactors Σζ_j x cancel, so Δ is the
/// ratio of the rescaled determinant to det{p_1, …, p_N}. No
/// conditioning check: Δ stays meaningful (and small) near eigenvalues.
inline WronskianValue normalized_wronskian(const JostSet& js, double x) {
    const RootSystem& rs = js.roots();
    WronskianValue v;
    v.x = x;
    v.z = rs.z();
    const CMatrix W = js.rescaled(x);
    const cplx detW = W.partialPivLu().determinant();
    v.logW0 = free_wronskian(rs, x);
    cplx sum = 0.0;
    for (auto zeta : rs.roots()) sum += zeta;
    v.logW = std::log(detW) + sum * x;
    // W is a column permutation of P in the free case (followed numberings
    // need not keep sides contiguous), so pin that case to exactly 1.
    v.delta = js.coeffs().is_zero() ? cplx(1.0) : detW / rs.eigvecs().partialPivLu().determinant();
    return v;
}

/// Δ at x for coefficients cs: builds a Jost set over the single point x.
inline WronskianValue normalized_wronskian(const RootSystem& rs, const CoefficientSet& cs, double x = 0.0,
                                           const JostOptions& opts = {}) {
    return normalized_wronskian(JostSet::build(rs, cs, x, x, opts), x);
}

struct TransitionMatrices {
    CMatrix T_plus;   // n × n
    CMatrix T_minus;  // (N−n) × (N−n)
    CMatrix t_right;  // rows j < n, all k: expansion right of the support
    CMatrix t_left;   // rows j >= n, all k: expansion left of the support
    double x_right = 0.0, x_left = 0.0;
};

/// Expansion coefficients of the Jost solutions in the free basis outside a
/// compact support. The Jost set window must cover the support.
inline TransitionMatrices transition_matrices(const JostSet& js) {
    const RootSystem& rs = js.roots();
    const CoefficientSet& cs = js.coeffs();
    if (!cs.compact()) throw UnsupportedCoefficients("transition matrices need compactly supported coefficients");
    auto [lo, hi] = cs.support();
    if (cs.is_zero()) lo = hi = 0.0;
    if (js.window_left() > lo || js.window_right() < hi)
        throw InputError("Jost set window must contain the coefficient support");
    const int N = rs.order(), n = rs.n_plus();
    TransitionMatrices t;
    t.x_right = hi;
    t.x_left = lo;
    t.t_right.resize(n, N);
    t.t_left.resize(N - n, N);
    for (int j = 0; j < N; ++j) {
        const double x = j < n ? hi : lo;
        const CVector c = rs.dual_rows() * js.w(j, x);
        for (int k = 0; k < N; ++k) {
            const cplx v = c(k) * std::exp((rs.root(j) - rs.root(k)) * x);
            if (j < n) t.t_right(j, k) = v;
            else t.t_left(j - n, k) = v;
        }
    }
    t.T_plus = t.t_right.leftCols(n);
    t.T_minus = t.t_left.rightCols(N - n);
    return t;
}

}  // namespace ndtrace
