#pragma once

#include "ndtrace/common.hpp"
#include "ndtrace/quadrature.hpp"

#include <vector>

namespace ndtrace {

/// s-stage Gauss–Legendre collocation (implicit RK of order 2s) for linear
/// systems Y' = (M(x) − ζ_c I) Y, one shift ζ_c per column of Y.
class GaussCollocation {
public:
    explicit GaussCollocation(int stages = 5) : s_(stages) {
        const GaussRule& g = gauss_legendre(s_);
        c_.resize(s_);
        b_.resize(s_);
        for (int i = 0; i < s_; ++i) {
            c_[i] = 0.5 * (1.0 + g.x[i]);
            b_[i] = 0.5 * g.w[i];
        }
        // a_ik = ∫_0^{c_i} ℓ_k(τ) dτ, exact with an s-point rule on [0, c_i].
        A_.setZero(s_, s_);
        for (int i = 0; i < s_; ++i) {
            for (int q = 0; q < s_; ++q) {
                const double tau = 0.5 * c_[i] * (1.0 + g.x[q]);
                const auto l = lagrange_basis(c_, tau);
                for (int k = 0; k < s_; ++k) A_(i, k) += 0.5 * c_[i] * g.w[q] * l[k];
            }
        }
    }

    int stages() const { return s_; }
    int order() const { return 2 * s_; }
    const std::vector<double>& nodes() const { return c_; }

    /// One step of length h (may be negative) from x0. `M_at(x)` returns the
    /// unshifted system matrix.
    template <class MatFn>
    CMatrix step(MatFn&& M_at, double x0, double h, const CMatrix& Y, const std::vector<cplx>& shifts) const {
        std::vector<CMatrix> M(s_);
        for (int i = 0; i < s_; ++i) M[i] = M_at(x0 + c_[i] * h);
        return step_with(M, h, Y, shifts);
    }

    CMatrix step_with(const std::vector<CMatrix>& M, double h, const CMatrix& Y, const std::vector<cplx>& shifts) const {
        const int N = static_cast<int>(Y.rows());
        CMatrix out(N, Y.cols());
        CMatrix big(s_ * N, s_ * N);
        CVector rhs(s_ * N);
        for (int col = 0; col < Y.cols(); ++col) {
            const cplx zeta = shifts[col];
            for (int i = 0; i < s_; ++i) {
                CMatrix Mi = M[i];
                Mi.diagonal().array() -= zeta;
                for (int k = 0; k < s_; ++k) {
                    big.block(i * N, k * N, N, N) = (-h * A_(i, k)) * Mi;
                    if (i == k) big.block(i * N, k * N, N, N).diagonal().array() += 1.0;
                }
                rhs.segment(i * N, N) = Mi * Y.col(col);
            }
            const CVector K = big.partialPivLu().solve(rhs);
            CVector y = Y.col(col);
            for (int i = 0; i < s_; ++i) y += (h * b_[i]) * K.segment(i * N, N);
            out.col(col) = y;
        }
        return out;
    }

private:
    int s_;
    std::vector<double> c_, b_;
    Eigen::MatrixXd A_;
};

}  // namespace ndtrace
