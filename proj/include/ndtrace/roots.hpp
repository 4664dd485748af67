#pragma once

#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ndtrace {

struct RootOptions {
    /// Reject z when some |Re ζ_j| < re_floor·|ζ|.
    double re_floor = 1e-8;
};

/// Roots ζ_j of ζ^N = i^N z, ordered with the n roots of positive real part
/// first. All indices in the C++ API are 0-based.
class RootSystem {
public:
    RootSystem() = default;

    static RootSystem compute(int N, cplx z, const RootOptions& opts = {}) {
        if (N < 1) throw InputError("order N must be at least 1");
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw SpectralPointError("spectral parameter is not finite");
        if (z == cplx(0.0))
            throw SpectralPointError("z = 0 lies on the essential spectrum");
        const cplx w = i_pow(N) * z;
        const double mod = std::pow(std::abs(z), 1.0 / N);
        const double arg = std::arg(w);
        std::vector<cplx> r(N);
        for (int k = 0; k < N; ++k) r[k] = std::polar(mod, (arg + 2.0 * pi * k) / N);
        for (const auto& zeta : r) {
            if (std::abs(zeta.real()) < opts.re_floor * mod)
                throw SpectralPointError("z = " + format(z) + " is on or too close to the spectrum of H0"
                                         " (a characteristic root has vanishing real part)");
        }
        sort_roots(r, mod);
        return RootSystem(N, z, std::move(r));
    }

    /// Roots at a nearby z, numbered to follow `ref` continuously. Used for
    /// z-differencing so that index j tracks the same analytic branch.
    static RootSystem follow(const RootSystem& ref, cplx z, const RootOptions& opts = {}) {
        RootSystem fresh = compute(ref.order(), z, opts);
        if (fresh.n_plus() != ref.n_plus())
            throw SpectralPointError("z-stencil crosses the spectrum of H0");
        std::vector<cplx> r(ref.order());
        std::vector<bool> used(ref.order(), false);
        for (int j = 0; j < ref.order(); ++j) {
            int best = -1;
            double dist = 0.0;
            for (int k = 0; k < ref.order(); ++k) {
                if (used[k]) continue;
                const double d = std::abs(fresh.root(k) - ref.root(j));
                if (best < 0 || d < dist) { best = k; dist = d; }
            }
            used[best] = true;
            r[j] = fresh.root(best);
        }
        for (int j = 0; j < ref.n_plus(); ++j)
            if (r[j].real() <= 0.0) throw SpectralPointError("root tracking failed across z-stencil");
        return RootSystem(ref.order(), z, std::move(r));
    }

    /// Same z, caller-chosen numbering. The sign split must be respected.
    RootSystem permuted(const std::vector<int>& perm) const {
        std::vector<cplx> r(N_);
        for (int j = 0; j < N_; ++j) r[j] = roots_.at(perm.at(j));
        for (int j = 0; j < N_; ++j)
            if ((j < n_) != (r[j].real() > 0.0))
                throw InputError("permutation mixes the two sign groups");
        return RootSystem(N_, z_, std::move(r));
    }

    int order() const { return N_; }
    cplx z() const { return z_; }
    int n_plus() const { return n_; }
    const std::vector<cplx>& roots() const { return roots_; }
    cplx root(int j) const { return roots_.at(j); }
    double kappa(int j) const { return roots_.at(j).real(); }

    /// Columns are p_j = (1, ζ_j, …, ζ_j^{N−1}).
    const CMatrix& eigvecs() const { return P_; }
    /// Row j is the dual functional ⟨·, p_j*⟩.
    const CMatrix& dual_rows() const { return Pinv_; }
    CVector eigvec(int j) const { return P_.col(j); }
    CVector dualvec(int j) const { return Pinv_.row(j).adjoint(); }

    cplx vandermonde_det() const {
        cplx d = 1.0;
        for (int j = 0; j < N_; ++j)
            for (int k = j + 1; k < N_; ++k) d *= roots_[k] - roots_[j];
        return d;
    }

    CMatrix projection(int j) const {
        if (j < 0 || j >= N_) throw std::out_of_range("projection index");
        return P_.col(j) * Pinv_.row(j);
    }

    CMatrix l0_matrix() const {
        CMatrix L = CMatrix::Zero(N_, N_);
        for (int k = 0; k + 1 < N_; ++k) L(k, k + 1) = 1.0;
        L(N_ - 1, 0) += i_pow(N_) * z_;
        return L;
    }

    /// dζ_j/dz.
    cplx root_derivative(int j) const { return roots_.at(j) / (double(N_) * z_); }

    /// ρ₊ = min Re ζ_j over j < n, ρ₋ = min |Re ζ_j| over j ≥ n.
    double rho_plus() const {
        double r = INFINITY;
        for (int j = 0; j < n_; ++j) r = std::min(r, roots_[j].real());
        return r;
    }
    double rho_minus() const {
        double r = INFINITY;
        for (int j = n_; j < N_; ++j) r = std::min(r, -roots_[j].real());
        return r;
    }

    /// Smallest |κ_j − κ_k| over pairs, relative to |ζ|.
    double critical_ray_distance() const {
        double d = INFINITY;
        const double mod = std::abs(roots_[0]);
        for (int j = 0; j < N_; ++j)
            for (int k = j + 1; k < N_; ++k)
                d = std::min(d, std::abs(roots_[j].real() - roots_[k].real()) / mod);
        return d;
    }
    bool near_critical_ray(double tol = 1e-6) const { return N_ > 1 && critical_ray_distance() < tol; }

    static std::string format(cplx z) {
        return "(" + std::to_string(z.real()) + (z.imag() < 0 ? "" : "+") + std::to_string(z.imag()) + "i)";
    }

private:
    RootSystem(int N, cplx z, std::vector<cplx> r) : N_(N), z_(z), roots_(std::move(r)) {
        n_ = 0;
        for (const auto& zeta : roots_) n_ += zeta.real() > 0.0 ? 1 : 0;
        P_.resize(N_, N_);
        for (int j = 0; j < N_; ++j) {
            cplx p = 1.0;
            for (int k = 0; k < N_; ++k) { P_(k, j) = p; p *= roots_[j]; }
        }
        Pinv_ = P_.partialPivLu().inverse();
    }

    static void sort_roots(std::vector<cplx>& r, double mod) {
        const double tie = 1e-12 * mod;
        std::stable_sort(r.begin(), r.end(), [tie](cplx a, cplx b) {
            if ((a.real() > 0) != (b.real() > 0)) return a.real() > 0;
            if (std::abs(a.real() - b.real()) > tie) return a.real() > b.real();
            return a.imag() < b.imag();
        });
    }

    int N_ = 0;
    cplx z_{};
    int n_ = 0;
    std::vector<cplx> roots_;
    CMatrix P_, Pinv_;
};

}  // namespace ndtrace
