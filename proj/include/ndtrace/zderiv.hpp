#pragma once

#include "ndtrace/coeffs.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/jost.hpp"
#include "ndtrace/roots.hpp"

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

namespace ndtrace {

struct ZDiffOptions {
    /// h_z = rel_step·max(1, |z|).
    double rel_step = 1e-3;
    /// Target agreement between the estimates at h and h/2.
    double agree_tol = 1e-8;
    /// Hard failure threshold when halving never reaches agree_tol.
    double fail_tol = 1e-5;
    int max_halvings = 3;
};

template <class T>
struct ZDerivative {
    T value;
    /// Relative disagreement of the last two step sizes.
    double disagreement = 0.0;
    double step = 0.0;
};

namespace detail {
inline double magnitude(cplx v) { return std::abs(v); }
inline double magnitude(const CMatrix& v) { return v.cwiseAbs().maxCoeff(); }
}  // namespace detail

/// Jost sets at nearby z that share the mesh (anchors, tail panels, steps)
/// and the root numbering of a centre point, so that quantities built from
/// them are smooth functions of z and can be differenced.
class JostFamily {
public:
    JostFamily(const RootSystem& rs, const CoefficientSet& cs, double xl, double xr, JostOptions opts = {})
        : cs_(cs), opts_(opts), center_(JostSet::build(rs, cs, xl, xr, opts)) {}

    const JostSet& center() const { return center_; }

    JostSet at(cplx z) const {
        const RootSystem rs = RootSystem::follow(center_.roots(), z);
        return JostSet::build(rs, cs_, center_.window_left(), center_.window_right(), opts_, &center_.mesh());
    }

    /// d/dz of f(JostSet) by fourth-order central differences along the real
    /// axis (f is analytic), step halving and one Richardson extrapolation.
    template <class F>
    auto derivative(F&& f, const ZDiffOptions& o = {}) const -> ZDerivative<std::decay_t<decltype(f(std::declval<const JostSet&>()))>> {
        using T = std::decay_t<decltype(f(center_))>;
        const cplx z = center_.roots().z();
        double h = o.rel_step * std::max(1.0, std::abs(z));
        auto central = [&](double hh) -> T {
            return T((-f(at(z + 2.0 * hh)) + 8.0 * f(at(z + hh)) - 8.0 * f(at(z - hh)) + f(at(z - 2.0 * hh))) /
                     (12.0 * hh));
        };
        T coarse = central(h);
        ZDerivative<T> out;
        for (int k = 0; k <= o.max_halvings; ++k) {
            const T fine = central(0.5 * h);
            const T rich = T(fine + (fine - coarse) / 15.0);
            const double scale = std::max(detail::magnitude(rich), 1e-300);
            out.value = rich;
            out.disagreement = detail::magnitude(T(fine - coarse)) / scale;
            out.step = 0.5 * h;
            if (out.disagreement <= o.agree_tol || detail::magnitude(T(fine - coarse)) < 1e-14) return out;
            h *= 0.5;
            coarse = fine;
        }
        if (out.disagreement > o.fail_tol)
            throw ZStepError("z-derivative estimates disagree (relative " + std::to_string(out.disagreement) + ")");
        return out;
    }

private:
    CoefficientSet cs_;
    JostOptions opts_;
    JostSet center_;
};

}  // namespace ndtrace
