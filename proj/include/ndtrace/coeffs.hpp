#pragma once

#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ndtrace {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// One scalar coefficient v_k. `shape` is the unclipped function, zero outside
/// [lo, hi]; the clip window (open interval) implements cut-offs.
struct Profile {
    std::function<cplx(double)> shape;
    double lo = inf, hi = -inf;
    double clip_lo = -inf, clip_hi = inf;
    std::vector<double> breaks;
    /// Half-width around the support beyond which |shape| <= eps; only
    /// consulted for unbounded support.
    std::function<std::pair<double, double>(double eps)> extent_fn;

    bool is_zero() const { return !shape || support().first >= support().second; }

    std::pair<double, double> support() const {
        if (!shape) return {0.0, 0.0};
        return {std::max(lo, clip_lo), std::min(hi, clip_hi)};
    }

    cplx operator()(double x) const {
        if (!shape || !(x > clip_lo && x < clip_hi) || x < lo || x > hi) return 0.0;
        return shape(x);
    }

    /// Value with the cut-off window treated as closed (one-sided limit at the
    /// cut edges).
    cplx closed(double x) const {
        if (!shape || x < clip_lo || x > clip_hi || x < lo || x > hi) return 0.0;
        return shape(x);
    }

    std::pair<double, double> extent(double eps) const {
        auto [a, b] = support();
        if (std::isfinite(a) && std::isfinite(b)) return {a, b};
        auto [ea, eb] = extent_fn ? extent_fn(eps) : std::pair<double, double>{-1e6, 1e6};
        return {std::max(a, ea), std::min(b, eb)};
    }
};

enum class PresetName { zero, bump, gaussian, sech2, custom, table };

struct PresetParams {
    double radius = 1.0;
    cplx amplitude = 1.0;
    double sigma = 1.0;
    double center = 0.0;
    cplx lambda = -2.0;
    /// 1-based coefficient indices that receive the shape.
    std::vector<int> indices{1};
};

namespace profiles {

inline Profile bump(double R, cplx c, double center = 0.0) {
    if (!(R > 0.0) || !std::isfinite(R)) throw InvalidPreset("bump radius must be positive");
    Profile p;
    p.shape = [=](double x) -> cplx {
        const double t = (x - center) / R;
        if (std::abs(t) >= 1.0) return 0.0;
        return c * std::exp(-1.0 / (1.0 - t * t));
    };
    p.lo = center - R;
    p.hi = center + R;
    return p;
}

inline Profile gaussian(cplx c, double sigma, double center = 0.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidPreset("gaussian sigma must be positive");
    Profile p;
    p.shape = [=](double x) -> cplx {
        const double t = (x - center) / sigma;
        return c * std::exp(-t * t);
    };
    p.lo = -inf;
    p.hi = inf;
    p.extent_fn = [=](double eps) {
        const double r = sigma * std::sqrt(std::max(0.0, std::log(std::max(std::abs(c), 1e-300) / eps)));
        return std::pair<double, double>{center - r, center + r};
    };
    return p;
}

inline Profile sech2(cplx lambda, double center = 0.0) {
    Profile p;
    p.shape = [=](double x) -> cplx {
        const double t = std::exp(-2.0 * std::abs(x - center));
        return lambda * (4.0 * t / ((1.0 + t) * (1.0 + t)));
    };
    p.lo = -inf;
    p.hi = inf;
    p.extent_fn = [=](double eps) {
        const double r = 0.5 * std::max(0.0, std::log(4.0 * std::max(std::abs(lambda), 1e-300) / eps));
        return std::pair<double, double>{center - r, center + r};
    };
    return p;
}

/// Piecewise cubic Hermite interpolation of a table, zero outside it. Node
/// slopes from the three-point (second-order) difference formula.
inline Profile table(std::vector<double> xs, std::vector<cplx> vals) {
    if (xs.size() != vals.size() || xs.size() < 4)
        throw InvalidPreset("table needs at least 4 points and matching value count");
    for (size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw InvalidPreset("table abscissae must be strictly increasing");
    using boost::math::interpolators::cubic_hermite;
    const size_t n = xs.size();
    auto slopes = [&](auto part) {
        std::vector<double> d(n);
        for (size_t i = 0; i < n; ++i) {
            const size_t a = i == 0 ? 0 : (i == n - 1 ? n - 3 : i - 1);
            const double x0 = xs[a], x1 = xs[a + 1], x2 = xs[a + 2], x = xs[i];
            const double y0 = part(vals[a]), y1 = part(vals[a + 1]), y2 = part(vals[a + 2]);
            // derivative of the quadratic through the three points
            d[i] = y0 * (2 * x - x1 - x2) / ((x0 - x1) * (x0 - x2)) + y1 * (2 * x - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
                   y2 * (2 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
        }
        return d;
    };
    auto re_of = [](cplx c) { return c.real(); };
    auto im_of = [](cplx c) { return c.imag(); };
    std::vector<double> re(n), im(n);
    for (size_t i = 0; i < n; ++i) { re[i] = vals[i].real(); im[i] = vals[i].imag(); }
    auto dre = slopes(re_of), dim = slopes(im_of);
    const double a = xs.front(), b = xs.back();
    using Interp = cubic_hermite<std::vector<double>>;
    auto fr = std::make_shared<Interp>(std::vector<double>(xs), std::move(re), std::move(dre));
    auto fi = std::make_shared<Interp>(std::move(xs), std::move(im), std::move(dim));
    Profile p;
    p.shape = [fr, fi](double x) -> cplx { return {(*fr)(x), (*fi)(x)}; };
    p.lo = a;
    p.hi = b;
    p.breaks = {a, b};
    return p;
}

}  // namespace profiles

/// The coefficients v_1..v_N of the perturbation. Immutable value type.
class CoefficientSet {
public:
    CoefficientSet() = default;

    static CoefficientSet from_profiles(int N, std::vector<Profile> v, double alpha = 1.0) {
        if (N < 1) throw InvalidPreset("order must be at least 1");
        if (static_cast<int>(v.size()) != N) throw InvalidPreset("need exactly N coefficient profiles");
        if (!(alpha > 0.5)) throw InvalidPreset("decay weight alpha must exceed 1/2");
        CoefficientSet cs;
        cs.N_ = N;
        cs.v_ = std::move(v);
        cs.alpha_ = alpha;
        return cs;
    }

    int order() const { return N_; }
    double alpha() const { return alpha_; }
    std::optional<double> cutoff_radius() const { return cutoff_; }
    const Profile& profile(int k) const { return v_.at(k - 1); }

    /// v_k(x), k is 1-based.
    cplx value(int k, double x) const { return v_.at(k - 1)(x); }

    CVector values(double x) const {
        CVector out(N_);
        for (int k = 0; k < N_; ++k) out(k) = v_[k](x);
        return out;
    }

    CVector values_closed(double x) const {
        CVector out(N_);
        for (int k = 0; k < N_; ++k) out(k) = v_[k].closed(x);
        return out;
    }

    /// Last row of V(x): −i^N (v_1, …, v_N).
    CRow perturbation_row(double x) const { return (-i_pow(N_)) * values(x).transpose(); }

    CMatrix system_perturbation(double x) const {
        CMatrix V = CMatrix::Zero(N_, N_);
        V.row(N_ - 1) = perturbation_row(x);
        return V;
    }

    /// ‖V(x)‖_∞ = Σ_k |v_k(x)|.
    double abs_sum(double x) const {
        double s = 0.0;
        for (const auto& p : v_) s += std::abs(p(x));
        return s;
    }

    bool is_zero() const {
        return std::all_of(v_.begin(), v_.end(), [](const Profile& p) { return p.is_zero(); });
    }
    bool top_vanishes() const { return v_.back().is_zero(); }

    /// Closed hull of all supports; (0,0) with empty()==true when zero.
    std::pair<double, double> support() const {
        double a = inf, b = -inf;
        for (const auto& p : v_) {
            if (p.is_zero()) continue;
            auto [pa, pb] = p.support();
            a = std::min(a, pa);
            b = std::max(b, pb);
        }
        if (a > b) return {0.0, 0.0};
        return {a, b};
    }

    /// R with v ≡ 0 for |x| > R, if the support is bounded.
    std::optional<double> support_radius() const {
        if (is_zero()) return 0.0;
        auto [a, b] = support();
        if (!std::isfinite(a) || !std::isfinite(b)) return std::nullopt;
        return std::max(std::abs(a), std::abs(b));
    }

    bool compact() const { return support_radius().has_value(); }

    /// Interval outside of which every |v_k| <= eps.
    std::pair<double, double> extent(double eps) const {
        if (is_zero()) return {0.0, 0.0};
        double a = inf, b = -inf;
        for (const auto& p : v_) {
            if (p.is_zero()) continue;
            auto [pa, pb] = p.extent(eps);
            a = std::min(a, pa);
            b = std::max(b, pb);
        }
        return {a, b};
    }

    /// V ≡ 0 on [a, b].
    bool vanishes_on(double a, double b) const {
        for (const auto& p : v_) {
            if (p.is_zero()) continue;
            auto [pa, pb] = p.support();
            if (b > pa && a < pb) return false;
        }
        return true;
    }

    /// Finite points where some v_k may lose smoothness (support and cut edges,
    /// table ends), sorted and unique.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (const auto& p : v_) {
            if (p.is_zero()) continue;
            auto [a, b] = p.support();
            for (double x : {a, b})
                if (std::isfinite(x)) out.push_back(x);
            for (double x : p.breaks)
                if (x > a && x < b) out.push_back(x);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    CoefficientSet cutoff(double r) const {
        if (!(r > 0.0)) throw InvalidPreset("cut-off radius must be positive");
        CoefficientSet cs = *this;
        for (auto& p : cs.v_) {
            p.clip_lo = std::max(p.clip_lo, -r);
            p.clip_hi = std::min(p.clip_hi, r);
        }
        cs.cutoff_ = cutoff_ ? std::min(*cutoff_, r) : r;
        return cs;
    }

    /// Copy with every coefficient multiplied by s.
    CoefficientSet scaled(cplx s) const {
        CoefficientSet cs = *this;
        for (auto& p : cs.v_) {
            if (!p.shape) continue;
            auto f = p.shape;
            p.shape = [f, s](double x) { return s * f(x); };
        }
        return cs;
    }

private:
    int N_ = 0;
    std::vector<Profile> v_;
    double alpha_ = 1.0;
    std::optional<double> cutoff_;
};

inline CoefficientSet preset(PresetName name, int N, const PresetParams& prm = {}) {
    if (N < 1) throw InvalidPreset("order must be at least 1");
    std::vector<Profile> v(N);
    if (name == PresetName::zero) return CoefficientSet::from_profiles(N, std::move(v));
    if (name == PresetName::custom || name == PresetName::table)
        throw InvalidPreset("custom and table coefficients are built from explicit profiles");
    if (prm.indices.empty()) throw InvalidPreset("preset needs at least one coefficient index");
    for (int k : prm.indices) {
        if (k < 1 || k > N) throw InvalidPreset("coefficient index out of range 1..N");
        switch (name) {
            case PresetName::bump: v[k - 1] = profiles::bump(prm.radius, prm.amplitude, prm.center); break;
            case PresetName::gaussian: v[k - 1] = profiles::gaussian(prm.amplitude, prm.sigma, prm.center); break;
            case PresetName::sech2: v[k - 1] = profiles::sech2(prm.lambda, prm.center); break;
            default: break;
        }
    }
    return CoefficientSet::from_profiles(N, std::move(v));
}

namespace detail {

/// ∫_a^b f with Gauss–Kronrod, split at the given interior points; b may be ±∞.
template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> cuts, double rel_tol, double* err_out) {
    using boost::math::quadrature::gauss_kronrod;
    if (a > b) std::swap(a, b);
    std::vector<double> pts{a};
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts)
        if (c > a && c < b) pts.push_back(c);
    pts.push_back(b);
    double total = 0.0, err = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double e = 0.0;
        total += gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 20, rel_tol, &e);
        err += e;
    }
    if (err_out) *err_out = err;
    return total;
}

}  // namespace detail

/// ∫ over the tail (−∞, a] (side minus) or [a, ∞) (side plus) of ‖V(y)‖_∞.
inline double l1_tail(const CoefficientSet& cs, Side side, double a) {
    if (cs.is_zero()) return 0.0;
    auto [lo, hi] = cs.support();
    double from, to;
    if (side == Side::minus) {
        from = lo;
        to = std::min(a, hi);
    } else {
        from = std::max(a, lo);
        to = hi;
    }
    if (!(from < to)) return 0.0;
    double err = 0.0;
    const double val = detail::integrate_split([&](double y) { return cs.abs_sum(y); }, from, to,
                                               cs.breakpoints(), 1e-10, &err);
    if (!std::isfinite(val) || err > 1e-8 * val + 1e-200)
        throw DivergentTail("tail integral of |V| did not converge (value " + std::to_string(val) +
                            ", error " + std::to_string(err) + ")");
    return val;
}

/// ∫|v_k(x)|²(1+x²)^α dx, the short-range weight.
inline double weighted_norm(const CoefficientSet& cs, int k) {
    const Profile& p = cs.profile(k);
    if (p.is_zero()) return 0.0;
    auto [a, b] = p.support();
    double err = 0.0;
    const double alpha = cs.alpha();
    const double val = detail::integrate_split(
        [&](double x) { return std::norm(p(x)) * std::pow(1.0 + x * x, alpha); }, a, b, cs.breakpoints(), 1e-10,
        &err);
    if (!std::isfinite(val) || err > 1e-6 * val + 1e-200) throw DivergentTail("weighted norm is not finite");
    return val;
}

}  // namespace ndtrace
