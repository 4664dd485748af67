#pragma once

#include "ndtrace/coeffs.hpp"
#include "ndtrace/common.hpp"
#include "ndtrace/errors.hpp"
#include "ndtrace/fundmat.hpp"
#include "ndtrace/jost.hpp"
#include "ndtrace/parallel.hpp"
#include "ndtrace/report.hpp"
#include "ndtrace/resolvent.hpp"
#include "ndtrace/roots.hpp"
#include "ndtrace/zderiv.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ndtrace {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline RootSystem regular_roots(int N, cplx z) {
    RootSystem rs = RootSystem::compute(N, z);
    if (rs.near_critical_ray())
        throw SpectralPointError("z = " + RootSystem::format(z) + " lies on a critical ray");
    return rs;
}

}  // namespace detail

/// Δ(x, z). On a critical ray the Jost solutions jump but Δ does not; there
/// the value is the mean of the one-sided values at arg z ± δ, and `gap`
/// receives their difference.
inline cplx delta_value(const CoefficientSet& cs, cplx z, double x = 0.0, const JostOptions& jo = {},
                        double* gap = nullptr, double delta = 1e-6) {
    const int N = cs.order();
    const RootSystem rs = RootSystem::compute(N, z);
    if (gap) *gap = 0.0;
    if (!rs.near_critical_ray()) return normalized_wronskian(rs, cs, x, jo).delta;
    const cplx a = normalized_wronskian(RootSystem::compute(N, z * std::polar(1.0, delta)), cs, x, jo).delta;
    const cplx b = normalized_wronskian(RootSystem::compute(N, z * std::polar(1.0, -delta)), cs, x, jo).delta;
    if (gap) *gap = std::abs(a - b);
    return 0.5 * (a + b);
}

struct TraceOptions {
    /// Point at which Δ(x, z) is differentiated; the identity holds for every x.
    double x = 0.0;
    JostOptions jost;
    QuadOptions quad;
    ZDiffOptions zdiff;
    /// Spacing of the two samples used to fit the exponential tail beyond ±A.
    double tail_probe = 0.5;
};

/// ∫_{−A}^{A} (R − R₀)(y, y) dy plus fitted exponential tails, against
/// −Δ̇(x, z)/Δ(x, z). The two sides share only the root system.
inline VerificationReport trace_check(const CoefficientSet& cs, cplx z, double A, const TraceOptions& o = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(A > 0)) throw InputError("trace check window must be positive");
    const RootSystem rs = detail::regular_roots(cs.order(), z);

    const ResolventKernel rk(JostSet::build(rs, cs, -A, A, o.jost));
    const FreeKernel r0(rs);
    const DiagonalIntegral d = diagonal_difference_integral(rk, r0, -A, A, o.quad);
    auto f = [&](double y) { return rk.diagonal(y) - r0.diagonal(); };
    // Each tail modelled as f(±A)e^{−μ|y∓A|} with μ from a second sample.
    cplx tails = 0.0;
    double tail_size = 0.0;
    const double rho = std::min(rs.rho_plus(), rs.rho_minus());
    for (double s : {-1.0, 1.0}) {
        const cplx fa = f(s * A), fb = f(s * (A - o.tail_probe));
        if (fa == cplx(0.0)) continue;
        const cplx mu = std::log(fb / fa) / o.tail_probe;
        if (fb != cplx(0.0) && mu.real() > 0.1 * rho) {
            tails += fa / mu;
            tail_size += std::abs(fa / mu);
        } else {
            tail_size += std::abs(fa) / rho;
        }
    }
    const cplx lhs = d.value + tails;

    const JostFamily fam(rs, cs, o.x, o.x, o.jost);
    const cplx delta = normalized_wronskian(fam.center(), o.x).delta;
    const auto dd = fam.derivative([&](const JostSet& js) { return normalized_wronskian(js, o.x).delta; }, o.zdiff);
    const cplx rhs = -dd.value / delta;

    auto rep = VerificationReport::make(Identity::trace_formula, {z}, lhs, rhs,
                                        std::max({d.quad_error, tail_size, dd.disagreement * std::abs(rhs)}));
    rep.runtime = detail::seconds_since(t0);
    return rep;
}

struct FredholmOptions {
    /// Coarsest trapezoid step; 0 picks min(0.25/max(1, |ζ|), length/32).
    double h0 = 0.0;
    int levels = 3;
    int max_levels = 5;
    double rel_tol = 1e-6;
    /// Truncation level for coefficients with unbounded support.
    double tail_eps = 1e-16;
};

struct FredholmResult {
    cplx value;
    double error_estimate = 0.0;
    int nodes = 0;
    double a = 0.0, b = 0.0;
};

namespace detail {

/// det(I + M) on m + 1 trapezoid nodes, M symmetrised with √w on both sides.
inline cplx nystrom_det(const FreeKernel& r0, const CoefficientSet& cs, double a, double b, int m) {
    const int N = cs.order();
    const double h = (b - a) / m;
    std::vector<double> sw(m + 1, std::sqrt(h));
    sw.front() = sw.back() = std::sqrt(0.5 * h);
    // g(k, m + d) = ∂_x^k R₀ at x − y = d·h; only x − y matters.
    CMatrix g(N - 1, 2 * m + 1);
    for (int dd = -m; dd <= m; ++dd)
        for (int k = 0; k + 1 < N; ++k) g(k, m + dd) = i_pow(N) * r0.column_entry(k, dd * h, 0.0);
    CMatrix V(m + 1, N - 1);
    for (int i = 0; i <= m; ++i) V.row(i) = cs.values_closed(a + i * h).head(N - 1).transpose();
    CMatrix M(m + 1, m + 1);
    for (int i = 0; i <= m; ++i)
        for (int l = 0; l <= m; ++l) {
            cplx s = 0.0;
            for (int k = 0; k + 1 < N; ++k) s += V(i, k) * g(k, m + i - l);
            M(i, l) = sw[i] * s * sw[l];
        }
    M.diagonal().array() += 1.0;
    return M.partialPivLu().determinant();
}

}  // namespace detail

/// Nyström determinant det(I + VR₀(z)) with trapezoid nodes, refined by
/// halving the step with Richardson extrapolation in h².
inline FredholmResult fredholm_determinant(const CoefficientSet& cs, cplx z, const FredholmOptions& o = {}) {
    const int N = cs.order();
    if (!cs.top_vanishes())
        throw UnsupportedCoefficients("the perturbation determinant needs v_N = 0");
    const RootSystem rs = RootSystem::compute(N, z);
    FredholmResult out;
    if (cs.is_zero() || N == 1) {
        out.value = 1.0;
        return out;
    }
    auto [a, b] = cs.compact() ? cs.support() : cs.extent(o.tail_eps);
    out.a = a;
    out.b = b;
    const double len = b - a;
    double mod = 0.0;
    for (auto zeta : rs.roots()) mod = std::max(mod, std::abs(zeta));
    const double h0 = o.h0 > 0 ? o.h0 : std::min(0.25 / std::max(1.0, mod), len / 32.0);
    const int m0 = std::max(2, static_cast<int>(std::ceil(len / h0)));
    const FreeKernel r0(rs);

    // The diagonal kink gives a leading h² error; one Richardson step removes
    // it, and the remainder decays much faster than any further power of h².
    cplx prev_raw = 0.0, prev_rich = 0.0;
    for (int k = 0; k < o.max_levels; ++k) {
        const int m = m0 << k;
        const cplx raw = detail::nystrom_det(r0, cs, a, b, m);
        out.nodes = m + 1;
        if (k == 0) {
            out.value = raw;
            prev_raw = raw;
            continue;
        }
        const cplx rich = raw + (raw - prev_raw) / 3.0;
        out.value = rich;
        out.error_estimate = k == 1 ? std::abs(raw - prev_raw) : std::abs(rich - prev_rich);
        prev_raw = raw;
        prev_rich = rich;
        if (k >= 2 && k + 1 >= o.levels && out.error_estimate <= o.rel_tol * std::max(1.0, std::abs(out.value)))
            return out;
    }
    throw QuadratureFailure("Fredholm determinant did not settle under grid refinement (change " +
                            std::to_string(out.error_estimate) + ")");
}

struct DetOptions {
    double x = 0.0;
    JostOptions jost;
    FredholmOptions fredholm;
};

inline VerificationReport det_identity_check(const CoefficientSet& cs, cplx z, const DetOptions& o = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const FredholmResult fd = fredholm_determinant(cs, z, o.fredholm);
    double gap = 0.0;
    const cplx delta = delta_value(cs, z, o.x, o.jost, &gap);
    auto rep = VerificationReport::make(Identity::det_identity, {z}, fd.value, delta, std::max(fd.error_estimate, gap));
    rep.runtime = detail::seconds_since(t0);
    return rep;
}

struct LargeZResult {
    std::vector<cplx> z;
    std::vector<double> deviation;  // |Δ(z_m) − 1|
    double slope = 0.0;             // fitted exponent of |Δ − 1| against |z|
    bool decreasing = false;
    bool pass = false;
    /// lhs = Δ at the largest |z|, rhs = 1.
    VerificationReport report;
};

struct LargeZOptions {
    double x = 0.0;
    JostOptions jost;
    double slack = 0.3;
    int threads = 1;
};

/// |Δ(z) − 1| along the ray z = t·direction, t in `magnitudes`.
inline LargeZResult large_z_check(const CoefficientSet& cs, cplx direction, const std::vector<double>& magnitudes,
                                  const LargeZOptions& o = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const int N = cs.order();
    if (!cs.top_vanishes()) throw UnsupportedCoefficients("large-z decay of Δ needs v_N = 0");
    if (magnitudes.size() < 2) throw InputError("large-z check needs at least two magnitudes");
    for (size_t i = 0; i + 1 < magnitudes.size(); ++i)
        if (!(magnitudes[i] > 0 && magnitudes[i + 1] > magnitudes[i]))
            throw InputError("large-z magnitudes must be positive and increasing");
    const cplx dir = direction / std::abs(direction);
    LargeZResult r;
    for (double t : magnitudes) r.z.push_back(t * dir);
    std::vector<double> gaps(r.z.size());
    const auto delta = parallel_map<cplx>(static_cast<int>(r.z.size()), o.threads, [&](int i) {
        return delta_value(cs, r.z[i], o.x, o.jost, &gaps[i]);
    });
    for (auto d : delta) r.deviation.push_back(std::abs(d - 1.0));
    r.decreasing = true;
    for (size_t i = 0; i + 1 < r.deviation.size(); ++i)
        r.decreasing &= r.deviation[i + 1] < r.deviation[i] || (r.deviation[i] == 0.0 && r.deviation[i + 1] == 0.0);
    bool any_zero = false;
    for (double d : r.deviation) any_zero |= d == 0.0;
    if (any_zero) {
        r.slope = -std::numeric_limits<double>::infinity();
    } else {
        double mx = 0, my = 0;
        const double n = static_cast<double>(magnitudes.size());
        for (size_t i = 0; i < magnitudes.size(); ++i) mx += std::log(magnitudes[i]), my += std::log(r.deviation[i]);
        mx /= n;
        my /= n;
        double sxy = 0, sxx = 0;
        for (size_t i = 0; i < magnitudes.size(); ++i) {
            const double dx = std::log(magnitudes[i]) - mx;
            sxy += dx * (std::log(r.deviation[i]) - my);
            sxx += dx * dx;
        }
        r.slope = sxy / sxx;
    }
    r.pass = r.decreasing && r.slope <= -1.0 / N + o.slack;
    r.report = VerificationReport::make(Identity::large_z, r.z, delta.back(), 1.0,
                                        *std::max_element(gaps.begin(), gaps.end()));
    r.report.runtime = detail::seconds_since(t0);
    return r;
}

struct Circle {
    cplx center;
    double radius = 1.0;
};

/// Directions arg z of the rays where Jost solutions are discontinuous:
/// the spectrum of H₀ and the rays where two roots share a real part.
inline std::vector<double> critical_angles(int N) {
    std::vector<double> out{0.0};
    if (N % 2 == 1) out.push_back(pi);
    if (N >= 2) {
        // Re ζ_j = Re ζ_k iff arg z ≡ −πN/2 − π(j + k) (mod 2π) in the unsorted numbering.
        for (int s : (N == 2 ? std::vector<int>{1} : std::vector<int>{0, 1})) {
            double phi = std::fmod(-pi * N / 2.0 - pi * s, 2 * pi);
            if (phi < 0) phi += 2 * pi;
            if (std::abs(phi - 2 * pi) < 1e-14) phi = 0.0;
            out.push_back(phi);
        }
    }
    std::sort(out.begin(), out.end());
    std::vector<double> uniq;
    for (double p : out)
        if (uniq.empty() || std::abs(p - uniq.back()) > 1e-12) uniq.push_back(p);
    return uniq;
}

inline void check_contour(int N, const Circle& c) {
    if (!(c.radius > 0) || !std::isfinite(c.radius)) throw InputError("contour radius must be positive");
    if (std::abs(c.center) <= c.radius) throw SpectralPointError("contour encloses or touches z = 0");
    for (double phi : critical_angles(N)) {
        const cplx w = c.center * std::polar(1.0, -phi);
        const double dist = w.real() <= 0 ? std::abs(c.center) : std::abs(w.imag());
        if (dist <= c.radius)
            throw SpectralPointError("contour crosses the critical ray arg z = " + std::to_string(phi));
    }
}

struct ContourOptions {
    int nodes = 128;
    int max_nodes = 2048;
    /// Stop doubling once two node counts agree to this.
    double stable_tol = 1e-8;
    /// |Δ| below this anywhere on the contour means it runs through an eigenvalue.
    double delta_floor = 1e-8;
    double x = 0.0;
    JostOptions jost;
    int threads = 0;
};

struct WindingResult {
    int count = 0;
    cplx raw;
    /// (1/2πi)∮ zΔ′/Δ dz: the sum of the enclosed zeros.
    cplx first_moment;
    int nodes = 0;
    double min_abs_delta = 0.0;
    double change = 0.0;
};

/// Winding number of Δ(x, ·) around a circle, with Δ′ along the contour from
/// the spectral derivative of the samples.
inline WindingResult winding(const CoefficientSet& cs, const Circle& c, const ContourOptions& o = {}) {
    const int N = cs.order();
    check_contour(N, c);
    auto delta_at = [&](double theta) {
        const cplx z = c.center + std::polar(c.radius, theta);
        return normalized_wronskian(RootSystem::compute(N, z), cs, o.x, o.jost).delta;
    };
    auto sample = [&](int M, int offset, int stride) {
        const int cnt = M / stride;
        return parallel_map<cplx>(cnt, o.threads, [&](int i) { return delta_at(2 * pi * (offset + i * stride) / M); });
    };
    auto evaluate = [&](const std::vector<cplx>& d, WindingResult& r) {
        const int M = static_cast<int>(d.size());
        Eigen::FFT<double> fft;
        std::vector<cplx> coef, dtheta;
        fft.fwd(coef, d);
        for (int k = 0; k < M; ++k) {
            const int freq = k < M / 2 ? k : (k == M / 2 ? 0 : k - M);
            coef[k] *= I * static_cast<double>(freq);
        }
        fft.inv(dtheta, coef);
        cplx raw = 0.0, moment = 0.0;
        double mn = INFINITY;
        for (int m = 0; m < M; ++m) {
            const cplx ratio = dtheta[m] / d[m];
            raw += ratio;
            moment += (c.center + std::polar(c.radius, 2 * pi * m / M)) * ratio;
            mn = std::min(mn, std::abs(d[m]));
        }
        r.raw = raw / (I * static_cast<double>(M));
        r.first_moment = moment / (I * static_cast<double>(M));
        r.nodes = M;
        r.min_abs_delta = mn;
    };
    int M = o.nodes;
    std::vector<cplx> d = sample(M, 0, 1);
    WindingResult r;
    evaluate(d, r);
    if (r.min_abs_delta < o.delta_floor)
        throw SpectralPointError("contour passes within |Δ| < " + std::to_string(o.delta_floor) + " of an eigenvalue");
    while (2 * M <= o.max_nodes) {
        const std::vector<cplx> odd = sample(2 * M, 1, 2);
        std::vector<cplx> both(2 * M);
        for (int m = 0; m < M; ++m) both[2 * m] = d[m], both[2 * m + 1] = odd[m];
        WindingResult next;
        evaluate(both, next);
        next.change = std::abs(next.raw - r.raw);
        d = std::move(both);
        M *= 2;
        r = next;
        if (r.min_abs_delta < o.delta_floor)
            throw SpectralPointError("contour passes within |Δ| < " + std::to_string(o.delta_floor) + " of an eigenvalue");
        if (r.change <= o.stable_tol) break;
    }
    const double nearest = std::round(r.raw.real());
    if (std::abs(r.raw - cplx(nearest, 0.0)) > 0.1)
        throw NonIntegerWinding("winding number " + std::to_string(r.raw.real()) + std::string(r.raw.imag() < 0 ? "" : "+") +
                                std::to_string(r.raw.imag()) + "i is not close to an integer");
    r.count = static_cast<int>(nearest);
    return r;
}

inline int eig_count(const CoefficientSet& cs, const Circle& c, const ContourOptions& o = {}) {
    return winding(cs, c, o).count;
}

struct NewtonOptions {
    double x = 0.0;
    int max_iter = 40;
    double tol = 1e-12;
    JostOptions jost;
    ZDiffOptions zdiff;
};

/// Newton's method on Δ(x, ·) with Δ′ from z-differences.
inline cplx newton_eigenvalue(const CoefficientSet& cs, cplx seed, const NewtonOptions& o = {}) {
    cplx z = seed;
    for (int it = 0; it < o.max_iter; ++it) {
        const JostFamily fam(detail::regular_roots(cs.order(), z), cs, o.x, o.x, o.jost);
        const cplx d = normalized_wronskian(fam.center(), o.x).delta;
        if (d == cplx(0.0)) return z;
        const auto dd = fam.derivative([&](const JostSet& js) { return normalized_wronskian(js, o.x).delta; }, o.zdiff);
        const cplx step = d / dd.value;
        z -= step;
        if (std::abs(step) <= o.tol * std::max(1.0, std::abs(z))) return z;
    }
    throw NumericalError("Newton iteration for a zero of Δ did not converge from " + RootSystem::format(seed));
}

/// The single eigenvalue inside a circle: winding number 1, seeded by the
/// first contour moment, polished by Newton.
inline cplx locate_eigenvalue(const CoefficientSet& cs, const Circle& c, const ContourOptions& co = {},
                              const NewtonOptions& no = {}) {
    const WindingResult w = winding(cs, c, co);
    if (w.count != 1)
        throw InputError("contour encloses " + std::to_string(w.count) + " eigenvalues; need exactly one");
    const cplx z = newton_eigenvalue(cs, w.first_moment, no);
    if (std::abs(z - c.center) >= c.radius) throw NumericalError("Newton iteration left the contour");
    return z;
}

}  // namespace ndtrace
