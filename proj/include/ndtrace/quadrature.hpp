#pragma once

#include "ndtrace/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace ndtrace {

struct GaussRule {
    std::vector<double> x;  // nodes on [−1, 1], ascending
    std::vector<double> w;
};

/// q-point Gauss–Legendre rule by Newton iteration on P_q. Cached per q.
inline const GaussRule& gauss_legendre(int q) {
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(q);
    if (it != cache.end()) return it->second;
    // (P_q(t), P_{q-1}(t)) by the three-term recurrence.
    auto legendre = [q](double t) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= q; ++k) {
            const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        return std::pair<double, double>{p1, p0};
    };
    GaussRule r;
    r.x.resize(q);
    r.w.resize(q);
    for (int i = 0; i < q; ++i) {
        double t = std::cos(pi * (i + 0.75) / (q + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            auto [pq, pm] = legendre(t);
            const double dt = pq / (q * (t * pq - pm) / (t * t - 1.0));
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        auto [pq, pm] = legendre(t);
        const double dp = q * (t * pq - pm) / (t * t - 1.0);
        r.x[i] = t;
        r.w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    std::vector<int> idx(q);
    for (int i = 0; i < q; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return r.x[a] < r.x[b]; });
    GaussRule s;
    for (int i : idx) {
        s.x.push_back(r.x[i]);
        s.w.push_back(r.w[i]);
    }
    return cache.emplace(q, std::move(s)).first->second;
}

inline std::vector<double> barycentric_weights(const std::vector<double>& nodes) {
    const int q = static_cast<int>(nodes.size());
    std::vector<double> w(q, 1.0);
    for (int b = 0; b < q; ++b)
        for (int k = 0; k < q; ++k)
            if (k != b) w[b] /= (nodes[b] - nodes[k]);
    return w;
}

/// Barycentric Lagrange basis values ℓ_b(t), given precomputed weights.
inline void lagrange_basis(const std::vector<double>& nodes, const std::vector<double>& bw, double t,
                           std::vector<double>& out) {
    const int q = static_cast<int>(nodes.size());
    out.assign(q, 0.0);
    for (int b = 0; b < q; ++b) {
        if (t == nodes[b]) {
            out[b] = 1.0;
            return;
        }
    }
    double denom = 0.0;
    for (int b = 0; b < q; ++b) {
        out[b] = bw[b] / (t - nodes[b]);
        denom += out[b];
    }
    for (auto& v : out) v /= denom;
}

inline std::vector<double> lagrange_basis(const std::vector<double>& nodes, double t) {
    std::vector<double> out;
    lagrange_basis(nodes, barycentric_weights(nodes), t, out);
    return out;
}

/// Split [a, b] at the given cut points and into pieces of length <= hmax.
inline std::vector<double> panel_edges(double a, double b, const std::vector<double>& cuts, double hmax) {
    std::vector<double> pts{a};
    for (double c : cuts)
        if (c > a && c < b) pts.push_back(c);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    std::vector<double> out{pts.front()};
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const double len = pts[i + 1] - pts[i];
        if (len <= 0.0) continue;
        const int m = std::max(1, static_cast<int>(std::ceil(len / hmax - 1e-12)));
        for (int k = 1; k <= m; ++k) out.push_back(k == m ? pts[i + 1] : pts[i] + len * k / m);
    }
    return out;
}

/// Composite Gauss–Legendre on consecutive panel edges.
template <class F>
auto composite_gauss(F&& f, const std::vector<double>& edges, int q) -> decltype(f(0.0)) {
    const GaussRule& g = gauss_legendre(q);
    decltype(f(0.0)) s{};
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
        const double c = 0.5 * (edges[p] + edges[p + 1]);
        const double h = 0.5 * (edges[p + 1] - edges[p]);
        for (int i = 0; i < q; ++i) s += (g.w[i] * h) * f(c + h * g.x[i]);
    }
    return s;
}

}  // namespace ndtrace
