#include "ndtrace/roots.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ndtrace;

namespace {

double max_abs(const CMatrix& M) { return M.cwiseAbs().maxCoeff(); }

// Admissible z for order N drawn away from the critical rays.
std::vector<std::pair<int, cplx>> sample_points() {
    std::vector<std::pair<int, cplx>> out;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int N = 1; N <= 7; ++N) {
        int got = 0;
        while (got < 12) {
            const cplx z(u(rng), u(rng));
            try {
                auto rs = RootSystem::compute(N, z);
                if (rs.near_critical_ray(1e-3)) continue;
                out.emplace_back(N, z);
                ++got;
            } catch (const SpectralPointError&) {
            }
        }
    }
    return out;
}

}  // namespace

TEST(Roots, OrderTwoAtMinusOne) {
    auto rs = RootSystem::compute(2, -1.0);
    EXPECT_EQ(rs.n_plus(), 1);
    EXPECT_NEAR(std::abs(rs.root(0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(rs.root(1) + 1.0), 0.0, 1e-15);
}

TEST(Roots, OrderThreeAtI) {
    auto rs = RootSystem::compute(3, I);
    EXPECT_EQ(rs.n_plus(), 1);
    EXPECT_NEAR(std::abs(rs.root(0) - 1.0), 0.0, 1e-15);
    const cplx w = std::polar(1.0, 2 * pi / 3), w2 = std::polar(1.0, 4 * pi / 3);
    // The remaining pair is conjugate with equal real part; ascending Im.
    EXPECT_NEAR(std::abs(rs.root(1) - w2), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(rs.root(2) - w), 0.0, 1e-15);
}

TEST(Roots, OrderFourAtI) {
    auto rs = RootSystem::compute(4, I);
    EXPECT_EQ(rs.n_plus(), 2);
    const cplx e = std::polar(1.0, pi / 8);
    std::vector<cplx> expect{e, e * -I, e * I, -e};
    for (const auto& x : expect) {
        double best = 1.0;
        for (int j = 0; j < 4; ++j) best = std::min(best, std::abs(rs.root(j) - x));
        EXPECT_LT(best, 1e-15);
    }
    EXPECT_GT(rs.kappa(0), rs.kappa(1));
    EXPECT_GT(rs.kappa(1), 0.0);
    EXPECT_LT(rs.kappa(2), 0.0);
    EXPECT_GT(rs.kappa(2), rs.kappa(3));
}

TEST(Roots, RejectsSpectrum) {
    EXPECT_THROW(RootSystem::compute(2, 1.0), SpectralPointError);
    EXPECT_THROW(RootSystem::compute(2, 0.0), SpectralPointError);
    EXPECT_THROW(RootSystem::compute(3, 2.0), SpectralPointError);
    EXPECT_THROW(RootSystem::compute(4, 5.0), SpectralPointError);
    EXPECT_THROW(RootSystem::compute(0, -1.0), InputError);
    EXPECT_NO_THROW(RootSystem::compute(2, cplx(1.0, 1e-3)));
}

TEST(Roots, FloorIsConfigurable) {
    RootOptions o;
    o.re_floor = 0.5;
    EXPECT_THROW(RootSystem::compute(2, cplx(1.0, 1.0), o), SpectralPointError);
    EXPECT_NO_THROW(RootSystem::compute(2, cplx(1.0, 1.0)));
}

TEST(Roots, ProjectionExample) {
    auto rs = RootSystem::compute(2, -1.0);
    CMatrix expect(2, 2);
    expect << 0.5, 0.5, 0.5, 0.5;
    EXPECT_LT(max_abs(rs.projection(0) - expect), 1e-15);
}

TEST(Roots, L0Examples) {
    auto rs = RootSystem::compute(2, -1.0);
    CMatrix expect(2, 2);
    expect << 0, 1, 1, 0;
    EXPECT_LT(max_abs(rs.l0_matrix() - expect), 1e-15);
    auto rs3 = RootSystem::compute(3, I);
    EXPECT_LT(std::abs(rs3.l0_matrix()(2, 0) - 1.0), 1e-15);
}

TEST(RootsProperty, Invariants) {
    for (auto [N, z] : sample_points()) {
        auto rs = RootSystem::compute(N, z);
        SCOPED_TRACE("N=" + std::to_string(N));
        const cplx w = i_pow(N) * z;
        int expect_n = N % 2 == 0 ? N / 2 : (z.imag() > 0 ? (N - 1) / 2 : (N + 1) / 2);
        EXPECT_EQ(rs.n_plus(), expect_n);
        for (int j = 0; j < N; ++j) {
            EXPECT_LT(std::abs(std::pow(rs.root(j), N) - w), 1e-12 * std::abs(w));
            if (j < rs.n_plus()) EXPECT_GT(rs.kappa(j), 0.0);
            else EXPECT_LT(rs.kappa(j), 0.0);
            if (j > 0) EXPECT_GE(rs.kappa(j - 1), rs.kappa(j));
        }
        // Duality, completeness, idempotence, eigen-relation.
        const CMatrix D = rs.dual_rows() * rs.eigvecs();
        EXPECT_LT(max_abs(D - CMatrix::Identity(N, N)), 1e-12);
        CMatrix S = CMatrix::Zero(N, N);
        const CMatrix L = rs.l0_matrix();
        for (int j = 0; j < N; ++j) {
            const CMatrix Pj = rs.projection(j);
            S += Pj;
            EXPECT_LT(max_abs(Pj * Pj - Pj), 1e-11 * (1 + max_abs(Pj)));
            EXPECT_LT(max_abs(L * Pj - rs.root(j) * Pj), 1e-11 * (1 + max_abs(Pj)) * std::abs(rs.root(j)));
            for (int k = 0; k < N; ++k)
                if (k != j) EXPECT_LT(max_abs(Pj * rs.projection(k)), 1e-11 * (1 + max_abs(Pj)));
        }
        EXPECT_LT(max_abs(S - CMatrix::Identity(N, N)), 1e-11);
        // Vandermonde determinant against LU.
        const cplx det = rs.eigvecs().determinant();
        EXPECT_LT(std::abs(det - rs.vandermonde_det()), 1e-10 * std::abs(det));
        // Companion eigensolve cross-check.
        Eigen::ComplexEigenSolver<CMatrix> es(L);
        for (int j = 0; j < N; ++j) {
            double best = INFINITY;
            for (int k = 0; k < N; ++k) best = std::min(best, std::abs(es.eigenvalues()(k) - rs.root(j)));
            EXPECT_LT(best, 1e-10 * std::abs(rs.root(j)));
        }
        // Reconstruction through the dual basis.
        CVector v = CVector::Random(N);
        CVector r = CVector::Zero(N);
        for (int j = 0; j < N; ++j) r += (rs.dual_rows().row(j) * v)(0) * rs.eigvec(j);
        EXPECT_LT((r - v).cwiseAbs().maxCoeff(), 1e-10);
        if (N >= 2) {
            cplx sum = 0;
            for (auto x : rs.roots()) sum += x;
            EXPECT_LT(std::abs(sum), 1e-12 * std::abs(rs.root(0)));
        }
    }
}

TEST(RootsProperty, ProjectionScaling) {
    for (int N : {2, 3, 4, 5}) {
        const cplx z0 = std::polar(1.3, 0.7 + 0.1 * N);
        auto a = RootSystem::compute(N, z0);
        auto b = RootSystem::compute(N, 1e3 * z0);
        const double ra = std::abs(a.root(0)), rb = std::abs(b.root(0));
        for (int j = 0; j < N; ++j) {
            const CMatrix Pa = a.projection(j), Pb = b.projection(j);
            for (int k = 0; k < N; ++k)
                for (int l = 0; l < N; ++l) {
                    const double sa = std::abs(Pa(k, l)) / std::pow(ra, k - l);
                    const double sb = std::abs(Pb(k, l)) / std::pow(rb, k - l);
                    EXPECT_LT(std::max(sa, sb) / std::min(sa, sb), 10.0);
                }
        }
    }
}

TEST(RootsProperty, ConjugateSymmetry) {
    for (int N : {2, 3, 4}) {
        const cplx z(-0.7, 1.1);
        auto a = RootSystem::compute(N, z);
        auto b = RootSystem::compute(N, std::conj(z));
        for (int j = 0; j < N; ++j) {
            // Roots at conj(z) are ±conj(ζ); compare |Re| and |Im| as sets.
            double best = INFINITY;
            for (int k = 0; k < N; ++k)
                best = std::min(best, std::abs(std::abs(a.kappa(j)) - std::abs(b.kappa(k))) +
                                          std::abs(std::abs(a.root(j).imag()) - std::abs(b.root(k).imag())));
            EXPECT_LT(best, 1e-12);
        }
    }
}

TEST(RootsProperty, FollowTracksBranches) {
    auto rs = RootSystem::compute(4, cplx(0.3, 2.0));
    auto f = RootSystem::follow(rs, cplx(0.3 + 1e-3, 2.0));
    for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(f.root(j) - rs.root(j)), 1e-3);
    EXPECT_NEAR(std::abs(f.root(0) - rs.root(0) - 1e-3 * rs.root_derivative(0)), 0.0, 1e-6);
}
