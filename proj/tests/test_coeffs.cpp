#include "ndtrace/coeffs.hpp"

#include <gtest/gtest.h>

using namespace ndtrace;

TEST(Coeffs, ZeroPreset) {
    auto cs = preset(PresetName::zero, 3);
    EXPECT_TRUE(cs.is_zero());
    for (double x : {-2.0, 0.0, 5.0})
        for (int k = 1; k <= 3; ++k) EXPECT_EQ(cs.value(k, x), cplx(0.0));
    EXPECT_EQ(*cs.support_radius(), 0.0);
}

TEST(Coeffs, Sech2Preset) {
    PresetParams p;
    p.lambda = -2.0;
    auto cs = preset(PresetName::sech2, 2, p);
    EXPECT_NEAR(std::abs(cs.value(1, 0.0) + 2.0), 0.0, 1e-15);
    EXPECT_EQ(cs.value(2, 0.0), cplx(0.0));
    EXPECT_NEAR(cs.value(1, 1.3).real(), -2.0 / std::pow(std::cosh(1.3), 2), 1e-15);
    EXPECT_NEAR(cs.value(1, -30.0).real(), -2.0 / std::pow(std::cosh(30.0), 2), 1e-35);
    EXPECT_FALSE(cs.compact());
}

TEST(Coeffs, BumpPreset) {
    PresetParams p;
    p.radius = 1.0;
    p.amplitude = 1.0;
    auto cs = preset(PresetName::bump, 2, p);
    EXPECT_EQ(cs.value(1, 1.0), cplx(0.0));
    EXPECT_EQ(cs.value(1, -1.0), cplx(0.0));
    EXPECT_NEAR(cs.value(1, 0.0).real(), std::exp(-1.0), 1e-16);
    EXPECT_EQ(*cs.support_radius(), 1.0);
    EXPECT_TRUE(cs.vanishes_on(1.0, 4.0));
    EXPECT_FALSE(cs.vanishes_on(0.5, 4.0));
}

TEST(Coeffs, BadPresetParams) {
    PresetParams p;
    p.radius = -1.0;
    EXPECT_THROW(preset(PresetName::bump, 2, p), InvalidPreset);
    p = {};
    p.sigma = 0.0;
    EXPECT_THROW(preset(PresetName::gaussian, 2, p), InvalidPreset);
    p = {};
    p.indices = {3};
    EXPECT_THROW(preset(PresetName::sech2, 2, p), InvalidPreset);
    EXPECT_THROW(CoefficientSet::from_profiles(2, std::vector<Profile>(2), 0.4), InvalidPreset);
}

TEST(Coeffs, Cutoff) {
    auto z = preset(PresetName::zero, 2).cutoff(5.0);
    EXPECT_TRUE(z.is_zero());
    auto cs = preset(PresetName::sech2, 2).cutoff(3.0);
    EXPECT_EQ(cs.value(1, 4.0), cplx(0.0));
    EXPECT_EQ(cs.value(1, 3.0), cplx(0.0));
    EXPECT_NEAR(cs.value(1, 0.0).real(), -2.0, 1e-15);
    EXPECT_EQ(*cs.support_radius(), 3.0);
    EXPECT_EQ(*cs.cutoff_radius(), 3.0);
    EXPECT_NE(cs.values_closed(3.0)(0), cplx(0.0));
    auto b = preset(PresetName::bump, 2).cutoff(5.0);
    EXPECT_EQ(*b.support_radius(), 1.0);
}

TEST(CoeffsProperty, CutoffConvergesPointwise) {
    PresetParams p;
    p.sigma = 4.0;
    auto cs = preset(PresetName::gaussian, 3, p);
    for (double r : {2.0, 5.0, 10.0, 20.0}) {
        auto c = cs.cutoff(r);
        double err = 0.0;
        for (double x = -3.0; x <= 3.0; x += 0.1) err = std::max(err, std::abs(c.value(1, x) - cs.value(1, x)));
        if (r > 3.0) EXPECT_EQ(err, 0.0);
    }
}

TEST(Coeffs, SystemPerturbation) {
    PresetParams p;
    p.indices = {1, 3};
    p.amplitude = cplx(0.5, 0.25);
    auto cs = preset(PresetName::bump, 3, p);
    const CMatrix V = cs.system_perturbation(0.2);
    EXPECT_EQ(V.topRows(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(std::abs(V.trace() - (-i_pow(3) * cs.value(3, 0.2))), 0.0, 1e-16);
    EXPECT_NEAR(V.cwiseAbs().rowwise().sum().maxCoeff(), cs.abs_sum(0.2), 1e-15);
}

TEST(Coeffs, L1Tail) {
    EXPECT_EQ(l1_tail(preset(PresetName::zero, 2), Side::minus, 0.0), 0.0);
    auto s = preset(PresetName::sech2, 2);
    EXPECT_NEAR(l1_tail(s, Side::minus, 0.0), 2.0, 2e-10);
    EXPECT_NEAR(l1_tail(s, Side::plus, 0.0), 2.0, 2e-10);
    // closed form 2(1 + tanh a)
    for (double a : {-5.0, -1.0, 0.7, 3.0})
        EXPECT_NEAR(l1_tail(s, Side::minus, a), 2.0 * (1.0 + std::tanh(a)), 1e-10 * (1.0 + std::tanh(a)) + 1e-14);
    EXPECT_EQ(l1_tail(preset(PresetName::bump, 2), Side::minus, -2.0), 0.0);
}

TEST(CoeffsProperty, L1TailMonotone) {
    PresetParams p;
    p.sigma = 1.5;
    p.indices = {1, 2};
    auto cs = preset(PresetName::gaussian, 2, p);
    double prev = INFINITY;
    for (double a = 4.0; a >= -6.0; a -= 0.5) {
        const double v = l1_tail(cs, Side::minus, a);
        EXPECT_LE(v, prev);
        prev = v;
    }
}

TEST(Coeffs, DivergentTail) {
    Profile slow;
    slow.shape = [](double x) { return cplx(1.0 / std::sqrt(1.0 + std::abs(x))); };
    slow.lo = -inf;
    slow.hi = inf;
    auto cs = CoefficientSet::from_profiles(2, {slow, Profile{}});
    EXPECT_THROW(l1_tail(cs, Side::minus, 0.0), DivergentTail);
}

TEST(CoeffsProperty, WeightedNormFinite) {
    for (auto name : {PresetName::bump, PresetName::gaussian, PresetName::sech2}) {
        auto cs = preset(name, 2);
        const double v = weighted_norm(cs, 1);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
    }
    // sech² with α = 1: ∫4 sech⁴ x (1+x²) dx = 4(4/3 + (π²−6)/9)
    auto s = preset(PresetName::sech2, 2);
    EXPECT_NEAR(weighted_norm(s, 1), 4.0 * (4.0 / 3.0 + (pi * pi - 6.0) / 9.0), 1e-8);
}

TEST(Coeffs, TableInterpolation) {
    std::vector<double> xs;
    std::vector<cplx> vs;
    for (int i = 0; i <= 40; ++i) {
        const double x = -2.0 + 0.1 * i;
        xs.push_back(x);
        vs.emplace_back(std::cos(x), 0.5 * x);
    }
    auto cs = CoefficientSet::from_profiles(2, {profiles::table(xs, vs), Profile{}});
    EXPECT_LT(std::abs(cs.value(1, 0.33) - cplx(std::cos(0.33), 0.165)), 1e-4);
    EXPECT_EQ(cs.value(1, 2.5), cplx(0.0));
    EXPECT_EQ(*cs.support_radius(), 2.0);
    EXPECT_THROW(profiles::table({0.0, 1.0}, {1.0, 2.0}), InvalidPreset);
}
