#include "socfrac/damage.hpp"
#include "socfrac/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace socfrac;
using namespace socfrac::damage;

TEST(Damage, ModulusFollowsGeometricLawExactly) {
    SeededRng rng(7);
    TrussState s = make_intact(100.0, rng);
    for (int n = 0; n < kMaxDamageEvents; ++n) {
        EXPECT_EQ(s.damage_count, n);
        EXPECT_EQ(s.modulus, 100.0 * std::pow(0.9, n));
        EXPECT_FALSE(s.broken);
        s = apply_damage(s, rng);
    }
    EXPECT_EQ(s.damage_count, 30);
    EXPECT_TRUE(s.broken);
    EXPECT_EQ(s.modulus, 100.0 * std::pow(0.9, 30));
    EXPECT_NEAR(s.modulus, 4.2391, 1e-4);
    EXPECT_EQ(s.effective_modulus(), 0.0);
}

TEST(Damage, RepeatedProductAgreesWithClosedForm) {
    SeededRng rng(1);
    TrussState s = make_intact(100.0, rng);
    long double product = 100.0L;
    for (int n = 1; n < kMaxDamageEvents; ++n) {
        s = apply_damage(s, rng);
        product *= 0.9L;
        EXPECT_NEAR(s.modulus, static_cast<double>(product), 1e-13 * 100.0);
    }
}

TEST(Damage, BrokenTrussCannotBeDamaged) {
    SeededRng rng(3);
    TrussState s = make_intact(100.0, rng);
    for (int n = 0; n < kMaxDamageEvents; ++n) s = apply_damage(s, rng);
    EXPECT_THROW(apply_damage(s, rng), LogicError);
}

TEST(Damage, ThresholdsAreRedrawnInsideOpenUnitInterval) {
    SeededRng rng(11);
    TrussState s = make_intact(100.0, rng);
    double previous = s.threshold;
    int changed = 0;
    for (int n = 0; n < 20; ++n) {
        s = apply_damage(s, rng);
        EXPECT_GT(s.threshold, 0.0);
        EXPECT_LT(s.threshold, 1.0);
        changed += s.threshold != previous ? 1 : 0;
        previous = s.threshold;
    }
    EXPECT_EQ(changed, 20);
}

TEST(Damage, SameSeedSameThresholds) {
    SeededRng a(42), b(42), c(43);
    const auto sa = make_intact_states(100, 100.0, a);
    const auto sb = make_intact_states(100, 100.0, b);
    const auto sc = make_intact_states(100, 100.0, c);
    int differ = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        EXPECT_EQ(sa[i].threshold, sb[i].threshold);
        differ += sa[i].threshold != sc[i].threshold ? 1 : 0;
    }
    EXPECT_GT(differ, 90);
}

TEST(Damage, UniformDrawsPassMeanAndKolmogorovChecks) {
    SeededRng rng(5);
    const int n = 1000000;
    std::vector<double> u(n);
    double sum = 0.0;
    for (auto& x : u) {
        x = draw_threshold(rng);
        sum += x;
    }
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        ks = std::max({ks, std::abs(u[i] - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - u[i])});
    }
    EXPECT_NEAR(sum / n, 0.5, 1e-3);
    EXPECT_LT(ks, 0.002);
}

TEST(Damage, SweepTensionAndAbsoluteCriteria) {
    SeededRng rng(1);
    std::vector<TrussState> states(4, make_intact(100.0, rng));
    for (auto& s : states) s.threshold = 0.5;
    states[3].broken = true;
    const std::vector<double> stress{0.6, -0.7, 0.4, 2.0};
    EXPECT_EQ(damage_sweep(stress, states, StressCriterion::tension), (std::vector<int>{0}));
    EXPECT_EQ(damage_sweep(stress, states, StressCriterion::absolute), (std::vector<int>{0, 1}));
}

TEST(Damage, SweepAtThresholdDoesNotFire) {
    SeededRng rng(1);
    std::vector<TrussState> states(1, make_intact(100.0, rng));
    states[0].threshold = 0.5;
    const std::vector<double> stress{0.5};
    EXPECT_TRUE(damage_sweep(stress, states).empty());
}

TEST(Damage, SweepSizeMismatchThrows) {
    SeededRng rng(1);
    std::vector<TrussState> states(2, make_intact(100.0, rng));
    const std::vector<double> stress{0.1};
    EXPECT_THROW(damage_sweep(stress, states), ConsistencyError);
}
