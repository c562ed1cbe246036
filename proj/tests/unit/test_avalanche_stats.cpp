#include "socfrac/avalanche_stats.hpp"
#include "socfrac/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

using namespace socfrac;
using namespace socfrac::stats;

namespace {

std::vector<damage::AvalancheRecord> records_from_sizes(const std::vector<int>& sizes) {
    std::vector<damage::AvalancheRecord> out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        damage::AvalancheRecord r;
        r.station = static_cast<int>(i) + 1;
        if (sizes[i] > 0) r.sweeps.push_back(std::vector<int>(static_cast<std::size_t>(sizes[i]), 0));
        out.push_back(r);
    }
    return out;
}

// zeta(a, q) by direct summation with an Euler-Maclaurin tail.
double zeta_oracle(double a, int q) {
    const int n = 200000;
    double s = 0.0;
    for (int k = n - 1; k >= 0; --k) s += std::pow(static_cast<double>(q + k), -a);
    const double big = static_cast<double>(q + n);
    return s + std::pow(big, 1.0 - a) / (a - 1.0) + 0.5 * std::pow(big, -a) + a / 12.0 * std::pow(big, -a - 1.0);
}

// Discrete power-law draws by inversion of the tabulated CDF, continuous
// approximation beyond the table.
class Sampler {
public:
    Sampler(double alpha, int s_min) : alpha_(alpha), s_min_(s_min) {
        const double z = zeta_oracle(alpha, s_min);
        double acc = 0.0;
        for (int s = s_min; s < s_min + 200000; ++s) {
            acc += std::pow(static_cast<double>(s), -alpha) / z;
            cdf_.push_back(acc);
        }
        z_ = z;
    }
    int operator()(std::mt19937_64& g) const {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(g);
        if (u < cdf_.back()) {
            return s_min_ + static_cast<int>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
        }
        const double tail = 1.0 - u;
        const double x = 0.5 + std::pow(tail * (alpha_ - 1.0) * z_, -1.0 / (alpha_ - 1.0));
        return static_cast<int>(std::min(x, 2.0e9));
    }

private:
    double alpha_;
    int s_min_;
    double z_ = 1.0;
    std::vector<double> cdf_;
};

std::vector<int> draw(const Sampler& s, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::vector<int> out(n);
    for (auto& x : out) x = s(g);
    return out;
}

std::vector<int> geometric(std::size_t n, double p, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::geometric_distribution<int> d(p);
    std::vector<int> out(n);
    for (auto& x : out) x = d(g) + 1;
    return out;
}

// Golden-section maximisation of the discrete log-likelihood.
double mle_oracle(const std::vector<int>& xs, int s_min) {
    double sum_log = 0.0;
    std::size_t n = 0;
    for (int x : xs) {
        if (x < s_min) continue;
        sum_log += std::log(static_cast<double>(x));
        ++n;
    }
    auto ll = [&](double a) { return -static_cast<double>(n) * std::log(zeta_oracle(a, s_min)) - a * sum_log; };
    double lo = 1.05, hi = 6.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double fc = ll(c), fd = ll(d);
    while (hi - lo > 1e-7) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = ll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = ll(d);
        }
    }
    return 0.5 * (lo + hi);
}

PowerLawFit fit_with(double p, int s_min, int s_max) {
    PowerLawFit f;
    f.alpha = 2.0;
    f.s_min = s_min;
    f.s_max = s_max;
    f.p_value = p;
    return f;
}

}  // namespace

TEST(SizeDistribution, CountsEventsOnly) {
    const auto d = size_distribution(records_from_sizes({1, 0, 1, 2, 0}));
    EXPECT_EQ(d.event_count, 3u);
    ASSERT_EQ(d.probability.size(), 2u);
    EXPECT_NEAR(d.probability.at(1), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(d.probability.at(2), 1.0 / 3.0, 1e-15);
}

TEST(SizeDistribution, SinglePointAndNormalisation) {
    const auto d = size_distribution(records_from_sizes({4, 4, 4}));
    ASSERT_EQ(d.probability.size(), 1u);
    EXPECT_EQ(d.probability.at(4), 1.0);

    std::mt19937_64 g(3);
    std::vector<int> sizes(1000);
    for (auto& s : sizes) s = static_cast<int>(g() % 50);
    double sum = 0.0;
    for (const auto& [s, p] : size_distribution(records_from_sizes(sizes)).probability) {
        EXPECT_GE(s, 1);
        sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(SizeDistribution, NoEventsIsAnError) {
    EXPECT_THROW(size_distribution(records_from_sizes({0, 0})), EmptyInput);
}

TEST(WaitingTimes, GapsBetweenEventStations) {
    auto recs = records_from_sizes({0, 0, 1, 0, 3, 0, 0, 0, 2});
    EXPECT_EQ(waiting_times(recs).gaps, (std::vector<int>{2, 4}));
    EXPECT_EQ(waiting_times(records_from_sizes({1, 1})).gaps, (std::vector<int>{1}));
    EXPECT_THROW(waiting_times(records_from_sizes({0, 5, 0})), InsufficientSamples);
}

TEST(HurwitzZeta, KnownValues) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    EXPECT_NEAR(hurwitz_zeta(2.0, 1.0), pi2 / 6.0, 1e-14);
    EXPECT_NEAR(hurwitz_zeta(2.0, 2.0), pi2 / 6.0 - 1.0, 1e-14);
    EXPECT_NEAR(hurwitz_zeta(4.0, 1.0), pi2 * pi2 / 90.0, 1e-14);
    EXPECT_NEAR(hurwitz_zeta(2.5, 7.0), zeta_oracle(2.5, 7), 1e-12);
    EXPECT_THROW(hurwitz_zeta(0.5, 1.0), DomainError);
}

TEST(PowerLawMle, MatchesLikelihoodMaximisation) {
    const auto xs = draw(Sampler(2.2, 1), 3000, 11);
    for (int s_min : {1, 3}) {
        EXPECT_NEAR(power_law_mle(xs, s_min), mle_oracle(xs, s_min), 1e-5);
    }
}

TEST(PowerLawFit, RecoversSyntheticExponent) {
    for (double alpha : {1.5, 2.5}) {
        const auto xs = draw(Sampler(alpha, 1), 10000, 17);
        FitOptions fixed;
        fixed.s_min = 1;
        fixed.bootstrap = 0;
        const auto f1 = fit_power_law(xs, fixed);
        EXPECT_NEAR(f1.alpha, alpha, 0.1);
        EXPECT_EQ(f1.s_min, 1);
        FitOptions scan;
        scan.bootstrap = 0;
        const auto f2 = fit_power_law(xs, scan);
        EXPECT_NEAR(f2.alpha, alpha, 0.1);
        EXPECT_GE(f2.ks, 0.0);
        EXPECT_LE(f2.ks, 1.0);
    }
}

TEST(PowerLawFit, EstimatorBiasIsSmallForLargeSamples) {
    for (double alpha : {1.5, 2.0, 2.5, 3.0}) {
        const auto xs = draw(Sampler(alpha, 1), 100000, 5);
        FitOptions o;
        o.s_min = 1;
        o.bootstrap = 0;
        EXPECT_NEAR(fit_power_law(xs, o).alpha, alpha, 0.05) << "alpha " << alpha;
    }
}

TEST(PowerLawFit, PowerLawSampleIsPlausible) {
    const auto xs = draw(Sampler(2.5, 1), 2000, 23);
    FitOptions o;
    o.bootstrap = 200;
    const auto f = fit_power_law(xs, o);
    EXPECT_GE(f.p_value, 0.1);
    EXPECT_GT(f.resamples, 150u);
}

TEST(PowerLawFit, GeometricSampleIsRejected) {
    const auto xs = geometric(10000, 0.3, 29);
    FitOptions o;
    o.bootstrap = 200;
    EXPECT_LT(fit_power_law(xs, o).p_value, 0.1);
}

TEST(PowerLawFit, DegenerateAndInsufficientSamples) {
    EXPECT_THROW(fit_power_law(std::vector<int>(100, 3)), DegenerateSample);
    EXPECT_THROW(fit_power_law(std::vector<int>{1, 2, 3}), InsufficientSamples);
    std::vector<int> with_zero(100, 2);
    with_zero[0] = 0;
    EXPECT_THROW(fit_power_law(with_zero), InvalidParameter);
}

TEST(PowerLawFit, PermutationInvariant) {
    auto xs = draw(Sampler(2.0, 1), 1500, 31);
    FitOptions o;
    o.bootstrap = 50;
    const auto a = fit_power_law(xs, o);
    std::shuffle(xs.begin(), xs.end(), std::mt19937_64(4));
    const auto b = fit_power_law(xs, o);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.s_min, b.s_min);
    EXPECT_EQ(a.ks, b.ks);
    EXPECT_EQ(a.p_value, b.p_value);
}

TEST(PowerLawSampler, MatchesOracleDistribution) {
    const PowerLawSampler lib(2.5, 2);
    const Sampler oracle(2.5, 2);
    std::mt19937_64 g(8);
    std::vector<int> a(20000), b(20000);
    for (auto& x : a) x = lib(std::uniform_real_distribution<double>(1e-300, 1.0)(g));
    b = draw(oracle, 20000, 9);
    const double pa = static_cast<double>(std::count(a.begin(), a.end(), 2)) / 20000.0;
    const double expected = std::pow(2.0, -2.5) / zeta_oracle(2.5, 2);
    EXPECT_NEAR(pa, expected, 0.015);
    EXPECT_NEAR(power_law_mle(a, 2), power_law_mle(b, 2), 0.08);
}

TEST(CompareRegimes, FlagsImplausibleRate) {
    const std::vector<RegimeRow> rows{{1e-5, fit_with(0.6, 1, 300), false},
                                      {1e-4, fit_with(0.5, 1, 200), false},
                                      {1e-3, fit_with(0.02, 1, 400), false}};
    const auto report = compare_regimes(rows);
    ASSERT_EQ(report.rows.size(), 3u);
    EXPECT_EQ(report.rows[0].rate, 1e-5);
    for (const auto& r : report.rows) EXPECT_EQ(r.destroyed, r.rate == 1e-3);
}

TEST(CompareRegimes, ShortSupportIsDestroyed) {
    const std::vector<RegimeRow> rows{{1e-5, fit_with(0.9, 10, 50), false}, {1e-4, fit_with(0.4, 2, 90), false}};
    const auto report = compare_regimes(rows);
    EXPECT_TRUE(report.rows[0].destroyed);
    EXPECT_FALSE(report.rows[1].destroyed);
}

TEST(CompareRegimes, AllPlausibleAndSingleFit) {
    const std::vector<RegimeRow> rows{{1e-5, fit_with(0.6, 1, 300), false}, {1e-4, fit_with(0.3, 1, 300), false}};
    for (const auto& r : compare_regimes(rows).rows) EXPECT_FALSE(r.destroyed);
    const std::vector<RegimeRow> one{{1e-4, fit_with(0.3, 1, 300), false}};
    EXPECT_EQ(compare_regimes(one).rows.size(), 1u);
    EXPECT_THROW(compare_regimes(std::span<const RegimeRow>{}), EmptyInput);
}

TEST(CompareRegimes, ReportHeader) {
    const std::vector<RegimeRow> one{{1e-4, fit_with(0.3, 1, 300), false}};
    std::ostringstream out;
    write_report(compare_regimes(one), out);
    const std::string text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "rate,alpha,smin,ks,pvalue,flag");
    EXPECT_NE(text.find("power_law"), std::string::npos);
}

TEST(StationWindow, SelectsInclusiveRange) {
    std::vector<damage::AvalancheRecord> recs(10);
    for (int i = 0; i < 10; ++i) recs[i].station = i + 1;
    const auto w = station_window(recs, 3, 5);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w.front().station, 3);
    EXPECT_EQ(w.back().station, 5);
    EXPECT_EQ(station_window(recs, 8).size(), 3u);
    EXPECT_THROW(station_window(recs, 5, 4), InvalidParameter);

    const auto tail = skip_leading(recs, 0.2);
    ASSERT_EQ(tail.size(), 8u);
    EXPECT_EQ(tail.front().station, 3);
    EXPECT_EQ(skip_leading(recs, 0.0).size(), 10u);
    EXPECT_THROW(skip_leading(recs, 1.0), InvalidParameter);
}
