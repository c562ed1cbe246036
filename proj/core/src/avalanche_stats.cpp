#include "socfrac/avalanche_stats.hpp"

#include "socfrac/errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_zeta.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace socfrac::stats {

namespace {

constexpr double kAlphaLo = 1.0 + 1e-7;
constexpr double kAlphaHi = 30.0;
constexpr int kDirectSumGap = 64;

// Sorted sample compressed to distinct values and counts, with suffix sums
// so that every candidate cutoff is O(1) to set up.
struct Compressed {
    std::vector<int> values;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> tail_count;  // samples with value >= values[k]
    std::vector<double> tail_log_sum;     // sum of ln(x) over those samples

    explicit Compressed(std::span<const int> samples) {
        std::vector<int> sorted(samples.begin(), samples.end());
        std::sort(sorted.begin(), sorted.end());
        for (int v : sorted) {
            if (!values.empty() && values.back() == v) {
                ++counts.back();
            } else {
                values.push_back(v);
                counts.push_back(1);
            }
        }
        const std::size_t m = values.size();
        tail_count.assign(m + 1, 0);
        tail_log_sum.assign(m + 1, 0.0);
        for (std::size_t k = m; k-- > 0;) {
            tail_count[k] = tail_count[k + 1] + counts[k];
            tail_log_sum[k] =
                tail_log_sum[k + 1] + static_cast<double>(counts[k]) * std::log(static_cast<double>(values[k]));
        }
    }

    std::size_t first_at_least(int s_min) const {
        return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), s_min) - values.begin());
    }
};

// Sum_{j=lo}^{hi-1} j^-alpha + zeta(alpha, hi) == zeta(alpha, lo)
double zeta_step_down(double alpha, int lo, int hi, double zeta_hi) {
    if (hi - lo <= kDirectSumGap) {
        double s = 0.0;
        for (int j = hi - 1; j >= lo; --j) s += std::pow(static_cast<double>(j), -alpha);
        return zeta_hi + s;
    }
    return hurwitz_zeta(alpha, static_cast<double>(lo));
}

double mle_from(const Compressed& c, std::size_t k, int s_min) {
    const double n = static_cast<double>(c.tail_count[k]);
    const double log_sum = c.tail_log_sum[k];
    auto nll = [&](double alpha) {
        return n * std::log(hurwitz_zeta(alpha, static_cast<double>(s_min))) + alpha * log_sum;
    };
    const auto r = boost::math::tools::brent_find_minima(nll, kAlphaLo, kAlphaHi, 40);
    return r.first;
}

double ks_from(const Compressed& c, std::size_t k0, double alpha, int s_min) {
    const std::size_t m = c.values.size();
    const double n = static_cast<double>(c.tail_count[k0]);
    // zeta(alpha, values[k]) for k >= k0, top-down.
    std::vector<double> z(m - k0);
    z.back() = hurwitz_zeta(alpha, static_cast<double>(c.values[m - 1]));
    for (std::size_t k = m - 1; k-- > k0;) {
        z[k - k0] = zeta_step_down(alpha, c.values[k], c.values[k + 1], z[k + 1 - k0]);
    }
    const double total = zeta_step_down(alpha, s_min, c.values[k0], z[0]);

    auto model_cdf = [&](double zeta_next) { return 1.0 - zeta_next / total; };  // P(S <= x)
    double d = 0.0;
    if (c.values[k0] > s_min) d = std::max(d, std::abs(model_cdf(z[0])));  // x = values[k0] - 1
    double cum = 0.0;
    for (std::size_t k = k0; k < m; ++k) {
        cum += static_cast<double>(c.counts[k]);
        const double fe = cum / n;
        const double x = static_cast<double>(c.values[k]);
        const double z_after = z[k - k0] - std::pow(x, -alpha);  // zeta(alpha, x + 1)
        d = std::max(d, std::abs(fe - model_cdf(z_after)));
        if (k + 1 < m && c.values[k + 1] > c.values[k] + 1) {
            d = std::max(d, std::abs(fe - model_cdf(z[k + 1 - k0])));
        }
    }
    return d;
}

struct CoreFit {
    double alpha = 0.0;
    int s_min = 1;
    double ks = 0.0;
    std::size_t n_tail = 0;
};

CoreFit fit_core(const Compressed& c, std::optional<int> fixed_s_min, std::size_t min_tail, double min_decades) {
    if (c.values.empty()) throw InsufficientSamples("no samples");
    if (c.values.size() == 1) throw DegenerateSample("all samples share the value " + std::to_string(c.values[0]));

    // The smallest value is always a candidate; larger cutoffs must leave
    // `min_decades` of support below the largest sample.
    const double largest = static_cast<double>(c.values.back());
    auto usable = [&](std::size_t k) {
        const bool wide = k == 0 || largest >= c.values[k] * std::pow(10.0, min_decades);
        return wide && c.tail_count[k] >= min_tail && k + 1 < c.values.size();
    };

    if (fixed_s_min) {
        const std::size_t k = c.first_at_least(*fixed_s_min);
        if (k >= c.values.size() || c.tail_count[k] < min_tail) {
            throw InsufficientSamples("fewer than " + std::to_string(min_tail) + " samples at or above s_min=" +
                                      std::to_string(*fixed_s_min));
        }
        if (k + 1 >= c.values.size()) throw DegenerateSample("tail above s_min has a single value");
        CoreFit f;
        f.s_min = *fixed_s_min;
        f.alpha = mle_from(c, k, f.s_min);
        f.ks = ks_from(c, k, f.alpha, f.s_min);
        f.n_tail = c.tail_count[k];
        return f;
    }

    CoreFit best;
    bool found = false;
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        if (!usable(k)) continue;
        const int s_min = c.values[k];
        const double alpha = mle_from(c, k, s_min);
        const double d = ks_from(c, k, alpha, s_min);
        if (!found || d < best.ks) {
            best = {alpha, s_min, d, c.tail_count[k]};
            found = true;
        }
    }
    if (!found) {
        throw InsufficientSamples("no cutoff leaves " + std::to_string(min_tail) + " samples with two distinct values");
    }
    return best;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform_open(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double hurwitz_zeta(double s, double q) {
    static const bool handler_off = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)handler_off;
    gsl_sf_result r;
    const int status = gsl_sf_hzeta_e(s, q, &r);
    if (status != GSL_SUCCESS && status != GSL_EUNDRFLW) {
        throw DomainError("hurwitz zeta failed for s=" + std::to_string(s) + ", q=" + std::to_string(q));
    }
    return r.val;
}

std::vector<damage::AvalancheRecord> station_window(std::span<const damage::AvalancheRecord> records, int first,
                                                    int last) {
    if (last < first) throw InvalidParameter("station window is empty");
    std::vector<damage::AvalancheRecord> out;
    for (const auto& r : records) {
        if (r.station >= first && r.station <= last) out.push_back(r);
    }
    return out;
}

std::vector<damage::AvalancheRecord> skip_leading(std::span<const damage::AvalancheRecord> records,
                                                  double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidParameter("skip fraction must lie in [0, 1)");
    int last = 0;
    for (const auto& r : records) last = std::max(last, r.station);
    const int first = static_cast<int>(std::floor(fraction * last)) + 1;
    return station_window(records, first);
}

std::vector<int> avalanche_sizes(std::span<const damage::AvalancheRecord> records) {
    std::vector<int> out;
    for (const auto& r : records) {
        const int s = r.size();
        if (s >= 1) out.push_back(s);
    }
    return out;
}

SizeDistribution size_distribution(std::span<const int> sizes) {
    SizeDistribution d;
    std::map<int, std::size_t> counts;
    for (int s : sizes) {
        if (s >= 1) {
            ++counts[s];
            ++d.event_count;
        }
    }
    if (d.event_count == 0) throw EmptyInput("no avalanche with s >= 1");
    for (const auto& [s, c] : counts) {
        d.probability[s] = static_cast<double>(c) / static_cast<double>(d.event_count);
    }
    return d;
}

SizeDistribution size_distribution(std::span<const damage::AvalancheRecord> records) {
    const auto sizes = avalanche_sizes(records);
    return size_distribution(std::span<const int>(sizes));
}

WaitingTimeSet waiting_times(std::span<const damage::AvalancheRecord> records) {
    std::vector<int> stations;
    for (const auto& r : records) {
        if (r.size() >= 1) stations.push_back(r.station);
    }
    std::sort(stations.begin(), stations.end());
    if (stations.size() < 2) throw InsufficientSamples("need at least two event stations");
    WaitingTimeSet w;
    for (std::size_t i = 1; i < stations.size(); ++i) w.gaps.push_back(stations[i] - stations[i - 1]);
    return w;
}

double PowerLawFit::support_decades() const {
    return std::log10(static_cast<double>(s_max) / static_cast<double>(s_min));
}

double power_law_mle(std::span<const int> tail, int s_min) {
    if (s_min < 1) throw InvalidParameter("s_min must be at least 1");
    std::vector<int> kept;
    for (int v : tail) {
        if (v >= s_min) kept.push_back(v);
    }
    const Compressed c(kept);
    if (c.values.empty()) throw InsufficientSamples("no samples at or above s_min");
    if (c.values.size() == 1) throw DegenerateSample("tail has a single distinct value");
    return mle_from(c, 0, s_min);
}

double power_law_ks(std::span<const int> tail, double alpha, int s_min) {
    std::vector<int> kept;
    for (int v : tail) {
        if (v >= s_min) kept.push_back(v);
    }
    const Compressed c(kept);
    if (c.values.empty()) throw InsufficientSamples("no samples at or above s_min");
    return ks_from(c, 0, alpha, s_min);
}

PowerLawSampler::PowerLawSampler(double alpha, int s_min) : alpha_(alpha), s_min_(s_min) {
    if (!(alpha > 1.0)) throw InvalidParameter("power-law exponent must exceed 1");
    if (s_min < 1) throw InvalidParameter("s_min must be at least 1");
    constexpr int kTable = 100000;
    ccdf_.resize(kTable);
    double z = hurwitz_zeta(alpha, static_cast<double>(s_min) + kTable);
    for (int i = kTable - 1; i >= 0; --i) {
        z += std::pow(static_cast<double>(s_min + i), -alpha);
        ccdf_[static_cast<std::size_t>(i)] = z;
    }
    const double total = ccdf_[0];
    for (double& v : ccdf_) v /= total;
}

int PowerLawSampler::operator()(double u) const {
    // Largest s with P(S >= s) >= u.
    if (u >= ccdf_.back()) {
        const auto it = std::partition_point(ccdf_.begin(), ccdf_.end(), [u](double c) { return c >= u; });
        return s_min_ + static_cast<int>(it - ccdf_.begin()) - 1;
    }
    // Far tail: zeta(alpha, s) ~ (s - 1/2)^(1-alpha) / (alpha - 1).
    const double total = hurwitz_zeta(alpha_, static_cast<double>(s_min_));
    const double x = 0.5 + std::pow((alpha_ - 1.0) * total * u, -1.0 / (alpha_ - 1.0));
    const double capped = std::min(std::floor(x), static_cast<double>(std::numeric_limits<int>::max()));
    return std::max(static_cast<int>(capped), s_min_ + static_cast<int>(ccdf_.size()) - 1);
}

PowerLawFit fit_power_law(std::span<const int> samples, const FitOptions& options) {
    if (samples.size() < options.min_tail) {
        throw InsufficientSamples("need at least " + std::to_string(options.min_tail) + " samples, got " +
                                  std::to_string(samples.size()));
    }
    for (int s : samples) {
        if (s < 1) throw InvalidParameter("power-law samples must be positive integers");
    }
    const Compressed c(samples);
    const CoreFit core = fit_core(c, options.s_min, options.min_tail, options.min_support_decades);

    PowerLawFit fit;
    fit.alpha = core.alpha;
    fit.s_min = core.s_min;
    fit.s_max = c.values.back();
    fit.n_tail = core.n_tail;
    fit.ks = core.ks;
    fit.p_value = std::numeric_limits<double>::quiet_NaN();
    if (options.bootstrap == 0) return fit;

    std::vector<int> body;
    for (int s : samples) {
        if (s < core.s_min) body.push_back(s);
    }
    const double tail_fraction = static_cast<double>(core.n_tail) / static_cast<double>(samples.size());
    const PowerLawSampler sampler(core.alpha, core.s_min);

    std::size_t worse = 0;
    std::size_t done = 0;
    std::vector<int> synthetic(samples.size());
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
        std::mt19937_64 g(splitmix64(options.seed ^ splitmix64(b)));
        for (auto& x : synthetic) {
            if (body.empty() || uniform_open(g) < tail_fraction) {
                x = sampler(uniform_open(g));
            } else {
                x = body[static_cast<std::size_t>(g() % body.size())];
            }
        }
        try {
            const CoreFit syn = fit_core(Compressed(synthetic), options.s_min, options.min_tail, options.min_support_decades);
            ++done;
            if (syn.ks >= core.ks) ++worse;
        } catch (const InsufficientSamples&) {
        } catch (const DegenerateSample&) {
        }
    }
    fit.resamples = done;
    fit.p_value = done > 0 ? static_cast<double>(worse) / static_cast<double>(done) : 0.0;
    return fit;
}

RegimeReport compare_regimes(std::span<const RegimeRow> fits, const RegimeThresholds& thresholds) {
    if (fits.empty()) throw EmptyInput("no fits to compare");
    RegimeReport report;
    for (const auto& f : fits) {
        RegimeRow row = f;
        row.destroyed = !(f.fit.p_value >= thresholds.min_p_value) ||
                        f.fit.support_decades() < thresholds.min_decades;
        report.rows.push_back(row);
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const RegimeRow& a, const RegimeRow& b) {
        return a.fit.p_value > b.fit.p_value;
    });
    return report;
}

void write_report(const RegimeReport& report, std::ostream& out) {
    out << "rate,alpha,smin,ks,pvalue,flag\n";
    for (const auto& r : report.rows) {
        out << r.rate << ',' << r.fit.alpha << ',' << r.fit.s_min << ',' << r.fit.ks << ','
            << r.fit.p_value << ',' << (r.destroyed ? "destroyed" : "power_law") << '\n';
    }
}

}  // namespace socfrac::stats
