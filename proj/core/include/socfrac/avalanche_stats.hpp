#pragma once

// Avalanche-size and waiting-time statistics with a discrete power-law fit
// (maximum likelihood exponent, KS-selected lower cutoff, semi-parametric
// bootstrap plausibility).

#include "socfrac/avalanche.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace socfrac::stats {

struct SizeDistribution {
    std::map<int, double> probability;  // s >= 1 -> P(s)
    std::size_t event_count = 0;
};

/// Records whose station index lies in [first, last].
std::vector<damage::AvalancheRecord> station_window(std::span<const damage::AvalancheRecord> records, int first,
                                                    int last = std::numeric_limits<int>::max());

/// Drops the leading `fraction` of the run: keeps stations > fraction * (last station).
std::vector<damage::AvalancheRecord> skip_leading(std::span<const damage::AvalancheRecord> records,
                                                  double fraction);

/// Sizes of all stations with s >= 1, in station order.
std::vector<int> avalanche_sizes(std::span<const damage::AvalancheRecord> records);

/// Normalised histogram over s >= 1. Throws EmptyInput when no station has s >= 1.
SizeDistribution size_distribution(std::span<const damage::AvalancheRecord> records);
SizeDistribution size_distribution(std::span<const int> sizes);

struct WaitingTimeSet {
    std::vector<int> gaps;  // station gaps between successive events, >= 1
};

/// Throws InsufficientSamples with fewer than two event stations.
WaitingTimeSet waiting_times(std::span<const damage::AvalancheRecord> records);

struct PowerLawFit {
    double alpha = 0.0;
    int s_min = 1;
    int s_max = 1;
    std::size_t n_tail = 0;
    double ks = 0.0;
    /// Bootstrap plausibility; NaN when the bootstrap was skipped.
    double p_value = 0.0;
    std::size_t resamples = 0;

    double support_decades() const;
};

struct FitOptions {
    std::optional<int> s_min;     // fixed cutoff; otherwise chosen by KS minimisation
    std::size_t bootstrap = 1000; // 0 skips the plausibility test
    std::size_t min_tail = 50;
    /// Cutoffs scanned by KS minimisation must leave this many decades between
    /// s_min and the largest sample (the smallest sample is always a candidate).
    double min_support_decades = 1.0;
    std::uint64_t seed = 0x5eed;
};

/// Throws InsufficientSamples when fewer than `min_tail` samples are usable,
/// DegenerateSample when the sample has a single distinct value.
PowerLawFit fit_power_law(std::span<const int> samples, const FitOptions& options = {});

/// Maximum-likelihood exponent for P(s) = s^-alpha / zeta(alpha, s_min), s >= s_min.
double power_law_mle(std::span<const int> tail, int s_min);

/// Kolmogorov-Smirnov distance between the tail sample (values >= s_min) and
/// the discrete power law with exponent `alpha`.
double power_law_ks(std::span<const int> tail, double alpha, int s_min);

/// Hurwitz zeta sum_{k>=0} (k + q)^-s for s > 1, q > 0.
double hurwitz_zeta(double s, double q);

/// Inverse-CDF sampler of the discrete power law.
class PowerLawSampler {
public:
    PowerLawSampler(double alpha, int s_min);
    int operator()(double u) const;  // u uniform in (0, 1)

private:
    double alpha_;
    int s_min_;
    std::vector<double> ccdf_;  // P(S >= s_min + i)
};

struct RegimeRow {
    double rate = 0.0;
    PowerLawFit fit;
    bool destroyed = false;
};

struct RegimeReport {
    std::vector<RegimeRow> rows;  // most plausible first
};

struct RegimeThresholds {
    double min_p_value = 0.1;
    double min_decades = 1.0;
};

/// Flags a drive rate as "destroyed" when its fit has p < 0.1 or its tail
/// spans less than one decade. Throws EmptyInput for no fits.
RegimeReport compare_regimes(std::span<const RegimeRow> fits, const RegimeThresholds& thresholds = {});

/// CSV with header rate,alpha,smin,ks,pvalue,flag.
void write_report(const RegimeReport& report, std::ostream& out);

}  // namespace socfrac::stats
