#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace socfrac::damage {

/// Fixed damage fraction per event: each event keeps 90% of the modulus.
inline constexpr double kDamageFraction = 0.1;
/// Number of damage events after which a truss is removed.
inline constexpr int kMaxDamageEvents = 30;

/// Damaged elastic state of one truss.
///
/// `modulus` always equals `initial_modulus * 0.9^damage_count`; once
/// `damage_count` reaches 30 the truss is broken and contributes nothing to
/// the stiffness (effective_modulus() returns 0).
struct TrussState {
    double initial_modulus = 0.0;
    double modulus = 0.0;
    double threshold = 0.0;
    int damage_count = 0;
    bool broken = false;

    double effective_modulus() const noexcept { return broken ? 0.0 : modulus; }
};

/// Seeded source of failure thresholds.
///
/// The generator is std::mt19937_64 (its output sequence is fixed by the C++
/// standard) and doubles are formed as ((x >> 11) + 0.5) * 2^-53, which lands
/// strictly inside (0, 1). Same seed gives the same bit-exact sequence on any
/// conforming implementation.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Uniform double in the open interval (0, 1).
    double uniform_open() {
        const std::uint64_t bits = engine_() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Uniform stress threshold in (0, 1) MPa.
double draw_threshold(SeededRng& rng);

/// Fresh, undamaged truss with a threshold drawn from `rng`.
TrussState make_intact(double initial_modulus, SeededRng& rng);

/// Per-truss initial states, thresholds drawn in truss-id order.
std::vector<TrussState> make_intact_states(std::size_t count, double initial_modulus,
                                           SeededRng& rng);

/// One damage event: modulus scaled by 0.9, count incremented, threshold
/// redrawn (annealed disorder); the truss breaks on the 30th event.
/// Throws LogicError when the truss is already broken.
TrussState apply_damage(const TrussState& state, SeededRng& rng);

enum class StressCriterion {
    tension,   // damage when sigma > threshold
    absolute,  // damage when |sigma| > threshold
};

/// Ids of every truss whose stress exceeds its threshold. No cap on the
/// number returned. Broken trusses are never listed.
std::vector<int> damage_sweep(std::span<const double> stresses,
                              std::span<const TrussState> states,
                              StressCriterion criterion = StressCriterion::tension);

}  // namespace socfrac::damage
