#include "socfrac/damage.hpp"

#include "socfrac/errors.hpp"

#include <cmath>
#include <string>

namespace socfrac::damage {

double draw_threshold(SeededRng& rng) { return rng.uniform_open(); }

TrussState make_intact(double initial_modulus, SeededRng& rng) {
    if (!(initial_modulus > 0.0)) {
        throw InvalidParameter("initial modulus must be positive");
    }
    TrussState s;
    s.initial_modulus = initial_modulus;
    s.modulus = initial_modulus;
    s.threshold = draw_threshold(rng);
    return s;
}

std::vector<TrussState> make_intact_states(std::size_t count, double initial_modulus,
                                           SeededRng& rng) {
    std::vector<TrussState> states;
    states.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        states.push_back(make_intact(initial_modulus, rng));
    }
    return states;
}

TrussState apply_damage(const TrussState& state, SeededRng& rng) {
    if (state.broken) {
        throw LogicError("cannot damage a broken truss");
    }
    TrussState next = state;
    next.damage_count += 1;
    // Recomputed from the initial modulus rather than multiplied in place so
    // that E = E0 * 0.9^n holds exactly for every n.
    next.modulus = state.initial_modulus * std::pow(1.0 - kDamageFraction, next.damage_count);
    next.threshold = draw_threshold(rng);
    next.broken = next.damage_count >= kMaxDamageEvents;
    return next;
}

std::vector<int> damage_sweep(std::span<const double> stresses,
                              std::span<const TrussState> states,
                              StressCriterion criterion) {
    if (stresses.size() != states.size()) {
        throw ConsistencyError("stress vector has " + std::to_string(stresses.size()) +
                               " entries, truss states " + std::to_string(states.size()));
    }
    std::vector<int> over;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].broken) continue;
        const double s = criterion == StressCriterion::tension ? stresses[i] : std::abs(stresses[i]);
        if (s > states[i].threshold) over.push_back(static_cast<int>(i));
    }
    return over;
}

}  // namespace socfrac::damage
