#include "socfrac/kgd.hpp"

#include "socfrac/errors.hpp"

#include <cmath>

namespace socfrac::kgd {

void KgdParams::validate() const {
    if (!(shear_modulus > 0.0) || !(injection_rate > 0.0) || !(viscosity > 0.0)) {
        throw InvalidParameter("G, Q and mu must be positive");
    }
    if (!(poisson >= 0.0 && poisson < 0.5)) throw InvalidParameter("Poisson ratio must lie in [0, 0.5)");
}

double kgd_length(double t, const KgdParams& p) {
    p.validate();
    if (t < 0.0) throw DomainError("time must be non-negative");
    const double group = p.shear_modulus * std::pow(p.injection_rate, 3) / (p.viscosity * (1.0 - p.poisson));
    return 0.65 * std::pow(group, 1.0 / 6.0) * std::pow(t, 2.0 / 3.0);
}

double kgd_cmod(double t, const KgdParams& p) {
    p.validate();
    if (t < 0.0) throw DomainError("time must be non-negative");
    const double group = p.viscosity * (1.0 - p.poisson) * std::pow(p.injection_rate, 3) / p.shear_modulus;
    return 2.14 * std::pow(group, 1.0 / 6.0) * std::cbrt(t);
}

double kgd_pcm(double length, const KgdParams& p) {
    p.validate();
    if (!(length > 0.0)) throw DomainError("crack length must be positive");
    const double group = std::pow(p.shear_modulus, 3) * p.injection_rate * p.viscosity /
                         (std::pow(1.0 - p.poisson, 3) * length * length);
    return 1.97 * std::pow(group, 0.25) + p.confining;
}

}  // namespace socfrac::kgd
