#pragma once

// Closed-form plane-strain hydraulic fracture (KGD-type) growth laws for a
// constant injection rate. Arguments are used as given: the caller supplies a
// coherent unit system, no conversion happens here.

namespace socfrac::kgd {

struct KgdParams {
    double shear_modulus = 1.0;   // G
    double injection_rate = 1.0;  // Q
    double viscosity = 1.0;       // mu
    double poisson = 0.0;         // nu, in [0, 0.5)
    double confining = 0.0;       // S, added to the mouth pressure

    void validate() const;
};

/// L = 0.65 (G Q^3 / (mu (1 - nu)))^(1/6) t^(2/3)
double kgd_length(double t, const KgdParams& p);

/// CMOD = 2.14 (mu (1 - nu) Q^3 / G)^(1/6) t^(1/3)
double kgd_cmod(double t, const KgdParams& p);

/// p_cm = 1.97 (G^3 Q mu / ((1 - nu)^3 L^2))^(1/4) + S. Throws DomainError for L <= 0.
double kgd_pcm(double length, const KgdParams& p);

}  // namespace socfrac::kgd
