#pragma once

// Beam on a brittle elastic foundation, debonding from a pre-cracked left end
// under a uniform transverse load.
//
//   rhoA v'' + EJ v'''' + f(v) bond = q(t)
//
// Finite differences on a uniform grid with free-end ghost closure, trapezoidal
// (Newmark) time stepping.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace socfrac::beam {

enum class CohesiveVariant { linear_brittle, constant_traction };

struct CohesiveLaw {
    CohesiveVariant variant = CohesiveVariant::linear_brittle;
    double k_f = 1.0;      // foundation stiffness per length, N/mm^2
    double v_c = 1.0;      // breaking opening, mm
    double traction = 0.0; // constant-traction plateau, N/mm; <= 0 means k_f v_c / 2

    void validate() const;
    double plateau() const;
};

/// Foundation force per length. Zero when debonded or beyond v_c. Negative
/// openings are resisted elastically (contact) in both variants.
double cohesive_force(double v, const CohesiveLaw& law, bool bonded);

struct BeamConfig {
    double ej = 1.0;            // flexural rigidity, N mm^2
    double rho_a = 1.0;         // mass per length
    double length = 100.0;      // mm
    double initial_crack = 10.0;
    int nodes = 201;
    CohesiveLaw law;
    double q_max = 0.05;        // N/mm
    double ramp_time = 10.0;    // s
    double dt = 0.0;            // 0: 0.1 * 2 / omega_max
    double t_end = 200.0;
    double damping = 0.0;       // mass-proportional, 1/s
    int profile_stride = 0;     // 0: no profiles

    void validate() const;
    double spacing() const { return length / (nodes - 1); }
    double x(int i) const { return i * spacing(); }
    double time_step() const;
    double load(double t) const;
};

/// Upper bound of the highest natural frequency (Gershgorin on the discrete operator).
double max_frequency(const BeamConfig& config);

struct BeamState {
    Eigen::VectorXd v;
    Eigen::VectorXd vd;
    Eigen::VectorXd vdd;
    std::vector<std::uint8_t> bond;  // 1 = intact
    int front_index = 0;             // first intact node; == nodes when fully debonded
    double t = 0.0;
};

/// Undeformed beam at rest; nodes with x < L_o are debonded.
BeamState initial_state(const BeamConfig& config);

/// Symmetric free-free bending matrix S with (W^-1 S v) / h^4 ~ v'''' and
/// W = diag(1/2, 1, ..., 1, 1/2). Throws GeometryError for fewer than 5 nodes.
Eigen::SparseMatrix<double> bending_matrix(int nodes);

/// Nodal EJ v'''' with the ghost-node closure v'' = v''' = 0 at both ends.
Eigen::VectorXd spatial_operator(std::span<const double> v, double ej, double h);
Eigen::VectorXd spatial_operator(const BeamState& state, const BeamConfig& config);

/// Trapezoidal stepper. The factorisation is rebuilt only when bonds change.
class BeamIntegrator {
public:
    explicit BeamIntegrator(BeamConfig config);

    const BeamConfig& config() const noexcept { return config_; }
    double dt() const noexcept { return dt_; }

    /// Advances by dt, then debonds the front while its opening >= v_c.
    /// Returns the number of nodes debonded in this step.
    int step(BeamState& state);

    /// Kinetic + bending + foundation energy in the trapezoidal-weighted norm.
    double energy(const BeamState& state) const;

private:
    void factorize(const BeamState& state);
    Eigen::VectorXd foundation_force(const BeamState& state) const;

    BeamConfig config_;
    double dt_;
    Eigen::VectorXd weight_;
    Eigen::SparseMatrix<double> bending_;
    struct Factor;
    std::shared_ptr<Factor> factor_;
    std::vector<std::uint8_t> factored_bond_;
};

struct Profile {
    long long step = 0;
    double t = 0.0;
    std::vector<double> v;
    std::vector<std::uint8_t> bond;
};

struct BeamRun {
    std::vector<double> times;
    std::vector<double> crack_length;
    std::vector<Profile> profiles;
    BeamState final_state;
};

/// Integrates to t_end, recording the crack length every step.
BeamRun run(const BeamConfig& config);

struct CrackSeries {
    std::vector<double> t;
    std::vector<double> length;
    std::vector<double> velocity;
};

/// Crack length resampled every `sample_interval` (<= 0: every recorded step)
/// with central-difference tip velocity.
CrackSeries crack_length_series(const BeamRun& run, double sample_interval = 0.0);

/// First time the crack reaches `length`; negative if never.
double time_to_length(const BeamRun& run, double length);

struct VelocityPhases {
    double mean = 0.0;
    double coefficient_of_variation = 0.0;
    int fast_phases = 0;
    int slow_phases = 0;
};

/// Statistics of the tip velocity over samples with t in [t0, t1]. A fast
/// (slow) phase is a maximal run above (1 + band) (below (1 - band)) times the mean.
VelocityPhases velocity_phases(const CrackSeries& series, double t0, double t1, double band = 0.1);

BeamConfig parse_config(std::istream& in);
BeamConfig load_config(const std::string& path);

void write_crack_length(const CrackSeries& series, const std::string& path);
void write_profile(const Profile& profile, const BeamConfig& config, const std::string& path);

}  // namespace socfrac::beam
