#pragma once

// Injection scenarios on a square lattice: a pressure or flux drive at the
// centre, drained outer rim, rollers on the left and bottom edges.
//
// Every time station is: set the drive for t_{n+1}, solve, then run the
// avalanche inner loop with the drive frozen. The drive is only advanced
// after the inner loop has converged.

#include "socfrac/avalanche.hpp"
#include "socfrac/damage.hpp"
#include "socfrac/lattice.hpp"
#include "socfrac/solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace socfrac::scenario {

enum class Mode { quasi_static, dynamic };
/// flux_ramp raises the injected flux by `drive_value` at every station.
enum class DriveType { pressure, flux, flux_ramp };
enum class OuterBc { drained, impervious };

/// Pressure node (jx, jy) observed at every completed station.
struct MonitorSpec {
    std::string name;
    int jx = 0;
    int jy = 0;
};

struct ScenarioConfig {
    int nx = 16;
    int ny = 16;
    double cell_size = 1.0;  // mm
    Mode mode = Mode::quasi_static;
    DriveType drive = DriveType::flux;
    double drive_value = 3e-2;  // MPa for pressure, mm^3/s for flux, mm^3/s per station for flux_ramp
    /// Linear ramp of the drive; negative selects the default (1% of the run
    /// for the pressure drive, instantaneous for the flux drive).
    double ramp_time = -1.0;
    /// Station spacing; 0 selects the default (1 s quasi-static,
    /// 0.2 * (a/2) / sqrt(E0/rho) dynamic).
    double dt = 0.0;
    int steps = 200;
    std::uint64_t seed = 1;
    lattice::MaterialParams material;
    double beta1 = 0.6;
    double beta2 = 0.65;
    std::vector<MonitorSpec> monitors;  // empty selects centre/near/far defaults
    int snapshot_stride = 0;            // 0 disables snapshots
    OuterBc outer_bc = OuterBc::drained;
    bool damage = true;
    damage::StressCriterion criterion = damage::StressCriterion::tension;
    /// Ground spring on every displacement DOF, relative to E0 A / (a/2).
    double stabilization = 1e-8;
    std::size_t max_sweeps = 0;

    void validate() const;
    double time_step() const;
    double ramp_duration() const;
    std::vector<MonitorSpec> effective_monitors() const;
};

/// Flat `key = value` text, `#` starts a comment. Unknown keys and malformed
/// values raise ConfigError.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::string& path);

/// Pressure nodes receiving the drive: the single centre node when the node
/// count per direction is odd, otherwise the 2 or 4 nodes around the centre.
std::vector<int> center_p_nodes(const lattice::LatticeGrid& grid);

struct DriveLoad {
    solver::Dirichlet fixed;  // solid supports, rim pressure, pressure drive
    solver::Vector f;         // full-length load vector [f_u, f_p]
    double magnitude = 0.0;   // drive value after the ramp
};

double drive_magnitude(const ScenarioConfig& config, double t);

/// Constraints and loads for time t.
DriveLoad apply_drive(const ScenarioConfig& config, const lattice::LatticeGrid& grid, double t);

struct MonitorSeries {
    std::string name;
    int jx = 0;
    int jy = 0;
    std::vector<double> times;
    std::vector<double> pressures;
    std::vector<double> ux;
    std::vector<double> uy;
};

struct FieldSnapshot {
    int step = 0;
    std::vector<double> modulus;     // per truss, MPa (0 when broken)
    std::vector<double> abs_stress;  // per truss, MPa
    std::vector<bool> broken;
};

struct ScenarioResult {
    std::vector<MonitorSeries> monitors;
    std::vector<FieldSnapshot> snapshots;
    std::vector<damage::AvalancheRecord> records;
    std::vector<double> drive_history;  // drive magnitude per completed station
    solver::SimState final_state;
    std::vector<damage::TrussState> final_trusses;
};

/// Called after each completed station with the record just produced.
using StationObserver = std::function<void(const damage::AvalancheRecord&)>;

ScenarioResult run_scenario(const ScenarioConfig& config, const StationObserver& observer = {});

struct PressureJump {
    std::size_t index = 0;  // sample index in the series
    double t = 0.0;
    double dp = 0.0;
    int sign = 0;  // +1 rise, -1 drop
};

/// Flags samples whose one-step change exceeds `threshold` times the mean
/// absolute one-step change over the preceding `window` steps.
/// Throws InvalidParameter when the series is not longer than `window` + 1.
std::vector<PressureJump> detect_pressure_jumps(const MonitorSeries& series, std::size_t window,
                                                double threshold);

void write_series(const MonitorSeries& series, const std::string& path);
MonitorSeries read_series(const std::string& path);
void write_snapshot(const FieldSnapshot& snapshot, const std::string& path);
FieldSnapshot read_snapshot(const std::string& path);

/// Runs the scenario and writes monitor_<name>.csv, snapshot_<step>.csv and
/// avalanches.ndjson into `out_dir`. Avalanche records are streamed as they
/// complete; on failure the monitors gathered so far are still written and
/// the error is rethrown.
ScenarioResult run_scenario_to_dir(const ScenarioConfig& config, const std::string& out_dir);

}  // namespace socfrac::scenario
