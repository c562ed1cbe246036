#pragma once

// Avalanche inner loop: at a frozen time station the system is re-solved and
// every over-threshold truss damaged until no truss exceeds its threshold.
// Only then may the driver advance the load.

#include "socfrac/damage.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace socfrac::damage {

struct AvalancheRecord {
    int station = 0;
    double t = 0.0;
    /// Damaged truss ids, one list per inner iteration.
    std::vector<std::vector<int>> sweeps;
    /// Clock and drive magnitude actually used by each solve of the station
    /// (one more entry than `sweeps`). Lets the log prove the load never moved
    /// inside the loop.
    std::vector<double> solve_times;
    std::vector<double> solve_drives;

    /// Avalanche size s: total damage events at this station.
    int size() const noexcept;
};

/// Result of one solve at the frozen station.
struct StationSolve {
    Eigen::VectorXd a;
    std::vector<double> stresses;  // per truss, MPa
    double t = 0.0;
    double drive = 0.0;
};

using StationSolver = std::function<StationSolve(std::span<const TrussState>)>;

struct InnerLoopOptions {
    StressCriterion criterion = StressCriterion::tension;
    /// 0 means 10 x truss count.
    std::size_t max_sweeps = 0;
};

struct InnerLoopResult {
    StationSolve solution;  // converged solve: no truss above threshold
    AvalancheRecord record;
};

/// Repeats {solve -> sweep -> damage all listed} until a sweep comes back
/// empty. Throws RunawayAvalanche when the sweep cap is exceeded.
InnerLoopResult avalanche_inner_loop(std::vector<TrussState>& states, SeededRng& rng,
                                     const StationSolver& solve, int station, double t,
                                     const InnerLoopOptions& options = {});

/// One NDJSON line (no trailing newline):
/// {"station":n,"t":..,"s":..,"sweeps":[[ids]],"solve_t":[..],"solve_drive":[..]}
std::string to_ndjson(const AvalancheRecord& record);
AvalancheRecord from_ndjson(const std::string& line);

/// Reads every non-empty line of an NDJSON stream.
std::vector<AvalancheRecord> read_ndjson(std::istream& in);
std::vector<AvalancheRecord> read_ndjson_file(const std::string& path);

}  // namespace socfrac::damage
