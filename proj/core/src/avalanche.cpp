#include "socfrac/avalanche.hpp"

#include "socfrac/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <sstream>

namespace socfrac::damage {

int AvalancheRecord::size() const noexcept {
    std::size_t s = 0;
    for (const auto& sw : sweeps) s += sw.size();
    return static_cast<int>(s);
}

InnerLoopResult avalanche_inner_loop(std::vector<TrussState>& states, SeededRng& rng,
                                     const StationSolver& solve, int station, double t,
                                     const InnerLoopOptions& options) {
    const std::size_t cap = options.max_sweeps != 0 ? options.max_sweeps : 10 * states.size();
    InnerLoopResult result;
    result.record.station = station;
    result.record.t = t;

    for (;;) {
        result.solution = solve(states);
        result.record.solve_times.push_back(result.solution.t);
        result.record.solve_drives.push_back(result.solution.drive);

        auto over = damage_sweep(result.solution.stresses, states, options.criterion);
        if (over.empty()) return result;

        if (result.record.sweeps.size() >= cap) {
            std::ostringstream msg;
            msg << "runaway avalanche at station " << station << " (t=" << t << "): " << cap
                << " sweeps exceeded; last sweep sizes:";
            const std::size_t n = result.record.sweeps.size();
            for (std::size_t i = n > 10 ? n - 10 : 0; i < n; ++i) {
                msg << ' ' << result.record.sweeps[i].size();
            }
            msg << "; pending " << over.size();
            throw RunawayAvalanche(msg.str());
        }
        for (int id : over) states[static_cast<std::size_t>(id)] = apply_damage(states[id], rng);
        result.record.sweeps.push_back(std::move(over));
    }
}

std::string to_ndjson(const AvalancheRecord& record) {
    nlohmann::json j;
    j["station"] = record.station;
    j["t"] = record.t;
    j["s"] = record.size();
    j["sweeps"] = record.sweeps;
    j["solve_t"] = record.solve_times;
    j["solve_drive"] = record.solve_drives;
    return j.dump();
}

AvalancheRecord from_ndjson(const std::string& line) {
    AvalancheRecord r;
    try {
        const auto j = nlohmann::json::parse(line);
        r.station = j.value("station", 0);
        r.t = j.at("t").get<double>();
        r.sweeps = j.at("sweeps").get<std::vector<std::vector<int>>>();
        if (j.contains("solve_t")) r.solve_times = j["solve_t"].get<std::vector<double>>();
        if (j.contains("solve_drive")) r.solve_drives = j["solve_drive"].get<std::vector<double>>();
        if (j.contains("s") && j["s"].get<int>() != r.size()) {
            throw ConsistencyError("record s does not equal the sum of sweep lengths");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed avalanche record: ") + e.what());
    }
    return r;
}

std::vector<AvalancheRecord> read_ndjson(std::istream& in) {
    std::vector<AvalancheRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(from_ndjson(line));
    }
    return out;
}

std::vector<AvalancheRecord> read_ndjson_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_ndjson(in);
}

}  // namespace socfrac::damage
