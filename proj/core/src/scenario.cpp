#include "socfrac/scenario.hpp"

#include "socfrac/errors.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace socfrac::scenario {

namespace {

using detail::format_double;
using detail::split_csv;
using detail::to_bool;
using detail::to_double;
using detail::to_int;
using detail::trim;

// "name:jx:jy;name:jx:jy"
std::vector<MonitorSpec> parse_monitors(const std::string& v) {
    std::vector<MonitorSpec> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::stringstream is(item);
        std::string name, jx, jy;
        if (!std::getline(is, name, ':') || !std::getline(is, jx, ':') || !std::getline(is, jy)) {
            throw ConfigError("monitor entry '" + item + "' is not name:jx:jy");
        }
        out.push_back({trim(name), static_cast<int>(to_int("monitors", trim(jx))),
                       static_cast<int>(to_int("monitors", trim(jy)))});
    }
    return out;
}

// Union-find over displacement nodes connected by load-bearing trusses.
class Components {
public:
    explicit Components(int n) : parent_(static_cast<std::size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void join(int a, int b) { parent_[find(a)] = find(b); }

private:
    std::vector<int> parent_;
};

// Nodes that cannot be held by the supports: isolated nodes and every
// component of the load-bearing network that does not touch both the
// x-support (left edge) and the y-support (bottom edge).
std::vector<int> unsupported_nodes(const lattice::LatticeGrid& grid,
                                   const lattice::LoadPath& path) {
    const int n = grid.u_node_count();
    Components comp(n);
    const auto& trusses = grid.trusses();
    std::vector<bool> touched(static_cast<std::size_t>(n), false);
    for (std::size_t t = 0; t < trusses.size(); ++t) {
        if (!path.load_bearing[t]) continue;
        comp.join(trusses[t].node_a, trusses[t].node_b);
        touched[trusses[t].node_a] = true;
        touched[trusses[t].node_b] = true;
    }
    std::vector<char> has_x(static_cast<std::size_t>(n), 0);
    std::vector<char> has_y(static_cast<std::size_t>(n), 0);
    for (int iy = 0; iy < grid.u_nodes_y(); ++iy) {
        const int node = grid.u_node(0, iy);
        if (touched[node]) has_x[comp.find(node)] = 1;
    }
    for (int ix = 0; ix < grid.u_nodes_x(); ++ix) {
        const int node = grid.u_node(ix, 0);
        if (touched[node]) has_y[comp.find(node)] = 1;
    }
    std::vector<int> out;
    for (int node = 0; node < n; ++node) {
        if (!touched[node]) {
            out.push_back(node);
            continue;
        }
        const int r = comp.find(node);
        if (!has_x[r] || !has_y[r]) out.push_back(node);
    }
    return out;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (nx < 1 || ny < 1) throw ConfigError("grid must have at least one cell per direction");
    if (!(cell_size > 0.0)) throw ConfigError("cell size must be positive");
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (dt < 0.0) throw ConfigError("dt must be positive (or 0 for the default)");
    if (drive == DriveType::pressure && !(drive_value >= 0.0)) {
        throw ConfigError("pressure drive must be non-negative");
    }
    if (!(stabilization >= 0.0)) throw ConfigError("stabilization must be non-negative");
    try {
        material.validate();
        solver::Gn22Params{beta1, beta2, 1.0}.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    for (const auto& m : effective_monitors()) {
        if (m.jx < 0 || m.jx > nx || m.jy < 0 || m.jy > ny) {
            throw ConfigError("monitor '" + m.name + "' lies outside the pressure grid");
        }
    }
}

double ScenarioConfig::time_step() const {
    if (dt > 0.0) return dt;
    if (mode == Mode::quasi_static) return 1.0;
    const double rho = material.mixture_density();
    if (!(rho > 0.0)) throw ConfigError("dynamic mode needs a positive mixture density");
    const double wave_speed = std::sqrt(material.e0 / rho);
    return 0.2 * (0.5 * cell_size) / wave_speed;
}

double ScenarioConfig::ramp_duration() const {
    if (ramp_time >= 0.0) return ramp_time;
    return drive == DriveType::pressure ? 0.01 * steps * time_step() : 0.0;
}

std::vector<MonitorSpec> ScenarioConfig::effective_monitors() const {
    if (!monitors.empty()) return monitors;
    const int cx = nx / 2;
    const int cy = ny / 2;
    return {{"center", cx, cy}, {"near", std::min(cx + 1, nx), cy}, {"far", nx / 4, ny / 4}};
}

ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig c;
    for (const auto& [key, v, lineno] : detail::read_key_values(in)) {
        if (key == "grid_nx") c.nx = static_cast<int>(to_int(key, v));
        else if (key == "grid_ny") c.ny = static_cast<int>(to_int(key, v));
        else if (key == "cell_size_mm") c.cell_size = to_double(key, v);
        else if (key == "mode") {
            if (v == "quasi_static" || v == "quasi-static") c.mode = Mode::quasi_static;
            else if (v == "dynamic") c.mode = Mode::dynamic;
            else throw ConfigError("mode must be quasi_static or dynamic, got '" + v + "'");
        } else if (key == "drive_type") {
            if (v == "pressure") c.drive = DriveType::pressure;
            else if (v == "flux") c.drive = DriveType::flux;
            else if (v == "flux_ramp") c.drive = DriveType::flux_ramp;
            else throw ConfigError("unknown drive type '" + v + "'");
        } else if (key == "drive_value") c.drive_value = to_double(key, v);
        else if (key == "ramp_time_s") c.ramp_time = to_double(key, v);
        else if (key == "dt") c.dt = to_double(key, v);
        else if (key == "steps") c.steps = static_cast<int>(to_int(key, v));
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
        else if (key == "e0_mpa") c.material.e0 = to_double(key, v);
        else if (key == "truss_area_mm2") c.material.area = to_double(key, v);
        else if (key == "k_over_mu") {
            c.material.permeability = to_double(key, v);
            c.material.viscosity = 1.0;
        } else if (key == "rho_s") c.material.rho_s = to_double(key, v);
        else if (key == "rho_w") c.material.rho_w = to_double(key, v);
        else if (key == "porosity") c.material.porosity = to_double(key, v);
        else if (key == "beta1") c.beta1 = to_double(key, v);
        else if (key == "beta2") c.beta2 = to_double(key, v);
        else if (key == "monitors") c.monitors = parse_monitors(v);
        else if (key == "snapshot_stride") c.snapshot_stride = static_cast<int>(to_int(key, v));
        else if (key == "outer_bc") {
            if (v == "drained") c.outer_bc = OuterBc::drained;
            else if (v == "impervious") c.outer_bc = OuterBc::impervious;
            else throw ConfigError("outer_bc must be drained or impervious, got '" + v + "'");
        } else if (key == "damage") c.damage = to_bool(key, v);
        else if (key == "damage_criterion") {
            if (v == "tension") c.criterion = damage::StressCriterion::tension;
            else if (v == "absolute") c.criterion = damage::StressCriterion::absolute;
            else throw ConfigError("damage_criterion must be tension or absolute");
        } else if (key == "stabilization") c.stabilization = to_double(key, v);
        else if (key == "max_sweeps") c.max_sweeps = static_cast<std::size_t>(to_int(key, v));
        else throw ConfigError("unknown key '" + key + "' on line " + std::to_string(lineno));
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

std::vector<int> center_p_nodes(const lattice::LatticeGrid& grid) {
    auto middle = [](int count) {
        // count nodes indexed 0..count-1
        if (count % 2 == 1) return std::vector<int>{count / 2};
        return std::vector<int>{count / 2 - 1, count / 2};
    };
    std::vector<int> out;
    for (int jy : middle(grid.p_nodes_y())) {
        for (int jx : middle(grid.p_nodes_x())) out.push_back(grid.p_node(jx, jy));
    }
    return out;
}

double drive_magnitude(const ScenarioConfig& config, double t) {
    if (t <= 0.0) return 0.0;
    if (config.drive == DriveType::flux_ramp) return config.drive_value * (t / config.time_step());
    const double ramp = config.ramp_duration();
    if (ramp <= 0.0 || t >= ramp) return config.drive_value;
    return config.drive_value * (t / ramp);
}

DriveLoad apply_drive(const ScenarioConfig& config, const lattice::LatticeGrid& grid, double t) {
    DriveLoad load;
    load.f = solver::Vector::Zero(grid.dof_count());
    load.magnitude = drive_magnitude(config, t);

    for (int iy = 0; iy < grid.u_nodes_y(); ++iy) load.fixed.add(2 * grid.u_node(0, iy), 0.0);
    for (int ix = 0; ix < grid.u_nodes_x(); ++ix) load.fixed.add(2 * grid.u_node(ix, 0) + 1, 0.0);

    const auto centre = center_p_nodes(grid);
    auto is_centre = [&](int p) { return std::find(centre.begin(), centre.end(), p) != centre.end(); };

    if (config.outer_bc == OuterBc::drained) {
        for (int jy = 0; jy < grid.p_nodes_y(); ++jy) {
            for (int jx = 0; jx < grid.p_nodes_x(); ++jx) {
                const bool rim = jx == 0 || jy == 0 || jx == grid.p_nodes_x() - 1 ||
                                 jy == grid.p_nodes_y() - 1;
                const int p = grid.p_node(jx, jy);
                if (rim && !is_centre(p)) load.fixed.add(grid.p_dof(p), 0.0);
            }
        }
    }

    switch (config.drive) {
    case DriveType::pressure:
        for (int p : centre) load.fixed.add(grid.p_dof(p), load.magnitude);
        break;
    case DriveType::flux:
    case DriveType::flux_ramp:
        for (int p : centre) {
            load.f[grid.p_dof(p)] += load.magnitude / static_cast<double>(centre.size());
        }
        break;
    }

    if (config.material.gravity[0] != 0.0 || config.material.gravity[1] != 0.0) {
        const auto m = lattice::cell_mass_matrix(config.material.mixture_density(), grid.cell_size());
        for (int c = 0; c < grid.cell_count(); ++c) {
            const auto nodes = grid.cell_u_nodes(c);
            for (int k = 0; k < 9; ++k) {
                load.f[2 * nodes[k]] += m(2 * k, 2 * k) * config.material.gravity[0];
                load.f[2 * nodes[k] + 1] += m(2 * k + 1, 2 * k + 1) * config.material.gravity[1];
            }
        }
    }
    return load;
}

namespace {

void run_into(const ScenarioConfig& config, ScenarioResult& result, const StationObserver& observer) {
    config.validate();
    const lattice::LatticeGrid grid(config.nx, config.ny, config.cell_size);
    const double dt = config.time_step();
    const auto monitors = config.effective_monitors();

    damage::SeededRng rng(config.seed);
    std::vector<damage::TrussState> states =
        damage::make_intact_states(static_cast<std::size_t>(grid.truss_count()), config.material.e0, rng);

    lattice::SystemMatrices mats = lattice::assemble_constant_blocks(grid, config.material);
    const double k_ref = config.material.e0 * config.material.area / (0.5 * config.cell_size);
    const double ground = config.stabilization * k_ref;

    solver::BlockSystem dyn;
    if (config.mode == Mode::dynamic) dyn = solver::build_block_system(mats);
    const solver::Gn22Params gn22{config.beta1, config.beta2, dt};

    result.monitors.clear();
    for (const auto& m : monitors) {
        MonitorSeries s;
        s.name = m.name;
        s.jx = m.jx;
        s.jy = m.jy;
        result.monitors.push_back(std::move(s));
    }

    solver::SimState state = solver::SimState::zeros(grid.dof_count());
    const damage::InnerLoopOptions loop_opts{config.criterion, config.max_sweeps};
    solver::SymmetricSolver qs_solver;
    // Stiffness and load path of the last solve, reused while no modulus changes.
    std::vector<double> moduli;
    lattice::LoadPath last_path;
    lattice::SparseMatrix stiffness;

    for (int n = 0; n < config.steps; ++n) {
        const double t_next = (n + 1) * dt;
        const DriveLoad load = apply_drive(config, grid, t_next);

        auto solve = [&](std::span<const damage::TrussState> trusses) {
            bool same = !moduli.empty();
            for (std::size_t t = 0; same && t < trusses.size(); ++t) same = moduli[t] == trusses[t].effective_modulus();
            if (!same) {
                moduli.resize(trusses.size());
                for (std::size_t t = 0; t < trusses.size(); ++t) moduli[t] = trusses[t].effective_modulus();
                last_path = lattice::prune_dangling(grid, trusses);
                stiffness =
                    lattice::assemble_stiffness(grid, trusses, config.material.area, last_path.load_bearing);
                if (ground > 0.0) {
                    for (int i = 0; i < grid.u_dof_count(); ++i) stiffness.coeffRef(i, i) += ground;
                }
            }
            lattice::SparseMatrix k = stiffness;

            solver::Dirichlet fixed = load.fixed;
            std::vector<char> is_fixed(static_cast<std::size_t>(grid.dof_count()), 0);
            for (int d : fixed.dofs) is_fixed[d] = 1;
            for (int node : unsupported_nodes(grid, last_path)) {
                for (int d : {2 * node, 2 * node + 1}) {
                    if (is_fixed[d]) continue;
                    fixed.add(d, state.a[d]);
                    is_fixed[d] = 1;
                }
            }

            damage::StationSolve out;
            if (config.mode == Mode::dynamic) {
                dyn.K = solver::block_matrix(k, -mats.Q,
                                             lattice::SparseMatrix(grid.p_node_count(), grid.u_dof_count()),
                                             mats.H);
                out.a = solver::dynamic_solve(dyn, state, load.f, gn22, fixed);
            } else {
                mats.K = std::move(k);
                out.a = solver::quasi_static_solve(mats, state, load.f, dt, fixed, &qs_solver);
            }
            out.stresses = lattice::recover_truss_stresses(grid, out.a, trusses, last_path.load_bearing);
            out.t = t_next;
            out.drive = load.magnitude;
            return out;
        };

        damage::InnerLoopResult station;
        if (config.damage) {
            station = damage::avalanche_inner_loop(states, rng, solve, n + 1, t_next, loop_opts);
        } else {
            station.solution = solve(states);
            station.record.station = n + 1;
            station.record.t = t_next;
            station.record.solve_times.push_back(station.solution.t);
            station.record.solve_drives.push_back(station.solution.drive);
        }

        if (config.mode == Mode::dynamic) {
            state = solver::gn22_correct(state, station.solution.a, gn22);
        } else {
            solver::SimState next;
            next.v = (station.solution.a - state.a) / dt;
            next.acc = solver::Vector::Zero(state.size());
            next.a = std::move(station.solution.a);
            state = std::move(next);
        }
        state.t = t_next;

        for (auto& s : result.monitors) {
            const int p = grid.p_node(s.jx, s.jy);
            const int u = grid.u_node_at_p_node(s.jx, s.jy);
            s.times.push_back(t_next);
            s.pressures.push_back(state.a[grid.p_dof(p)]);
            s.ux.push_back(state.a[2 * u]);
            s.uy.push_back(state.a[2 * u + 1]);
        }
        if (config.snapshot_stride > 0 && (n + 1) % config.snapshot_stride == 0) {
            FieldSnapshot snap;
            snap.step = n + 1;
            const auto sigma = station.solution.stresses;
            for (std::size_t t = 0; t < states.size(); ++t) {
                snap.modulus.push_back(states[t].effective_modulus());
                snap.abs_stress.push_back(std::abs(sigma[t]));
                snap.broken.push_back(states[t].broken);
            }
            result.snapshots.push_back(std::move(snap));
        }
        result.drive_history.push_back(load.magnitude);
        if (observer) observer(station.record);
        result.records.push_back(std::move(station.record));
    }
    result.final_state = state;
    result.final_trusses = states;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const StationObserver& observer) {
    ScenarioResult result;
    run_into(config, result, observer);
    return result;
}

std::vector<PressureJump> detect_pressure_jumps(const MonitorSeries& series, std::size_t window,
                                                double threshold) {
    const auto& p = series.pressures;
    if (window < 1) throw InvalidParameter("jump window must be at least 1");
    if (p.size() <= window + 1) {
        throw InvalidParameter("series of length " + std::to_string(p.size()) +
                               " too short for window " + std::to_string(window));
    }
    double scale = 1.0;
    for (double v : p) scale = std::max(scale, std::abs(v));
    const double floor = 1e-12 * scale;

    std::vector<double> dp(p.size(), 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) dp[i] = p[i] - p[i - 1];

    std::vector<PressureJump> jumps;
    double running = 0.0;
    for (std::size_t i = 1; i <= window; ++i) running += std::abs(dp[i]);
    for (std::size_t i = window + 1; i < p.size(); ++i) {
        const double amplitude = std::max(running / static_cast<double>(window), floor);
        if (std::abs(dp[i]) > threshold * amplitude) {
            PressureJump j;
            j.index = i;
            j.t = i < series.times.size() ? series.times[i] : static_cast<double>(i);
            j.dp = dp[i];
            j.sign = dp[i] > 0.0 ? 1 : -1;
            jumps.push_back(j);
        }
        running += std::abs(dp[i]) - std::abs(dp[i - window]);
    }
    return jumps;
}

void write_series(const MonitorSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const bool with_u = series.ux.size() == series.times.size() && series.uy.size() == series.times.size();
    out << (with_u ? "t_s,p_mpa,ux_mm,uy_mm\n" : "t_s,p_mpa\n");
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        out << format_double(series.times[i]) << ',' << format_double(series.pressures[i]);
        if (with_u) out << ',' << format_double(series.ux[i]) << ',' << format_double(series.uy[i]);
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

MonitorSeries read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    MonitorSeries s;
    s.name = std::filesystem::path(path).stem().string();
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + " is empty");
    const auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "t_s" || header[1] != "p_mpa") {
        throw IoError(path + ": unexpected header '" + line + "'");
    }
    const bool with_u = header.size() == 4;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) throw IoError(path + ": ragged row");
        s.times.push_back(std::stod(cells[0]));
        s.pressures.push_back(std::stod(cells[1]));
        if (with_u) {
            s.ux.push_back(std::stod(cells[2]));
            s.uy.push_back(std::stod(cells[3]));
        }
    }
    return s;
}

void write_snapshot(const FieldSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "truss_id,e_mpa,abs_sigma_mpa,broken\n";
    for (std::size_t i = 0; i < snapshot.modulus.size(); ++i) {
        out << i << ',' << format_double(snapshot.modulus[i]) << ','
            << format_double(snapshot.abs_stress[i]) << ',' << (snapshot.broken[i] ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

FieldSnapshot read_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    FieldSnapshot snap;
    const std::string stem = std::filesystem::path(path).stem().string();
    const auto us = stem.rfind('_');
    if (us != std::string::npos) {
        try {
            snap.step = std::stoi(stem.substr(us + 1));
        } catch (const std::exception&) {
            snap.step = 0;
        }
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "truss_id,e_mpa,abs_sigma_mpa,broken") {
        throw IoError(path + ": unexpected snapshot header");
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 4) throw IoError(path + ": ragged row");
        snap.modulus.push_back(std::stod(cells[1]));
        snap.abs_stress.push_back(std::stod(cells[2]));
        snap.broken.push_back(cells[3] == "1");
    }
    return snap;
}

ScenarioResult run_scenario_to_dir(const ScenarioConfig& config, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    std::ofstream ndjson(dir / "avalanches.ndjson");
    if (!ndjson) throw IoError("cannot write " + (dir / "avalanches.ndjson").string());

    auto write_outputs = [&](const ScenarioResult& r) {
        for (const auto& m : r.monitors) write_series(m, (dir / ("monitor_" + m.name + ".csv")).string());
        for (const auto& s : r.snapshots) {
            write_snapshot(s, (dir / ("snapshot_" + std::to_string(s.step) + ".csv")).string());
        }
    };

    ScenarioResult result;
    try {
        run_into(config, result, [&](const damage::AvalancheRecord& rec) {
            ndjson << damage::to_ndjson(rec) << '\n';
            ndjson.flush();
        });
    } catch (...) {
        write_outputs(result);
        throw;
    }
    write_outputs(result);
    return result;
}

}  // namespace socfrac::scenario
