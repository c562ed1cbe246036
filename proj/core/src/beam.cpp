#include "socfrac/beam.hpp"

#include "socfrac/errors.hpp"
#include "socfrac/solver.hpp"
#include "text_util.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace socfrac::beam {

using detail::format_double;
using detail::to_double;
using detail::to_int;

void CohesiveLaw::validate() const {
    if (!(k_f > 0.0)) throw InvalidParameter("foundation stiffness k_f must be positive");
    if (!(v_c > 0.0)) throw InvalidParameter("breaking opening v_c must be positive");
    if (variant == CohesiveVariant::constant_traction && traction > k_f * v_c) {
        throw InvalidParameter("traction plateau exceeds k_f v_c");
    }
}

double CohesiveLaw::plateau() const { return traction > 0.0 ? traction : 0.5 * k_f * v_c; }

double cohesive_force(double v, const CohesiveLaw& law, bool bonded) {
    if (!bonded) return 0.0;
    if (v < 0.0) return law.k_f * v;
    if (v > law.v_c) return 0.0;
    if (law.variant == CohesiveVariant::constant_traction) return std::min(law.k_f * v, law.plateau());
    return law.k_f * v;
}

void BeamConfig::validate() const {
    if (!(ej > 0.0) || !(rho_a > 0.0)) throw InvalidParameter("EJ and rhoA must be positive");
    if (!(length > 0.0)) throw InvalidParameter("beam length must be positive");
    if (!(initial_crack > 0.0 && initial_crack < length)) {
        throw InvalidParameter("initial crack must satisfy 0 < L_o < L");
    }
    if (nodes < 50) throw GeometryError("beam needs at least 50 nodes, got " + std::to_string(nodes));
    law.validate();
    if (!(q_max >= 0.0)) throw InvalidParameter("q_max must be non-negative");
    if (!(ramp_time >= 0.0)) throw InvalidParameter("ramp time must be non-negative");
    if (!(dt >= 0.0)) throw InvalidParameter("dt must be non-negative");
    if (!(t_end > 0.0)) throw InvalidParameter("t_end must be positive");
    if (!(damping >= 0.0)) throw InvalidParameter("damping must be non-negative");
    if (profile_stride < 0) throw InvalidParameter("profile_stride must be non-negative");
}

double max_frequency(const BeamConfig& config) {
    const double h = config.spacing();
    return std::sqrt((16.0 * config.ej / std::pow(h, 4) + config.law.k_f) / config.rho_a);
}

double BeamConfig::time_step() const {
    return dt > 0.0 ? dt : 0.1 * 2.0 / max_frequency(*this);
}

double BeamConfig::load(double t) const {
    if (t <= 0.0) return 0.0;
    if (ramp_time <= 0.0 || t >= ramp_time) return q_max;
    return q_max * t / ramp_time;
}

BeamState initial_state(const BeamConfig& config) {
    config.validate();
    const int n = config.nodes;
    BeamState s;
    s.v = Eigen::VectorXd::Zero(n);
    s.vd = Eigen::VectorXd::Zero(n);
    s.vdd = Eigen::VectorXd::Zero(n);
    s.bond.assign(static_cast<std::size_t>(n), 1);
    s.front_index = n;
    for (int i = 0; i < n; ++i) {
        if (config.x(i) < config.initial_crack) {
            s.bond[static_cast<std::size_t>(i)] = 0;
        } else if (s.front_index == n) {
            s.front_index = i;
        }
    }
    return s;
}

Eigen::SparseMatrix<double> bending_matrix(int nodes) {
    if (nodes < 5) throw GeometryError("bending operator needs at least 5 nodes");
    const int n = nodes;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(5 * n));
    auto row = [&](int i, std::initializer_list<std::pair<int, double>> entries) {
        for (const auto& [j, w] : entries) t.emplace_back(i, j, w);
    };
    row(0, {{0, 1.0}, {1, -2.0}, {2, 1.0}});
    row(1, {{0, -2.0}, {1, 5.0}, {2, -4.0}, {3, 1.0}});
    for (int i = 2; i < n - 2; ++i) {
        row(i, {{i - 2, 1.0}, {i - 1, -4.0}, {i, 6.0}, {i + 1, -4.0}, {i + 2, 1.0}});
    }
    row(n - 2, {{n - 1, -2.0}, {n - 2, 5.0}, {n - 3, -4.0}, {n - 4, 1.0}});
    row(n - 1, {{n - 1, 1.0}, {n - 2, -2.0}, {n - 3, 1.0}});
    Eigen::SparseMatrix<double> s(n, n);
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

namespace {

Eigen::VectorXd trapezoid_weights(int n) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    w[0] = 0.5;
    w[n - 1] = 0.5;
    return w;
}

}  // namespace

Eigen::VectorXd spatial_operator(std::span<const double> v, double ej, double h) {
    const int n = static_cast<int>(v.size());
    const Eigen::SparseMatrix<double> s = bending_matrix(n);
    const Eigen::Map<const Eigen::VectorXd> vv(v.data(), n);
    const Eigen::VectorXd w = trapezoid_weights(n);
    return (ej / std::pow(h, 4)) * (s * vv).cwiseQuotient(w);
}

Eigen::VectorXd spatial_operator(const BeamState& state, const BeamConfig& config) {
    return spatial_operator(std::span<const double>(state.v.data(), static_cast<std::size_t>(state.v.size())),
                            config.ej, config.spacing());
}

struct BeamIntegrator::Factor {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::SparseMatrix<double> stiffness;
};

BeamIntegrator::BeamIntegrator(BeamConfig config) : config_(std::move(config)) {
    config_.validate();
    dt_ = config_.time_step();
    const double omega = max_frequency(config_);
    if (dt_ > std::numbers::pi / omega) {
        throw TimeStepError("dt=" + format_double(dt_) + " does not resolve the shortest grid period (limit " +
                            format_double(std::numbers::pi / omega) + ")");
    }
    weight_ = trapezoid_weights(config_.nodes);
    bending_ = (config_.ej / std::pow(config_.spacing(), 4)) * bending_matrix(config_.nodes);
}

void BeamIntegrator::factorize(const BeamState& state) {
    const int n = config_.nodes;
    Eigen::VectorXd kf(n);
    for (int i = 0; i < n; ++i) kf[i] = config_.law.k_f * weight_[i] * state.bond[static_cast<std::size_t>(i)];
    auto f = std::make_shared<Factor>();
    f->stiffness = bending_;
    f->stiffness.diagonal() += kf;
    const Eigen::VectorXd mass = config_.rho_a * weight_;
    const double cm = 4.0 / (dt_ * dt_);
    const double cc = 2.0 / dt_;
    Eigen::SparseMatrix<double> a = f->stiffness;
    a.diagonal() += (cm + cc * config_.damping) * mass;
    f->ldlt.compute(a);
    if (f->ldlt.info() != Eigen::Success) {
        throw SolverError(SolverError::Kind::numerical, "beam effective matrix factorisation failed");
    }
    factor_ = std::move(f);
    factored_bond_ = state.bond;
}

// Difference between the linear spring carried implicitly and the cohesive law.
Eigen::VectorXd BeamIntegrator::foundation_force(const BeamState& state) const {
    const int n = config_.nodes;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (!state.bond[static_cast<std::size_t>(i)]) continue;
        const double v = state.v[i];
        r[i] = weight_[i] * (config_.law.k_f * v - cohesive_force(v, config_.law, true));
    }
    return r;
}

int BeamIntegrator::step(BeamState& state) {
    const int n = config_.nodes;
    if (state.v.size() != n || state.bond.size() != static_cast<std::size_t>(n)) {
        throw ConsistencyError("beam state does not match the configured grid");
    }
    if (!factor_ || factored_bond_ != state.bond) factorize(state);

    const solver::Gn22Params params{0.5, 0.5, dt_};
    solver::SimState history{state.v, state.vd, state.vdd, state.t};
    const solver::Predictors pred = solver::gn22_predictors(history, params);
    const Eigen::VectorXd mass = config_.rho_a * weight_;
    const double t_next = state.t + dt_;
    Eigen::VectorXd rhs = config_.load(t_next) * weight_ + foundation_force(state);
    rhs -= mass.cwiseProduct(pred.acceleration + config_.damping * pred.velocity);
    const Eigen::VectorXd v_next = factor_->ldlt.solve(rhs);

    const double before = std::max(state.v.lpNorm<Eigen::Infinity>(), config_.law.v_c);
    const double after = v_next.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(after) || after > 1e6 * before) {
        throw TimeStepError("beam deflection grew from " + format_double(before) + " to " + format_double(after) +
                            " in one step at t=" + format_double(t_next));
    }
    const solver::SimState next = solver::gn22_correct(history, v_next, params);
    state.v = next.a;
    state.vd = next.v;
    state.vdd = next.acc;
    state.t = t_next;

    int broken = 0;
    while (state.front_index < n && state.v[state.front_index] >= config_.law.v_c) {
        state.bond[static_cast<std::size_t>(state.front_index)] = 0;
        ++state.front_index;
        ++broken;
    }
    return broken;
}

double BeamIntegrator::energy(const BeamState& state) const {
    const Eigen::VectorXd mass = config_.rho_a * weight_;
    Eigen::VectorXd kv = bending_ * state.v;
    for (int i = 0; i < config_.nodes; ++i) {
        kv[i] += config_.law.k_f * weight_[i] * state.bond[static_cast<std::size_t>(i)] * state.v[i];
    }
    return 0.5 * state.vd.dot(mass.cwiseProduct(state.vd)) + 0.5 * state.v.dot(kv);
}

namespace {

double crack_length_of(const BeamState& s, const BeamConfig& c) {
    return s.front_index >= c.nodes ? c.length : c.x(s.front_index);
}

Profile make_profile(const BeamState& s, long long step) {
    return {step, s.t, std::vector<double>(s.v.data(), s.v.data() + s.v.size()), s.bond};
}

}  // namespace

BeamRun run(const BeamConfig& config) {
    BeamIntegrator integrator(config);
    BeamState state = initial_state(config);
    BeamRun out;
    out.times.push_back(state.t);
    out.crack_length.push_back(crack_length_of(state, config));
    if (config.profile_stride > 0) out.profiles.push_back(make_profile(state, 0));
    const auto steps = static_cast<long long>(std::ceil(config.t_end / integrator.dt() - 1e-9));
    for (long long k = 1; k <= steps; ++k) {
        integrator.step(state);
        out.times.push_back(state.t);
        out.crack_length.push_back(crack_length_of(state, config));
        if (config.profile_stride > 0 && (k % config.profile_stride == 0 || k == steps)) {
            out.profiles.push_back(make_profile(state, k));
        }
    }
    out.final_state = std::move(state);
    return out;
}

CrackSeries crack_length_series(const BeamRun& run, double sample_interval) {
    CrackSeries s;
    if (run.times.empty()) return s;
    if (sample_interval <= 0.0) {
        s.t = run.times;
        s.length = run.crack_length;
    } else {
        const double t0 = run.times.front();
        const double t1 = run.times.back();
        std::size_t j = 0;
        for (long long k = 0;; ++k) {
            const double t = t0 + static_cast<double>(k) * sample_interval;
            if (t > t1 + 1e-12 * std::max(1.0, std::abs(t1))) break;
            while (j + 1 < run.times.size() && run.times[j + 1] <= t) ++j;
            s.t.push_back(t);
            s.length.push_back(run.crack_length[j]);
        }
    }
    const std::size_t n = s.t.size();
    s.velocity.assign(n, 0.0);
    if (n < 2) return s;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
        s.velocity[i] = (s.length[hi] - s.length[lo]) / (s.t[hi] - s.t[lo]);
    }
    return s;
}

double time_to_length(const BeamRun& run, double length) {
    for (std::size_t i = 0; i < run.times.size(); ++i) {
        if (run.crack_length[i] >= length) return run.times[i];
    }
    return -1.0;
}

VelocityPhases velocity_phases(const CrackSeries& series, double t0, double t1, double band) {
    std::vector<double> v;
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        if (series.t[i] >= t0 && series.t[i] <= t1) v.push_back(series.velocity[i]);
    }
    if (v.size() < 2) throw InsufficientSamples("fewer than two velocity samples in the window");
    VelocityPhases p;
    for (double x : v) p.mean += x;
    p.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - p.mean) * (x - p.mean);
    var /= static_cast<double>(v.size());
    p.coefficient_of_variation = p.mean != 0.0 ? std::sqrt(var) / std::abs(p.mean) : 0.0;
    int phase = 0;
    for (double x : v) {
        if (x > p.mean * (1.0 + band)) {
            if (phase != 1) ++p.fast_phases;
            phase = 1;
        } else if (x < p.mean * (1.0 - band)) {
            if (phase != -1) ++p.slow_phases;
            phase = -1;
        }
    }
    return p;
}

BeamConfig parse_config(std::istream& in) {
    BeamConfig c;
    for (const auto& [key, v, lineno] : detail::read_key_values(in)) {
        if (key == "ej") c.ej = to_double(key, v);
        else if (key == "rho_a") c.rho_a = to_double(key, v);
        else if (key == "length_mm") c.length = to_double(key, v);
        else if (key == "initial_crack_mm") c.initial_crack = to_double(key, v);
        else if (key == "nodes") c.nodes = static_cast<int>(to_int(key, v));
        else if (key == "k_f") c.law.k_f = to_double(key, v);
        else if (key == "v_c") c.law.v_c = to_double(key, v);
        else if (key == "cohesive_law") {
            if (v == "linear_brittle") c.law.variant = CohesiveVariant::linear_brittle;
            else if (v == "constant_traction") c.law.variant = CohesiveVariant::constant_traction;
            else throw ConfigError("cohesive_law must be linear_brittle or constant_traction, got '" + v + "'");
        } else if (key == "traction") c.law.traction = to_double(key, v);
        else if (key == "q_max") c.q_max = to_double(key, v);
        else if (key == "ramp_time_s") c.ramp_time = to_double(key, v);
        else if (key == "dt") c.dt = to_double(key, v);
        else if (key == "t_end_s") c.t_end = to_double(key, v);
        else if (key == "damping") c.damping = to_double(key, v);
        else if (key == "profile_stride") c.profile_stride = static_cast<int>(to_int(key, v));
        else throw ConfigError("unknown key '" + key + "' on line " + std::to_string(lineno));
    }
    c.validate();
    return c;
}

BeamConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

void write_crack_length(const CrackSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t_s,l_mm,v_mm_s\n";
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        out << format_double(series.t[i]) << ',' << format_double(series.length[i]) << ','
            << format_double(series.velocity[i]) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_profile(const Profile& profile, const BeamConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "x_mm,v_mm,bonded\n";
    for (std::size_t i = 0; i < profile.v.size(); ++i) {
        out << format_double(config.x(static_cast<int>(i))) << ',' << format_double(profile.v[i]) << ','
            << static_cast<int>(profile.bond[i]) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace socfrac::beam
