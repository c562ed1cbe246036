#include "socfrac/avalanche.hpp"
#include "socfrac/avalanche_stats.hpp"
#include "socfrac/beam.hpp"
#include "socfrac/errors.hpp"
#include "socfrac/kgd.hpp"
#include "socfrac/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <map>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

int run_scenario(const std::string& config_path, const std::string& out_dir) {
    const auto config = socfrac::scenario::load_config(config_path);
    const auto result = socfrac::scenario::run_scenario_to_dir(config, out_dir);
    std::size_t events = 0;
    for (const auto& r : result.records) events += r.size() > 0 ? 1 : 0;
    std::cout << "stations " << result.records.size() << ", avalanches " << events << ", output " << out_dir
              << '\n';
    return 0;
}

int run_stats(const std::vector<std::string>& inputs, const std::vector<double>& rates, const std::string& out,
              std::optional<int> s_min, std::size_t bootstrap, std::uint64_t seed, double skip) {
    if (!rates.empty() && rates.size() != inputs.size()) {
        throw socfrac::ConfigError("--rate needs one value per --in file");
    }
    std::map<double, std::vector<int>> pooled;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto records = socfrac::stats::skip_leading(socfrac::damage::read_ndjson_file(inputs[i]), skip);
        const auto sizes = socfrac::stats::avalanche_sizes(records);
        auto& pool = pooled[rates.empty() ? 0.0 : rates[i]];
        pool.insert(pool.end(), sizes.begin(), sizes.end());
    }
    std::vector<socfrac::stats::RegimeRow> rows;
    for (const auto& [rate, sizes] : pooled) {
        socfrac::stats::FitOptions options;
        options.s_min = s_min;
        options.bootstrap = bootstrap;
        options.seed = seed;
        rows.push_back({rate, socfrac::stats::fit_power_law(sizes, options), false});
    }
    const auto report = socfrac::stats::compare_regimes(rows);
    std::ofstream os(out);
    if (!os) throw socfrac::IoError("cannot write " + out);
    socfrac::stats::write_report(report, os);
    socfrac::stats::write_report(report, std::cout);
    return 0;
}

int run_beam(const std::string& config_path, const std::string& out_dir, double sample_interval) {
    const auto config = socfrac::beam::load_config(config_path);
    std::filesystem::create_directories(out_dir);
    const auto run = socfrac::beam::run(config);
    const auto series = socfrac::beam::crack_length_series(run, sample_interval);
    socfrac::beam::write_crack_length(series, (std::filesystem::path(out_dir) / "crack_length.csv").string());
    for (const auto& p : run.profiles) {
        const auto name = "profile_" + std::to_string(p.step) + ".csv";
        socfrac::beam::write_profile(p, config, (std::filesystem::path(out_dir) / name).string());
    }
    std::cout << "steps " << run.times.size() - 1 << ", final crack length " << run.crack_length.back() << " mm\n";
    return 0;
}

int run_bench(const socfrac::kgd::KgdParams& params, const std::vector<double>& times) {
    std::printf("t,L,cmod,pcm\n");
    for (double t : times) {
        const double length = socfrac::kgd::kgd_length(t, params);
        const double cmod = socfrac::kgd::kgd_cmod(t, params);
        const double pcm = length > 0.0 ? socfrac::kgd::kgd_pcm(length, params) : std::numeric_limits<double>::infinity();
        std::printf("%.17g,%.17g,%.17g,%.17g\n", t, length, cmod, pcm);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saturated porous lattice fracture with avalanche statistics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;

    auto* run = app.add_subcommand("run", "run an injection scenario");
    run->add_option("--config", config_path, "scenario config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory")->required();

    std::vector<std::string> inputs;
    std::vector<double> rates;
    std::optional<int> s_min;
    std::size_t bootstrap = 1000;
    std::uint64_t seed = 0x5eed;
    double skip = 0.0;
    auto* stats = app.add_subcommand("stats", "fit avalanche-size power laws");
    stats->add_option("--in", inputs, "avalanches.ndjson files (pooled per rate)")->required()->check(CLI::ExistingFile);
    stats->add_option("--out", out, "report CSV")->required();
    stats->add_option("--smin", s_min, "fixed lower cutoff");
    stats->add_option("--rate", rates, "drive rate of each input file");
    stats->add_option("--bootstrap", bootstrap, "bootstrap resamples")->capture_default_str();
    stats->add_option("--seed", seed, "bootstrap seed")->capture_default_str();
    stats->add_option("--skip-fraction", skip, "ignore the leading fraction of each run's stations")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();

    double sample_interval = 0.0;
    auto* beam = app.add_subcommand("beam", "debonding beam dynamics");
    beam->add_option("--config", config_path, "beam config file")->required()->check(CLI::ExistingFile);
    beam->add_option("--out", out, "output directory")->required();
    beam->add_option("--sample", sample_interval, "crack length sampling interval in s (0: every step)");

    socfrac::kgd::KgdParams kgd;
    std::vector<double> times;
    auto* bench = app.add_subcommand("bench", "closed-form KGD growth laws");
    bench->add_option("--g", kgd.shear_modulus, "shear modulus")->required();
    bench->add_option("--q", kgd.injection_rate, "injection rate")->required();
    bench->add_option("--mu", kgd.viscosity, "fluid viscosity")->required();
    bench->add_option("--nu", kgd.poisson, "Poisson ratio")->capture_default_str();
    bench->add_option("--s", kgd.confining, "confining stress")->capture_default_str();
    bench->add_option("--t-list", times, "times")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return run_scenario(config_path, out);
        if (*stats) return run_stats(inputs, rates, out, s_min, bootstrap, seed, skip);
        if (*beam) return run_beam(config_path, out, sample_interval);
        if (*bench) return run_bench(kgd, times);
    } catch (const socfrac::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const socfrac::InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kExitConfig;
    } catch (const socfrac::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
    return 0;
}
