#include "socfrac/avalanche.hpp"
#include "socfrac/errors.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

using namespace socfrac;
using namespace socfrac::damage;

namespace {

// Equal-strain bundle carrying a total force F: sigma_i = F E_i / sum E_j.
StationSolver bundle(double force, double t, double drive) {
    return [=](std::span<const TrussState> states) {
        StationSolve out;
        double total = 0.0;
        for (const auto& s : states) total += s.effective_modulus();
        out.stresses.resize(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            out.stresses[i] = total > 0.0 ? force * states[i].effective_modulus() / total : 0.0;
        }
        out.a = Eigen::VectorXd::Constant(1, total);
        out.t = t;
        out.drive = drive;
        return out;
    };
}

}  // namespace

TEST(InnerLoop, NoExceedanceLeavesStatesUntouched) {
    SeededRng rng(1);
    auto states = make_intact_states(10, 100.0, rng);
    const auto before = states;
    const auto r = avalanche_inner_loop(states, rng, bundle(0.0, 2.0, 0.5), 7, 2.0);
    EXPECT_TRUE(r.record.sweeps.empty());
    EXPECT_EQ(r.record.size(), 0);
    EXPECT_EQ(r.record.station, 7);
    EXPECT_EQ(r.record.solve_times, (std::vector<double>{2.0}));
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_EQ(states[i].modulus, before[i].modulus);
        EXPECT_EQ(states[i].threshold, before[i].threshold);
    }
}

TEST(InnerLoop, SingleTrussRelievedByOneEvent) {
    SeededRng rng(1);
    auto states = make_intact_states(3, 100.0, rng);
    for (auto& s : states) s.threshold = 0.5;
    const StationSolver solve = [](std::span<const TrussState> st) {
        StationSolve out;
        out.stresses = {st[0].damage_count == 0 ? 0.9 : 0.0, 0.1, 0.2};
        out.a = Eigen::VectorXd::Zero(1);
        return out;
    };
    const auto r = avalanche_inner_loop(states, rng, solve, 1, 0.0);
    ASSERT_EQ(r.record.sweeps.size(), 1u);
    EXPECT_EQ(r.record.sweeps[0], (std::vector<int>{0}));
    EXPECT_EQ(r.record.size(), 1);
    EXPECT_EQ(states[0].damage_count, 1);
    EXPECT_EQ(states[1].damage_count, 0);
}

TEST(InnerLoop, CascadeInvariants) {
    SeededRng rng(21);
    auto states = make_intact_states(200, 100.0, rng);
    std::vector<int> hits(states.size(), 0);
    const double force = 110.0;
    const auto base = bundle(force, 3.0, 1.25);
    // Records every stress field so the sweep contents can be audited.
    std::vector<std::vector<double>> fields;
    std::vector<std::vector<double>> thresholds;
    const StationSolver solve = [&](std::span<const TrussState> st) {
        auto out = base(st);
        fields.push_back(out.stresses);
        std::vector<double> th;
        for (const auto& s : st) th.push_back(s.threshold);
        thresholds.push_back(th);
        return out;
    };
    const auto r = avalanche_inner_loop(states, rng, solve, 4, 3.0);
    ASSERT_GT(r.record.size(), 0);
    EXPECT_EQ(r.record.solve_times.size(), r.record.sweeps.size() + 1);
    for (double t : r.record.solve_times) EXPECT_EQ(t, 3.0);
    for (double d : r.record.solve_drives) EXPECT_EQ(d, 1.25);

    int total = 0;
    for (std::size_t k = 0; k < r.record.sweeps.size(); ++k) {
        for (int id : r.record.sweeps[k]) {
            EXPECT_GT(fields[k][id], thresholds[k][id]);
            ++hits[id];
        }
        total += static_cast<int>(r.record.sweeps[k].size());
    }
    EXPECT_EQ(total, r.record.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_EQ(states[i].damage_count, hits[i]);
        if (!states[i].broken) EXPECT_LE(r.solution.stresses[i], states[i].threshold);
    }
}

TEST(InnerLoop, RunawayIsReported) {
    SeededRng rng(2);
    auto states = make_intact_states(4, 100.0, rng);
    const StationSolver always = [](std::span<const TrussState> st) {
        StationSolve out;
        out.stresses.assign(st.size(), 10.0);
        out.a = Eigen::VectorXd::Zero(1);
        return out;
    };
    EXPECT_THROW(avalanche_inner_loop(states, rng, always, 1, 0.0, {StressCriterion::tension, 5}), RunawayAvalanche);
    // default cap is 10 x truss count = 40 sweeps; 30 events break every truss first
    auto fresh = make_intact_states(4, 100.0, rng);
    const auto r = avalanche_inner_loop(fresh, rng, always, 1, 0.0);
    EXPECT_EQ(r.record.size(), 4 * kMaxDamageEvents);
    for (const auto& s : fresh) EXPECT_TRUE(s.broken);
}

TEST(AvalancheLog, NdjsonRoundTrip) {
    AvalancheRecord rec;
    rec.station = 12;
    rec.t = 0.1 + 0.2;
    rec.sweeps = {{3, 5}, {8}};
    rec.solve_times = {rec.t, rec.t, rec.t};
    rec.solve_drives = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const std::string line = to_ndjson(rec);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto back = from_ndjson(line);
    EXPECT_EQ(back.station, 12);
    EXPECT_EQ(back.t, rec.t);
    EXPECT_EQ(back.sweeps, rec.sweeps);
    EXPECT_EQ(back.solve_times, rec.solve_times);
    EXPECT_EQ(back.solve_drives, rec.solve_drives);
    EXPECT_EQ(back.size(), 3);

    std::istringstream in(line + "\n\n" + to_ndjson(AvalancheRecord{}) + "\n");
    EXPECT_EQ(read_ndjson(in).size(), 2u);
}

TEST(AvalancheLog, MalformedLinesAreRejected) {
    EXPECT_THROW(from_ndjson("{not json"), IoError);
    EXPECT_THROW(from_ndjson(R"({"station":1,"t":0,"s":5,"sweeps":[[1]]})"), ConsistencyError);
}
