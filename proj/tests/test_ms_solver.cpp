#include <doctest.h>

#include <cmath>
#include <limits>
#include <optional>

#include "hsfl/errors.hpp"
#include "hsfl/ms_solver.hpp"
#include "hsfl/rng.hpp"
#include "oracles.hpp"

using namespace hsfl;

namespace {

ConvergenceParams params_for(const Topology& topo, Rng& rng) {
  ConvergenceParams p;
  p.beta = rng.uniform(0.5, 2.0);
  p.gamma = rng.uniform(0.05, 0.4) / p.beta;
  p.epsilon = rng.uniform(0.5, 2.0);
  p.vartheta = rng.uniform(0.5, 5.0);
  p.num_clients = topo.num_clients();
  return p;
}

// Random 16-layer profile for the three-tier evaluation topology.
ModelProfile random_profile(Rng& rng) {
  std::vector<LayerProfile> layers(16);
  for (auto& l : layers) {
    l.fp_flops = rng.uniform(1e6, 8e7);
    l.bp_flops = 2.0 * l.fp_flops;
    l.activation_bytes = rng.uniform(1e3, 3e5);
    l.act_grad_bytes = rng.uniform(1e3, 3e5);
    l.param_bytes = rng.uniform(1e4, 1e7);
    l.grad_variance = rng.uniform(0.0, 1e-3);
    l.grad_second_moment = rng.uniform(1e-4, 5e-2);
  }
  return ModelProfile("rand16", layers);
}

// Exhaustive reference: recompute the objective from scratch per cut.
std::pair<double, std::vector<int>> brute_force_ms(const ConvergenceParams& p,
                                                   const ModelProfile& profile,
                                                   const Topology& topo,
                                                   const std::vector<int>& intervals,
                                                   int batch) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_cut;
  const int L = profile.num_layers();
  for (int c1 = 1; c1 < L - 1; ++c1) {
    for (int c2 = c1 + 1; c2 < L; ++c2) {
      const std::vector<int> cuts{c1, c2};
      if (!memory_feasible(profile, topo, CutVector(cuts, L), batch)) continue;
      const double value = oracle::theta(p, profile, topo, cuts, intervals, batch);
      if (value < best) {
        best = value;
        best_cut = cuts;
      }
    }
  }
  return {best, best_cut};
}

}  // namespace

TEST_CASE("cut enumeration") {
  SUBCASE("small counts") {
    const auto c43 = enumerate_cuts(4, 3);
    REQUIRE(c43.size() == 3);
    CHECK(c43[0].cuts() == std::vector<int>{1, 2});
    CHECK(c43[1].cuts() == std::vector<int>{1, 3});
    CHECK(c43[2].cuts() == std::vector<int>{2, 3});
    CHECK(enumerate_cuts(16, 3).size() == 105);
    const auto c22 = enumerate_cuts(2, 2);
    REQUIRE(c22.size() == 1);
    CHECK(c22[0].cuts() == std::vector<int>{1});
  }
  SUBCASE("errors") { CHECK_THROWS_AS(enumerate_cuts(2, 3), InvalidArgumentError); }
  SUBCASE("lexicographic order") {
    const auto cuts = enumerate_cuts(9, 4);
    for (std::size_t i = 1; i < cuts.size(); ++i) CHECK(cuts[i - 1].cuts() < cuts[i].cuts());
    CHECK(cuts.size() == 56);  // C(8,3)
  }
}

TEST_CASE("memory feasibility") {
  Rng rng(5);
  const auto profile = random_profile(rng);
  auto topo = paper_scenario_topology(0);
  const CutVector cut({3, 8}, 16);

  SUBCASE("unconstrained budget always passes") {
    CHECK(memory_feasible(profile, topo, cut, 16));
  }
  SUBCASE("strict inequality against an exact budget") {
    const int tier = 1, entity = 0, batch = 16;
    const double demand =
        4.0 * (batch * (profile.cumulative_bytes(8, ByteKind::activation) -
                        profile.cumulative_bytes(3, ByteKind::activation)) +
               batch * (profile.cumulative_bytes(8, ByteKind::act_grad) -
                        profile.cumulative_bytes(3, ByteKind::act_grad)) +
               (profile.cumulative_bytes(8, ByteKind::optimizer_state) -
                profile.cumulative_bytes(3, ByteKind::optimizer_state)) +
               (profile.cumulative_bytes(8, ByteKind::param) -
                profile.cumulative_bytes(3, ByteKind::param)));
    auto tiers = std::vector<std::vector<EntitySpec>>();
    for (int m = 0; m < topo.num_tiers(); ++m) {
      std::vector<EntitySpec> row;
      for (int j = 0; j < topo.entities_in_tier(m); ++j) row.push_back(topo.entity(m, j));
      tiers.push_back(std::move(row));
    }
    tiers[static_cast<std::size_t>(tier)][static_cast<std::size_t>(entity)].memory_bytes = demand;
    const Topology tight("tight", tiers);
    CHECK_FALSE(memory_feasible(profile, tight, cut, batch, tier, entity));
    // A little headroom flips it.
    tiers[static_cast<std::size_t>(tier)][static_cast<std::size_t>(entity)].memory_bytes =
        demand * 1.25;
    const Topology loose("loose", tiers);
    CHECK(memory_feasible(profile, loose, cut, batch, tier, entity));
  }
}

TEST_CASE("tight auxiliaries agree with the latency module") {
  Rng rng(17);
  const auto profile = random_profile(rng);
  const auto topo = paper_scenario_topology(2);
  const CutVector cut({5, 11}, 16);
  const auto tight = tight_auxiliaries(profile, topo, cut, 16);
  CHECK(tight.round_latency ==
        doctest::Approx(split_round_latency(profile, topo, cut, 16)).epsilon(1e-12));
  for (int m = 0; m < 2; ++m)
    CHECK(tight.upload[static_cast<std::size_t>(m)] +
              tight.download[static_cast<std::size_t>(m)] ==
          doctest::Approx(aggregation_latency(profile, topo, cut, m)).epsilon(1e-12));
}

TEST_CASE("enumeration matches an independent brute force") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed * 131 + 7);
    const auto topo = paper_scenario_topology(seed);
    const auto profile = random_profile(rng);
    auto p = params_for(topo, rng);
    const std::vector<int> intervals{static_cast<int>(rng.uniform_int(1, 30)),
                                     static_cast<int>(rng.uniform_int(1, 8))};
    const AggSchedule sched(intervals);
    const auto [best, best_cut] = brute_force_ms(p, profile, topo, intervals, 16);
    if (!std::isfinite(best)) continue;
    const auto sol = solve_ms(p, profile, topo, sched, 16, MsMethod::enumeration);
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-12));
    CHECK(sol.cut.cuts() == best_cut);
    CHECK(sol.feasible_count == 105);
  }
}

TEST_CASE("Dinkelbach equals enumeration") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 40 && compared < 24; ++seed) {
    Rng rng(seed * 271 + 19);
    const auto topo = paper_scenario_topology(seed + 100);
    const auto profile = random_profile(rng);
    auto p = params_for(topo, rng);
    const AggSchedule sched({static_cast<int>(rng.uniform_int(1, 30)),
                             static_cast<int>(rng.uniform_int(1, 8))});
    bool enum_feasible = true, dink_feasible = true;
    std::optional<MsSolution> enum_sol, dink_sol;
    try {
      enum_sol = solve_ms(p, profile, topo, sched, 16, MsMethod::enumeration);
    } catch (const InfeasibleError&) {
      enum_feasible = false;
    }
    try {
      dink_sol = solve_ms(p, profile, topo, sched, 16, MsMethod::dinkelbach);
    } catch (const InfeasibleError&) {
      dink_feasible = false;
    }
    CHECK(enum_feasible == dink_feasible);
    if (!enum_feasible) continue;
    CHECK(enum_sol->cut.cuts() == dink_sol->cut.cuts());
    CHECK(dink_sol->objective == doctest::Approx(enum_sol->objective).epsilon(1e-9));
    CHECK(dink_sol->dinkelbach_iterations >= 1);
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("solver is deterministic across worker counts") {
  Rng rng(33);
  const auto topo = paper_scenario_topology(3);
  const auto profile = random_profile(rng);
  auto p = params_for(topo, rng);
  const AggSchedule sched({10, 3});
  MsOptions serial, parallel;
  serial.threads = 1;
  parallel.threads = 4;
  const auto a = solve_ms(p, profile, topo, sched, 16, MsMethod::enumeration, serial);
  const auto b = solve_ms(p, profile, topo, sched, 16, MsMethod::enumeration, parallel);
  CHECK(a.cut.cuts() == b.cut.cuts());
  CHECK(a.objective == b.objective);  // bitwise: same arithmetic, same order
}

TEST_CASE("infeasibility reporting") {
  Rng rng(41);
  const auto profile = random_profile(rng);
  // Memory budget of one byte below the top tier: every cut rejected.
  std::vector<std::vector<EntitySpec>> tiers;
  const auto base = paper_scenario_topology(0);
  for (int m = 0; m < base.num_tiers(); ++m) {
    std::vector<EntitySpec> row;
    for (int j = 0; j < base.entities_in_tier(m); ++j) {
      auto e = base.entity(m, j);
      if (m < base.num_tiers() - 1) e.memory_bytes = 1.0;
      row.push_back(std::move(e));
    }
    tiers.push_back(std::move(row));
  }
  const Topology starved("starved", tiers);
  ConvergenceParams p{1.0, 0.1, 1.0, 1.0, starved.num_clients()};
  try {
    solve_ms(p, profile, starved, AggSchedule({1, 1}), 16, MsMethod::enumeration);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("memory") != std::string::npos);
  }
}

TEST_CASE("dinkelbach converges in one update on a singleton feasible set") {
  // Two layers over two tiers: exactly one cut.
  std::vector<LayerProfile> layers(2);
  for (auto& l : layers) {
    l.fp_flops = 1e6;
    l.bp_flops = 2e6;
    l.activation_bytes = 100;
    l.act_grad_bytes = 100;
    l.param_bytes = 1000;
    l.grad_second_moment = 0.01;
  }
  const ModelProfile profile("pair", layers);
  EntitySpec dev;
  dev.clients = {0};
  dev.compute_flops = 1e9;
  dev.uplink_next_bps = 1e6;
  dev.downlink_next_bps = 1e6;
  dev.fed_uplink_bps = 1e6;
  dev.fed_downlink_bps = 1e6;
  EntitySpec top;
  top.clients = {0};
  top.compute_flops = 1e9;
  const Topology topo("solo", {{dev}, {top}});
  ConvergenceParams p{1.0, 0.1, 1.0, 1.0, 1};
  const auto sol = solve_ms(p, profile, topo, AggSchedule({2}), 4, MsMethod::dinkelbach);
  CHECK(sol.cut.cuts() == std::vector<int>{1});
  CHECK(sol.dinkelbach_iterations == 1);
}
