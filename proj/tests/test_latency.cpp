#include <doctest.h>

#include "hsfl/errors.hpp"
#include "hsfl/latency.hpp"
#include "oracles.hpp"

using namespace hsfl;

namespace {

// One client under one server: the smallest hierarchy the formulas cover.
Topology two_tier(double device_flops, double uplink, double downlink) {
  EntitySpec dev;
  dev.clients = {0};
  dev.compute_flops = device_flops;
  dev.uplink_next_bps = uplink;
  dev.downlink_next_bps = downlink;
  dev.fed_uplink_bps = uplink;
  dev.fed_downlink_bps = downlink;
  EntitySpec top;
  top.clients = {0};
  top.compute_flops = 1e12;
  return Topology("two-tier", {{dev}, {top}});
}

ModelProfile flat_profile(int layers, double fp, double bp, double act, double param) {
  std::vector<LayerProfile> ls(static_cast<std::size_t>(layers));
  for (auto& l : ls) {
    l.fp_flops = fp;
    l.bp_flops = bp;
    l.activation_bytes = act;
    l.act_grad_bytes = act;
    l.param_bytes = param;
  }
  return ModelProfile("flat", ls);
}

}  // namespace

TEST_CASE("forward latency is workload over capacity") {
  // 480 GFLOP of tier work on a 0.5 TFLOPS device.
  const auto profile = flat_profile(2, 15e9, 15e9, 1024, 1e6);
  const auto topo = two_tier(0.5e12, 80e6, 370e6);
  const CutVector cut({1}, 2);
  CHECK(fp_latency(profile, topo, cut, 16, 0, 0) == doctest::Approx(0.48).epsilon(1e-12));
  // Doubling the batch doubles the latency.
  CHECK(fp_latency(profile, topo, cut, 32, 0, 0) ==
        doctest::Approx(2.0 * fp_latency(profile, topo, cut, 16, 0, 0)));
  // A zero-FLOP slice costs nothing.
  const auto zero = flat_profile(2, 0.0, 0.0, 1024, 1e6);
  CHECK(fp_latency(zero, topo, cut, 16, 0, 0) == 0.0);
}

TEST_CASE("activation upload latency") {
  const auto profile = flat_profile(2, 1e9, 2e9, 4096, 1e6);
  const auto topo = two_tier(0.5e12, 80e6, 370e6);
  const CutVector cut({1}, 2);
  CHECK(activation_upload_latency(profile, topo, cut, 16, 0, 0) ==
        doctest::Approx(6.5536e-3).epsilon(1e-12));
  CHECK_THROWS_AS(activation_upload_latency(profile, topo, cut, 0, 0, 0),
                  InvalidArgumentError);
  const auto faster = two_tier(0.5e12, 160e6, 370e6);
  CHECK(activation_upload_latency(profile, faster, cut, 16, 0, 0) ==
        doctest::Approx(0.5 * 6.5536e-3).epsilon(1e-12));
}

TEST_CASE("backward latency") {
  // Three 5-GFLOP layers in one tier at 1 TFLOPS, batch 2.
  const auto profile = flat_profile(4, 1e9, 5e9, 1024, 1e6);
  const auto topo = two_tier(1e12, 80e6, 370e6);
  const CutVector cut({3}, 4);
  CHECK(bp_latency(profile, topo, cut, 2, 0, 0) == doctest::Approx(0.03).epsilon(1e-12));
  const auto topo2 = two_tier(2e12, 80e6, 370e6);
  CHECK(bp_latency(profile, topo2, cut, 2, 0, 0) == doctest::Approx(0.015).epsilon(1e-12));
}

TEST_CASE("gradient download latency") {
  const auto profile = flat_profile(2, 1e9, 2e9, 4096, 1e6);
  const auto topo = two_tier(0.5e12, 80e6, 370e6);
  const CutVector cut({1}, 2);
  CHECK(grad_download_latency(profile, topo, cut, 16, 0, 0) ==
        doctest::Approx(16.0 * 8.0 * 4096.0 / 370e6).epsilon(1e-12));
  const auto zero = flat_profile(2, 1e9, 2e9, 0.0, 1e6);
  CHECK(grad_download_latency(zero, topo, cut, 16, 0, 0) == 0.0);
}

TEST_CASE("model transfer latency and the single-entity indicator") {
  // Two devices under one top entity: tier 0 has two entities, so transfers
  // count; the 10 MB sub-model on a 400 Mbps link takes 0.2 s.
  EntitySpec d0, d1;
  d0.clients = {0};
  d1.clients = {1};
  d0.compute_flops = d1.compute_flops = 1e12;
  d0.uplink_next_bps = d1.uplink_next_bps = 1e8;
  d0.downlink_next_bps = d1.downlink_next_bps = 1e8;
  d0.fed_uplink_bps = d1.fed_uplink_bps = 4e8;
  d0.fed_downlink_bps = d1.fed_downlink_bps = 4e8;
  EntitySpec top;
  top.clients = {0, 1};
  top.compute_flops = 1e12;
  const Topology topo("pair", {{d0, d1}, {top}});
  const auto profile = flat_profile(2, 1e9, 2e9, 1024, 1e7);
  const CutVector cut({1}, 2);
  CHECK(model_transfer_latency(profile, topo, cut, 0, 0, TransferDirection::up) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(model_transfer_latency(profile, topo, cut, 0, 0, TransferDirection::down) ==
        doctest::Approx(0.2).epsilon(1e-12));

  // One entity in the tier: the transfer vanishes.
  const auto solo = two_tier(1e12, 1e8, 1e8);
  CHECK(model_transfer_latency(profile, solo, cut, 0, 0, TransferDirection::up) == 0.0);
}

TEST_CASE("aggregation latency is max upload plus max download") {
  EntitySpec d0, d1;
  d0.clients = {0};
  d1.clients = {1};
  d0.compute_flops = d1.compute_flops = 1e12;
  d0.uplink_next_bps = d1.uplink_next_bps = 1e8;
  d0.downlink_next_bps = d1.downlink_next_bps = 1e8;
  // uploads of 0.1 s and 0.3 s, downloads of 0.2 s and 0.05 s
  const double bytes = 1e7;
  d0.fed_uplink_bps = 8.0 * bytes / 0.1;
  d1.fed_uplink_bps = 8.0 * bytes / 0.3;
  d0.fed_downlink_bps = 8.0 * bytes / 0.2;
  d1.fed_downlink_bps = 8.0 * bytes / 0.05;
  EntitySpec top;
  top.clients = {0, 1};
  top.compute_flops = 1e12;
  const Topology topo("pair", {{d0, d1}, {top}});
  const auto profile = flat_profile(2, 1e9, 2e9, 1024, bytes);
  const CutVector cut({1}, 2);
  CHECK(aggregation_latency(profile, topo, cut, 0) == doctest::Approx(0.5).epsilon(1e-9));

  const auto solo = two_tier(1e12, 1e8, 1e8);
  CHECK(aggregation_latency(profile, solo, cut, 0) == 0.0);
}

TEST_CASE("total latency floors the aggregation count") {
  // T_S = 1 s, one bottom tier with T_A = 2 s, I = 5, R = 10 -> 14 s.
  EntitySpec d0, d1;
  d0.clients = {0};
  d1.clients = {1};
  d0.compute_flops = d1.compute_flops = 2e9;  // fp+bp below total 2 GFLOP -> 1 s
  d0.uplink_next_bps = d1.uplink_next_bps = 1e12;
  d0.downlink_next_bps = d1.downlink_next_bps = 1e12;
  d0.fed_uplink_bps = d1.fed_uplink_bps = 8.0 * 1e7 / 1.0;
  d0.fed_downlink_bps = d1.fed_downlink_bps = 8.0 * 1e7 / 1.0;
  EntitySpec top;
  top.clients = {0, 1};
  top.compute_flops = 1e18;
  const Topology topo("pair", {{d0, d1}, {top}});
  // Device tier holds one layer: 1 GFLOP fp + 1 GFLOP bp at 32 GFLOPS, batch
  // 16 -> 1 s; everything else negligible; transfers 1 s up + 1 s down = 2 s.
  std::vector<LayerProfile> layers(2);
  layers[0].fp_flops = 1e9 / 16.0;
  layers[0].bp_flops = 1e9 / 16.0;
  layers[0].param_bytes = 1e7;
  layers[0].activation_bytes = 0.0;
  layers[0].act_grad_bytes = 0.0;
  const ModelProfile profile("tuned", layers);
  const CutVector cut({1}, 2);
  const AggSchedule sched({5});
  CHECK(total_latency(profile, topo, cut, sched, 16, 10) == doctest::Approx(14.0).epsilon(1e-12));
  // No aggregation fits in R rounds.
  CHECK(total_latency(profile, topo, cut, AggSchedule({11}), 16, 10) ==
        doctest::Approx(10.0).epsilon(1e-12));
  // Every round aggregates.
  CHECK(total_latency(profile, topo, cut, AggSchedule({1}), 16, 10) ==
        doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("paper scenario matches the straight-line oracle") {
  const auto profile = builtin_profile("vgg16");
  const auto topo = paper_scenario_topology(0);
  const CutVector cut({3, 8}, 16);
  const std::vector<int> cuts{3, 8};
  const double ts = split_round_latency(profile, topo, cut, 16);
  CHECK(ts == doctest::Approx(oracle::split_round_latency(profile, topo, cuts, 16))
                  .epsilon(1e-12));
  for (int m = 0; m < 2; ++m)
    CHECK(aggregation_latency(profile, topo, cut, m) ==
          doctest::Approx(oracle::aggregation_latency(profile, topo, cuts, m)).epsilon(1e-12));
  const AggSchedule sched({140, 20});
  CHECK(total_latency(profile, topo, cut, sched, 16, 1000) ==
        doctest::Approx(oracle::total_latency(profile, topo, cuts, {140, 20}, 16, 1000))
            .epsilon(1e-12));
}

TEST_CASE("monotonicity in rates, compute, rounds, and batch") {
  const auto profile = builtin_profile("vgg16");
  const auto topo = paper_scenario_topology(3);
  const CutVector cut({4, 9}, 16);
  const AggSchedule sched({10, 5});
  const double base = total_latency(profile, topo, cut, sched, 16, 100);
  CHECK(total_latency(profile, topo.scaled(ScaleAxis::communication, 2.0), cut, sched, 16, 100) <=
        base);
  CHECK(total_latency(profile, topo.scaled(ScaleAxis::compute, 2.0), cut, sched, 16, 100) <= base);
  CHECK(total_latency(profile, topo, cut, sched, 16, 200) >= base);
  CHECK(total_latency(profile, topo, cut, sched, 32, 100) >= base);

  // Continuous aggregation count bounds the floored one from above by less
  // than one aggregation per tier.
  double continuous = 100.0 * split_round_latency(profile, topo, cut, 16);
  double slack = 0.0;
  for (int m = 0; m < 2; ++m) {
    const double agg = aggregation_latency(profile, topo, cut, m);
    continuous += 100.0 / sched.interval(m) * agg;
    slack += agg;
  }
  CHECK(continuous >= base);
  CHECK(continuous - base < slack);
}

TEST_CASE("two-tier reduction zeroes the top-tier transfers") {
  const auto profile = flat_profile(4, 1e9, 2e9, 2048, 1e6);
  std::vector<EntitySpec> devices;
  for (int n = 0; n < 3; ++n) {
    EntitySpec d;
    d.clients = {n};
    d.compute_flops = 1e12;
    d.uplink_next_bps = 1e8;
    d.downlink_next_bps = 2e8;
    d.fed_uplink_bps = 1e8;
    d.fed_downlink_bps = 2e8;
    devices.push_back(d);
  }
  EntitySpec server;
  server.clients = {0, 1, 2};
  server.compute_flops = 10e12;
  const Topology topo("sfl", {devices, {server}});
  const CutVector cut({2}, 4);
  // The top tier has one entity, so only tier-0 aggregation costs anything.
  CHECK(aggregation_latency(profile, topo, cut, 0) > 0.0);
  const auto bd = latency_breakdown(profile, topo, cut, AggSchedule({4}), 8, 12);
  CHECK(bd.aggregation.size() == 1);
  CHECK(bd.total == doctest::Approx(12.0 * bd.split_round + 3.0 * bd.aggregation[0]));
}

TEST_CASE("identical clients tie the round latency") {
  const auto profile = flat_profile(3, 1e9, 2e9, 2048, 1e6);
  std::vector<EntitySpec> devices;
  for (int n = 0; n < 2; ++n) {
    EntitySpec d;
    d.clients = {n};
    d.compute_flops = 1e12;
    d.uplink_next_bps = 1e8;
    d.downlink_next_bps = 2e8;
    d.fed_uplink_bps = 1e8;
    d.fed_downlink_bps = 2e8;
    devices.push_back(d);
  }
  EntitySpec server;
  server.clients = {0, 1};
  server.compute_flops = 10e12;
  const Topology topo("paircast", {devices, {server}});
  const CutVector cut({1}, 3);
  double single = 0.0;
  for (int m = 0; m < 2; ++m)
    single += fp_latency(profile, topo, cut, 8, m, 0) + bp_latency(profile, topo, cut, 8, m, 0);
  single += activation_upload_latency(profile, topo, cut, 8, 0, 0) +
            grad_download_latency(profile, topo, cut, 8, 0, 0);
  CHECK(split_round_latency(profile, topo, cut, 8) == doctest::Approx(single).epsilon(1e-15));
}
