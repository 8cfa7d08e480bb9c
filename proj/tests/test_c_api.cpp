#include <doctest.h>

#include <string>

#include <json.hpp>

#include "hsfl/hsfl_c.h"

using nlohmann::json;

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { hsfl_string_free(p); }
  std::string get() const { return p ? std::string(p) : std::string(); }
};

const char* kConvergence =
    R"("convergence": {"beta": 2.0, "gamma": 5e-4, "epsilon": 0.05, "vartheta": 5.0})";

}  // namespace

TEST_CASE("profile lifecycle through the C API") {
  hsfl_profile* p = nullptr;
  REQUIRE(hsfl_profile_builtin("vgg16", &p) == HSFL_OK);
  CHECK(hsfl_profile_num_layers(p) == 16);
  Str text;
  REQUIRE(hsfl_profile_serialize(p, &text.p) == HSFL_OK);
  hsfl_profile* q = nullptr;
  REQUIRE(hsfl_profile_parse(text.p, &q) == HSFL_OK);
  Str text2;
  REQUIRE(hsfl_profile_serialize(q, &text2.p) == HSFL_OK);
  CHECK(text.get() == text2.get());
  hsfl_profile_free(p);
  hsfl_profile_free(q);

  hsfl_profile* bad = nullptr;
  CHECK(hsfl_profile_builtin("nope", &bad) == HSFL_ERR_INVALID_ARGUMENT);
  CHECK(std::string(hsfl_last_error()).find("unknown builtin") != std::string::npos);
  CHECK(hsfl_profile_parse("{", &bad) == HSFL_ERR_CONFIG);
  CHECK(hsfl_profile_load("/no/such/file", &bad) == HSFL_ERR_IO);
}

TEST_CASE("topology lifecycle through the C API") {
  hsfl_topology* t = nullptr;
  REQUIRE(hsfl_topology_paper_scenario(0, &t) == HSFL_OK);
  CHECK(hsfl_topology_num_tiers(t) == 3);
  CHECK(hsfl_topology_num_clients(t) == 20);
  Str diag;
  REQUIRE(hsfl_topology_validate(t, &diag.p) == HSFL_OK);
  CHECK(json::parse(diag.get()).empty());

  hsfl_topology* scaled = nullptr;
  REQUIRE(hsfl_topology_scale(t, "compute", 2.0, &scaled) == HSFL_OK);
  hsfl_topology* bad = nullptr;
  CHECK(hsfl_topology_scale(t, "sideways", 2.0, &bad) == HSFL_ERR_CONFIG);
  hsfl_topology_free(scaled);
  hsfl_topology_free(t);
}

TEST_CASE("latency, evaluation, and solver calls") {
  hsfl_profile* p = nullptr;
  hsfl_topology* t = nullptr;
  REQUIRE(hsfl_profile_builtin("vgg16", &p) == HSFL_OK);
  REQUIRE(hsfl_topology_paper_scenario(0, &t) == HSFL_OK);

  SUBCASE("latency report") {
    Str out;
    const std::string req =
        R"({"cut": [3, 8], "intervals": [140, 20], "batch": 16, "rounds": 100})";
    REQUIRE(hsfl_latency_report(p, t, req.c_str(), &out.p) == HSFL_OK);
    const json report = json::parse(out.get());
    CHECK(report["split_round_s"].get<double>() > 0.0);
    CHECK(report["aggregation_s"].size() == 2);
    CHECK(report["total_s"].get<double>() > 0.0);
  }

  SUBCASE("evaluate feasible and infeasible plans") {
    Str ok_out;
    const std::string ok_req = std::string(R"({"cut": [3, 8], "intervals": [140, 20],)") +
                               R"("batch": 16,)" + kConvergence + "}";
    REQUIRE(hsfl_evaluate_plan(p, t, ok_req.c_str(), &ok_out.p) == HSFL_OK);
    const json report = json::parse(ok_out.get());
    CHECK(report["feasible"].get<bool>());
    CHECK(report["predicted_rounds"].get<long long>() > 0);

    Str bad_out;
    const std::string bad_req =
        std::string(R"({"cut": [3, 8], "intervals": [100000, 20000], "batch": 16,)") +
        kConvergence + "}";
    CHECK(hsfl_evaluate_plan(p, t, bad_req.c_str(), &bad_out.p) == HSFL_ERR_INFEASIBLE);
    const json bad = json::parse(bad_out.get());
    CHECK_FALSE(bad["feasible"].get<bool>());
    CHECK(bad["theta_prime"].is_null());
  }

  SUBCASE("interval solve, cut solve, joint solve, baselines") {
    Str ma;
    const std::string ma_req =
        std::string(R"({"cut": [3, 8], "batch": 16,)") + kConvergence + "}";
    REQUIRE(hsfl_solve_ma(p, t, ma_req.c_str(), &ma.p) == HSFL_OK);
    const json ma_json = json::parse(ma.get());
    CHECK(ma_json["intervals"].size() == 2);
    CHECK(ma_json["objective"].get<double>() > 0.0);

    Str ms;
    const std::string ms_req =
        std::string(R"({"intervals": [10, 4], "batch": 16, "options": {"method": "dinkelbach"},)") +
        kConvergence + "}";
    REQUIRE(hsfl_solve_ms(p, t, ms_req.c_str(), &ms.p) == HSFL_OK);
    CHECK(json::parse(ms.get())["cut"].size() == 2);

    Str bcd;
    const std::string bcd_req = std::string(R"({"batch": 16,)") + kConvergence + "}";
    REQUIRE(hsfl_run_bcd(p, t, bcd_req.c_str(), &bcd.p) == HSFL_OK);
    const json trace = json::parse(bcd.get());
    CHECK(trace["final"]["objective"].get<double>() > 0.0);
    CHECK(trace["iterations"].size() >= 1);

    Str rma;
    REQUIRE(hsfl_random_baseline(p, t, R"({"kind": "rma", "seed": 4})", &rma.p) == HSFL_OK);
    const json rma_json = json::parse(rma.get());
    for (const auto& v : rma_json["intervals"]) {
      CHECK(v.get<int>() >= 1);
      CHECK(v.get<int>() <= 25);
    }
    Str rms;
    REQUIRE(hsfl_random_baseline(p, t, R"({"kind": "rms", "seed": 4})", &rms.p) == HSFL_OK);
    const json rms_json = json::parse(rms.get());
    CHECK(rms_json["cut"][0].get<int>() >= 3);
    CHECK(rms_json["cut"][1].get<int>() <= 14);
  }

  SUBCASE("sweep CSV") {
    Str csv;
    const std::string req =
        std::string(R"({"axis": "compute", "coefficients": [0.5, 1.0], "batch": 16,)") +
        kConvergence + "}";
    REQUIRE(hsfl_sweep(p, t, req.c_str(), &csv.p) == HSFL_OK);
    const std::string text = csv.get();
    CHECK(text.find("# config_hash=") == 0);
    CHECK(text.find("coefficient,cut,intervals,theta_prime") != std::string::npos);
    CHECK(text.find("ok") != std::string::npos);
  }

  hsfl_profile_free(p);
  hsfl_topology_free(t);
}

TEST_CASE("training and estimation through the C API") {
  const std::string req = R"({
    "clients": 4, "tiers": 3, "rounds": 12, "batch": 8, "lr": 0.05, "seed": 9,
    "partition": "iid",
    "dataset": {"classes": 2, "samples_per_client": 40, "spread": 2.5}
  })";
  Str csv, summary;
  REQUIRE(hsfl_train_run(req.c_str(), &csv.p, &summary.p) == HSFL_OK);
  const std::string trace = csv.get();
  CHECK(trace.find("# config_hash=") == 0);
  CHECK(trace.find("round,loss_on_aggregate,div_tier_1,div_tier_2,agg_events") !=
        std::string::npos);
  const json sum = json::parse(summary.get());
  CHECK(sum["rounds"].get<int>() == 12);
  CHECK(sum["final_loss"].get<double>() > 0.0);

  // Identical request, identical bytes.
  Str csv2, summary2;
  REQUIRE(hsfl_train_run(req.c_str(), &csv2.p, &summary2.p) == HSFL_OK);
  CHECK(csv.get() == csv2.get());
  CHECK(summary.get() == summary2.get());

  Str fragment;
  REQUIRE(hsfl_estimate_params_run(req.c_str(), &fragment.p) == HSFL_OK);
  const json frag = json::parse(fragment.get());
  CHECK(frag["layers"].get<int>() == 4);
  CHECK(frag["grad_second_moment"].size() == 4);
  CHECK(frag["beta"].get<double>() > 0.0);

  hsfl_profile* base = nullptr;
  REQUIRE(hsfl_profile_builtin("tinymlp", &base) == HSFL_OK);
  hsfl_profile* merged = nullptr;
  REQUIRE(hsfl_profile_merge_fragment(base, fragment.p, &merged) == HSFL_OK);
  Str merged_text;
  REQUIRE(hsfl_profile_serialize(merged, &merged_text.p) == HSFL_OK);
  CHECK(merged_text.get().find("grad_second_moment") != std::string::npos);
  hsfl_profile_free(base);
  hsfl_profile_free(merged);
}

TEST_CASE("error mapping") {
  CHECK(hsfl_train_run("{]", nullptr, nullptr) == HSFL_ERR_INVALID_ARGUMENT);
  Str a, b;
  CHECK(hsfl_train_run("{]", &a.p, &b.p) == HSFL_ERR_CONFIG);
  CHECK(hsfl_train_run(R"({"partition": "sideways"})", &a.p, &b.p) == HSFL_ERR_CONFIG);
  CHECK(std::string(hsfl_version()).find('.') != std::string::npos);
}
