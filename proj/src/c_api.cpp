#include "hsfl/hsfl_c.h"

#include <algorithm>
#include <cstring>
#include <optional>
#include <string>

#include <json.hpp>

#include "hsfl/bcd.hpp"
#include "hsfl/convergence.hpp"
#include "hsfl/errors.hpp"
#include "hsfl/latency.hpp"
#include "hsfl/ma_solver.hpp"
#include "hsfl/model_profile.hpp"
#include "hsfl/ms_solver.hpp"
#include "hsfl/plan.hpp"
#include "hsfl/split_train.hpp"
#include "hsfl/topology.hpp"

using nlohmann::json;

struct hsfl_profile {
  hsfl::ModelProfile value;
};
struct hsfl_topology {
  hsfl::Topology value;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hsfl_status to_status(hsfl::StatusCode code) {
  switch (code) {
    case hsfl::StatusCode::ok: return HSFL_OK;
    case hsfl::StatusCode::config_error: return HSFL_ERR_CONFIG;
    case hsfl::StatusCode::infeasible: return HSFL_ERR_INFEASIBLE;
    case hsfl::StatusCode::non_convergence: return HSFL_ERR_NONCONVERGENCE;
    case hsfl::StatusCode::invalid_argument: return HSFL_ERR_INVALID_ARGUMENT;
    case hsfl::StatusCode::io_error: return HSFL_ERR_IO;
    case hsfl::StatusCode::internal: return HSFL_ERR_INTERNAL;
  }
  return HSFL_ERR_INTERNAL;
}

template <typename Fn>
hsfl_status wrap(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return HSFL_OK;
  } catch (const hsfl::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("json error: ") + e.what();
    return HSFL_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HSFL_ERR_INTERNAL;
  }
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Canonical text of an effective config; hashed into every CSV.
std::string config_hash(const json& effective) { return hex64(fnv1a64(effective.dump())); }

std::string fmt_double(double v) { return json(v).dump(); }

json parse_request(const char* request_json) {
  if (request_json == nullptr) throw hsfl::InvalidArgumentError("request must not be null");
  return json::parse(request_json, nullptr, true, /*ignore_comments=*/true);
}

hsfl::CutVector cut_from(const json& req, const hsfl::ModelProfile& profile) {
  if (!req.contains("cut")) throw hsfl::ConfigError("request is missing \"cut\"");
  return hsfl::CutVector(req.at("cut").get<std::vector<int>>(), profile.num_layers());
}

hsfl::AggSchedule intervals_from(const json& req) {
  if (!req.contains("intervals")) throw hsfl::ConfigError("request is missing \"intervals\"");
  return hsfl::AggSchedule(req.at("intervals").get<std::vector<int>>());
}

hsfl::ConvergenceParams convergence_from(const json& req, const hsfl::Topology& topo) {
  if (!req.contains("convergence"))
    throw hsfl::ConfigError("request is missing \"convergence\"");
  const auto& c = req.at("convergence");
  hsfl::ConvergenceParams params;
  params.beta = c.at("beta").get<double>();
  params.gamma = c.at("gamma").get<double>();
  params.epsilon = c.at("epsilon").get<double>();
  params.vartheta = c.at("vartheta").get<double>();
  params.num_clients = topo.num_clients();
  params.validate();
  return params;
}

struct SolverOptions {
  hsfl::MaOptions ma;
  hsfl::MsOptions ms;
  hsfl::BcdOptions bcd;
};

SolverOptions options_from(const json& req) {
  SolverOptions opts;
  const json o = req.value("options", json::object());
  opts.ma.tol = o.value("newton_tol", opts.ma.tol);
  opts.ma.max_iter = o.value("newton_max_iter", opts.ma.max_iter);
  opts.ma.interval_cap = o.value("interval_cap", opts.ma.interval_cap);
  opts.ms.dinkelbach_tol = o.value("dinkelbach_tol", opts.ms.dinkelbach_tol);
  opts.ms.dinkelbach_max_iter = o.value("dinkelbach_max_iter", opts.ms.dinkelbach_max_iter);
  opts.ms.threads = o.value("threads", opts.ms.threads);
  opts.bcd.epsilon_rel = o.value("bcd_epsilon", opts.bcd.epsilon_rel);
  opts.bcd.max_outer = o.value("bcd_max_outer", opts.bcd.max_outer);
  const std::string method = o.value("method", std::string("enumeration"));
  if (method == "enumeration")
    opts.bcd.method = hsfl::MsMethod::enumeration;
  else if (method == "dinkelbach")
    opts.bcd.method = hsfl::MsMethod::dinkelbach;
  else
    throw hsfl::ConfigError("unknown method: " + method);
  opts.bcd.ma = opts.ma;
  opts.bcd.ms = opts.ms;
  return opts;
}

json ma_solution_json(const hsfl::MaSolution& sol) {
  json out;
  out["intervals"] = sol.intervals.intervals();
  out["objective"] = sol.objective;
  json fixed = json::array();
  for (int m : sol.fixed_to_one) fixed.push_back(m + 1);
  out["fixed_to_one"] = std::move(fixed);
  json free_tiers = json::array();
  for (int m : sol.free_tiers) free_tiers.push_back(m + 1);
  out["free_tiers"] = std::move(free_tiers);
  out["continuous_roots"] = sol.continuous_roots;
  out["iterations"] = sol.iterations;
  out["converged"] = sol.converged;
  return out;
}

json ms_solution_json(const hsfl::MsSolution& sol) {
  json out;
  out["cut"] = sol.cut.cuts();
  out["objective"] = sol.objective;
  out["tight"] = {{"round_latency_s", sol.tight.round_latency},
                  {"upload_s", sol.tight.upload},
                  {"download_s", sol.tight.download}};
  out["feasible_count"] = sol.feasible_count;
  out["method"] = sol.method == hsfl::MsMethod::enumeration ? "enumeration" : "dinkelbach";
  out["dinkelbach_iterations"] = sol.dinkelbach_iterations;
  return out;
}

json bcd_trace_json(const hsfl::BcdTrace& trace) {
  json iters = json::array();
  for (const auto& it : trace.iterations) {
    iters.push_back({{"iteration", it.iteration},
                     {"cut", it.cut.cuts()},
                     {"intervals", it.intervals.intervals()},
                     {"objective", it.objective}});
  }
  json out;
  out["iterations"] = std::move(iters);
  out["final"] = {{"cut", trace.final_cut.cuts()},
                  {"intervals", trace.final_intervals.intervals()},
                  {"objective", trace.final_objective},
                  {"predicted_rounds", trace.predicted_rounds},
                  {"predicted_total_latency_s", trace.predicted_total_latency}};
  out["converged"] = trace.converged;
  out["threshold"] = trace.threshold;
  return out;
}

// ---- desk-scale training plumbing ----

struct TrainRequest {
  int clients = 8;
  std::vector<int> entities;
  hsfl::MlpArch arch;
  std::vector<int> cut;
  std::vector<int> intervals;
  hsfl::TrainOptions opts;
  std::string partition = "iid";
  int classes = 2;
  int samples_per_client = 80;
  double spread = 2.5;
  std::uint64_t data_seed = 0;
  json effective;  // with defaults applied, for hashing
};

TrainRequest train_request_from(const json& req) {
  TrainRequest r;
  r.clients = req.value("clients", 8);
  if (r.clients < 1) throw hsfl::ConfigError("clients must be >= 1");
  r.arch.dims = req.contains("arch") && req.at("arch").contains("dims")
                    ? req.at("arch").at("dims").get<std::vector<int>>()
                    : std::vector<int>{16, 32, 64, 32, 2};
  const std::string act =
      req.contains("arch") ? req.at("arch").value("activation", "tanh") : "tanh";
  if (act == "tanh")
    r.arch.activation = hsfl::Activation::tanh_act;
  else if (act == "relu")
    r.arch.activation = hsfl::Activation::relu;
  else if (act == "identity")
    r.arch.activation = hsfl::Activation::identity;
  else
    throw hsfl::ConfigError("unknown activation: " + act);

  int tiers = req.value("tiers", 3);
  if (req.contains("entities")) {
    r.entities = req.at("entities").get<std::vector<int>>();
    tiers = static_cast<int>(r.entities.size());
  } else {
    r.entities = {r.clients};
    for (int m = 1; m < tiers - 1; ++m) {
      const int prev = r.entities.back();
      r.entities.push_back(prev % 4 == 0 ? prev / 4 : 1);
    }
    r.entities.push_back(1);
  }
  if (static_cast<int>(r.entities.size()) < 2)
    throw hsfl::ConfigError("training needs at least 2 tiers");
  if (r.entities.front() != r.clients)
    throw hsfl::ConfigError("entities[0] must equal the client count");

  if (req.contains("cut")) {
    r.cut = req.at("cut").get<std::vector<int>>();
  } else {
    // Spread the layers one per tier from the bottom.
    for (int m = 1; m < tiers; ++m) r.cut.push_back(m);
  }
  r.intervals = req.contains("intervals")
                    ? req.at("intervals").get<std::vector<int>>()
                    : std::vector<int>(static_cast<std::size_t>(tiers - 1), 1);

  r.opts.rounds = req.value("rounds", 100);
  r.opts.batch = req.value("batch", 16);
  r.opts.lr = req.value("lr", 0.05);
  r.opts.seed = req.value("seed", static_cast<std::uint64_t>(0));
  r.opts.snapshot_every = req.value("snapshot_every", 0);
  r.opts.threads = req.value("threads", 1);
  r.partition = req.value("partition", "iid");
  if (r.partition != "iid" && r.partition != "shard")
    throw hsfl::ConfigError("partition must be \"iid\" or \"shard\"");
  const json d = req.value("dataset", json::object());
  r.classes = d.value("classes", 2);
  r.samples_per_client = d.value("samples_per_client", 80);
  r.spread = d.value("spread", 2.5);
  r.data_seed = d.value("data_seed", r.opts.seed);
  if (r.arch.dims.back() != r.classes)
    throw hsfl::ConfigError("arch output dimension must equal the class count");

  r.effective = {{"clients", r.clients},
                 {"entities", r.entities},
                 {"arch", {{"dims", r.arch.dims}, {"activation", act}}},
                 {"cut", r.cut},
                 {"intervals", r.intervals},
                 {"rounds", r.opts.rounds},
                 {"batch", r.opts.batch},
                 {"lr", r.opts.lr},
                 {"seed", r.opts.seed},
                 {"snapshot_every", r.opts.snapshot_every},
                 {"partition", r.partition},
                 {"dataset",
                  {{"classes", r.classes},
                   {"samples_per_client", r.samples_per_client},
                   {"spread", r.spread},
                   {"data_seed", r.data_seed}}}};
  return r;
}

struct TrainRun {
  hsfl::TrainTrace trace;
  int bottom_tiers = 0;
  TrainRequest request;
};

TrainRun run_training(const json& req_json) {
  TrainRequest r = train_request_from(req_json);
  const hsfl::Topology topo = hsfl::desk_topology(r.entities);
  const hsfl::ClientData pool = hsfl::gaussian_mixture(
      r.clients * r.samples_per_client, r.arch.dims.front(), r.classes, r.spread, r.data_seed);
  const auto datasets =
      r.partition == "iid"
          ? hsfl::partition_iid(pool, r.clients, r.data_seed + 1)
          : hsfl::partition_shards(pool, r.clients, 2, r.data_seed + 1);
  hsfl::SplitNet net(r.arch, hsfl::CutVector(r.cut, r.arch.num_layers()), r.clients, r.opts.seed);
  const hsfl::AggSchedule sched(r.intervals);
  TrainRun run;
  run.trace = hsfl::train(net, topo, datasets, sched, r.opts);
  run.bottom_tiers = topo.num_tiers() - 1;
  run.request = std::move(r);
  return run;
}

std::string train_trace_csv(const TrainRun& run) {
  std::string csv = "# config_hash=" + config_hash(run.request.effective) + "\n";
  csv += "round,loss_on_aggregate";
  for (int m = 1; m <= run.bottom_tiers; ++m) csv += ",div_tier_" + std::to_string(m);
  csv += ",agg_events\n";
  for (const auto& row : run.trace.rows) {
    csv += std::to_string(row.round) + "," + fmt_double(row.loss_on_aggregate);
    for (double d : row.divergence) csv += "," + fmt_double(d);
    csv += ",";
    for (std::size_t i = 0; i < row.aggregated_tiers.size(); ++i) {
      if (i) csv += "|";
      csv += std::to_string(row.aggregated_tiers[i]);
    }
    csv += "\n";
  }
  return csv;
}

json train_summary_json(const TrainRun& run) {
  json out;
  out["config_hash"] = config_hash(run.request.effective);
  out["clients"] = run.request.clients;
  out["entities"] = run.request.entities;
  out["cut"] = run.request.cut;
  out["intervals"] = run.request.intervals;
  out["rounds"] = run.request.opts.rounds;
  out["initial_loss"] = run.trace.initial_loss;
  out["final_loss"] = run.trace.rows.back().loss_on_aggregate;
  out["best_loss"] = run.trace.best_loss;
  out["vartheta_hint"] = run.trace.initial_loss - run.trace.best_loss;
  out["max_layer_grad_sq"] = run.trace.max_layer_grad_sq;
  json divergence = json::array();
  for (int m = 0; m < run.bottom_tiers; ++m) {
    double peak = 0.0;
    for (const auto& row : run.trace.rows)
      peak = std::max(peak, row.divergence.empty() ? 0.0 : row.divergence[static_cast<std::size_t>(m)]);
    divergence.push_back(peak);
  }
  out["peak_divergence"] = std::move(divergence);
  return out;
}

}  // namespace

extern "C" {

const char* hsfl_version(void) { return "1.0.0"; }

const char* hsfl_last_error(void) { return g_last_error.c_str(); }

void hsfl_string_free(char* s) { delete[] s; }

hsfl_status hsfl_profile_load(const char* path, hsfl_profile** out) {
  return wrap([&] {
    if (!path || !out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_profile{hsfl::ModelProfile::load(path)};
  });
}

hsfl_status hsfl_profile_parse(const char* text, hsfl_profile** out) {
  return wrap([&] {
    if (!text || !out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_profile{hsfl::ModelProfile::parse(text)};
  });
}

hsfl_status hsfl_profile_builtin(const char* name, hsfl_profile** out) {
  return wrap([&] {
    if (!name || !out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_profile{hsfl::builtin_profile(name)};
  });
}

hsfl_status hsfl_profile_serialize(const hsfl_profile* profile, char** out_text) {
  return wrap([&] {
    if (!profile || !out_text) throw hsfl::InvalidArgumentError("null argument");
    *out_text = dup_string(profile->value.serialize());
  });
}

int hsfl_profile_num_layers(const hsfl_profile* profile) {
  return profile ? profile->value.num_layers() : 0;
}

void hsfl_profile_free(hsfl_profile* profile) { delete profile; }

hsfl_status hsfl_topology_load(const char* path, hsfl_topology** out) {
  return wrap([&] {
    if (!path || !out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_topology{hsfl::Topology::load(path)};
  });
}

hsfl_status hsfl_topology_parse(const char* text, hsfl_topology** out) {
  return wrap([&] {
    if (!text || !out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_topology{hsfl::Topology::parse(text)};
  });
}

hsfl_status hsfl_topology_paper_scenario(uint64_t seed, hsfl_topology** out) {
  return wrap([&] {
    if (!out) throw hsfl::InvalidArgumentError("null argument");
    *out = new hsfl_topology{hsfl::paper_scenario_topology(seed)};
  });
}

hsfl_status hsfl_topology_serialize(const hsfl_topology* topo, char** out_text) {
  return wrap([&] {
    if (!topo || !out_text) throw hsfl::InvalidArgumentError("null argument");
    *out_text = dup_string(topo->value.serialize());
  });
}

hsfl_status hsfl_topology_validate(const hsfl_topology* topo, char** out_json) {
  return wrap([&] {
    if (!topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    *out_json = dup_string(json(topo->value.validate()).dump());
  });
}

hsfl_status hsfl_topology_scale(const hsfl_topology* topo, const char* axis, double coefficient,
                                hsfl_topology** out) {
  return wrap([&] {
    if (!topo || !axis || !out) throw hsfl::InvalidArgumentError("null argument");
    const std::string a = axis;
    hsfl::ScaleAxis ax;
    if (a == "compute")
      ax = hsfl::ScaleAxis::compute;
    else if (a == "communication")
      ax = hsfl::ScaleAxis::communication;
    else
      throw hsfl::ConfigError("axis must be \"compute\" or \"communication\"");
    *out = new hsfl_topology{topo->value.scaled(ax, coefficient)};
  });
}

int hsfl_topology_num_tiers(const hsfl_topology* topo) {
  return topo ? topo->value.num_tiers() : 0;
}

int hsfl_topology_num_clients(const hsfl_topology* topo) {
  return topo ? topo->value.num_clients() : 0;
}

void hsfl_topology_free(hsfl_topology* topo) { delete topo; }

hsfl_status hsfl_latency_report(const hsfl_profile* profile, const hsfl_topology* topo,
                                const char* request_json, char** out_json) {
  return wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const auto cut = cut_from(req, profile->value);
    const auto sched = intervals_from(req);
    const int batch = req.value("batch", 16);
    const long long rounds = req.value("rounds", 1LL);
    const auto bd = hsfl::latency_breakdown(profile->value, topo->value, cut, sched, batch, rounds);
    json out;
    out["cut"] = cut.cuts();
    out["intervals"] = sched.intervals();
    out["batch"] = batch;
    out["rounds"] = rounds;
    out["split_round_s"] = bd.split_round;
    out["aggregation_s"] = bd.aggregation;
    out["total_s"] = bd.total;
    out["per_client"] = {{"fp_s", bd.fp},
                         {"activation_upload_s", bd.act_up},
                         {"bp_s", bd.bp},
                         {"grad_download_s", bd.grad_down}};
    out["per_entity"] = {{"model_upload_s", bd.model_up}, {"model_download_s", bd.model_down}};
    *out_json = dup_string(out.dump(2));
  });
}

hsfl_status hsfl_evaluate_plan(const hsfl_profile* profile, const hsfl_topology* topo,
                               const char* request_json, char** out_json) {
  hsfl_status worst = HSFL_OK;
  const hsfl_status st = wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const auto cut = cut_from(req, profile->value);
    const auto sched = intervals_from(req);
    const int batch = req.value("batch", 16);
    const auto params = convergence_from(req, topo->value);
    const auto tails = hsfl::bound_rhs(params, profile->value, cut, sched);
    const auto consts =
        hsfl::build_objective_constants(params, profile->value, topo->value, cut, batch);
    const double margin = hsfl::feasibility_margin(consts, sched);
    const bool memory_ok = hsfl::memory_feasible(profile->value, topo->value, cut, batch);
    const bool feasible = margin > 0.0 && memory_ok;
    json out;
    out["cut"] = cut.cuts();
    out["intervals"] = sched.intervals();
    out["batch"] = batch;
    out["epsilon"] = params.epsilon;
    out["variance_tail"] = tails.variance;
    out["drift_tail"] = tails.drift;
    out["accuracy_margin"] = margin;
    out["memory_feasible"] = memory_ok;
    out["feasible"] = feasible;
    out["split_round_s"] = consts.per_round_latency;
    out["aggregation_s"] = consts.per_agg_latency;
    if (feasible) {
      out["theta_prime"] = hsfl::theta_prime(consts, sched);
      const long long rounds =
          hsfl::rounds_for_accuracy(params, profile->value, cut, sched);
      out["predicted_rounds"] = rounds;
      out["predicted_total_latency_s"] =
          hsfl::total_latency(profile->value, topo->value, cut, sched, batch, rounds);
    } else {
      out["theta_prime"] = nullptr;
      out["predicted_rounds"] = nullptr;
      out["predicted_total_latency_s"] = nullptr;
      worst = HSFL_ERR_INFEASIBLE;
      g_last_error = "plan is infeasible (accuracy margin " + fmt_double(margin) +
                     ", memory_feasible=" + (memory_ok ? "true" : "false") + ")";
    }
    *out_json = dup_string(out.dump(2));
  });
  return st != HSFL_OK ? st : worst;
}

hsfl_status hsfl_solve_ma(const hsfl_profile* profile, const hsfl_topology* topo,
                          const char* request_json, char** out_json) {
  return wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const auto cut = cut_from(req, profile->value);
    const int batch = req.value("batch", 16);
    const auto params = convergence_from(req, topo->value);
    const auto opts = options_from(req);
    const auto consts =
        hsfl::build_objective_constants(params, profile->value, topo->value, cut, batch);
    const auto sol = hsfl::solve_ma(consts, topo->value, opts.ma);
    json out = ma_solution_json(sol);
    out["cut"] = cut.cuts();
    *out_json = dup_string(out.dump(2));
  });
}

hsfl_status hsfl_solve_ms(const hsfl_profile* profile, const hsfl_topology* topo,
                          const char* request_json, char** out_json) {
  return wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const auto sched = intervals_from(req);
    const int batch = req.value("batch", 16);
    const auto params = convergence_from(req, topo->value);
    const auto opts = options_from(req);
    const auto sol = hsfl::solve_ms(params, profile->value, topo->value, sched, batch,
                                    opts.bcd.method, opts.ms);
    json out = ms_solution_json(sol);
    out["intervals"] = sched.intervals();
    *out_json = dup_string(out.dump(2));
  });
}

hsfl_status hsfl_run_bcd(const hsfl_profile* profile, const hsfl_topology* topo,
                         const char* request_json, char** out_json) {
  return wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const int batch = req.value("batch", 16);
    const auto params = convergence_from(req, topo->value);
    const auto opts = options_from(req);
    std::optional<hsfl::CutVector> init_cut;
    std::optional<hsfl::AggSchedule> init_intervals;
    if (req.contains("init_cut"))
      init_cut = hsfl::CutVector(req.at("init_cut").get<std::vector<int>>(),
                                 profile->value.num_layers());
    if (req.contains("init_intervals"))
      init_intervals = hsfl::AggSchedule(req.at("init_intervals").get<std::vector<int>>());
    const auto trace = hsfl::run_bcd(params, profile->value, topo->value, batch, opts.bcd,
                                     init_cut, init_intervals);
    *out_json = dup_string(bcd_trace_json(trace).dump(2));
  });
}

hsfl_status hsfl_random_baseline(const hsfl_profile* profile, const hsfl_topology* topo,
                                 const char* request_json, char** out_json) {
  return wrap([&] {
    if (!profile || !topo || !out_json) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const std::string kind = req.value("kind", "rma");
    const auto seed = req.value("seed", static_cast<std::uint64_t>(0));
    json out;
    out["kind"] = kind;
    out["seed"] = seed;
    if (kind == "rma") {
      const int lo = req.value("lo", 1), hi = req.value("hi", 25);
      const auto sched =
          hsfl::random_ma_baseline(seed, topo->value.num_tiers() - 1, lo, hi);
      out["intervals"] = sched.intervals();
      if (req.contains("cut")) out["cut"] = req.at("cut");
    } else if (kind == "rms") {
      const int lo = req.value("lo", 3), hi = req.value("hi", 14);
      const auto cut = hsfl::random_ms_baseline(seed, profile->value.num_layers(),
                                                topo->value.num_tiers(), lo, hi);
      out["cut"] = cut.cuts();
      if (req.contains("intervals")) out["intervals"] = req.at("intervals");
    } else {
      throw hsfl::ConfigError("baseline kind must be \"rma\" or \"rms\"");
    }
    *out_json = dup_string(out.dump(2));
  });
}

hsfl_status hsfl_sweep(const hsfl_profile* profile, const hsfl_topology* topo,
                       const char* request_json, char** out_csv) {
  return wrap([&] {
    if (!profile || !topo || !out_csv) throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const std::string axis = req.value("axis", "compute");
    if (axis != "compute" && axis != "communication")
      throw hsfl::ConfigError("axis must be \"compute\" or \"communication\"");
    const auto coefficients = req.at("coefficients").get<std::vector<double>>();
    for (double c : coefficients)
      if (!(c > 0.0)) throw hsfl::InvalidArgumentError("coefficients must be positive");
    const int batch = req.value("batch", 16);
    const auto params = convergence_from(req, topo->value);
    const auto opts = options_from(req);

    json effective = req;
    effective["axis"] = axis;
    effective["batch"] = batch;
    // The worker count cannot change results, so it is not part of the
    // recorded experiment config.
    if (effective.contains("options")) effective["options"].erase("threads");
    std::string csv = "# config_hash=" + config_hash(effective) + "\n";
    csv += "coefficient,cut,intervals,theta_prime,predicted_rounds,predicted_total_latency_s,status\n";
    for (double coeff : coefficients) {
      const auto scaled = topo->value.scaled(
          axis == "compute" ? hsfl::ScaleAxis::compute : hsfl::ScaleAxis::communication, coeff);
      csv += fmt_double(coeff) + ",";
      try {
        const auto trace = hsfl::run_bcd(params, profile->value, scaled, batch, opts.bcd);
        csv += "\"" + trace.final_cut.to_string() + "\",\"" +
               trace.final_intervals.to_string() + "\"," + fmt_double(trace.final_objective) +
               "," + std::to_string(trace.predicted_rounds) + "," +
               fmt_double(trace.predicted_total_latency) + ",ok\n";
      } catch (const hsfl::InfeasibleError&) {
        csv += ",,,,,infeasible\n";
      }
    }
    *out_csv = dup_string(csv);
  });
}

hsfl_status hsfl_train_run(const char* request_json, char** out_trace_csv,
                           char** out_summary_json) {
  return wrap([&] {
    if (!out_trace_csv || !out_summary_json)
      throw hsfl::InvalidArgumentError("null argument");
    const json req = parse_request(request_json);
    const TrainRun run = run_training(req);
    *out_trace_csv = dup_string(train_trace_csv(run));
    *out_summary_json = dup_string(train_summary_json(run).dump(2));
  });
}

hsfl_status hsfl_estimate_params_run(const char* request_json, char** out_fragment_json) {
  return wrap([&] {
    if (!out_fragment_json) throw hsfl::InvalidArgumentError("null argument");
    json req = parse_request(request_json);
    if (!req.contains("snapshot_every") || req.at("snapshot_every").get<int>() < 1) {
      const int rounds = req.value("rounds", 100);
      req["snapshot_every"] = std::max(1, rounds / 10);
    }
    const TrainRun run = run_training(req);
    const auto stats = hsfl::estimate_params(run.trace.snapshots);
    json out;
    out["config_hash"] = config_hash(run.request.effective);
    out["layers"] = run.trace.snapshots.num_layers;
    out["beta"] = stats.beta;
    out["grad_variance"] = stats.grad_variance;
    out["grad_second_moment"] = stats.grad_second_moment;
    out["vartheta_hint"] = run.trace.initial_loss - run.trace.best_loss;
    *out_fragment_json = dup_string(out.dump(2));
  });
}

hsfl_status hsfl_profile_merge_fragment(const hsfl_profile* profile, const char* fragment_json,
                                        hsfl_profile** out) {
  return wrap([&] {
    if (!profile || !fragment_json || !out) throw hsfl::InvalidArgumentError("null argument");
    const json frag = json::parse(fragment_json, nullptr, true, true);
    *out = new hsfl_profile{hsfl::with_gradient_stats(
        profile->value, frag.at("grad_variance").get<std::vector<double>>(),
        frag.at("grad_second_moment").get<std::vector<double>>())};
  });
}

}  // extern "C"
