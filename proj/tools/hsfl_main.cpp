// hsfl: planner, solver, and desk-scale trainer for hierarchical split
// federated learning. Talks to the core library through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsfl/hsfl_c.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNonConvergence = 4;

int exit_code_for(hsfl_status st) {
  switch (st) {
    case HSFL_OK: return kExitOk;
    case HSFL_ERR_INFEASIBLE: return kExitInfeasible;
    case HSFL_ERR_NONCONVERGENCE: return kExitNonConvergence;
    default: return kExitConfig;
  }
}

[[noreturn]] void fail(hsfl_status st) {
  std::cerr << "error: " << hsfl_last_error() << "\n";
  std::exit(exit_code_for(st));
}

struct StringGuard {
  char* ptr = nullptr;
  ~StringGuard() { hsfl_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

struct ProfileGuard {
  hsfl_profile* ptr = nullptr;
  ~ProfileGuard() { hsfl_profile_free(ptr); }
};

struct TopologyGuard {
  hsfl_topology* ptr = nullptr;
  ~TopologyGuard() { hsfl_topology_free(ptr); }
};

// Shared command context: config file merged with command-line overrides.
struct Context {
  std::string config_path;
  std::string profile = "vgg16";
  std::string topology_path;
  bool paper_scenario = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int batch = 16;
  double beta = 2.0, gamma = 5e-4, epsilon = 0.05, vartheta = 5.0;
  std::string method = "enumeration";
  int threads = 1;
  double newton_tol = 1e-9, dinkelbach_tol = 1e-9, bcd_epsilon = 1e-6;
  int newton_max_iter = 200, dinkelbach_max_iter = 100, bcd_max_outer = 50, interval_cap = 512;
  std::string out_dir;

  json cfg;  // raw config file contents

  void add_options(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override its values");
    app->add_option("--profile", profile, "builtin profile name (vgg16, tinymlp) or file path");
    app->add_option("--topology", topology_path, "topology file path");
    app->add_flag("--paper-scenario", paper_scenario,
                  "use the built-in three-tier evaluation scenario");
    app->add_option("--seed", seed, "seed for every randomized component")
        ->each([this](const std::string&) { seed_set = true; });
    app->add_option("--batch", batch, "minibatch size");
    app->add_option("--beta", beta, "smoothness constant");
    app->add_option("--gamma", gamma, "learning rate");
    app->add_option("--epsilon", epsilon, "target accuracy");
    app->add_option("--vartheta", vartheta, "initial optimality gap");
    app->add_option("--method", method, "ms solver path: enumeration or dinkelbach");
    app->add_option("--threads", threads, "worker count for parallel sections");
    app->add_option("--newton-tol", newton_tol, "stationarity root tolerance");
    app->add_option("--interval-cap", interval_cap, "interval assigned to zero-drift tiers");
    app->add_option("--dinkelbach-tol", dinkelbach_tol, "Dinkelbach stopping tolerance");
    app->add_option("--bcd-epsilon", bcd_epsilon, "BCD relative stopping threshold");
    app->add_option("--bcd-max-outer", bcd_max_outer, "BCD outer iteration cap");
    app->add_option("--out-dir", out_dir, "output directory (or HSFL_OUT_DIR)");
  }

  // Config file values fill in anything the user did not set on the line.
  void load_config(const CLI::App* app) {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      std::exit(kExitConfig);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      cfg = json::parse(buf.str(), nullptr, true, true);
    } catch (const json::exception& e) {
      std::cerr << "error: config parse: " << e.what() << "\n";
      std::exit(kExitConfig);
    }
    auto unset = [&](const std::string& flag) { return app->count(flag) == 0; };
    if (unset("--profile") && cfg.contains("profile")) profile = cfg["profile"];
    if (cfg.contains("topology")) {
      const auto& t = cfg["topology"];
      if (unset("--topology") && t.contains("path")) topology_path = t["path"];
      if (!paper_scenario && t.contains("paper_scenario_seed")) {
        paper_scenario = true;
        if (!seed_set) seed = t["paper_scenario_seed"].get<std::uint64_t>();
      }
    }
    if (unset("--batch") && cfg.contains("batch")) batch = cfg["batch"];
    if (cfg.contains("convergence")) {
      const auto& c = cfg["convergence"];
      if (unset("--beta") && c.contains("beta")) beta = c["beta"];
      if (unset("--gamma") && c.contains("gamma")) gamma = c["gamma"];
      if (unset("--epsilon") && c.contains("epsilon")) epsilon = c["epsilon"];
      if (unset("--vartheta") && c.contains("vartheta")) vartheta = c["vartheta"];
    }
    if (cfg.contains("options")) {
      const auto& o = cfg["options"];
      if (unset("--method") && o.contains("method")) method = o["method"];
      if (unset("--threads") && o.contains("threads")) threads = o["threads"];
      if (unset("--newton-tol") && o.contains("newton_tol")) newton_tol = o["newton_tol"];
      if (unset("--interval-cap") && o.contains("interval_cap")) interval_cap = o["interval_cap"];
      if (unset("--dinkelbach-tol") && o.contains("dinkelbach_tol"))
        dinkelbach_tol = o["dinkelbach_tol"];
      if (unset("--bcd-epsilon") && o.contains("bcd_epsilon")) bcd_epsilon = o["bcd_epsilon"];
      if (unset("--bcd-max-outer") && o.contains("bcd_max_outer"))
        bcd_max_outer = o["bcd_max_outer"];
    }
    if (unset("--out-dir") && cfg.contains("out_dir")) out_dir = cfg["out_dir"];
  }

  fs::path resolve_out(const std::string& name) const {
    fs::path p(name);
    if (p.is_absolute()) return p;
    std::string dir = out_dir;
    if (dir.empty()) {
      if (const char* env = std::getenv("HSFL_OUT_DIR")) dir = env;
    }
    if (dir.empty()) return p;
    fs::create_directories(dir);
    return fs::path(dir) / p;
  }

  hsfl_profile* open_profile() const {
    hsfl_profile* p = nullptr;
    hsfl_status st;
    if (fs::exists(profile))
      st = hsfl_profile_load(profile.c_str(), &p);
    else
      st = hsfl_profile_builtin(profile.c_str(), &p);
    if (st != HSFL_OK) fail(st);
    return p;
  }

  hsfl_topology* open_topology() const {
    hsfl_topology* t = nullptr;
    hsfl_status st;
    if (!topology_path.empty())
      st = hsfl_topology_load(topology_path.c_str(), &t);
    else if (paper_scenario)
      st = hsfl_topology_paper_scenario(seed, &t);
    else {
      std::cerr << "error: no topology given (use --topology or --paper-scenario)\n";
      std::exit(kExitConfig);
    }
    if (st != HSFL_OK) fail(st);
    return t;
  }

  json convergence_json() const {
    return {{"beta", beta}, {"gamma", gamma}, {"epsilon", epsilon}, {"vartheta", vartheta}};
  }

  json options_json() const {
    return {{"newton_tol", newton_tol},
            {"newton_max_iter", newton_max_iter},
            {"interval_cap", interval_cap},
            {"dinkelbach_tol", dinkelbach_tol},
            {"dinkelbach_max_iter", dinkelbach_max_iter},
            {"bcd_epsilon", bcd_epsilon},
            {"bcd_max_outer", bcd_max_outer},
            {"method", method},
            {"threads", threads}};
  }
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      std::cerr << "error: cannot parse " << what << " list: " << text << "\n";
      std::exit(kExitConfig);
    }
  }
  if (out.empty()) {
    std::cerr << "error: empty " << what << " list\n";
    std::exit(kExitConfig);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      std::cerr << "error: cannot parse " << what << " list: " << text << "\n";
      std::exit(kExitConfig);
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(kExitConfig);
  }
  out << contents;
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

std::string fmt_double(double v) { return json(v).dump(); }

// Append one row to a CSV, creating it with a header and config-hash comment.
void append_csv_row(const fs::path& path, const std::string& header, const json& config,
                    const std::string& row) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(kExitConfig);
  }
  if (fresh) out << "# config_hash=" << hex64(fnv1a64(config.dump())) << "\n" << header << "\n";
  out << row << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical split federated learning planner and simulator"};
  app.require_subcommand(1);

  Context ctx;

  std::string cut_text, intervals_text;
  long long rounds = 1;
  std::string csv_path;

  // latency
  auto* latency = app.add_subcommand("latency", "per-round and total latency of a plan");
  ctx.add_options(latency);
  latency->add_option("--cut", cut_text, "cut layers, e.g. 3,8")->required();
  latency->add_option("--intervals", intervals_text, "aggregation intervals, e.g. 140,20")
      ->required();
  latency->add_option("--rounds", rounds, "training rounds for the total");
  latency->add_option("--csv", csv_path, "CSV file to append a summary row to");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "objective, bound tails, and margins of a plan");
  ctx.add_options(evaluate);
  evaluate->add_option("--cut", cut_text, "cut layers")->required();
  evaluate->add_option("--intervals", intervals_text, "aggregation intervals")->required();

  // optimize
  std::string fix_cut_text, fix_intervals_text, baseline_kind;
  std::string init_cut_text, init_intervals_text;
  auto* optimize = app.add_subcommand("optimize", "solve for the plan (BCD, or one block fixed)");
  ctx.add_options(optimize);
  optimize->add_option("--fix-cut", fix_cut_text, "solve intervals only, for this cut");
  optimize->add_option("--fix-intervals", fix_intervals_text,
                       "solve the cut only, for these intervals");
  optimize->add_option("--baseline", baseline_kind, "emit a random baseline plan: rma or rms");
  optimize->add_option("--init-cut", init_cut_text, "BCD starting cut");
  optimize->add_option("--init-intervals", init_intervals_text, "BCD starting intervals");

  // train
  int clients = 8, tiers = 3, snapshot_every = 0, classes = 2, samples_per_client = 80;
  int train_rounds = 100;
  double lr = 0.05, spread = 2.5;
  std::string entities_text, partition = "iid", arch_dims_text, activation = "tanh";
  std::uint64_t data_seed = 0;
  bool data_seed_set = false;
  std::string trace_csv = "train_trace.csv", summary_json_path = "train_summary.json";
  auto* train = app.add_subcommand("train", "run desk-scale split training");
  ctx.add_options(train);
  train->add_option("--clients", clients, "number of client devices");
  train->add_option("--tiers", tiers, "number of tiers");
  train->add_option("--entities", entities_text, "entities per tier, e.g. 20,5,1");
  train->add_option("--cut", cut_text, "cut layers");
  train->add_option("--intervals", intervals_text, "aggregation intervals");
  train->add_option("--rounds", train_rounds, "training rounds");
  train->add_option("--lr", lr, "SGD learning rate");
  train->add_option("--partition", partition, "iid or shard");
  train->add_option("--snapshot-every", snapshot_every, "gradient snapshot period (0 = off)");
  train->add_option("--classes", classes, "synthetic dataset classes");
  train->add_option("--samples-per-client", samples_per_client, "synthetic samples per client");
  train->add_option("--spread", spread, "class mean separation");
  train->add_option("--data-seed", data_seed, "dataset seed (defaults to --seed)")
      ->each([&](const std::string&) { data_seed_set = true; });
  train->add_option("--arch-dims", arch_dims_text, "dense layer dims, e.g. 16,32,64,32,2");
  train->add_option("--activation", activation, "tanh, relu, or identity");
  train->add_option("--trace-csv", trace_csv, "per-round trace output file");
  train->add_option("--summary-json", summary_json_path, "summary output file");

  // estimate-params
  std::string fragment_out = "param_fragment.json", merge_profile, merged_out;
  auto* estimate = app.add_subcommand(
      "estimate-params", "estimate per-layer gradient bounds and smoothness from a training run");
  ctx.add_options(estimate);
  estimate->add_option("--clients", clients, "number of client devices");
  estimate->add_option("--tiers", tiers, "number of tiers");
  estimate->add_option("--entities", entities_text, "entities per tier");
  estimate->add_option("--cut", cut_text, "cut layers");
  estimate->add_option("--intervals", intervals_text, "aggregation intervals");
  estimate->add_option("--rounds", train_rounds, "training rounds");
  estimate->add_option("--lr", lr, "SGD learning rate");
  estimate->add_option("--partition", partition, "iid or shard");
  estimate->add_option("--snapshot-every", snapshot_every, "gradient snapshot period");
  estimate->add_option("--classes", classes, "synthetic dataset classes");
  estimate->add_option("--samples-per-client", samples_per_client, "synthetic samples per client");
  estimate->add_option("--spread", spread, "class mean separation");
  estimate->add_option("--data-seed", data_seed, "dataset seed (defaults to --seed)")
      ->each([&](const std::string&) { data_seed_set = true; });
  estimate->add_option("--arch-dims", arch_dims_text, "dense layer dims");
  estimate->add_option("--activation", activation, "tanh, relu, or identity");
  estimate->add_option("--out", fragment_out, "fragment output file");
  estimate->add_option("--merge-profile", merge_profile,
                       "profile to merge the estimates into (name or path)");
  estimate->add_option("--merged-out", merged_out, "where to write the merged profile");

  // sweep
  std::string axis = "compute", coefficients_text = "0.25,0.5,1,2";
  auto* sweep = app.add_subcommand("sweep", "re-run the optimizer across scaled resources");
  ctx.add_options(sweep);
  sweep->add_option("--axis", axis, "compute or communication");
  sweep->add_option("--coefficients", coefficients_text, "scaling coefficients, e.g. 0.5,1,2");
  sweep->add_option("--csv", csv_path, "CSV output file (default sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  CLI::App* active = app.get_subcommands().front();
  ctx.load_config(active);

  if (active == latency) {
    ProfileGuard profile{ctx.open_profile()};
    TopologyGuard topo{ctx.open_topology()};
    const json req = {{"cut", parse_int_list(cut_text, "cut")},
                      {"intervals", parse_int_list(intervals_text, "intervals")},
                      {"batch", ctx.batch},
                      {"rounds", rounds}};
    StringGuard out;
    const hsfl_status st =
        hsfl_latency_report(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
    if (st != HSFL_OK) fail(st);
    std::cout << out.str() << "\n";
    if (!csv_path.empty()) {
      const json report = json::parse(out.str());
      std::string header = "cut,intervals,split_round_s";
      for (std::size_t m = 1; m < report["aggregation_s"].size() + 1; ++m)
        header += ",agg_tier_" + std::to_string(m) + "_s";
      header += ",total_s";
      std::string row = "\"" + cut_text + "\",\"" + intervals_text + "\"," +
                        fmt_double(report["split_round_s"].get<double>());
      for (const auto& v : report["aggregation_s"]) row += "," + fmt_double(v.get<double>());
      row += "," + fmt_double(report["total_s"].get<double>());
      append_csv_row(ctx.resolve_out(csv_path), header, req, row);
    }
    return kExitOk;
  }

  if (active == evaluate) {
    ProfileGuard profile{ctx.open_profile()};
    TopologyGuard topo{ctx.open_topology()};
    const json req = {{"cut", parse_int_list(cut_text, "cut")},
                      {"intervals", parse_int_list(intervals_text, "intervals")},
                      {"batch", ctx.batch},
                      {"convergence", ctx.convergence_json()}};
    StringGuard out;
    const hsfl_status st =
        hsfl_evaluate_plan(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
    if (st != HSFL_OK && st != HSFL_ERR_INFEASIBLE) fail(st);
    std::cout << out.str() << "\n";
    if (st == HSFL_ERR_INFEASIBLE) {
      std::cerr << "error: " << hsfl_last_error() << "\n";
      return kExitInfeasible;
    }
    return kExitOk;
  }

  if (active == optimize) {
    ProfileGuard profile{ctx.open_profile()};
    TopologyGuard topo{ctx.open_topology()};
    json req = {{"batch", ctx.batch},
                {"convergence", ctx.convergence_json()},
                {"options", ctx.options_json()}};
    StringGuard out;
    hsfl_status st;
    if (!baseline_kind.empty()) {
      req["kind"] = baseline_kind;
      req["seed"] = ctx.seed;
      if (!fix_cut_text.empty()) req["cut"] = parse_int_list(fix_cut_text, "cut");
      if (!fix_intervals_text.empty())
        req["intervals"] = parse_int_list(fix_intervals_text, "intervals");
      st = hsfl_random_baseline(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
      if (st != HSFL_OK) fail(st);
      std::cout << out.str() << "\n";
      return kExitOk;
    }
    if (!fix_cut_text.empty()) {
      req["cut"] = parse_int_list(fix_cut_text, "cut");
      st = hsfl_solve_ma(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
      if (st != HSFL_OK) fail(st);
      std::cout << out.str() << "\n";
      return kExitOk;
    }
    if (!fix_intervals_text.empty()) {
      req["intervals"] = parse_int_list(fix_intervals_text, "intervals");
      st = hsfl_solve_ms(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
      if (st != HSFL_OK) fail(st);
      std::cout << out.str() << "\n";
      return kExitOk;
    }
    if (!init_cut_text.empty()) req["init_cut"] = parse_int_list(init_cut_text, "init cut");
    if (!init_intervals_text.empty())
      req["init_intervals"] = parse_int_list(init_intervals_text, "init intervals");
    st = hsfl_run_bcd(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
    if (st != HSFL_OK) fail(st);
    const json trace = json::parse(out.str());
    std::cout << out.str() << "\n";
    const auto& fin = trace["final"];
    std::cout << "final: cut=" << fin["cut"].dump() << " intervals=" << fin["intervals"].dump()
              << " objective=" << fmt_double(fin["objective"].get<double>())
              << " predicted_rounds=" << fin["predicted_rounds"]
              << " predicted_total_latency_s="
              << fmt_double(fin["predicted_total_latency_s"].get<double>()) << "\n";
    return kExitOk;
  }

  if (active == train || active == estimate) {
    json req = {{"clients", clients},
                {"tiers", tiers},
                {"rounds", train_rounds},
                {"batch", ctx.batch},
                {"lr", lr},
                {"seed", ctx.seed},
                {"partition", partition},
                {"snapshot_every", snapshot_every},
                {"threads", ctx.threads},
                {"dataset",
                 {{"classes", classes},
                  {"samples_per_client", samples_per_client},
                  {"spread", spread},
                  {"data_seed", data_seed_set ? data_seed : ctx.seed}}}};
    if (!entities_text.empty()) req["entities"] = parse_int_list(entities_text, "entities");
    if (!cut_text.empty()) req["cut"] = parse_int_list(cut_text, "cut");
    if (!intervals_text.empty())
      req["intervals"] = parse_int_list(intervals_text, "intervals");
    json arch = json::object();
    if (!arch_dims_text.empty()) arch["dims"] = parse_int_list(arch_dims_text, "arch dims");
    arch["activation"] = activation;
    req["arch"] = arch;

    if (active == train) {
      StringGuard csv, summary;
      const hsfl_status st = hsfl_train_run(req.dump().c_str(), &csv.ptr, &summary.ptr);
      if (st != HSFL_OK) fail(st);
      write_file(ctx.resolve_out(trace_csv), csv.str());
      write_file(ctx.resolve_out(summary_json_path), summary.str() + "\n");
      std::cout << summary.str() << "\n";
      return kExitOk;
    }

    StringGuard fragment;
    const hsfl_status st = hsfl_estimate_params_run(req.dump().c_str(), &fragment.ptr);
    if (st != HSFL_OK) fail(st);
    write_file(ctx.resolve_out(fragment_out), fragment.str() + "\n");
    std::cout << fragment.str() << "\n";
    if (!merge_profile.empty()) {
      if (merged_out.empty()) {
        std::cerr << "error: --merge-profile needs --merged-out\n";
        return kExitConfig;
      }
      hsfl_profile* base = nullptr;
      hsfl_status mst = fs::exists(merge_profile)
                            ? hsfl_profile_load(merge_profile.c_str(), &base)
                            : hsfl_profile_builtin(merge_profile.c_str(), &base);
      if (mst != HSFL_OK) fail(mst);
      ProfileGuard base_guard{base};
      ProfileGuard merged;
      mst = hsfl_profile_merge_fragment(base, fragment.str().c_str(), &merged.ptr);
      if (mst != HSFL_OK) fail(mst);
      StringGuard text;
      mst = hsfl_profile_serialize(merged.ptr, &text.ptr);
      if (mst != HSFL_OK) fail(mst);
      write_file(ctx.resolve_out(merged_out), text.str());
    }
    return kExitOk;
  }

  if (active == sweep) {
    ProfileGuard profile{ctx.open_profile()};
    TopologyGuard topo{ctx.open_topology()};
    const json req = {{"axis", axis},
                      {"coefficients", parse_double_list(coefficients_text, "coefficients")},
                      {"batch", ctx.batch},
                      {"convergence", ctx.convergence_json()},
                      {"options", ctx.options_json()}};
    StringGuard out;
    const hsfl_status st = hsfl_sweep(profile.ptr, topo.ptr, req.dump().c_str(), &out.ptr);
    if (st != HSFL_OK) fail(st);
    const std::string path = csv_path.empty() ? "sweep.csv" : csv_path;
    write_file(ctx.resolve_out(path), out.str());
    std::cout << out.str();
    return kExitOk;
  }

  return kExitConfig;
}
