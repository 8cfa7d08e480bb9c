#include "hsfl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hsfl/errors.hpp"
#include "hsfl/rng.hpp"

namespace hsfl {

using nlohmann::json;

namespace {

constexpr const char* kFileHeader =
    "// hsfl topology\n"
    "// tiers are listed bottom-up: tier 0 = client devices, last tier = top.\n"
    "// rates in bits/second, compute in FLOPs/second, memory in bytes\n"
    "// (memory omitted = unconstrained). Entities without per_client_* arrays\n"
    "// split compute and inter-tier links evenly over hosted sub-models.\n";

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Topology::Topology(std::string name, std::vector<std::vector<EntitySpec>> tiers)
    : name_(std::move(name)), tiers_(std::move(tiers)) {
  if (tiers_.empty()) throw ConfigError("topology has no tiers");
  int max_client = -1;
  for (const auto& tier : tiers_)
    for (const auto& e : tier)
      for (int c : e.clients) {
        if (c < 0) throw ConfigError("negative client id in topology");
        max_client = std::max(max_client, c);
      }
  num_clients_ = max_client + 1;
  derive_tables();
}

void Topology::derive_tables() {
  const int M = num_tiers();
  entity_of_.assign(static_cast<std::size_t>(M), std::vector<int>(static_cast<std::size_t>(num_clients_), -1));
  compute_per_client_.assign(static_cast<std::size_t>(M), std::vector<double>(static_cast<std::size_t>(num_clients_), kNaN));
  uplink_per_client_ = compute_per_client_;
  downlink_per_client_ = compute_per_client_;
  for (int m = 0; m < M; ++m) {
    const auto& tier = tiers_[static_cast<std::size_t>(m)];
    for (std::size_t j = 0; j < tier.size(); ++j) {
      const auto& e = tier[j];
      const auto count = static_cast<double>(e.clients.size());
      for (std::size_t k = 0; k < e.clients.size(); ++k) {
        const auto c = static_cast<std::size_t>(e.clients[k]);
        if (entity_of_[static_cast<std::size_t>(m)][c] != -1) continue;  // duplicate, reported by validate()
        entity_of_[static_cast<std::size_t>(m)][c] = static_cast<int>(j);
        compute_per_client_[static_cast<std::size_t>(m)][c] =
            k < e.per_client_compute.size() ? e.per_client_compute[k] : e.compute_flops / count;
        uplink_per_client_[static_cast<std::size_t>(m)][c] =
            k < e.per_client_uplink.size() ? e.per_client_uplink[k] : e.uplink_next_bps / count;
        downlink_per_client_[static_cast<std::size_t>(m)][c] =
            k < e.per_client_downlink.size() ? e.per_client_downlink[k] : e.downlink_next_bps / count;
      }
    }
  }
}

int Topology::entities_in_tier(int tier) const {
  if (tier < 0 || tier >= num_tiers()) throw InvalidArgumentError("tier index out of range");
  return static_cast<int>(tiers_[static_cast<std::size_t>(tier)].size());
}

const EntitySpec& Topology::entity(int tier, int index) const {
  if (index < 0 || index >= entities_in_tier(tier))
    throw InvalidArgumentError("entity index out of range");
  return tiers_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(index)];
}

int Topology::entity_of(int tier, int client) const {
  if (tier < 0 || tier >= num_tiers() || client < 0 || client >= num_clients_)
    throw InvalidArgumentError("entity_of: index out of range");
  return entity_of_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(client)];
}

int Topology::hosted_count(int tier, int ent) const {
  return static_cast<int>(entity(tier, ent).clients.size());
}

const std::vector<int>& Topology::clients_of(int tier, int ent) const {
  return entity(tier, ent).clients;
}

double Topology::compute_flops(int tier, int client) const {
  if (tier < 0 || tier >= num_tiers() || client < 0 || client >= num_clients_)
    throw InvalidArgumentError("compute_flops: index out of range");
  return compute_per_client_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(client)];
}

double Topology::uplink_activation_bps(int tier, int client) const {
  if (tier < 0 || tier >= num_tiers() - 1 || client < 0 || client >= num_clients_)
    throw InvalidArgumentError("uplink_activation_bps: index out of range");
  return uplink_per_client_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(client)];
}

double Topology::downlink_grad_bps(int tier, int client) const {
  if (tier < 0 || tier >= num_tiers() - 1 || client < 0 || client >= num_clients_)
    throw InvalidArgumentError("downlink_grad_bps: index out of range");
  return downlink_per_client_[static_cast<std::size_t>(tier)][static_cast<std::size_t>(client)];
}

double Topology::fed_uplink_bps(int tier, int ent) const {
  if (tier >= num_tiers() - 1) throw InvalidArgumentError("fed links are defined below the top tier");
  return entity(tier, ent).fed_uplink_bps;
}

double Topology::fed_downlink_bps(int tier, int ent) const {
  if (tier >= num_tiers() - 1) throw InvalidArgumentError("fed links are defined below the top tier");
  return entity(tier, ent).fed_downlink_bps;
}

double Topology::memory_bytes(int tier, int ent) const { return entity(tier, ent).memory_bytes; }

std::vector<std::string> Topology::validate() const {
  std::vector<std::string> diags;
  const int M = num_tiers();
  if (M < 2) diags.push_back("topology must have at least 2 tiers");
  if (M >= 1 && tiers_.back().size() != 1) diags.push_back("top tier must have one entity");
  if (num_clients_ == 0) {
    diags.push_back("topology hosts no clients");
    return diags;
  }
  for (int m = 0; m < M; ++m) {
    const auto& tier = tiers_[static_cast<std::size_t>(m)];
    std::vector<int> seen(static_cast<std::size_t>(num_clients_), 0);
    for (std::size_t j = 0; j < tier.size(); ++j) {
      const auto& e = tier[j];
      if (e.clients.empty())
        diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " hosts no clients");
      if (!std::is_sorted(e.clients.begin(), e.clients.end()))
        diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " client list not ascending");
      for (int c : e.clients) ++seen[static_cast<std::size_t>(c)];
      if (m == 0 && e.clients.size() != 1)
        diags.push_back("tier 0 entity " + std::to_string(j) + " must host exactly one client device");
      const bool needs_links = m < M - 1;
      if (!(e.compute_flops > 0.0) && e.per_client_compute.empty())
        diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " compute must be positive");
      if (needs_links) {
        if (!(e.uplink_next_bps > 0.0) && e.per_client_uplink.empty())
          diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " uplink rate must be positive");
        if (!(e.downlink_next_bps > 0.0) && e.per_client_downlink.empty())
          diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " downlink rate must be positive");
        if (!(e.fed_uplink_bps > 0.0))
          diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " fed uplink rate must be positive");
        if (!(e.fed_downlink_bps > 0.0))
          diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " fed downlink rate must be positive");
      }
      if (!(e.memory_bytes > 0.0))
        diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) + " memory budget must be positive");
      for (const auto* arr : {&e.per_client_compute, &e.per_client_uplink, &e.per_client_downlink})
        if (!arr->empty() && arr->size() != e.clients.size())
          diags.push_back("tier " + std::to_string(m) + " entity " + std::to_string(j) +
                          " per-client array length mismatch");
    }
    for (int c = 0; c < num_clients_; ++c) {
      if (seen[static_cast<std::size_t>(c)] != 1)
        diags.push_back("partition violation: tier " + std::to_string(m) + " hosts client " +
                        std::to_string(c) + " " + std::to_string(seen[static_cast<std::size_t>(c)]) + " times");
    }
  }
  // Nesting: clients sharing an entity must stay together one tier up.
  for (int m = 0; m + 1 < M; ++m) {
    for (int c = 0; c < num_clients_; ++c) {
      const int ent = entity_of_[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)];
      if (ent < 0) continue;
      const auto& mates = tiers_[static_cast<std::size_t>(m)][static_cast<std::size_t>(ent)].clients;
      const int up = entity_of_[static_cast<std::size_t>(m + 1)][static_cast<std::size_t>(c)];
      for (int other : mates) {
        if (up >= 0 && entity_of_[static_cast<std::size_t>(m + 1)][static_cast<std::size_t>(other)] != up) {
          diags.push_back("association not nested: clients " + std::to_string(c) + " and " +
                          std::to_string(other) + " share tier " + std::to_string(m) +
                          " but split at tier " + std::to_string(m + 1));
          break;
        }
      }
    }
  }
  return diags;
}

Topology Topology::scaled(ScaleAxis axis, double coefficient) const {
  if (!(coefficient > 0.0)) throw InvalidArgumentError("scaling coefficient must be positive");
  auto tiers = tiers_;
  for (auto& tier : tiers) {
    for (auto& e : tier) {
      if (axis == ScaleAxis::compute) {
        e.compute_flops *= coefficient;
        for (auto& v : e.per_client_compute) v *= coefficient;
      } else {
        e.uplink_next_bps *= coefficient;
        e.downlink_next_bps *= coefficient;
        e.fed_uplink_bps *= coefficient;
        e.fed_downlink_bps *= coefficient;
        for (auto& v : e.per_client_uplink) v *= coefficient;
        for (auto& v : e.per_client_downlink) v *= coefficient;
      }
    }
  }
  return Topology(name_, std::move(tiers));
}

std::string Topology::serialize() const {
  json jtiers = json::array();
  for (const auto& tier : tiers_) {
    json jents = json::array();
    for (const auto& e : tier) {
      json je;
      je["clients"] = e.clients;
      je["compute_flops"] = e.compute_flops;
      if (e.uplink_next_bps > 0.0) je["uplink_next_bps"] = e.uplink_next_bps;
      if (e.downlink_next_bps > 0.0) je["downlink_next_bps"] = e.downlink_next_bps;
      if (e.fed_uplink_bps > 0.0) je["fed_uplink_bps"] = e.fed_uplink_bps;
      if (e.fed_downlink_bps > 0.0) je["fed_downlink_bps"] = e.fed_downlink_bps;
      if (std::isfinite(e.memory_bytes)) je["memory_bytes"] = e.memory_bytes;
      if (!e.per_client_compute.empty()) je["per_client_compute"] = e.per_client_compute;
      if (!e.per_client_uplink.empty()) je["per_client_uplink"] = e.per_client_uplink;
      if (!e.per_client_downlink.empty()) je["per_client_downlink"] = e.per_client_downlink;
      jents.push_back(std::move(je));
    }
    jtiers.push_back({{"entities", std::move(jents)}});
  }
  const json doc = {{"name", name_}, {"tiers", std::move(jtiers)}};
  return std::string(kFileHeader) + doc.dump(2) + "\n";
}

Topology Topology::parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology parse error: ") + e.what());
  }
  try {
    std::vector<std::vector<EntitySpec>> tiers;
    for (const auto& jt : doc.at("tiers")) {
      std::vector<EntitySpec> ents;
      for (const auto& je : jt.at("entities")) {
        EntitySpec e;
        e.clients = je.at("clients").get<std::vector<int>>();
        e.compute_flops = je.value("compute_flops", 0.0);
        e.uplink_next_bps = je.value("uplink_next_bps", 0.0);
        e.downlink_next_bps = je.value("downlink_next_bps", 0.0);
        e.fed_uplink_bps = je.value("fed_uplink_bps", 0.0);
        e.fed_downlink_bps = je.value("fed_downlink_bps", 0.0);
        e.memory_bytes = je.value("memory_bytes", EntitySpec::unconstrained_memory);
        e.per_client_compute = je.value("per_client_compute", std::vector<double>{});
        e.per_client_uplink = je.value("per_client_uplink", std::vector<double>{});
        e.per_client_downlink = je.value("per_client_downlink", std::vector<double>{});
        ents.push_back(std::move(e));
      }
      tiers.push_back(std::move(ents));
    }
    return Topology(doc.at("name").get<std::string>(), std::move(tiers));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology schema error: ") + e.what());
  }
}

Topology Topology::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open topology file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Topology topo = parse(buf.str());
  const auto diags = topo.validate();
  if (!diags.empty()) {
    std::string msg = "invalid topology " + path + ":";
    for (const auto& d : diags) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  return topo;
}

void Topology::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write topology file: " + path);
  out << serialize();
}

Topology paper_scenario_topology(std::uint64_t seed) {
  Rng rng(seed);
  constexpr int kDevices = 20;
  constexpr int kEdges = 5;
  constexpr double kTera = 1e12;
  constexpr double kMega = 1e6;

  std::vector<EntitySpec> devices;
  for (int n = 0; n < kDevices; ++n) {
    EntitySpec e;
    e.clients = {n};
    e.compute_flops = rng.uniform(0.4, 0.6) * kTera;
    e.uplink_next_bps = rng.uniform(75.0, 80.0) * kMega;
    e.fed_uplink_bps = rng.uniform(75.0, 80.0) * kMega;
    e.downlink_next_bps = 370.0 * kMega;
    e.fed_downlink_bps = 370.0 * kMega;
    devices.push_back(std::move(e));
  }
  std::vector<EntitySpec> edges;
  for (int j = 0; j < kEdges; ++j) {
    EntitySpec e;
    for (int k = 0; k < 4; ++k) e.clients.push_back(4 * j + k);
    e.compute_flops = 5.0 * kTera;
    e.uplink_next_bps = rng.uniform(370.0, 400.0) * kMega;
    e.downlink_next_bps = rng.uniform(370.0, 400.0) * kMega;
    e.fed_uplink_bps = rng.uniform(370.0, 400.0) * kMega;
    e.fed_downlink_bps = rng.uniform(370.0, 400.0) * kMega;
    edges.push_back(std::move(e));
  }
  EntitySpec cloud;
  for (int n = 0; n < kDevices; ++n) cloud.clients.push_back(n);
  cloud.compute_flops = 50.0 * kTera;

  return Topology("paper-scenario-seed" + std::to_string(seed),
                  {std::move(devices), std::move(edges), {std::move(cloud)}});
}

Topology desk_topology(const std::vector<int>& entities_per_tier) {
  if (entities_per_tier.size() < 2) throw ConfigError("desk topology needs at least 2 tiers");
  const int N = entities_per_tier.front();
  if (entities_per_tier.back() != 1) throw ConfigError("desk topology: top tier must have 1 entity");
  std::vector<std::vector<EntitySpec>> tiers;
  for (std::size_t m = 0; m < entities_per_tier.size(); ++m) {
    const int J = entities_per_tier[m];
    if (J < 1 || N % J != 0)
      throw ConfigError("desk topology: entity count " + std::to_string(J) +
                        " must divide client count " + std::to_string(N));
    if (m > 0 && entities_per_tier[m - 1] % J != 0)
      throw ConfigError("desk topology: entity counts must be successively divisible");
    const int group = N / J;
    std::vector<EntitySpec> ents;
    for (int j = 0; j < J; ++j) {
      EntitySpec e;
      for (int k = 0; k < group; ++k) e.clients.push_back(j * group + k);
      e.compute_flops = 1e12;
      e.uplink_next_bps = 1e8;
      e.downlink_next_bps = 1e8;
      e.fed_uplink_bps = 1e8;
      e.fed_downlink_bps = 1e8;
      ents.push_back(std::move(e));
    }
    tiers.push_back(std::move(ents));
  }
  std::string name = "desk";
  for (int j : entities_per_tier) name += "-" + std::to_string(j);
  return Topology(std::move(name), std::move(tiers));
}

}  // namespace hsfl
