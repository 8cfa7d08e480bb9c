#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace hsfl {

// Raw description of one computing entity. Rates are bits per second, memory
// is bytes. When the per-client arrays are empty the entity splits its compute
// and inter-tier links evenly across hosted sub-models; fed-server links and
// memory always stay per-entity because an entity moves one aggregated
// sub-model regardless of how many clients it hosts.
struct EntitySpec {
  std::vector<int> clients;         // hosted client ids, ascending
  double compute_flops = 0.0;       // FLOPs/s available on this entity
  double uplink_next_bps = 0.0;     // activations toward the tier above
  double downlink_next_bps = 0.0;   // activation gradients from the tier above
  double fed_uplink_bps = 0.0;      // entity -> fed server
  double fed_downlink_bps = 0.0;    // fed server -> entity
  double memory_bytes = unconstrained_memory;

  // Optional explicit per-sub-model allocations, aligned with `clients`.
  std::vector<double> per_client_compute;
  std::vector<double> per_client_uplink;
  std::vector<double> per_client_downlink;

  static constexpr double unconstrained_memory = std::numeric_limits<double>::infinity();
};

enum class ScaleAxis { compute, communication };

// An M-tier computing hierarchy. Tier 0 holds the client devices (one entity
// per client), tier M-1 is the single top entity.
class Topology {
public:
  Topology(std::string name, std::vector<std::vector<EntitySpec>> tiers);

  const std::string& name() const { return name_; }
  int num_tiers() const { return static_cast<int>(tiers_.size()); }
  int num_clients() const { return num_clients_; }
  int entities_in_tier(int tier) const;
  const EntitySpec& entity(int tier, int index) const;

  // Association lookups (tier in [0, M), client in [0, N)).
  int entity_of(int tier, int client) const;
  int hosted_count(int tier, int entity) const;
  const std::vector<int>& clients_of(int tier, int entity) const;

  // Per-sub-model capacities, already divided per the allocation policy.
  double compute_flops(int tier, int client) const;
  double uplink_activation_bps(int tier, int client) const;  // tier < M-1
  double downlink_grad_bps(int tier, int client) const;      // tier < M-1
  double fed_uplink_bps(int tier, int entity) const;         // tier < M-1
  double fed_downlink_bps(int tier, int entity) const;       // tier < M-1
  double memory_bytes(int tier, int entity) const;

  // Structural checks; empty list means valid.
  std::vector<std::string> validate() const;

  Topology scaled(ScaleAxis axis, double coefficient) const;

  std::string serialize() const;
  static Topology parse(const std::string& text);
  static Topology load(const std::string& path);  // parses and validates
  void save(const std::string& path) const;

private:
  void derive_tables();

  std::string name_;
  std::vector<std::vector<EntitySpec>> tiers_;
  int num_clients_ = 0;
  // Derived lookup tables, [tier][client]; -1 / NaN for unhosted clients.
  std::vector<std::vector<int>> entity_of_;
  std::vector<std::vector<double>> compute_per_client_;
  std::vector<std::vector<double>> uplink_per_client_;
  std::vector<std::vector<double>> downlink_per_client_;
};

// The shipped three-tier evaluation scenario: 20 devices under 5 edge servers
// under one cloud server, with seeded draws for per-device and per-server
// capacities.
Topology paper_scenario_topology(std::uint64_t seed);

// Small tree topology for the desk-scale trainer: `entities_per_tier` must
// start with the client count and end with 1, with each tier's group size
// dividing the next. Clients are grouped into contiguous blocks. Rates and
// budgets are nominal constants; the trainer only needs the association.
Topology desk_topology(const std::vector<int>& entities_per_tier);

}  // namespace hsfl
