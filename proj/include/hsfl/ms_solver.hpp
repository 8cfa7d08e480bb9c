#pragma once

#include <vector>

#include "hsfl/convergence.hpp"
#include "hsfl/latency.hpp"
#include "hsfl/model_profile.hpp"
#include "hsfl/plan.hpp"
#include "hsfl/topology.hpp"

namespace hsfl {

enum class MsMethod { enumeration, dinkelbach };

struct MsOptions {
  double dinkelbach_tol = 1e-9;
  int dinkelbach_max_iter = 100;
  int threads = 1;
};

// All strictly increasing cut vectors for an L-layer model over M tiers,
// in lexicographic order; C(L-1, M-1) of them.
std::vector<CutVector> enumerate_cuts(int num_layers, int num_tiers);

// Memory check for one entity: hosted sub-model replicas (activations and
// activation gradients scale with the batch) must fit strictly below the
// entity budget.
bool memory_feasible(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     int batch, int tier, int entity);

// All entities of all bottom tiers.
bool memory_feasible(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     int batch);

// Tight values of the auxiliary latencies: the binding client pipeline and
// the per-tier binding entity transfers.
struct TightAuxiliaries {
  double round_latency = 0.0;    // slowest client pipeline
  std::vector<double> upload;    // per bottom tier, max over entities
  std::vector<double> download;  // per bottom tier, max over entities
};

TightAuxiliaries tight_auxiliaries(const ModelProfile& profile, const Topology& topo,
                                   const CutVector& cut, int batch);

struct MsSolution {
  CutVector cut;
  double objective = 0.0;
  TightAuxiliaries tight;
  int feasible_count = 0;  // cuts passing ordering and memory constraints
  MsMethod method = MsMethod::enumeration;
  int dinkelbach_iterations = 0;
};

// Optimal cut for fixed intervals. Enumeration is the ground truth;
// the Dinkelbach iteration runs on the same feasible set and must agree.
MsSolution solve_ms(const ConvergenceParams& params, const ModelProfile& profile,
                    const Topology& topo, const AggSchedule& sched, int batch,
                    MsMethod method = MsMethod::enumeration, const MsOptions& opts = {});

}  // namespace hsfl
