/* C API for the HSFL planning library.
 *
 * Handles are opaque; every function returns a status code and reports
 * details through hsfl_last_error(). Structured inputs and outputs cross the
 * boundary as JSON text; returned strings are heap-allocated and must be
 * released with hsfl_string_free().
 */
#ifndef HSFL_C_H
#define HSFL_C_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct hsfl_profile hsfl_profile;
typedef struct hsfl_topology hsfl_topology;

typedef enum hsfl_status {
  HSFL_OK = 0,
  HSFL_ERR_CONFIG = 2,          /* parse/validation problems */
  HSFL_ERR_INFEASIBLE = 3,      /* no plan satisfies the constraints */
  HSFL_ERR_NONCONVERGENCE = 4,  /* a solver ran out of iterations */
  HSFL_ERR_INVALID_ARGUMENT = 5,
  HSFL_ERR_IO = 6,
  HSFL_ERR_INTERNAL = 7
} hsfl_status;

const char* hsfl_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* hsfl_last_error(void);

void hsfl_string_free(char* s);

/* ---- model profiles ---- */

hsfl_status hsfl_profile_load(const char* path, hsfl_profile** out);
hsfl_status hsfl_profile_parse(const char* text, hsfl_profile** out);
/* Shipped profiles: "vgg16", "tinymlp". */
hsfl_status hsfl_profile_builtin(const char* name, hsfl_profile** out);
hsfl_status hsfl_profile_serialize(const hsfl_profile* profile, char** out_text);
int hsfl_profile_num_layers(const hsfl_profile* profile);
void hsfl_profile_free(hsfl_profile* profile);

/* ---- topologies ---- */

hsfl_status hsfl_topology_load(const char* path, hsfl_topology** out);
hsfl_status hsfl_topology_parse(const char* text, hsfl_topology** out);
hsfl_status hsfl_topology_paper_scenario(uint64_t seed, hsfl_topology** out);
hsfl_status hsfl_topology_serialize(const hsfl_topology* topo, char** out_text);
/* JSON array of diagnostic strings; empty array means valid. */
hsfl_status hsfl_topology_validate(const hsfl_topology* topo, char** out_json);
/* axis: "compute" or "communication". */
hsfl_status hsfl_topology_scale(const hsfl_topology* topo, const char* axis, double coefficient,
                                hsfl_topology** out);
int hsfl_topology_num_tiers(const hsfl_topology* topo);
int hsfl_topology_num_clients(const hsfl_topology* topo);
void hsfl_topology_free(hsfl_topology* topo);

/* ---- planning and evaluation ----
 *
 * Request objects share these fields:
 *   "cut": [int...]            cut layers, one per tier boundary
 *   "intervals": [int...]      aggregation intervals for the bottom tiers
 *   "batch": int
 *   "rounds": int              (latency report only)
 *   "convergence": {"beta", "gamma", "epsilon", "vartheta"}
 *   "options": solver options, all optional:
 *       newton_tol, newton_max_iter, interval_cap,
 *       dinkelbach_tol, dinkelbach_max_iter,
 *       bcd_epsilon, bcd_max_outer, method ("enumeration"|"dinkelbach"),
 *       threads
 */

hsfl_status hsfl_latency_report(const hsfl_profile* profile, const hsfl_topology* topo,
                                const char* request_json, char** out_json);

/* On HSFL_ERR_INFEASIBLE the report is still produced and carries the
 * violated margins. */
hsfl_status hsfl_evaluate_plan(const hsfl_profile* profile, const hsfl_topology* topo,
                               const char* request_json, char** out_json);

hsfl_status hsfl_solve_ma(const hsfl_profile* profile, const hsfl_topology* topo,
                          const char* request_json, char** out_json);
hsfl_status hsfl_solve_ms(const hsfl_profile* profile, const hsfl_topology* topo,
                          const char* request_json, char** out_json);
hsfl_status hsfl_run_bcd(const hsfl_profile* profile, const hsfl_topology* topo,
                         const char* request_json, char** out_json);

/* request: {"kind": "rma"|"rms", "seed": u64, "lo": int, "hi": int,
 *           plus "cut" (rma) or "intervals" (rms) for the fixed block}. */
hsfl_status hsfl_random_baseline(const hsfl_profile* profile, const hsfl_topology* topo,
                                 const char* request_json, char** out_json);

/* request: {"axis": "compute"|"communication", "coefficients": [double...],
 *           "batch", "convergence", "options"}; returns CSV text. Infeasible
 * points are recorded with an "infeasible" marker and the sweep continues. */
hsfl_status hsfl_sweep(const hsfl_profile* profile, const hsfl_topology* topo,
                       const char* request_json, char** out_csv);

/* ---- desk-scale training ----
 *
 * request: {"clients", "entities": [J1..JM], "arch": {"dims": [...],
 *           "activation": "tanh"|"relu"|"identity"}, "cut", "intervals",
 *           "rounds", "batch", "lr", "seed", "partition": "iid"|"shard",
 *           "dataset": {"classes", "samples_per_client", "spread",
 *           "data_seed"}, "snapshot_every", "threads"}.
 * Emits the per-round trace as CSV and a summary as JSON.
 */
hsfl_status hsfl_train_run(const char* request_json, char** out_trace_csv,
                           char** out_summary_json);

/* Same request shape; runs with gradient snapshots and emits a profile
 * fragment with per-layer gradient statistics and a smoothness estimate. */
hsfl_status hsfl_estimate_params_run(const char* request_json, char** out_fragment_json);

/* Replaces the per-layer gradient statistics of a profile with the ones from
 * an estimate-params fragment (layer counts must match). */
hsfl_status hsfl_profile_merge_fragment(const hsfl_profile* profile, const char* fragment_json,
                                        hsfl_profile** out);

#ifdef __cplusplus
}
#endif

#endif /* HSFL_C_H */
