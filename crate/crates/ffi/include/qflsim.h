#ifndef QFLSIM_H
#define QFLSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum QflStatus {
  QFL_STATUS_OK = 0,
  QFL_STATUS_NULL_POINTER = 1,
  QFL_STATUS_INVALID_ARGUMENT = 2,
  QFL_STATUS_INVALID_CONFIG = 3,
  QFL_STATUS_DIMENSION = 4,
  QFL_STATUS_STRUCTURAL = 5,
  QFL_STATUS_PARSE = 6,
  QFL_STATUS_IO = 7,
  QFL_STATUS_RUNTIME = 8,
  QFL_STATUS_BUFFER_TOO_SMALL = 9,
  QFL_STATUS_FINISHED = 10,
  QFL_STATUS_PANIC = 11,
} QflStatus;

// Opaque variational classifier: layered ansatz plus class mapping.
typedef struct QflCircuit QflCircuit;

// Opaque simulation handle.
typedef struct QflSimulation QflSimulation;

// Metrics of one completed round. `mean_client_loss` is NaN when no local
// epochs ran.
typedef struct QflRoundMetrics {
  size_t round;
  double test_loss;
  double test_accuracy;
  double mean_client_loss;
  uint64_t wall_time_ms;
} QflRoundMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *qfl_last_error(void);

// Static NUL-terminated version string.
const char *qfl_version(void);

// Sets up a simulation from a JSON config. `data_dir` may be NULL to use
// the default data directory.
//
// # Safety
// `config_json` must be a NUL-terminated string, `data_dir` NULL or
// NUL-terminated, `out` a valid pointer.
enum QflStatus qfl_simulation_new(const char *config_json,
                                  const char *data_dir,
                                  struct QflSimulation **out);

// Runs one round. Returns `Finished` once every configured round ran.
//
// # Safety
// `sim` must come from [`qfl_simulation_new`]; `out` may be NULL.
enum QflStatus qfl_simulation_step(struct QflSimulation *sim, struct QflRoundMetrics *out);

// Runs all remaining rounds.
//
// # Safety
// `sim` must come from [`qfl_simulation_new`].
enum QflStatus qfl_simulation_run(struct QflSimulation *sim);

// # Safety
// `sim` must come from [`qfl_simulation_new`]; `out` must be valid.
enum QflStatus qfl_simulation_rounds_completed(const struct QflSimulation *sim, size_t *out);

// # Safety
// `sim` must come from [`qfl_simulation_new`]; `out` must be valid.
enum QflStatus qfl_simulation_num_parameters(const struct QflSimulation *sim, size_t *out);

// Copies the global parameters into `buf` (length `len`).
//
// # Safety
// `sim` must come from [`qfl_simulation_new`]; `buf` must hold `len` doubles.
enum QflStatus qfl_simulation_parameters(const struct QflSimulation *sim, double *buf, size_t len);

// Writes the metrics table as NUL-terminated CSV. `required` receives
// the size including the NUL; pass `buf = NULL` to query it.
//
// # Safety
// `sim` must come from [`qfl_simulation_new`]; `buf` NULL or holding
// `len` bytes; `required` valid.
enum QflStatus qfl_simulation_metrics_csv(const struct QflSimulation *sim,
                                          char *buf,
                                          size_t len,
                                          size_t *required);

// # Safety
// `sim` must come from [`qfl_simulation_new`] and not be used afterwards.
void qfl_simulation_free(struct QflSimulation *sim);

// # Safety
// `out` must be valid.
enum QflStatus qfl_circuit_new(size_t num_qubits,
                               size_t num_layers,
                               size_t num_classes,
                               struct QflCircuit **out);

// # Safety
// `circuit` must come from [`qfl_circuit_new`]; `out` must be valid.
enum QflStatus qfl_circuit_num_parameters(const struct QflCircuit *circuit, size_t *out);

// Class probabilities for one feature vector. `probs` must hold
// `num_probs >= num_classes` doubles.
//
// # Safety
// Pointers must be valid for the given lengths.
enum QflStatus qfl_circuit_predict(const struct QflCircuit *circuit,
                                   const double *params,
                                   size_t num_params,
                                   const double *features,
                                   size_t num_features,
                                   double *probs,
                                   size_t num_probs);

// # Safety
// `circuit` must come from [`qfl_circuit_new`] and not be used afterwards.
void qfl_circuit_free(struct QflCircuit *circuit);

// Size-weighted average of `num_clients` parameter vectors stored
// row-major in `params`, written to `out` (`num_params` doubles).
//
// # Safety
// `params` must hold `num_clients * num_params` doubles, `sizes`
// `num_clients` values, `out` `num_params` doubles.
enum QflStatus qfl_aggregate(const double *params,
                             const size_t *sizes,
                             size_t num_clients,
                             size_t num_params,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFLSIM_H */
