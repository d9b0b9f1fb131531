#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "skinest/parallel.hpp"
#include "skinest/types.hpp"

namespace skinest {

/// Decision variables of one measurement: a full copy of the resistance
/// grids plus the crossing-node voltages, bound to that measurement's
/// (v_s, v_r) reading. v_source/v_sense are the solved electrode voltages;
/// at a feasible point they match the bound reading to tolerance.
struct CircuitState {
  OhmmeterConfig config;
  CellIndex cell;
  ResistanceField field;          // r_top/r_bottom/r_cell, MΩ
  std::vector<double> v_top;      // V, row-major rows*cols
  std::vector<double> v_bottom;   // V
  double v_source = 0.0;          // V, solved voltage at the driven electrode
  double v_sense = 0.0;           // V, solved voltage at the sensed electrode
  Reading data;                   // bound frame reading
};

/// One circuit state per (cell, config) in frame_ordering sequence, plus
/// the fixed data they explain.
struct StateEnsemble {
  GridSpec grid;
  DriveSetup drive;
  MeasurementFrame frame;
  std::vector<CircuitState> states;

  int state_index(CellIndex cell, ConfigLabel k) const {
    return (cell.j * grid.rows + cell.i) * kConfigCount + static_cast<int>(k);
  }
  const CircuitState& state(CellIndex cell, ConfigLabel k) const {
    return states[state_index(cell, k)];
  }
};

struct ObjectiveWeights {
  double alpha = 1.0;   // pair-discrepancy weight
  double beta = 1.0;    // readout-chain weight
  double lambda = 0.0;  // wire-resistance penalty weight
};

inline ObjectiveWeights default_lsq_weights() { return ObjectiveWeights{1e6, 1e6, 0.0}; }
inline ObjectiveWeights default_reg_weights() { return ObjectiveWeights{1.0, 1.0, 1e9}; }

struct SolverOptions {
  int max_iterations = 200;        // per stage
  double feasibility_tol = 1e-6;   // V, max |simulated - measured|
  double stationarity_tol = 1e-8;  // relative objective change
  double mu_initial = 1e6;
  double mu_max = 1e12;
  ExecPolicy policy = ExecPolicy::Parallel;
  bool trace = false;  // per-iteration diagnostics on stderr
};

struct SolveReport {
  double objective = 0.0;          // alpha*cost_f + beta*cost_c + lambda*cost_r at exit
  double cost_f = 0.0;
  double cost_c = 0.0;
  double cost_r = 0.0;
  double max_kcl_residual = 0.0;   // µA, from the independent edge checker
  double max_data_residual = 0.0;  // V, max |simulated - measured| reading
  int iterations = 0;
  double wall_time_s = 0.0;
  bool converged = false;
};

/// Initial ensemble: wire grids at the conductance-safe floor, cell grids
/// from the naive baseline with each state's own cell taken from its own
/// reading, voltages from a forward solve per state.
StateEnsemble bootstrap_states(const MeasurementFrame& frame, const DriveSetup& drive,
                               ExecPolicy policy = ExecPolicy::Parallel);

/// Sum over cells of squared A/B and C/D discrepancies across the full
/// per-state variable set; resistances enter as conductances, voltages are
/// the crossing-node grids.
double cost_f(const StateEnsemble& ensemble);

/// Sum over consecutive readout cells, per configuration, of squared
/// conductance-grid discrepancies (voltages excluded). No wraparound after
/// the final cell.
double cost_c(const StateEnsemble& ensemble);

/// Sum over states of squared wire resistances (resistance form, MΩ²).
double cost_r(const StateEnsemble& ensemble);

/// Largest net nodal current over all states, µA (independent edge check).
double ensemble_kcl_residual(const StateEnsemble& ensemble);

/// Largest |simulated - measured| reading voltage over all states, V.
double ensemble_data_residual(const StateEnsemble& ensemble);

/// Stage 1: minimize alpha*cost_f + beta*cost_c (lambda usually 0) subject
/// to each state reproducing its bound reading through its own circuit.
std::pair<StateEnsemble, SolveReport> solve_feasible(const StateEnsemble& ensemble,
                                                     const ObjectiveWeights& weights,
                                                     const SolverOptions& options = {});

/// Stage 2: same constraints with the wire penalty added; warm-started from
/// the stage-1 result.
std::pair<StateEnsemble, SolveReport> solve_regularized(const StateEnsemble& ensemble,
                                                        const ObjectiveWeights& weights,
                                                        const SolverOptions& options = {});

struct EstimateResult {
  std::vector<double> cell_mohm;           // final per-cell estimate (regularized)
  std::vector<double> cell_mohm_feasible;  // after stage 1
  SolveReport feasible;
  SolveReport regularized;
  StateEnsemble ensemble;                  // final states, reusable as warm start
};

/// Per-cell mean of the cell's four states' own-cell resistances.
std::vector<double> extract_cell_grid(const StateEnsemble& ensemble);

/// Full pipeline: bootstrap (or warm start), stage 1, stage 2.
EstimateResult estimate(const MeasurementFrame& frame, const DriveSetup& drive,
                        const ObjectiveWeights& weights_lsq = default_lsq_weights(),
                        const ObjectiveWeights& weights_reg = default_reg_weights(),
                        const SolverOptions& options = {},
                        const StateEnsemble* warm_start = nullptr);

}  // namespace skinest
