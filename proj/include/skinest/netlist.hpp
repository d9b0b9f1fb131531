#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "skinest/parallel.hpp"
#include "skinest/types.hpp"

namespace skinest {

// Node numbering for one measurement circuit on an n x m grid:
//   top crossing (i, j)    -> i*m + j
//   bottom crossing (i, j) -> n*m + i*m + j
//   driven electrode       -> 2*n*m      (skin side of the source ref)
//   sensed electrode       -> 2*n*m + 1  (skin side of the ground ref)
// The supply rail and ground are eliminated, so the conductance matrix is
// the grounded nodal matrix and is symmetric positive definite.

// Packed per-state variable numbering, shared with the optimizer:
//   cell (i, j)        -> i*m + j
//   top wire (i, j)    -> n*m + i*m + j
//   bottom wire (i, j) -> 2*n*m + i*m + j
inline int cell_var(GridSpec g, int i, int j) { return i * g.cols + j; }
inline int top_wire_var(GridSpec g, int i, int j) { return g.cells() + i * g.cols + j; }
inline int bottom_wire_var(GridSpec g, int i, int j) { return 2 * g.cells() + i * g.cols + j; }

struct SkinEdge {
  int node_a = -1;
  int node_b = -1;
  int var = -1;  // packed variable index of the edge's conductance
};

/// Resistor graph of one measurement: which stripe segments and cells are
/// present and where the two active electrodes attach. Stripe segments that
/// lead to a floating (unselected) electrode are dead ends and are omitted.
struct StateTopology {
  GridSpec grid;
  OhmmeterConfig config;
  CellIndex cell;
  int node_count = 0;
  int source_node = -1;
  int sense_node = -1;
  std::vector<SkinEdge> edges;
};

StateTopology make_state_topology(GridSpec grid, OhmmeterConfig config, CellIndex cell);

struct Netlist {
  StateTopology topology;
  DriveSetup drive;
  Eigen::MatrixXd conductance;  // symmetric, 1/MΩ
  Eigen::VectorXd injection;    // µA-scale (V / MΩ)

  int node_count() const { return topology.node_count; }
  int resistor_count() const { return static_cast<int>(topology.edges.size()) + 2; }
};

/// Assembles the grounded nodal system for measuring `cell` under `config`.
/// Throws std::out_of_range for a cell outside the grid and
/// std::invalid_argument for an invalid field.
Netlist build_netlist(const ResistanceField& field, const DriveSetup& drive,
                      const OhmmeterConfig& config, CellIndex cell);

/// Node voltages v with conductance * v = injection.
Eigen::VectorXd solve_nodes(const Netlist& netlist);

/// Residual of the assembled system at a voltage vector, max-norm in µA.
double kcl_matrix_residual(const Netlist& netlist, const Eigen::VectorXd& voltages);

/// Clean (v_s, v_r) for one cell/config.
Reading simulate_measurement(const ResistanceField& field, const DriveSetup& drive,
                             const OhmmeterConfig& config, CellIndex cell);

/// Full scan in frame_ordering sequence. noise_std > 0 adds seeded Gaussian
/// noise to every voltage; the noise stream is drawn up front in readout
/// order so Serial and Parallel policies agree bit for bit.
MeasurementFrame synthesize_frame(const ResistanceField& field, const DriveSetup& drive,
                                  double noise_std, std::uint64_t seed = 0,
                                  ExecPolicy policy = ExecPolicy::Parallel);

/// Independent current-balance check: walks the resistor edges one by one
/// (no matrix assembly) and returns the largest net nodal current in µA.
/// Electrode nodes include their reference-resistor currents.
double state_kcl_residual(const ResistanceField& field, const DriveSetup& drive,
                          const OhmmeterConfig& config, CellIndex cell,
                          const std::vector<double>& v_top, const std::vector<double>& v_bottom,
                          double v_source, double v_sense);

}  // namespace skinest
