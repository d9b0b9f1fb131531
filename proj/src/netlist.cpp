#include "skinest/netlist.hpp"

#include <cmath>
#include <stdexcept>

#include "skinest/rng.hpp"

namespace skinest {

namespace {

int top_node(GridSpec g, int i, int j) { return i * g.cols + j; }
int bottom_node(GridSpec g, int i, int j) { return g.cells() + i * g.cols + j; }

}  // namespace

StateTopology make_state_topology(GridSpec grid, OhmmeterConfig config, CellIndex cell) {
  if (!grid.valid()) throw std::invalid_argument("make_state_topology: invalid grid");
  if (cell.i < 0 || cell.i >= grid.rows || cell.j < 0 || cell.j >= grid.cols) {
    throw std::out_of_range("make_state_topology: cell index out of range");
  }

  StateTopology topo;
  topo.grid = grid;
  topo.config = config;
  topo.cell = cell;
  topo.node_count = 2 * grid.cells() + 2;
  topo.source_node = 2 * grid.cells();
  topo.sense_node = 2 * grid.cells() + 1;

  const bool top_driven = config.drive_layer == DriveLayer::TopDriven;
  const int row_electrode = top_driven ? topo.source_node : topo.sense_node;
  const int col_electrode = top_driven ? topo.sense_node : topo.source_node;

  // Contact resistors at every crossing.
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      topo.edges.push_back({top_node(grid, i, j), bottom_node(grid, i, j), cell_var(grid, i, j)});
    }
  }
  // Row stripe chains. Segment j=0 reaches the stripe electrode and exists
  // only for the selected row; everywhere else it dangles at a floating
  // electrode and carries no current.
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 1; j < grid.cols; ++j) {
      topo.edges.push_back({top_node(grid, i, j - 1), top_node(grid, i, j), top_wire_var(grid, i, j)});
    }
  }
  topo.edges.push_back({row_electrode, top_node(grid, cell.i, 0), top_wire_var(grid, cell.i, 0)});
  // Column stripe chains, segment i=0 likewise.
  for (int j = 0; j < grid.cols; ++j) {
    for (int i = 1; i < grid.rows; ++i) {
      topo.edges.push_back(
          {bottom_node(grid, i - 1, j), bottom_node(grid, i, j), bottom_wire_var(grid, i, j)});
    }
  }
  topo.edges.push_back({col_electrode, bottom_node(grid, 0, cell.j), bottom_wire_var(grid, 0, cell.j)});
  return topo;
}

Netlist build_netlist(const ResistanceField& field, const DriveSetup& drive,
                      const OhmmeterConfig& config, CellIndex cell) {
  require_valid_field(field, field.grid());
  if (!drive.valid()) throw std::invalid_argument("build_netlist: invalid drive setup");

  Netlist net;
  net.topology = make_state_topology(field.grid(), config, cell);
  net.drive = drive;

  const int n = net.topology.node_count;
  net.conductance = Eigen::MatrixXd::Zero(n, n);
  net.injection = Eigen::VectorXd::Zero(n);

  const GridSpec grid = field.grid();
  const int cells = grid.cells();
  auto conductance_of = [&](int var) {
    if (var < cells) return 1.0 / field.cell[var];
    if (var < 2 * cells) return 1.0 / field.top_wire[var - cells];
    return 1.0 / field.bottom_wire[var - 2 * cells];
  };

  for (const SkinEdge& e : net.topology.edges) {
    const double g = conductance_of(e.var);
    net.conductance(e.node_a, e.node_a) += g;
    net.conductance(e.node_b, e.node_b) += g;
    net.conductance(e.node_a, e.node_b) -= g;
    net.conductance(e.node_b, e.node_a) -= g;
  }
  const double g_src = 1.0 / drive.r_ref_source;
  const double g_gnd = 1.0 / drive.r_ref_ground;
  net.conductance(net.topology.source_node, net.topology.source_node) += g_src;
  net.conductance(net.topology.sense_node, net.topology.sense_node) += g_gnd;
  net.injection(net.topology.source_node) = drive.v_dd * g_src;
  return net;
}

Eigen::VectorXd solve_nodes(const Netlist& netlist) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(netlist.conductance);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("solve_nodes: singular conductance matrix");
  }
  return ldlt.solve(netlist.injection);
}

double kcl_matrix_residual(const Netlist& netlist, const Eigen::VectorXd& voltages) {
  return (netlist.conductance * voltages - netlist.injection).cwiseAbs().maxCoeff();
}

Reading simulate_measurement(const ResistanceField& field, const DriveSetup& drive,
                             const OhmmeterConfig& config, CellIndex cell) {
  const Netlist net = build_netlist(field, drive, config, cell);
  const Eigen::VectorXd v = solve_nodes(net);
  return Reading{v(net.topology.source_node), v(net.topology.sense_node)};
}

MeasurementFrame synthesize_frame(const ResistanceField& field, const DriveSetup& drive,
                                  double noise_std, std::uint64_t seed, ExecPolicy policy) {
  require_valid_field(field, field.grid());
  if (!drive.valid()) throw std::invalid_argument("synthesize_frame: invalid drive setup");
  if (noise_std < 0.0) throw std::invalid_argument("synthesize_frame: negative noise_std");

  const GridSpec grid = field.grid();
  const auto order = frame_ordering(grid);
  const int slots = static_cast<int>(order.size());

  // Noise drawn serially in readout order so the execution policy cannot
  // change the stream.
  std::vector<Reading> noise(static_cast<std::size_t>(slots), Reading{0.0, 0.0});
  if (noise_std > 0.0) {
    NoiseSampler sampler(seed);
    for (auto& r : noise) {
      r.v_s = sampler.gaussian(noise_std);
      r.v_r = sampler.gaussian(noise_std);
    }
  }

  MeasurementFrame frame(grid);
  parallel_for(slots, policy, [&](int s) {
    const MeasurementSlot& slot = order[static_cast<std::size_t>(s)];
    Reading r = simulate_measurement(field, drive, OhmmeterConfig::of(slot.config), slot.cell);
    r.v_s += noise[static_cast<std::size_t>(s)].v_s;
    r.v_r += noise[static_cast<std::size_t>(s)].v_r;
    frame.readings[static_cast<std::size_t>(s)] = r;
  });
  return frame;
}

double state_kcl_residual(const ResistanceField& field, const DriveSetup& drive,
                          const OhmmeterConfig& config, CellIndex cell,
                          const std::vector<double>& v_top, const std::vector<double>& v_bottom,
                          double v_source, double v_sense) {
  const GridSpec grid = field.grid();
  require_valid_field(field, grid);
  const int cells = grid.cells();
  if (v_top.size() != static_cast<std::size_t>(cells) ||
      v_bottom.size() != static_cast<std::size_t>(cells)) {
    throw std::invalid_argument("state_kcl_residual: voltage grid size mismatch");
  }

  const StateTopology topo = make_state_topology(grid, config, cell);
  auto voltage_of = [&](int node) {
    if (node == topo.source_node) return v_source;
    if (node == topo.sense_node) return v_sense;
    return node < cells ? v_top[static_cast<std::size_t>(node)]
                        : v_bottom[static_cast<std::size_t>(node - cells)];
  };
  auto resistance_of = [&](int var) {
    if (var < cells) return field.cell[static_cast<std::size_t>(var)];
    if (var < 2 * cells) return field.top_wire[static_cast<std::size_t>(var - cells)];
    return field.bottom_wire[static_cast<std::size_t>(var - 2 * cells)];
  };

  std::vector<double> net_current(static_cast<std::size_t>(topo.node_count), 0.0);
  for (const SkinEdge& e : topo.edges) {
    const double current = (voltage_of(e.node_a) - voltage_of(e.node_b)) / resistance_of(e.var);
    net_current[static_cast<std::size_t>(e.node_a)] -= current;
    net_current[static_cast<std::size_t>(e.node_b)] += current;
  }
  // Reference resistor currents close the loop at the electrodes.
  net_current[static_cast<std::size_t>(topo.source_node)] +=
      (drive.v_dd - v_source) / drive.r_ref_source;
  net_current[static_cast<std::size_t>(topo.sense_node)] -= v_sense / drive.r_ref_ground;

  double worst = 0.0;
  for (double c : net_current) worst = std::max(worst, std::abs(c));
  return worst;
}

}  // namespace skinest
