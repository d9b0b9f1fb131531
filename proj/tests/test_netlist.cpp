#include "doctest.h"

#include <cmath>
#include <random>

#include "oracle_mesh.hpp"
#include "skinest/netlist.hpp"
#include "skinest/types.hpp"

using namespace skinest;

namespace {

ResistanceField random_field(GridSpec grid, std::mt19937_64& rng, double lo = 1e-3,
                             double hi = 1e3) {
  std::uniform_real_distribution<double> log_u(std::log(lo), std::log(hi));
  ResistanceField f(grid, 1.0, 1.0);
  for (auto* block : {&f.cell, &f.top_wire, &f.bottom_wire}) {
    for (double& v : *block) v = std::exp(log_u(rng));
  }
  return f;
}

double max_oracle_gap(const ResistanceField& field, const DriveSetup& drive, ConfigLabel config,
                      CellIndex cell) {
  const Netlist net = build_netlist(field, drive, OhmmeterConfig::of(config), cell);
  const Eigen::VectorXd v = solve_nodes(net);
  const auto ref = oracle::solve_measurement(field, drive, config, cell);
  double gap = 0.0;
  const int nm = field.rows * field.cols;
  for (int k = 0; k < nm; ++k) {
    gap = std::max(gap, std::abs(v(k) - ref.v_top[static_cast<std::size_t>(k)]));
    gap = std::max(gap, std::abs(v(nm + k) - ref.v_bottom[static_cast<std::size_t>(k)]));
  }
  gap = std::max(gap, std::abs(v(net.topology.source_node) - ref.v_source));
  gap = std::max(gap, std::abs(v(net.topology.sense_node) - ref.v_sense));
  return gap;
}

}  // namespace

TEST_CASE("1x1 netlist has four nodes and five resistor branches") {
  const ResistanceField f({1, 1}, 1.0, 0.01);
  const Netlist net = build_netlist(f, DriveSetup{}, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  CHECK(net.node_count() == 4);
  CHECK(net.topology.edges.size() == 3);  // top wire, contact, bottom wire
  CHECK(net.resistor_count() == 5);       // plus the two reference resistors
}

TEST_CASE("2x2 netlist omits segments that dangle at floating electrodes") {
  const ResistanceField f({2, 2}, 1.0, 0.01);
  const Netlist net = build_netlist(f, DriveSetup{}, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  CHECK(net.node_count() == 10);
  // 4 contacts + 2 in-row segments + 2 in-column segments + 2 electrode
  // segments; the other rows'/columns' electrode segments are dead ends.
  CHECK(net.topology.edges.size() == 10);
}

TEST_CASE("three equal series resistances divide the supply into thirds") {
  ResistanceField f({1, 1}, 1.0, 1e-12);
  const DriveSetup drive{1.0, 1.0, 1.0};
  const Reading r = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  CHECK(r.v_s == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(r.v_r == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("an open contact pins the divider to the rails") {
  ResistanceField f({1, 1}, kOpenCircuitMohm, 1e-12);
  const DriveSetup drive{1.0, 1.0, 1.0};
  const Reading r = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  CHECK(r.v_s >= 0.999998);
  CHECK(r.v_r <= 2e-6);
}

TEST_CASE("bottom-driven configuration mirrors the top-driven topology") {
  ResistanceField f({1, 1}, 0.7, 0.01);
  const DriveSetup drive;
  const Netlist a = build_netlist(f, drive, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  const Netlist c = build_netlist(f, drive, OhmmeterConfig::of(ConfigLabel::C), {0, 0});
  CHECK(a.node_count() == c.node_count());
  CHECK(a.topology.edges.size() == c.topology.edges.size());
  const Reading ra = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
  const Reading rc = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::C), {0, 0});
  CHECK(ra.v_s == doctest::Approx(rc.v_s).epsilon(1e-12));
  CHECK(ra.v_r == doctest::Approx(rc.v_r).epsilon(1e-12));
}

TEST_CASE("conductance matrix is symmetric and diagonally dominant") {
  std::mt19937_64 rng(21);
  const ResistanceField f = random_field({3, 2}, rng);
  const Netlist net = build_netlist(f, DriveSetup{}, OhmmeterConfig::of(ConfigLabel::B), {2, 1});
  const auto& G = net.conductance;
  CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int r = 0; r < G.rows(); ++r) {
    double off = 0.0;
    for (int c = 0; c < G.cols(); ++c) {
      if (c != r) off += std::abs(G(r, c));
    }
    CHECK(G(r, r) >= off - 1e-15);
  }
}

TEST_CASE("node voltages match the loop-current oracle on random grids") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    const GridSpec grid{1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 3)};
    const ResistanceField f = random_field(grid, rng);
    const CellIndex cell{static_cast<int>(rng() % grid.rows), static_cast<int>(rng() % grid.cols)};
    const auto config = static_cast<ConfigLabel>(rng() % 4);
    CHECK(max_oracle_gap(f, DriveSetup{}, config, cell) <= 1e-9);
  }
}

TEST_CASE("solved nodes satisfy the assembled system and the edge-walk check") {
  std::mt19937_64 rng(23);
  const ResistanceField f = random_field({3, 3}, rng);
  const DriveSetup drive;
  const auto config = OhmmeterConfig::of(ConfigLabel::D);
  const Netlist net = build_netlist(f, drive, config, {1, 2});
  const Eigen::VectorXd v = solve_nodes(net);
  CHECK(kcl_matrix_residual(net, v) <= 1e-9);

  const int nm = f.rows * f.cols;
  const std::vector<double> v_top(v.data(), v.data() + nm);
  const std::vector<double> v_bottom(v.data() + nm, v.data() + 2 * nm);
  CHECK(state_kcl_residual(f, drive, config, {1, 2}, v_top, v_bottom,
                           v(net.topology.source_node), v(net.topology.sense_node)) <= 1e-9);
}

TEST_CASE("readings are invariant under a global resistance scale") {
  std::mt19937_64 rng(24);
  const ResistanceField f = random_field({2, 3}, rng, 1e-2, 1e2);
  for (double scale : {10.0, 0.037, 415.0}) {
    ResistanceField scaled = f;
    for (auto* block : {&scaled.cell, &scaled.top_wire, &scaled.bottom_wire}) {
      for (double& v : *block) v *= scale;
    }
    DriveSetup drive;
    DriveSetup scaled_drive = drive;
    scaled_drive.r_ref_source *= scale;
    scaled_drive.r_ref_ground *= scale;
    const Reading base = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), {1, 1});
    const Reading after =
        simulate_measurement(scaled, scaled_drive, OhmmeterConfig::of(ConfigLabel::A), {1, 1});
    CHECK(after.v_s == doctest::Approx(base.v_s).epsilon(1e-12));
    CHECK(after.v_r == doctest::Approx(base.v_r).epsilon(1e-12));
  }
}

TEST_CASE("swapping driven and grounded electrodes preserves the sensed voltage") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 8; ++trial) {
    const ResistanceField f = random_field({2, 2}, rng, 1e-2, 1e2);
    const DriveSetup drive;  // equal reference resistors
    const CellIndex cell{static_cast<int>(rng() % 2), static_cast<int>(rng() % 2)};
    const Reading ra = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), cell);
    const Reading rc = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::C), cell);
    CHECK(rc.v_r == doctest::Approx(ra.v_r).epsilon(1e-12));
  }
}

TEST_CASE("sensed voltage decreases as the contact resistance grows") {
  const DriveSetup drive;
  double previous = 1.0;
  for (double r_cell : {0.01, 0.1, 0.5, 1.0, 5.0, 50.0, 1000.0}) {
    ResistanceField f({1, 1}, r_cell, 0.001);
    const Reading r = simulate_measurement(f, drive, OhmmeterConfig::of(ConfigLabel::A), {0, 0});
    CHECK(r.v_r < previous);
    previous = r.v_r;
  }
}

TEST_CASE("a pressed neighborhood lifts the reading of an unpressed cell") {
  // Three corners pressed: the unpressed corner sees an alternate path and
  // reads far above its isolated value.
  ResistanceField ghost({2, 2}, 1.0, 0.01);
  ghost.cell_at(0, 0) = 0.001;
  ghost.cell_at(0, 1) = 0.001;
  ghost.cell_at(1, 0) = 0.001;
  ResistanceField isolated = ghost;
  isolated.cell_at(0, 0) = kOpenCircuitMohm;
  isolated.cell_at(0, 1) = kOpenCircuitMohm;
  isolated.cell_at(1, 0) = kOpenCircuitMohm;
  const DriveSetup drive;
  const Reading with_ghost =
      simulate_measurement(ghost, drive, OhmmeterConfig::of(ConfigLabel::A), {1, 1});
  const Reading alone =
      simulate_measurement(isolated, drive, OhmmeterConfig::of(ConfigLabel::A), {1, 1});
  CHECK(with_ghost.v_r > 5.0 * alone.v_r);
}

TEST_CASE("synthesized frames are complete, ordered and reproducible") {
  std::mt19937_64 rng(26);
  const ResistanceField f = random_field({2, 2}, rng, 1e-2, 1e1);
  const DriveSetup drive;

  const MeasurementFrame clean = synthesize_frame(f, drive, 0.0);
  CHECK(clean.complete());
  for (const auto& slot : frame_ordering(f.grid())) {
    const Reading direct =
        simulate_measurement(f, drive, OhmmeterConfig::of(slot.config), slot.cell);
    CHECK(clean.at(slot.cell.i, slot.cell.j, slot.config) == direct);
  }

  const MeasurementFrame a = synthesize_frame(f, drive, 0.003, 99);
  const MeasurementFrame b = synthesize_frame(f, drive, 0.003, 99);
  const MeasurementFrame c = synthesize_frame(f, drive, 0.003, 100);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("serial and parallel synthesis agree bit for bit") {
  std::mt19937_64 rng(27);
  const ResistanceField f = random_field({3, 3}, rng, 1e-2, 1e1);
  const DriveSetup drive;
  const MeasurementFrame serial = synthesize_frame(f, drive, 0.002, 5, ExecPolicy::Serial);
  const MeasurementFrame parallel = synthesize_frame(f, drive, 0.002, 5, ExecPolicy::Parallel);
  CHECK(serial == parallel);
}

TEST_CASE("noise-free frames keep the divider ordering") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 6; ++trial) {
    const GridSpec grid{1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 3)};
    const ResistanceField f = random_field(grid, rng);
    const DriveSetup drive;
    const MeasurementFrame frame = synthesize_frame(f, drive, 0.0);
    for (const Reading& r : frame.readings) {
      CHECK(r.v_r >= -1e-12);
      CHECK(r.v_r <= r.v_s + 1e-12);
      CHECK(r.v_s <= drive.v_dd + 1e-12);
    }
  }
}

TEST_CASE("building a netlist rejects out-of-range cells and bad fields") {
  const ResistanceField f({2, 2}, 1.0, 0.01);
  CHECK_THROWS_AS(build_netlist(f, DriveSetup{}, OhmmeterConfig::of(ConfigLabel::A), {2, 0}),
                  std::out_of_range);
  ResistanceField bad = f;
  bad.cell_at(1, 1) = -1.0;
  CHECK_THROWS_AS(build_netlist(bad, DriveSetup{}, OhmmeterConfig::of(ConfigLabel::A), {0, 0}),
                  std::invalid_argument);
}
