// Acceptance suite: one check per shipped guarantee, each printed as a
// single PASS/FAIL line with the measured numbers. Run with no arguments
// for the full suite or with a criterion number (1-9) for one check.
// --cli <path> points criterion 9 at the command-line binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_mesh.hpp"
#include "skinest/calibration.hpp"
#include "skinest/experiments.hpp"
#include "skinest/naive.hpp"
#include "skinest/netlist.hpp"
#include "skinest/optimizer.hpp"
#include "skinest/serialize.hpp"

using namespace skinest;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ResistanceField random_field(GridSpec grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_u(std::log(1e-3), std::log(1e3));
  ResistanceField f(grid, 1.0, 1.0);
  for (auto* block : {&f.cell, &f.top_wire, &f.bottom_wire}) {
    for (double& v : *block) v = std::exp(log_u(rng));
  }
  return f;
}

// 1. Node voltages against the independent loop-current solver.
Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const GridSpec grid{1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 3)};
    const ResistanceField field = random_field(grid, rng);
    const CellIndex cell{static_cast<int>(rng() % grid.rows),
                         static_cast<int>(rng() % grid.cols)};
    const auto label = static_cast<ConfigLabel>(rng() % 4);
    const Netlist net = build_netlist(field, DriveSetup{}, OhmmeterConfig::of(label), cell);
    const Eigen::VectorXd v = solve_nodes(net);
    const auto ref = oracle::solve_measurement(field, DriveSetup{}, label, cell);
    const int nm = grid.cells();
    for (int k = 0; k < nm; ++k) {
      worst = std::max(worst, std::abs(v(k) - ref.v_top[static_cast<std::size_t>(k)]));
      worst = std::max(worst, std::abs(v(nm + k) - ref.v_bottom[static_cast<std::size_t>(k)]));
    }
    worst = std::max(worst, std::abs(v(net.topology.source_node) - ref.v_source));
    worst = std::max(worst, std::abs(v(net.topology.sense_node) - ref.v_sense));
  }
  const double t = elapsed_s(t0);
  Outcome out;
  out.pass = worst <= 1e-9 && t <= 60.0;
  std::ostringstream detail;
  detail << "200 random grids, max |v - oracle| = " << worst << " V (limit 1e-9), " << t << " s";
  out.detail = detail.str();
  return out;
}

// 2. Three-corner ghost demonstration at wire 0.001 MΩ on a 2x2 grid.
Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  ResistanceField truth({2, 2}, 1.0, 0.001);
  truth.cell_at(0, 0) = 0.001;
  truth.cell_at(0, 1) = 0.001;
  truth.cell_at(1, 0) = 0.001;
  const DriveSetup drive;
  const MeasurementFrame frame = synthesize_frame(truth, drive, 0.0);
  const auto naive = naive_resistance(frame, drive);
  const EstimateResult est = estimate(frame, drive);
  const double t = elapsed_s(t0);

  const bool naive_false_touch = naive[3] < 0.5;
  const bool estimate_corrected = est.cell_mohm[3] > 0.5;
  const bool rmse_ordering = rmse(est.cell_mohm, truth.cell) < rmse(naive, truth.cell);
  Outcome out;
  out.pass = naive_false_touch && estimate_corrected && rmse_ordering && t <= 30.0;
  std::ostringstream detail;
  detail << "naive unpressed " << naive[3] << " MΩ (< 0.5: " << (naive_false_touch ? "yes" : "no")
         << "), estimate unpressed " << est.cell_mohm[3] << " MΩ (> 0.5: "
         << (estimate_corrected ? "yes" : "no") << "), rmse " << rmse(est.cell_mohm, truth.cell)
         << " vs naive " << rmse(naive, truth.cell) << ", " << t << " s";
  out.detail = detail.str();
  return out;
}

// 3. Wire sweep orderings on the default 3x3 scenario.
Outcome criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.scenario = Scenario::WireSweep;
  cfg.sweep_values = {0.0001, 0.001, 0.005, 0.041};
  const SweepResult sweep = run_wire_sweep(cfg);
  const double t = elapsed_s(t0);

  bool pass = t <= 600.0;
  std::ostringstream detail;
  for (std::size_t p = 0; p < sweep.records.size(); ++p) {
    const auto& r = sweep.records[p];
    const bool beats_naive = r.rmse_feasible < r.rmse_naive;
    const bool reg_ok = p >= 3 || r.rmse_regularized <= 1.05 * r.rmse_feasible;
    pass = pass && beats_naive && reg_ok;
    detail << "w=" << r.value << " naive=" << r.rmse_naive << " feas=" << r.rmse_feasible
           << " reg=" << r.rmse_regularized << (beats_naive && reg_ok ? " ok; " : " BAD; ");
  }
  detail << t << " s";
  return {pass, detail.str()};
}

// 4. Cell sweep orderings; the baseline's pressed-cell error grows with
// the pressed resistance.
Outcome criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.scenario = Scenario::CellSweep;
  cfg.sweep_values = {0.01, 0.1, 0.7};
  const SweepResult sweep = run_cell_sweep(cfg);
  const double t = elapsed_s(t0);

  bool pass = t <= 600.0;
  std::ostringstream detail;
  double previous_pressed = -1.0;
  for (const auto& r : sweep.records) {
    const bool beats_naive = r.rmse_feasible < r.rmse_naive;
    const bool monotone = r.rmse_naive_pressed >= previous_pressed;
    previous_pressed = r.rmse_naive_pressed;
    pass = pass && beats_naive && monotone;
    detail << "p=" << r.value << " naive=" << r.rmse_naive << " feas=" << r.rmse_feasible
           << " naive_pressed=" << r.rmse_naive_pressed
           << (beats_naive && monotone ? " ok; " : " BAD; ");
  }
  detail << t << " s";
  return {pass, detail.str()};
}

// 5. Round-trip recovery on clean 2x2 frames with thin wires.
Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const DriveSetup drive;
  struct Case {
    std::vector<double> cells;
    double wire;
  };
  const std::vector<Case> cases = {
      {{0.3, 1.0, 0.05, 2.0}, 0.0005},
      {{0.8, 0.4, 1.5, 0.6}, 0.001},
      {{1.0, 1.0, 1.0, 1.0}, 0.001},
  };
  bool pass = true;
  double worst_rel = 0.0;
  double worst_obj = 0.0;
  for (const Case& c : cases) {
    ResistanceField truth({2, 2}, 1.0, c.wire);
    truth.cell = c.cells;
    const MeasurementFrame frame = synthesize_frame(truth, drive, 0.0);
    const EstimateResult est = estimate(frame, drive);
    for (std::size_t k = 0; k < c.cells.size(); ++k) {
      const double rel = std::abs(est.cell_mohm[k] - c.cells[k]) / c.cells[k];
      worst_rel = std::max(worst_rel, rel);
    }
    worst_obj = std::max(worst_obj, est.feasible.objective);
  }
  pass = worst_rel <= 0.10 && worst_obj <= 1e-8;
  const double t = elapsed_s(t0);
  std::ostringstream detail;
  detail << "3 fields, worst cell error " << worst_rel * 100.0 << "% (limit 10%), worst Cost_lsq "
         << worst_obj << " (limit 1e-8), " << t << " s";
  return {pass, detail.str()};
}

// 6. Current balance of returned solutions, re-checked edge by edge.
Outcome criterion_6() {
  const DriveSetup drive;
  double worst = 0.0;

  ResistanceField ghost({2, 2}, 1.0, 0.001);
  ghost.cell_at(0, 0) = 0.001;
  ghost.cell_at(0, 1) = 0.001;
  ghost.cell_at(1, 0) = 0.001;
  worst = std::max(worst, ensemble_kcl_residual(
                              estimate(synthesize_frame(ghost, drive, 0.0), drive).ensemble));
  worst = std::max(worst, ensemble_kcl_residual(
                              estimate(synthesize_frame(ghost, drive, 0.002, 11), drive).ensemble));

  ResistanceField mixed({3, 3}, 0.9, 0.002);
  mixed.cell_at(1, 1) = 0.05;
  mixed.cell_at(2, 0) = 0.3;
  worst = std::max(worst, ensemble_kcl_residual(
                              estimate(synthesize_frame(mixed, drive, 0.0), drive).ensemble));

  std::ostringstream detail;
  detail << "max independent node-current residual " << worst << " µA (limit 1e-6)";
  return {worst <= 1e-6, detail.str()};
}

// 7. Multi-touch force accuracy of the solved-resistance predictor against
// the raw-voltage baseline.
Outcome criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.scenario = Scenario::ForcePipeline;
  const ForcePipelineResult r = run_force_pipeline(cfg);
  const double t = elapsed_s(t0);
  const bool pass = r.rmse_solved <= 0.8 * r.rmse_raw && t <= 120.0;
  std::ostringstream detail;
  detail << "solved rmse " << r.rmse_solved << " N vs raw " << r.rmse_raw << " N ("
         << r.improvement_pct << "% improvement, need >= 20%), " << t << " s";
  return {pass, detail.str()};
}

// 8. Desk-scale speed: a 2x2 estimate within budget cold and warm.
Outcome criterion_8() {
  ResistanceField truth({2, 2}, 1.0, 0.001);
  truth.cell_at(0, 0) = 0.2;
  truth.cell_at(1, 1) = 0.05;
  const DriveSetup drive;
  const MeasurementFrame frame = synthesize_frame(truth, drive, 0.0);

  const auto c0 = std::chrono::steady_clock::now();
  const EstimateResult cold = estimate(frame, drive);
  const double cold_s = elapsed_s(c0);
  const auto w0 = std::chrono::steady_clock::now();
  estimate(frame, drive, default_lsq_weights(), default_reg_weights(), {}, &cold.ensemble);
  const double warm_s = elapsed_s(w0);

  std::ostringstream detail;
  detail << "cold " << cold_s << " s (limit 5), warm " << warm_s << " s (limit 1)";
  return {cold_s <= 5.0 && warm_s <= 1.0, detail.str()};
}

// 9. Byte-identical reruns of every scenario, library level and CLI level.
std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), dir).string()] = read_text_file(entry.path().string());
    }
  }
  return files;
}

Outcome criterion_9(const std::string& cli_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / "skinest_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);

  std::vector<std::pair<std::string, ExperimentConfig>> runs;
  {
    ExperimentConfig c;
    c.scenario = Scenario::WireSweep;
    c.grid = {2, 2};
    c.sweep_values = {0.0001, 0.002};
    c.seed = 31;
    runs.emplace_back("wire-sweep", c);
  }
  {
    ExperimentConfig c;
    c.scenario = Scenario::CellSweep;
    c.grid = {2, 2};
    c.sweep_values = {0.05, 0.4};
    c.seed = 32;
    runs.emplace_back("cell-sweep", c);
  }
  {
    ExperimentConfig c;
    c.scenario = Scenario::GhostDemo;
    c.wire_mohm = 0.0001;
    c.noise_std = 0.0005;
    c.seed = 33;
    runs.emplace_back("ghost-demo", c);
  }
  {
    ExperimentConfig c;
    c.scenario = Scenario::ForcePipeline;
    c.calibration_forces = {0.0, 2.0};
    c.seed = 34;
    runs.emplace_back("force-pipeline", c);
  }
  {
    ExperimentConfig c;
    c.scenario = Scenario::StreamReplay;
    c.stream_length = 6;
    c.seed = 35;
    runs.emplace_back("stream-replay", c);
  }

  bool pass = true;
  std::ostringstream detail;
  for (auto& [name, cfg] : runs) {
    const fs::path dir = root / name;
    cfg.out_dir = dir.string();
    run_scenario(cfg);
    const auto first = snapshot_dir(dir);
    fs::remove_all(dir);
    run_scenario(cfg);
    const auto second = snapshot_dir(dir);
    const bool same = first == second && !first.empty();
    pass = pass && same;
    detail << name << (same ? " ok" : " DIFFERS") << " (" << first.size() << " files); ";
  }

  if (!cli_path.empty()) {
    const fs::path dir = root / "cli";
    const std::string cmd = "\"" + cli_path + "\" --scenario ghost-demo --grid 2x2 --seed 40" +
                            " --noise-std 0.0005 --out-dir \"" + dir.string() + "\" > /dev/null";
    fs::remove_all(dir);
    if (std::system(cmd.c_str()) != 0) {
      pass = false;
      detail << "cli run failed; ";
    } else {
      const auto first = snapshot_dir(dir);
      fs::remove_all(dir);
      if (std::system(cmd.c_str()) != 0) {
        pass = false;
        detail << "cli rerun failed; ";
      } else {
        const bool same = snapshot_dir(dir) == first && !first.empty();
        pass = pass && same;
        detail << "cli" << (same ? " ok" : " DIFFERS") << "; ";
      }
    }
  } else {
    detail << "cli skipped (no --cli path); ";
  }

  fs::remove_all(root);
  detail << elapsed_s(t0) << " s";
  return {pass, detail.str()};
}

struct Criterion {
  int number;
  const char* summary;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  std::string cli_path;
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--cli" && a + 1 < argc) {
      cli_path = argv[++a];
    } else {
      selected.push_back(std::atoi(arg.c_str()));
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "simulator matches the independent loop-current oracle", criterion_1},
      {2, "three-corner ghost demonstration (2x2, wire 0.001)", criterion_2},
      {3, "wire sweep error orderings (3x3)", criterion_3},
      {4, "cell sweep error orderings (3x3)", criterion_4},
      {5, "round-trip recovery on clean 2x2 frames", criterion_5},
      {6, "independent current-balance check of returned solutions", criterion_6},
      {7, "multi-touch force accuracy vs raw-voltage baseline", criterion_7},
      {8, "2x2 estimation speed budget", criterion_8},
      {9, "byte-identical seeded reruns", nullptr},
  };

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.number) == selected.end()) {
      continue;
    }
    const Outcome outcome = c.number == 9 ? criterion_9(cli_path) : c.run();
    all_pass = all_pass && outcome.pass;
    std::printf("%s criterion %d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", c.number, c.summary,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
