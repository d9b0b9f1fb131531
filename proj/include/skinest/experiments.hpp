#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skinest/calibration.hpp"
#include "skinest/optimizer.hpp"
#include "skinest/types.hpp"

namespace skinest {

enum class Scenario { WireSweep, CellSweep, GhostDemo, ForcePipeline, StreamReplay, Custom };

const char* scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(const std::string& name);

/// One harness run. Cells are 1-based here and in config files / CSV output,
/// matching how the grid is labeled everywhere humans see it.
struct ExperimentConfig {
  GridSpec grid{0, 0};  // 0x0: scenario default (3x3 sweeps, 2x2 demos)
  DriveSetup drive;
  Scenario scenario = Scenario::GhostDemo;
  std::vector<double> sweep_values;              // MΩ; filled per scenario when empty
  std::vector<CellIndex> pressed_cells;          // 1-based; defaulted per scenario when empty
  double pressed_mohm = 0.001;
  double unpressed_mohm = 1.0;
  double wire_mohm = 0.001;
  double noise_std = -1.0;  // V; negative: scenario default (1e-3 for stream replay, else 0)
  ObjectiveWeights weights_lsq = default_lsq_weights();
  ObjectiveWeights weights_reg = default_reg_weights();
  std::uint64_t seed = 0;
  std::string out_dir;                           // empty: compute only, write nothing
  ExecPolicy policy = ExecPolicy::Parallel;

  // Force scenarios.
  ForceLaw force_law;
  std::vector<double> calibration_forces{0.0, 1.0, 2.0, 4.0};  // N
  std::vector<double> multi_touch_forces{2.0, 2.0};            // N, on pressed_cells
  int stream_length = 20;

  /// Scenario defaults for anything left empty; validates and throws
  /// std::invalid_argument on out-of-grid cells or non-positive values.
  void finalize();
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

/// Ground-truth field for the ghost scenarios: pressed cells (0-based) at
/// pressed_mohm, the rest at unpressed_mohm, uniform wires.
ResistanceField ghost_field(GridSpec grid, const std::vector<CellIndex>& pressed_zero_based,
                            double pressed_mohm, double unpressed_mohm, double wire_mohm);

/// Field realizing a per-cell force pattern under the synthetic force law.
ResistanceField field_for_forces(GridSpec grid, const ForceLaw& law,
                                 const std::vector<double>& forces_n, double wire_mohm);

/// Grayscale portable-pixmap heatmap (ASCII P2 .pgm). Brightness is
/// clamp((max - v) / (max - min), 0, 1) scaled to 0..255 and rounded to
/// nearest (so a mid-scale value maps to 128); min == max paints uniform
/// mid-gray 128. One 24x24 pixel block per cell. Deterministic bytes.
void render_heatmap(const std::vector<double>& values, GridSpec grid, double scale_min,
                    double scale_max, const std::string& path);

struct SweepPointRecord {
  double value = 0.0;  // MΩ, wire or pressed-cell resistance
  double rmse_naive = 0.0;
  double rmse_feasible = 0.0;
  double rmse_regularized = 0.0;
  double rmse_naive_pressed = 0.0;  // over the pressed cells only
  int feasible_iterations = 0;
  int regularized_iterations = 0;
  bool converged = true;
};

struct SweepResult {
  std::vector<SweepPointRecord> records;
  bool all_converged = true;
};

/// Ghost scenario with the pressed/unpressed pattern fixed and the wire
/// resistance swept; writes records.csv, report.json and per-point heatmaps
/// (truth / naive / feasible / optimal) under out_dir when set.
SweepResult run_wire_sweep(const ExperimentConfig& config);

/// Same pattern with wires fixed and the pressed-cell resistance swept.
SweepResult run_cell_sweep(const ExperimentConfig& config);

struct GhostDemoResult {
  std::vector<double> truth;
  std::vector<double> naive;
  std::vector<double> feasible;
  std::vector<double> regularized;
  double rmse_naive = 0.0;
  double rmse_feasible = 0.0;
  double rmse_regularized = 0.0;
  SolveReport feasible_report;
  SolveReport regularized_report;
};

/// Single three-corner scenario comparing the baseline and both estimator
/// stages cell by cell.
GhostDemoResult run_ghost_demo(const ExperimentConfig& config);

struct ForcePipelineResult {
  std::vector<CellRegressionModel> solved_models;
  std::vector<CellRegressionModel> raw_models;
  std::vector<double> truth_force;
  std::vector<double> solved_force;
  std::vector<double> raw_force;
  double rmse_solved = 0.0;
  double rmse_raw = 0.0;
  double improvement_pct = 0.0;  // (raw - solved) / raw * 100
};

/// Single-touch calibration passes on every cell followed by a multi-touch
/// evaluation against the generating force law.
ForcePipelineResult run_force_pipeline(const ExperimentConfig& config);

struct StreamCorrelation {
  CellIndex cell;          // 1-based, shares a row or column with the touched cell
  double corr_raw = 0.0;   // |Pearson| of raw v_r series vs touched cell's
  double corr_solved = 0.0;
};

struct StreamReplayResult {
  std::vector<double> touch_profile;  // N per frame
  StreamResult stream;
  std::vector<std::vector<double>> raw_v_r;  // per frame, per cell
  std::vector<StreamCorrelation> correlations;
  CellIndex touched_cell;  // 1-based
};

/// Press-and-release script on one cell (or frames loaded from a file),
/// emitting per-cell conductance/force series and ghost-correlation flags.
StreamReplayResult run_stream_replay(const ExperimentConfig& config,
                                     const std::vector<MeasurementFrame>* recorded = nullptr);

/// Dispatches on config.scenario. Returns the process exit code: 0 on full
/// success, 2 when any solve failed to converge.
int run_scenario(const ExperimentConfig& config);

}  // namespace skinest
