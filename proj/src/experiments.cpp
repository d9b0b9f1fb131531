#include "skinest/experiments.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "skinest/naive.hpp"
#include "skinest/netlist.hpp"
#include "skinest/serialize.hpp"

namespace skinest {

namespace fs = std::filesystem;
using nlohmann::json;

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::WireSweep: return "wire-sweep";
    case Scenario::CellSweep: return "cell-sweep";
    case Scenario::GhostDemo: return "ghost-demo";
    case Scenario::ForcePipeline: return "force-pipeline";
    case Scenario::StreamReplay: return "stream-replay";
    case Scenario::Custom: return "custom";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::WireSweep, Scenario::CellSweep, Scenario::GhostDemo,
                     Scenario::ForcePipeline, Scenario::StreamReplay, Scenario::Custom}) {
    if (name == scenario_name(s)) return s;
  }
  return std::nullopt;
}

void ExperimentConfig::finalize() {
  if (grid.rows == 0 && grid.cols == 0) {
    const bool sweep = scenario == Scenario::WireSweep || scenario == Scenario::CellSweep;
    grid = sweep ? GridSpec{3, 3} : GridSpec{2, 2};
  }
  if (!grid.valid()) throw std::invalid_argument("experiment config: invalid grid");
  if (!drive.valid()) throw std::invalid_argument("experiment config: invalid drive setup");
  if (noise_std < 0.0) {
    // The correlation demo needs measurement noise to be meaningful; the
    // accuracy scenarios default to clean frames.
    noise_std = scenario == Scenario::StreamReplay ? 1e-3 : 0.0;
  }
  if (pressed_mohm <= 0.0 || unpressed_mohm <= 0.0 || wire_mohm <= 0.0) {
    throw std::invalid_argument("experiment config: resistances must be positive");
  }

  if (sweep_values.empty()) {
    if (scenario == Scenario::WireSweep) sweep_values = {0.0001, 0.001, 0.005, 0.02, 0.041};
    if (scenario == Scenario::CellSweep) sweep_values = {0.01, 0.1, 0.3, 0.5, 0.7};
  }
  for (double v : sweep_values) {
    if (v <= 0.0) throw std::invalid_argument("experiment config: sweep values must be positive");
  }

  if (pressed_cells.empty()) {
    switch (scenario) {
      case Scenario::ForcePipeline:
        pressed_cells = {{1, 1}, {2, 1}};
        break;
      case Scenario::StreamReplay:
        pressed_cells = {{2, 2}};
        break;
      default:
        // Three corners of a rectangle: the canonical ghosting pattern.
        pressed_cells = {{1, 1}, {1, grid.cols}, {grid.rows, 1}};
        break;
    }
    // A 1xM or Nx1 strip cannot host three distinct corners.
    std::sort(pressed_cells.begin(), pressed_cells.end(),
              [](CellIndex a, CellIndex b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    pressed_cells.erase(std::unique(pressed_cells.begin(), pressed_cells.end()),
                        pressed_cells.end());
  }
  for (const CellIndex& c : pressed_cells) {
    if (c.i < 1 || c.i > grid.rows || c.j < 1 || c.j > grid.cols) {
      throw std::invalid_argument("experiment config: pressed cell outside the grid");
    }
  }
  if (scenario == Scenario::ForcePipeline && multi_touch_forces.size() != pressed_cells.size()) {
    throw std::invalid_argument(
        "experiment config: multi_touch_forces must match pressed_cells in length");
  }
  if (stream_length < 1) throw std::invalid_argument("experiment config: stream_length < 1");
}

ResistanceField ghost_field(GridSpec grid, const std::vector<CellIndex>& pressed_zero_based,
                            double pressed_mohm, double unpressed_mohm, double wire_mohm) {
  ResistanceField field(grid, unpressed_mohm, wire_mohm);
  for (const CellIndex& c : pressed_zero_based) {
    field.cell_at(c.i, c.j) = pressed_mohm;
  }
  return field;
}

ResistanceField field_for_forces(GridSpec grid, const ForceLaw& law,
                                 const std::vector<double>& forces_n, double wire_mohm) {
  if (forces_n.size() != static_cast<std::size_t>(grid.cells())) {
    throw std::invalid_argument("field_for_forces: force grid size mismatch");
  }
  ResistanceField field(grid, law.r0_mohm, wire_mohm);
  for (std::size_t k = 0; k < forces_n.size(); ++k) {
    field.cell[k] = law.resistance(forces_n[k]);
  }
  return field;
}

// --- config (de)serialization ------------------------------------------------

ExperimentConfig config_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("grid")) {
    cfg.grid.rows = j["grid"].value("rows", 0);
    cfg.grid.cols = j["grid"].value("cols", 0);
  }
  if (j.contains("drive")) {
    const json& d = j["drive"];
    cfg.drive.v_dd = d.value("v_dd", cfg.drive.v_dd);
    cfg.drive.r_ref_source = d.value("r_ref_source", cfg.drive.r_ref_source);
    cfg.drive.r_ref_ground = d.value("r_ref_ground", cfg.drive.r_ref_ground);
  }
  if (j.contains("scenario")) {
    const auto s = parse_scenario(j["scenario"].get<std::string>());
    if (!s) throw std::invalid_argument("unknown scenario in config");
    cfg.scenario = *s;
  }
  if (j.contains("sweep_values")) cfg.sweep_values = j["sweep_values"].get<std::vector<double>>();
  if (j.contains("pressed_cells")) {
    cfg.pressed_cells.clear();
    for (const json& cell : j["pressed_cells"]) {
      if (!cell.is_array() || cell.size() != 2) {
        throw std::invalid_argument("pressed_cells entries must be [i, j] pairs");
      }
      cfg.pressed_cells.push_back({cell[0].get<int>(), cell[1].get<int>()});
    }
  }
  cfg.pressed_mohm = j.value("pressed_mohm", cfg.pressed_mohm);
  cfg.unpressed_mohm = j.value("unpressed_mohm", cfg.unpressed_mohm);
  cfg.wire_mohm = j.value("wire_mohm", cfg.wire_mohm);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  auto load_weights = [&](const char* key, ObjectiveWeights& w) {
    if (!j.contains(key)) return;
    w.alpha = j[key].value("alpha", w.alpha);
    w.beta = j[key].value("beta", w.beta);
    w.lambda = j[key].value("lambda", w.lambda);
  };
  load_weights("weights_lsq", cfg.weights_lsq);
  load_weights("weights_reg", cfg.weights_reg);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("parallel")) {
    cfg.policy = j["parallel"].get<bool>() ? ExecPolicy::Parallel : ExecPolicy::Serial;
  }
  if (j.contains("force_law")) {
    cfg.force_law.r0_mohm = j["force_law"].value("r0_mohm", cfg.force_law.r0_mohm);
    cfg.force_law.c_per_newton = j["force_law"].value("c_per_newton", cfg.force_law.c_per_newton);
  }
  if (j.contains("calibration_forces")) {
    cfg.calibration_forces = j["calibration_forces"].get<std::vector<double>>();
  }
  if (j.contains("multi_touch_forces")) {
    cfg.multi_touch_forces = j["multi_touch_forces"].get<std::vector<double>>();
  }
  cfg.stream_length = j.value("stream_length", cfg.stream_length);
  return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["grid"] = {{"rows", cfg.grid.rows}, {"cols", cfg.grid.cols}};
  j["drive"] = {{"v_dd", cfg.drive.v_dd},
                {"r_ref_source", cfg.drive.r_ref_source},
                {"r_ref_ground", cfg.drive.r_ref_ground}};
  j["scenario"] = scenario_name(cfg.scenario);
  j["sweep_values"] = cfg.sweep_values;
  json pressed = json::array();
  for (const CellIndex& c : cfg.pressed_cells) pressed.push_back({c.i, c.j});
  j["pressed_cells"] = std::move(pressed);
  j["pressed_mohm"] = cfg.pressed_mohm;
  j["unpressed_mohm"] = cfg.unpressed_mohm;
  j["wire_mohm"] = cfg.wire_mohm;
  j["noise_std"] = cfg.noise_std;
  j["weights_lsq"] = {{"alpha", cfg.weights_lsq.alpha},
                      {"beta", cfg.weights_lsq.beta},
                      {"lambda", cfg.weights_lsq.lambda}};
  j["weights_reg"] = {{"alpha", cfg.weights_reg.alpha},
                      {"beta", cfg.weights_reg.beta},
                      {"lambda", cfg.weights_reg.lambda}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["parallel"] = cfg.policy == ExecPolicy::Parallel;
  j["force_law"] = {{"r0_mohm", cfg.force_law.r0_mohm},
                    {"c_per_newton", cfg.force_law.c_per_newton}};
  j["calibration_forces"] = cfg.calibration_forces;
  j["multi_touch_forces"] = cfg.multi_touch_forces;
  j["stream_length"] = cfg.stream_length;
  return j.dump(2) + "\n";
}

// --- rendering and output helpers ---------------------------------------------

void render_heatmap(const std::vector<double>& values, GridSpec grid, double scale_min,
                    double scale_max, const std::string& path) {
  if (values.size() != static_cast<std::size_t>(grid.cells())) {
    throw std::invalid_argument("render_heatmap: value grid size mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("render_heatmap: non-finite value");
  }
  constexpr int kBlock = 24;
  const int width = grid.cols * kBlock;
  const int height = grid.rows * kBlock;

  std::vector<int> gray(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (scale_max <= scale_min) {
      gray[k] = 128;
      continue;
    }
    const double brightness =
        std::clamp((scale_max - values[k]) / (scale_max - scale_min), 0.0, 1.0);
    gray[k] = static_cast<int>(std::lround(brightness * 255.0));
  }

  std::ostringstream out;
  out << "P2\n" << width << ' ' << height << "\n255\n";
  for (int py = 0; py < height; ++py) {
    const int i = py / kBlock;
    for (int px = 0; px < width; ++px) {
      const int j = px / kBlock;
      out << gray[static_cast<std::size_t>(i) * grid.cols + j];
      out << (px + 1 == width ? '\n' : ' ');
    }
  }
  write_text_file(path, out.str());
}

namespace {

std::vector<CellIndex> zero_based(const std::vector<CellIndex>& one_based) {
  std::vector<CellIndex> cells;
  cells.reserve(one_based.size());
  for (const CellIndex& c : one_based) cells.push_back({c.i - 1, c.j - 1});
  return cells;
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string point_dir_name(int index, double value) {
  std::ostringstream name;
  name << "point_" << std::setw(2) << std::setfill('0') << index << "_" << format_double(value);
  return name.str();
}

void write_grid_heatmaps(const std::string& dir, GridSpec grid, double scale_max,
                         const std::vector<double>& truth, const std::vector<double>& naive,
                         const std::vector<double>& feasible,
                         const std::vector<double>& regularized) {
  ensure_dir(dir);
  render_heatmap(truth, grid, 0.0, scale_max, dir + "/truth.pgm");
  render_heatmap(naive, grid, 0.0, scale_max, dir + "/naive.pgm");
  render_heatmap(feasible, grid, 0.0, scale_max, dir + "/feasible.pgm");
  render_heatmap(regularized, grid, 0.0, scale_max, dir + "/optimal.pgm");
}

SolverOptions solver_options(const ExperimentConfig& cfg) {
  SolverOptions opts;
  opts.policy = cfg.policy;
  return opts;
}

json record_to_json(const SweepPointRecord& r) {
  json j;
  j["value_mohm"] = r.value;
  j["rmse_naive"] = r.rmse_naive;
  j["rmse_feasible"] = r.rmse_feasible;
  j["rmse_regularized"] = r.rmse_regularized;
  j["rmse_naive_pressed"] = r.rmse_naive_pressed;
  j["feasible_iterations"] = r.feasible_iterations;
  j["regularized_iterations"] = r.regularized_iterations;
  j["converged"] = r.converged;
  return j;
}

SweepResult run_sweep(const ExperimentConfig& input, bool vary_wire) {
  ExperimentConfig cfg = input;
  cfg.finalize();
  const auto pressed = zero_based(cfg.pressed_cells);
  ensure_dir(cfg.out_dir);

  SweepResult result;
  std::ostringstream csv;
  csv << "index,value_mohm,rmse_naive,rmse_feasible,rmse_regularized,rmse_naive_pressed,"
         "feasible_iterations,regularized_iterations,converged\n";

  for (std::size_t p = 0; p < cfg.sweep_values.size(); ++p) {
    const double value = cfg.sweep_values[p];
    const double pressed_mohm = vary_wire ? cfg.pressed_mohm : value;
    const double wire_mohm = vary_wire ? value : cfg.wire_mohm;
    const ResistanceField truth =
        ghost_field(cfg.grid, pressed, pressed_mohm, cfg.unpressed_mohm, wire_mohm);
    const MeasurementFrame frame = synthesize_frame(truth, cfg.drive, cfg.noise_std,
                                                    cfg.seed + static_cast<std::uint64_t>(p),
                                                    cfg.policy);

    const std::vector<double> naive = naive_resistance(frame, cfg.drive);
    const EstimateResult est =
        estimate(frame, cfg.drive, cfg.weights_lsq, cfg.weights_reg, solver_options(cfg));

    SweepPointRecord record;
    record.value = value;
    record.rmse_naive = rmse(naive, truth.cell);
    record.rmse_feasible = rmse(est.cell_mohm_feasible, truth.cell);
    record.rmse_regularized = rmse(est.cell_mohm, truth.cell);
    record.rmse_naive_pressed = rmse(naive, truth.cell, pressed, cfg.grid.cols);
    record.feasible_iterations = est.feasible.iterations;
    record.regularized_iterations = est.regularized.iterations;
    record.converged = est.feasible.converged && est.regularized.converged;
    result.records.push_back(record);
    result.all_converged = result.all_converged && record.converged;

    csv << p << ',' << format_double(value) << ',' << format_double(record.rmse_naive) << ','
        << format_double(record.rmse_feasible) << ',' << format_double(record.rmse_regularized)
        << ',' << format_double(record.rmse_naive_pressed) << ',' << record.feasible_iterations
        << ',' << record.regularized_iterations << ',' << (record.converged ? 1 : 0) << '\n';

    if (!cfg.out_dir.empty()) {
      write_grid_heatmaps(cfg.out_dir + "/" + point_dir_name(static_cast<int>(p), value),
                          cfg.grid, cfg.unpressed_mohm, truth.cell, naive,
                          est.cell_mohm_feasible, est.cell_mohm);
    }
  }

  if (!cfg.out_dir.empty()) {
    write_text_file(cfg.out_dir + "/records.csv", csv.str());
    json report;
    report["scenario"] = scenario_name(cfg.scenario);
    report["config"] = json::parse(config_to_json_text(cfg));
    report["records"] = json::array();
    for (const auto& r : result.records) report["records"].push_back(record_to_json(r));
    report["all_converged"] = result.all_converged;
    write_text_file(cfg.out_dir + "/report.json", report.dump(2) + "\n");
  }
  return result;
}

double pearson_abs(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    mean_a += a[k];
    mean_b += b[k];
  }
  mean_a /= n;
  mean_b /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - mean_a;
    const double db = b[k] - mean_b;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  // A flat series carries no ghost signal; report zero correlation.
  if (saa <= 1e-24 || sbb <= 1e-24) return 0.0;
  return std::abs(sab / std::sqrt(saa * sbb));
}

}  // namespace

SweepResult run_wire_sweep(const ExperimentConfig& config) { return run_sweep(config, true); }

SweepResult run_cell_sweep(const ExperimentConfig& config) { return run_sweep(config, false); }

GhostDemoResult run_ghost_demo(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  cfg.finalize();
  const auto pressed = zero_based(cfg.pressed_cells);
  const ResistanceField truth =
      ghost_field(cfg.grid, pressed, cfg.pressed_mohm, cfg.unpressed_mohm, cfg.wire_mohm);
  const MeasurementFrame frame =
      synthesize_frame(truth, cfg.drive, cfg.noise_std, cfg.seed, cfg.policy);

  GhostDemoResult result;
  result.truth = truth.cell;
  result.naive = naive_resistance(frame, cfg.drive);
  const EstimateResult est =
      estimate(frame, cfg.drive, cfg.weights_lsq, cfg.weights_reg, solver_options(cfg));
  result.feasible = est.cell_mohm_feasible;
  result.regularized = est.cell_mohm;
  result.rmse_naive = rmse(result.naive, result.truth);
  result.rmse_feasible = rmse(result.feasible, result.truth);
  result.rmse_regularized = rmse(result.regularized, result.truth);
  result.feasible_report = est.feasible;
  result.regularized_report = est.regularized;

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    std::ostringstream csv;
    csv << "i,j,truth_mohm,naive_mohm,feasible_mohm,optimal_mohm\n";
    for (int i = 0; i < cfg.grid.rows; ++i) {
      for (int j = 0; j < cfg.grid.cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cfg.grid.cols + j;
        csv << (i + 1) << ',' << (j + 1) << ',' << format_double(result.truth[k]) << ','
            << format_double(result.naive[k]) << ',' << format_double(result.feasible[k]) << ','
            << format_double(result.regularized[k]) << '\n';
      }
    }
    write_text_file(cfg.out_dir + "/cells.csv", csv.str());
    write_grid_heatmaps(cfg.out_dir, cfg.grid, cfg.unpressed_mohm, result.truth, result.naive,
                        result.feasible, result.regularized);
    json report;
    report["scenario"] = scenario_name(cfg.scenario);
    report["config"] = json::parse(config_to_json_text(cfg));
    report["rmse_naive"] = result.rmse_naive;
    report["rmse_feasible"] = result.rmse_feasible;
    report["rmse_regularized"] = result.rmse_regularized;
    report["feasible"] = report_to_json(result.feasible_report);
    report["regularized"] = report_to_json(result.regularized_report);
    write_text_file(cfg.out_dir + "/report.json", report.dump(2) + "\n");
  }
  return result;
}

namespace {

struct CalibrationData {
  std::vector<CellRegressionModel> solved_models;
  std::vector<CellRegressionModel> raw_models;
  std::vector<CalibrationSample> samples;
};

/// Single-touch passes: each cell in turn is pressed at each calibration
/// force while the rest of the skin idles at the law's rest resistance.
CalibrationData calibrate(const ExperimentConfig& cfg, const std::vector<double>& forces) {
  CalibrationData data;
  std::uint64_t pass = 0;
  for (int i = 0; i < cfg.grid.rows; ++i) {
    for (int j = 0; j < cfg.grid.cols; ++j) {
      std::vector<CalibrationSample> cell_samples;
      for (double force : forces) {
        std::vector<double> force_grid(static_cast<std::size_t>(cfg.grid.cells()), 0.0);
        force_grid[static_cast<std::size_t>(i) * cfg.grid.cols + j] = force;
        const ResistanceField field =
            field_for_forces(cfg.grid, cfg.force_law, force_grid, cfg.wire_mohm);
        const MeasurementFrame frame = synthesize_frame(
            field, cfg.drive, cfg.noise_std, cfg.seed + 1000 + pass++, cfg.policy);
        const EstimateResult est =
            estimate(frame, cfg.drive, cfg.weights_lsq, cfg.weights_reg, solver_options(cfg));
        CalibrationSample sample;
        sample.cell = CellIndex{i, j};
        sample.force_n = force;
        sample.conductance =
            1.0 / est.cell_mohm[static_cast<std::size_t>(i) * cfg.grid.cols + j];
        sample.raw_v_r = frame.at(i, j, ConfigLabel::A).v_r;
        cell_samples.push_back(sample);
        data.samples.push_back(sample);
      }
      data.solved_models.push_back(
          fit_cell_regression(cell_samples, FeatureKind::SolvedConductance));
      data.raw_models.push_back(fit_cell_regression(cell_samples, FeatureKind::RawVoltage));
    }
  }
  return data;
}

json model_to_json(const CellRegressionModel& m) {
  json j;
  j["i"] = m.cell.i + 1;
  j["j"] = m.cell.j + 1;
  j["feature"] = m.feature == FeatureKind::SolvedConductance ? "solved_conductance" : "raw_voltage";
  j["slope"] = m.slope;
  j["intercept"] = m.intercept;
  return j;
}

}  // namespace

ForcePipelineResult run_force_pipeline(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  cfg.finalize();
  const auto pressed = zero_based(cfg.pressed_cells);

  const CalibrationData calib = calibrate(cfg, cfg.calibration_forces);

  ForcePipelineResult result;
  result.solved_models = calib.solved_models;
  result.raw_models = calib.raw_models;

  result.truth_force.assign(static_cast<std::size_t>(cfg.grid.cells()), 0.0);
  for (std::size_t k = 0; k < pressed.size(); ++k) {
    result.truth_force[static_cast<std::size_t>(pressed[k].i) * cfg.grid.cols + pressed[k].j] =
        cfg.multi_touch_forces[k];
  }
  const ResistanceField field =
      field_for_forces(cfg.grid, cfg.force_law, result.truth_force, cfg.wire_mohm);
  const MeasurementFrame frame =
      synthesize_frame(field, cfg.drive, cfg.noise_std, cfg.seed, cfg.policy);

  const EstimateResult est =
      estimate(frame, cfg.drive, cfg.weights_lsq, cfg.weights_reg, solver_options(cfg));
  result.solved_force = predict_forces(est.cell_mohm, cfg.grid, result.solved_models);
  result.raw_force = naive_force_baseline(frame, result.raw_models);
  result.rmse_solved = rmse(result.solved_force, result.truth_force);
  result.rmse_raw = rmse(result.raw_force, result.truth_force);
  result.improvement_pct =
      result.rmse_raw > 0.0 ? (result.rmse_raw - result.rmse_solved) / result.rmse_raw * 100.0
                            : 0.0;

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    std::ostringstream calib_csv;
    calib_csv << "i,j,force_n,conductance,raw_v_r\n";
    for (const CalibrationSample& s : calib.samples) {
      calib_csv << (s.cell.i + 1) << ',' << (s.cell.j + 1) << ',' << format_double(s.force_n)
                << ',' << format_double(s.conductance) << ',' << format_double(s.raw_v_r) << '\n';
    }
    write_text_file(cfg.out_dir + "/calibration.csv", calib_csv.str());

    std::ostringstream forces_csv;
    forces_csv << "i,j,truth_n,solved_n,raw_n\n";
    for (int i = 0; i < cfg.grid.rows; ++i) {
      for (int j = 0; j < cfg.grid.cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cfg.grid.cols + j;
        forces_csv << (i + 1) << ',' << (j + 1) << ',' << format_double(result.truth_force[k])
                   << ',' << format_double(result.solved_force[k]) << ','
                   << format_double(result.raw_force[k]) << '\n';
      }
    }
    write_text_file(cfg.out_dir + "/forces.csv", forces_csv.str());

    json report;
    report["scenario"] = scenario_name(cfg.scenario);
    report["config"] = json::parse(config_to_json_text(cfg));
    report["rmse_solved"] = result.rmse_solved;
    report["rmse_raw"] = result.rmse_raw;
    report["improvement_pct"] = result.improvement_pct;
    report["solved_models"] = json::array();
    report["raw_models"] = json::array();
    for (const auto& m : result.solved_models) report["solved_models"].push_back(model_to_json(m));
    for (const auto& m : result.raw_models) report["raw_models"].push_back(model_to_json(m));
    write_text_file(cfg.out_dir + "/report.json", report.dump(2) + "\n");
  }
  return result;
}

StreamReplayResult run_stream_replay(const ExperimentConfig& input,
                                     const std::vector<MeasurementFrame>* recorded) {
  ExperimentConfig cfg = input;
  if (recorded != nullptr) {
    if (recorded->empty()) throw std::invalid_argument("stream replay: no recorded frames");
    cfg.grid = recorded->front().grid();
  }
  cfg.finalize();

  StreamReplayResult result;
  result.touched_cell = cfg.pressed_cells.front();
  const CellIndex touched{result.touched_cell.i - 1, result.touched_cell.j - 1};

  std::vector<MeasurementFrame> frames;
  std::vector<CellRegressionModel> models;
  if (recorded != nullptr) {
    frames = *recorded;
  } else {
    // Press-and-release profile: rest, ramp up, hold, ramp down, rest.
    const double peak = cfg.multi_touch_forces.front();
    const int length = cfg.stream_length;
    result.touch_profile.resize(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
      const double phase = static_cast<double>(t) / static_cast<double>(length - 1);
      double level = 0.0;
      if (phase >= 0.2 && phase < 0.4) level = (phase - 0.2) / 0.2;
      else if (phase >= 0.4 && phase < 0.6) level = 1.0;
      else if (phase >= 0.6 && phase < 0.8) level = (0.8 - phase) / 0.2;
      result.touch_profile[static_cast<std::size_t>(t)] = peak * level;
    }
    for (int t = 0; t < length; ++t) {
      std::vector<double> force_grid(static_cast<std::size_t>(cfg.grid.cells()), 0.0);
      force_grid[static_cast<std::size_t>(touched.i) * cfg.grid.cols + touched.j] =
          result.touch_profile[static_cast<std::size_t>(t)];
      const ResistanceField field =
          field_for_forces(cfg.grid, cfg.force_law, force_grid, cfg.wire_mohm);
      MeasurementFrame frame = synthesize_frame(field, cfg.drive, cfg.noise_std,
                                                cfg.seed + static_cast<std::uint64_t>(t),
                                                cfg.policy);
      frame.timestamp = t;
      frames.push_back(std::move(frame));
    }
    models = calibrate(cfg, {0.0, 0.5 * cfg.multi_touch_forces.front(),
                             cfg.multi_touch_forces.front()})
                 .solved_models;
  }

  result.stream = process_stream(frames, cfg.drive, models, cfg.weights_lsq, cfg.weights_reg,
                                 solver_options(cfg));

  result.raw_v_r.reserve(frames.size());
  for (const MeasurementFrame& frame : frames) {
    std::vector<double> row(static_cast<std::size_t>(cfg.grid.cells()));
    for (int i = 0; i < cfg.grid.rows; ++i) {
      for (int j = 0; j < cfg.grid.cols; ++j) {
        row[static_cast<std::size_t>(i) * cfg.grid.cols + j] = frame.at(i, j, ConfigLabel::A).v_r;
      }
    }
    result.raw_v_r.push_back(std::move(row));
  }

  auto series_of = [&](const std::vector<std::vector<double>>& table, CellIndex cell) {
    std::vector<double> series;
    series.reserve(table.size());
    for (const auto& row : table) {
      series.push_back(row[static_cast<std::size_t>(cell.i) * cfg.grid.cols + cell.j]);
    }
    return series;
  };
  std::vector<std::vector<double>> conductance_table;
  conductance_table.reserve(result.stream.frames.size());
  for (const auto& f : result.stream.frames) conductance_table.push_back(f.conductance);

  const auto raw_touch = series_of(result.raw_v_r, touched);
  const auto solved_touch = series_of(conductance_table, touched);
  for (int i = 0; i < cfg.grid.rows; ++i) {
    for (int j = 0; j < cfg.grid.cols; ++j) {
      const CellIndex cell{i, j};
      if (cell == touched || (i != touched.i && j != touched.j)) continue;
      StreamCorrelation corr;
      corr.cell = CellIndex{i + 1, j + 1};
      corr.corr_raw = pearson_abs(series_of(result.raw_v_r, cell), raw_touch);
      corr.corr_solved = pearson_abs(series_of(conductance_table, cell), solved_touch);
      result.correlations.push_back(corr);
    }
  }

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    std::ostringstream csv;
    csv << "frame,i,j,raw_v_r,conductance,force_n,solver_failed\n";
    for (std::size_t t = 0; t < result.stream.frames.size(); ++t) {
      const StreamFrameResult& f = result.stream.frames[t];
      for (int i = 0; i < cfg.grid.rows; ++i) {
        for (int j = 0; j < cfg.grid.cols; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * cfg.grid.cols + j;
          csv << t << ',' << (i + 1) << ',' << (j + 1) << ','
              << format_double(result.raw_v_r[t][k]) << ',' << format_double(f.conductance[k])
              << ',' << format_double(f.force_n.empty() ? 0.0 : f.force_n[k]) << ','
              << (f.solver_failed ? 1 : 0) << '\n';
        }
      }
    }
    write_text_file(cfg.out_dir + "/series.csv", csv.str());

    json report;
    report["scenario"] = scenario_name(cfg.scenario);
    report["config"] = json::parse(config_to_json_text(cfg));
    report["touched_cell"] = {result.touched_cell.i, result.touched_cell.j};
    report["touch_profile"] = result.touch_profile;
    report["correlations"] = json::array();
    for (const StreamCorrelation& c : result.correlations) {
      json entry;
      entry["cell"] = {c.cell.i, c.cell.j};
      entry["corr_raw"] = c.corr_raw;
      entry["corr_solved"] = c.corr_solved;
      report["correlations"].push_back(std::move(entry));
    }
    write_text_file(cfg.out_dir + "/report.json", report.dump(2) + "\n");
  }
  return result;
}

int run_scenario(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  cfg.finalize();
  switch (cfg.scenario) {
    case Scenario::WireSweep:
      return run_wire_sweep(cfg).all_converged ? 0 : 2;
    case Scenario::CellSweep:
      return run_cell_sweep(cfg).all_converged ? 0 : 2;
    case Scenario::GhostDemo:
    case Scenario::Custom: {
      const GhostDemoResult r = run_ghost_demo(cfg);
      return r.feasible_report.converged && r.regularized_report.converged ? 0 : 2;
    }
    case Scenario::ForcePipeline: {
      run_force_pipeline(cfg);
      return 0;
    }
    case Scenario::StreamReplay: {
      const StreamReplayResult r = run_stream_replay(cfg);
      for (const auto& f : r.stream.frames) {
        if (f.solver_failed) return 2;
      }
      return 0;
    }
  }
  return 1;
}

}  // namespace skinest
