#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "skinest/experiments.hpp"
#include "skinest/naive.hpp"
#include "skinest/netlist.hpp"
#include "skinest/optimizer.hpp"
#include "skinest/serialize.hpp"

using namespace skinest;

namespace {

bool parse_grid(const std::string& text, GridSpec& grid) {
  const auto x = text.find('x');
  if (x == std::string::npos) return false;
  try {
    grid.rows = std::stoi(text.substr(0, x));
    grid.cols = std::stoi(text.substr(x + 1));
  } catch (const std::exception&) {
    return false;
  }
  return grid.valid();
}

int run_simulate(const std::string& field_path, double noise_std, std::uint64_t seed,
                 const std::string& out_frame, const std::string& out_csv) {
  const ResistanceField field =
      field_from_json(nlohmann::json::parse(read_text_file(field_path)));
  const MeasurementFrame frame =
      synthesize_frame(field, DriveSetup{}, noise_std < 0.0 ? 0.0 : noise_std, seed);
  if (!out_frame.empty()) write_text_file(out_frame, frame_to_json(frame).dump(2) + "\n");
  if (!out_csv.empty()) write_text_file(out_csv, frame_to_csv(frame));
  if (out_frame.empty() && out_csv.empty()) std::fputs(frame_to_csv(frame).c_str(), stdout);
  return 0;
}

int run_estimate(const std::string& frame_path, const std::string& out_path,
                 const ObjectiveWeights& lsq, const ObjectiveWeights& reg) {
  MeasurementFrame frame;
  if (frame_path.size() > 4 && frame_path.substr(frame_path.size() - 4) == ".csv") {
    frame = frame_from_csv(read_text_file(frame_path));
  } else {
    frame = frame_from_json(nlohmann::json::parse(read_text_file(frame_path)));
  }
  const DriveSetup drive;
  const EstimateResult est = estimate(frame, drive, lsq, reg);
  const auto naive = naive_resistance(frame, drive);

  nlohmann::json out;
  out["rows"] = frame.rows;
  out["cols"] = frame.cols;
  out["cell_mohm"] = est.cell_mohm;
  out["cell_mohm_feasible"] = est.cell_mohm_feasible;
  out["naive_mohm"] = naive;
  out["feasible"] = report_to_json(est.feasible);
  out["regularized"] = report_to_json(est.regularized);
  const std::string text = out.dump(2) + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text_file(out_path, text);
  }
  return est.feasible.converged && est.regularized.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Resistive tactile-skin toolkit: crossbar readout simulation, two-stage\n"
      "contact-resistance estimation and the experiment harness."};
  app.require_subcommand(0, 1);

  // Scenario options (harness mode, the default when no subcommand is given).
  std::string config_path;
  std::string scenario_name_arg;
  std::string grid_arg;
  std::string out_dir;
  std::uint64_t seed = 0;
  double noise_std = -2.0;  // unset marker; -1 keeps the scenario default
  double alpha = -1.0, beta = -1.0, lambda = -1.0;
  bool serial = false;

  app.add_option("--config", config_path, "experiment config JSON file");
  app.add_option("--scenario", scenario_name_arg,
                 "wire-sweep | cell-sweep | ghost-demo | force-pipeline | stream-replay | custom");
  app.add_option("--grid", grid_arg, "grid size as NxM, e.g. 3x3");
  app.add_option("--seed", seed, "seed for synthetic frames");
  app.add_option("--noise-std", noise_std, "measurement noise std in volts");
  app.add_option("--out-dir", out_dir, "directory for CSV/JSON/heatmap outputs");
  app.add_option("--alpha", alpha, "stage-1 pair-discrepancy weight");
  app.add_option("--beta", beta, "stage-1 readout-chain weight");
  app.add_option("--lambda", lambda, "stage-2 wire-penalty weight");
  app.add_flag("--serial", serial, "run the serial reference kernels");
  std::string frames_path;
  app.add_option("--frames", frames_path,
                 "recorded frame sequence (JSON array) for stream-replay");

  // File-level interfaces.
  auto* simulate = app.add_subcommand("simulate", "synthesize a measurement frame from a field");
  std::string field_path, out_frame, out_csv;
  double sim_noise = 0.0;
  std::uint64_t sim_seed = 0;
  simulate->add_option("--field", field_path, "resistance field JSON")->required();
  simulate->add_option("--noise-std", sim_noise, "noise std in volts");
  simulate->add_option("--seed", sim_seed, "noise seed");
  simulate->add_option("--out-frame", out_frame, "frame JSON output path");
  simulate->add_option("--out-csv", out_csv, "frame CSV output path");

  auto* estimate_cmd =
      app.add_subcommand("estimate", "estimate contact resistances from a frame file");
  std::string frame_path, estimate_out;
  estimate_cmd->add_option("--frame", frame_path, "frame JSON or CSV")->required();
  estimate_cmd->add_option("--out", estimate_out, "report JSON output path");

  CLI11_PARSE(app, argc, argv);

  try {
    ObjectiveWeights lsq = default_lsq_weights();
    ObjectiveWeights reg = default_reg_weights();
    if (alpha >= 0.0) lsq.alpha = alpha;
    if (beta >= 0.0) lsq.beta = beta;
    if (lambda >= 0.0) reg.lambda = lambda;

    if (simulate->parsed()) {
      return run_simulate(field_path, sim_noise, sim_seed, out_frame, out_csv);
    }
    if (estimate_cmd->parsed()) {
      return run_estimate(frame_path, estimate_out, lsq, reg);
    }

    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = config_from_json_text(read_text_file(config_path));
    }
    if (!scenario_name_arg.empty()) {
      const auto s = parse_scenario(scenario_name_arg);
      if (!s) {
        std::fprintf(stderr, "unknown scenario '%s'\n", scenario_name_arg.c_str());
        return 1;
      }
      cfg.scenario = *s;
    } else if (config_path.empty()) {
      std::fprintf(stderr, "nothing to do: pass --scenario, --config or a subcommand\n");
      return 1;
    }
    if (!grid_arg.empty() && !parse_grid(grid_arg, cfg.grid)) {
      std::fprintf(stderr, "bad --grid '%s', expected NxM\n", grid_arg.c_str());
      return 1;
    }
    if (app.count("--seed") > 0) cfg.seed = seed;
    if (noise_std > -2.0) cfg.noise_std = noise_std;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (alpha >= 0.0) cfg.weights_lsq.alpha = alpha;
    if (beta >= 0.0) cfg.weights_lsq.beta = beta;
    if (lambda >= 0.0) cfg.weights_reg.lambda = lambda;
    if (serial) cfg.policy = ExecPolicy::Serial;

    std::optional<std::vector<MeasurementFrame>> recorded;
    if (!frames_path.empty()) {
      if (cfg.scenario != Scenario::StreamReplay) {
        std::fprintf(stderr, "--frames only applies to the stream-replay scenario\n");
        return 1;
      }
      const nlohmann::json doc = nlohmann::json::parse(read_text_file(frames_path));
      if (!doc.is_array() || doc.empty()) {
        std::fprintf(stderr, "malformed frame file: expected a non-empty JSON array\n");
        return 1;
      }
      recorded.emplace();
      for (const auto& entry : doc) recorded->push_back(frame_from_json(entry));
    }

    cfg.finalize();
    std::printf("scenario %s (seed %llu)%s\n", scenario_name(cfg.scenario),
                static_cast<unsigned long long>(cfg.seed),
                cfg.out_dir.empty() ? "" : (", writing to " + cfg.out_dir).c_str());
    int code = 0;
    if (recorded) {
      const StreamReplayResult r = run_stream_replay(cfg, &*recorded);
      for (const auto& f : r.stream.frames) {
        if (f.solver_failed) code = 2;
      }
    } else {
      code = run_scenario(cfg);
    }
    if (code == 0) {
      std::printf("done\n");
    } else {
      std::printf("finished with non-converged solves (exit %d)\n", code);
    }
    return code;
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  }
}
