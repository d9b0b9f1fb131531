#include "skinest/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skinest {

CellRegressionModel fit_cell_regression(const std::vector<CalibrationSample>& samples,
                                        FeatureKind feature) {
  if (samples.size() < 2) {
    throw std::invalid_argument("fit_cell_regression: need at least two samples");
  }
  auto feature_of = [feature](const CalibrationSample& s) {
    return feature == FeatureKind::SolvedConductance ? s.conductance : s.raw_v_r;
  };

  const double n = static_cast<double>(samples.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const CalibrationSample& s : samples) {
    mean_x += feature_of(s);
    mean_y += s.force_n;
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  for (const CalibrationSample& s : samples) {
    const double dx = feature_of(s) - mean_x;
    sxx += dx * dx;
    sxy += dx * (s.force_n - mean_y);
  }
  const double spread_scale = std::max(1.0, mean_x * mean_x);
  if (sxx <= 1e-24 * spread_scale) {
    throw std::invalid_argument(
        "fit_cell_regression: no calibration spread (all feature values equal)");
  }

  CellRegressionModel model;
  model.cell = samples.front().cell;
  model.feature = feature;
  model.slope = sxy / sxx;
  model.intercept = mean_y - model.slope * mean_x;
  return model;
}

namespace {

const CellRegressionModel& model_for(const std::vector<CellRegressionModel>& models,
                                     CellIndex cell, FeatureKind expected) {
  for (const CellRegressionModel& m : models) {
    if (m.cell == cell) {
      if (m.feature != expected) {
        throw std::invalid_argument("regression model has the wrong feature kind");
      }
      return m;
    }
  }
  throw std::invalid_argument("missing regression model for a cell");
}

}  // namespace

std::vector<double> predict_forces(const std::vector<double>& cell_mohm, GridSpec grid,
                                   const std::vector<CellRegressionModel>& models) {
  if (cell_mohm.size() != static_cast<std::size_t>(grid.cells())) {
    throw std::invalid_argument("predict_forces: grid size mismatch");
  }
  std::vector<double> forces(cell_mohm.size());
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * grid.cols + j;
      const CellRegressionModel& m =
          model_for(models, CellIndex{i, j}, FeatureKind::SolvedConductance);
      forces[idx] = std::max(0.0, m.predict(1.0 / cell_mohm[idx]));
    }
  }
  return forces;
}

std::vector<double> naive_force_baseline(const MeasurementFrame& frame,
                                         const std::vector<CellRegressionModel>& models) {
  if (!frame.complete()) throw std::invalid_argument("naive_force_baseline: incomplete frame");
  std::vector<double> forces(static_cast<std::size_t>(frame.rows * frame.cols));
  for (int i = 0; i < frame.rows; ++i) {
    for (int j = 0; j < frame.cols; ++j) {
      const CellRegressionModel& m = model_for(models, CellIndex{i, j}, FeatureKind::RawVoltage);
      forces[static_cast<std::size_t>(i) * frame.cols + j] =
          std::max(0.0, m.predict(frame.at(i, j, ConfigLabel::A).v_r));
    }
  }
  return forces;
}

double rmse(const std::vector<double>& estimated, const std::vector<double>& truth,
            const std::vector<CellIndex>& mask, int cols) {
  if (estimated.size() != truth.size()) {
    throw std::invalid_argument("rmse: size mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  if (mask.empty()) {
    for (std::size_t k = 0; k < estimated.size(); ++k) {
      const double d = estimated[k] - truth[k];
      sum += d * d;
    }
    count = estimated.size();
  } else {
    if (cols <= 0) throw std::invalid_argument("rmse: mask requires the column count");
    for (const CellIndex& cell : mask) {
      const std::size_t idx = static_cast<std::size_t>(cell.i) * cols + cell.j;
      if (idx >= estimated.size()) throw std::invalid_argument("rmse: mask cell out of range");
      const double d = estimated[idx] - truth[idx];
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("rmse: empty mask");
  return std::sqrt(sum / static_cast<double>(count));
}

StreamResult process_stream(const std::vector<MeasurementFrame>& frames, const DriveSetup& drive,
                            const std::vector<CellRegressionModel>& models,
                            const ObjectiveWeights& weights_lsq,
                            const ObjectiveWeights& weights_reg, const SolverOptions& options) {
  StreamResult result;
  if (frames.empty()) return result;
  const GridSpec grid = frames.front().grid();
  for (const MeasurementFrame& f : frames) {
    if (!(f.grid() == grid)) throw std::invalid_argument("process_stream: mixed grid sizes");
  }

  result.frames.reserve(frames.size());
  const StateEnsemble* warm = nullptr;
  StateEnsemble previous_good;
  for (const MeasurementFrame& frame : frames) {
    EstimateResult est = estimate(frame, drive, weights_lsq, weights_reg, options, warm);
    StreamFrameResult out;
    out.feasible = est.feasible;
    out.regularized = est.regularized;
    out.solver_failed = !(est.feasible.converged && est.regularized.converged);
    if (out.solver_failed && !result.frames.empty()) {
      // Carry the previous frame's outputs; keep warm-starting from the
      // last good solution.
      const StreamFrameResult& prev = result.frames.back();
      out.cell_mohm = prev.cell_mohm;
      out.conductance = prev.conductance;
      out.force_n = prev.force_n;
    } else {
      out.cell_mohm = est.cell_mohm;
      out.conductance.resize(out.cell_mohm.size());
      for (std::size_t k = 0; k < out.cell_mohm.size(); ++k) {
        out.conductance[k] = 1.0 / out.cell_mohm[k];
      }
      if (!models.empty()) {
        out.force_n = predict_forces(out.cell_mohm, grid, models);
      }
      previous_good = std::move(est.ensemble);
    }
    warm = previous_good.states.empty() ? nullptr : &previous_good;
    result.frames.push_back(std::move(out));
  }
  return result;
}

}  // namespace skinest
