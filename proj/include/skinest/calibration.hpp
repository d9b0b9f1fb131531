#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "skinest/optimizer.hpp"
#include "skinest/types.hpp"

namespace skinest {

/// Synthetic contact law used by the desk experiments: conductance affine
/// in force, so R(F) = r0 / (1 + c·F) and R(0) is the unpressed value.
struct ForceLaw {
  double r0_mohm = 1.0;
  double c_per_newton = 0.5;

  double resistance(double force_n) const { return r0_mohm / (1.0 + c_per_newton * force_n); }
  double conductance(double force_n) const { return (1.0 + c_per_newton * force_n) / r0_mohm; }
  double force_for_resistance(double r_mohm) const {
    return (r0_mohm / r_mohm - 1.0) / c_per_newton;
  }
};

struct CalibrationSample {
  CellIndex cell;
  double force_n = 0.0;
  double conductance = 0.0;  // 1/MΩ, solved
  double raw_v_r = 0.0;      // V, configuration-A reading
};

enum class FeatureKind { SolvedConductance, RawVoltage };

/// Per-cell affine force model: force = slope * feature + intercept.
struct CellRegressionModel {
  CellIndex cell;
  FeatureKind feature = FeatureKind::SolvedConductance;
  double slope = 0.0;      // N·MΩ for conductance features, N/V for raw voltage
  double intercept = 0.0;  // N

  double predict(double feature_value) const { return slope * feature_value + intercept; }
};

/// Ordinary least squares over the samples' chosen feature. Throws
/// std::invalid_argument with fewer than two samples or when all feature
/// values coincide (no calibration spread).
CellRegressionModel fit_cell_regression(const std::vector<CalibrationSample>& samples,
                                        FeatureKind feature);

/// Per-cell force from solved resistances, clamped below at 0 N. Models
/// must use SolvedConductance features and cover every cell.
std::vector<double> predict_forces(const std::vector<double>& cell_mohm, GridSpec grid,
                                   const std::vector<CellRegressionModel>& models);

/// The raw-voltage baseline: per-cell force from the configuration-A v_r,
/// clamped below at 0 N. Models must use RawVoltage features.
std::vector<double> naive_force_baseline(const MeasurementFrame& frame,
                                         const std::vector<CellRegressionModel>& models);

/// Root mean square error over the masked cells (all cells when the mask is
/// empty). Throws std::invalid_argument on size mismatch or an empty
/// effective mask.
double rmse(const std::vector<double>& estimated, const std::vector<double>& truth,
            const std::vector<CellIndex>& mask = {}, int cols = 0);

struct StreamFrameResult {
  std::vector<double> cell_mohm;
  std::vector<double> conductance;
  std::vector<double> force_n;
  SolveReport feasible;
  SolveReport regularized;
  bool solver_failed = false;  // outputs carried forward from the previous frame
};

struct StreamResult {
  std::vector<StreamFrameResult> frames;
};

/// Sequential estimation over an ordered frame stream; each solve warm
/// starts from the previous solution. A frame whose solve fails to converge
/// is flagged and the previous outputs are carried forward.
StreamResult process_stream(const std::vector<MeasurementFrame>& frames, const DriveSetup& drive,
                            const std::vector<CellRegressionModel>& models,
                            const ObjectiveWeights& weights_lsq = default_lsq_weights(),
                            const ObjectiveWeights& weights_reg = default_reg_weights(),
                            const SolverOptions& options = {});

}  // namespace skinest
