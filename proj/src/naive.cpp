#include "skinest/naive.hpp"

#include <algorithm>
#include <stdexcept>

namespace skinest {

double single_reading_resistance(const Reading& reading, const DriveSetup& drive) {
  if (reading.v_r <= 0.0) return kOpenCircuitMohm;  // no measurable current: unpressed
  const double current = reading.v_r / drive.r_ref_ground;  // µA
  const double resistance = (reading.v_s - reading.v_r) / current;
  return std::clamp(resistance, kMinResistanceMohm, kOpenCircuitMohm);
}

std::vector<double> naive_resistance_for_config(const MeasurementFrame& frame,
                                                const DriveSetup& drive, ConfigLabel config) {
  if (!frame.complete()) throw std::invalid_argument("naive_resistance: incomplete frame");
  std::vector<double> grid(static_cast<std::size_t>(frame.rows * frame.cols));
  for (int i = 0; i < frame.rows; ++i) {
    for (int j = 0; j < frame.cols; ++j) {
      grid[static_cast<std::size_t>(i) * frame.cols + j] =
          single_reading_resistance(frame.at(i, j, config), drive);
    }
  }
  return grid;
}

std::vector<double> naive_resistance(const MeasurementFrame& frame, const DriveSetup& drive) {
  const auto top_driven = naive_resistance_for_config(frame, drive, ConfigLabel::A);
  const auto bottom_driven = naive_resistance_for_config(frame, drive, ConfigLabel::C);
  std::vector<double> grid(top_driven.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid[k] = std::clamp(0.5 * (top_driven[k] + bottom_driven[k]), kMinResistanceMohm,
                         kOpenCircuitMohm);
  }
  return grid;
}

}  // namespace skinest
