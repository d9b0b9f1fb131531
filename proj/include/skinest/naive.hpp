#pragma once

#include <vector>

#include "skinest/types.hpp"

namespace skinest {

/// Ohm's-law inversion of a single reading, assuming the whole drop beyond
/// the reference resistors is the contact resistance (zero wires). Clamped
/// to [kMinResistanceMohm, kOpenCircuitMohm]; a non-positive v_r means no
/// measurable current and maps to the open-circuit value.
double single_reading_resistance(const Reading& reading, const DriveSetup& drive);

/// Per-cell Ohm's-law grid from one configuration's readings (row-major).
std::vector<double> naive_resistance_for_config(const MeasurementFrame& frame,
                                                const DriveSetup& drive, ConfigLabel config);

/// The ghosting-prone baseline: per-cell two-terminal estimate, averaging
/// the top-driven (A) and bottom-driven (C) values, clamped.
std::vector<double> naive_resistance(const MeasurementFrame& frame, const DriveSetup& drive);

}  // namespace skinest
