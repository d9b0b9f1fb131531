#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace skinest {

// Units: resistances in MΩ, voltages in V, conductances in 1/MΩ.
// Currents then come out in V/MΩ = µA. Megohm-scale skins keep typical
// values near 1, which is where double precision is happiest.
inline constexpr double kOpenCircuitMohm = 1e6;
inline constexpr double kMinResistanceMohm = 1e-6;
inline constexpr double kWireFloorMohm = 1e-4;

struct GridSpec {
  int rows = 0;
  int cols = 0;

  int cells() const { return rows * cols; }
  int states_per_frame() const { return 4 * rows * cols; }
  bool valid() const { return rows >= 1 && cols >= 1; }
  bool operator==(const GridSpec&) const = default;
};

/// Zero-based (row, col) position of a sensing cell.
struct CellIndex {
  int i = 0;
  int j = 0;
  bool operator==(const CellIndex&) const = default;
};

enum class ConfigLabel : int { A = 0, B = 1, C = 2, D = 3 };
inline constexpr int kConfigCount = 4;

const char* config_name(ConfigLabel label);
std::optional<ConfigLabel> parse_config(const std::string& name);

enum class DriveLayer { TopDriven, BottomDriven };
enum class SenseSide { SourceRef, GroundRef };

// One of the four per-cell ohmmeter arrangements. A/B drive the selected
// row stripe through the source reference resistor and ground the column
// stripe through the ground reference resistor; C/D swap the two layers.
// B and D are the consecutive second readings of their pair, taken so the
// two reference resistors' tolerances average out.
struct OhmmeterConfig {
  ConfigLabel label = ConfigLabel::A;
  DriveLayer drive_layer = DriveLayer::TopDriven;
  SenseSide sense_side = SenseSide::SourceRef;

  static OhmmeterConfig of(ConfigLabel label);
};

enum class UnselectedPolicy { Floating };

/// Ohmmeter drive: supply voltage and the two reference resistors.
/// Unselected stripe electrodes are left floating, which is what lets
/// alternate current paths (ghosting) appear in the first place.
struct DriveSetup {
  double v_dd = 1.0;            // V
  double r_ref_source = 0.1;    // MΩ
  double r_ref_ground = 0.1;    // MΩ
  UnselectedPolicy unselected = UnselectedPolicy::Floating;

  bool valid() const { return v_dd > 0.0 && r_ref_source > 0.0 && r_ref_ground > 0.0; }
  bool operator==(const DriveSetup&) const = default;
};

// Per-cell contact resistances plus per-segment stripe resistances.
// top_wire(i, j) is the segment of row stripe i between crossing (i, j-1)
// and (i, j); top_wire(i, 0) sits between the stripe's electrode and the
// first crossing. bottom_wire(i, j) chains column stripe j the same way,
// with bottom_wire(0, j) adjacent to the column electrode.
struct ResistanceField {
  int rows = 0;
  int cols = 0;
  std::vector<double> cell;         // MΩ, row-major rows*cols
  std::vector<double> top_wire;     // MΩ, row-major rows*cols
  std::vector<double> bottom_wire;  // MΩ, row-major rows*cols

  ResistanceField() = default;
  ResistanceField(GridSpec grid, double cell_mohm, double wire_mohm);

  static ResistanceField uniform(GridSpec grid, double cell_mohm, double wire_mohm) {
    return ResistanceField(grid, cell_mohm, wire_mohm);
  }

  GridSpec grid() const { return GridSpec{rows, cols}; }
  int index(int i, int j) const { return i * cols + j; }

  double& cell_at(int i, int j) { return cell[index(i, j)]; }
  double cell_at(int i, int j) const { return cell[index(i, j)]; }
  double& top_wire_at(int i, int j) { return top_wire[index(i, j)]; }
  double top_wire_at(int i, int j) const { return top_wire[index(i, j)]; }
  double& bottom_wire_at(int i, int j) { return bottom_wire[index(i, j)]; }
  double bottom_wire_at(int i, int j) const { return bottom_wire[index(i, j)]; }

  bool operator==(const ResistanceField&) const = default;
};

/// One ohmmeter reading: v_s at the skin-side node of the source reference
/// resistor, v_r across the ground-side reference resistor.
struct Reading {
  double v_s = 0.0;  // V
  double v_r = 0.0;  // V
  bool operator==(const Reading&) const = default;
};

struct MeasurementSlot {
  CellIndex cell;
  ConfigLabel config = ConfigLabel::A;
  bool operator==(const MeasurementSlot&) const = default;
};

/// Readout order of a full scan: cells in column-major order (row index
/// varies fastest), configs A, B, C, D consecutively within each cell.
std::vector<MeasurementSlot> frame_ordering(GridSpec grid);

/// One full scan: a (v_s, v_r) pair for every cell under every config,
/// stored in frame_ordering sequence.
struct MeasurementFrame {
  int rows = 0;
  int cols = 0;
  std::vector<Reading> readings;  // size 4*rows*cols
  std::optional<std::int64_t> timestamp;

  MeasurementFrame() = default;
  explicit MeasurementFrame(GridSpec grid)
      : rows(grid.rows), cols(grid.cols), readings(static_cast<std::size_t>(grid.states_per_frame())) {}

  GridSpec grid() const { return GridSpec{rows, cols}; }
  int slot_index(int i, int j, ConfigLabel k) const {
    return (j * rows + i) * kConfigCount + static_cast<int>(k);
  }
  Reading& at(int i, int j, ConfigLabel k) { return readings[slot_index(i, j, k)]; }
  const Reading& at(int i, int j, ConfigLabel k) const { return readings[slot_index(i, j, k)]; }
  bool complete() const { return readings.size() == static_cast<std::size_t>(4 * rows * cols); }

  bool operator==(const MeasurementFrame&) const = default;
};

struct ValidationIssue {
  std::string message;
};

/// Checks dimensions against the grid and positivity/finiteness of every
/// entry. Returns one issue per violation; empty means valid.
std::vector<ValidationIssue> validate_field(const ResistanceField& field, const GridSpec& grid);

/// Throws std::invalid_argument listing the first few issues.
void require_valid_field(const ResistanceField& field, const GridSpec& grid);

}  // namespace skinest
