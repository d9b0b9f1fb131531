#include "skinest/types.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace skinest {

const char* config_name(ConfigLabel label) {
  switch (label) {
    case ConfigLabel::A: return "A";
    case ConfigLabel::B: return "B";
    case ConfigLabel::C: return "C";
    case ConfigLabel::D: return "D";
  }
  return "?";
}

std::optional<ConfigLabel> parse_config(const std::string& name) {
  if (name == "A" || name == "a") return ConfigLabel::A;
  if (name == "B" || name == "b") return ConfigLabel::B;
  if (name == "C" || name == "c") return ConfigLabel::C;
  if (name == "D" || name == "d") return ConfigLabel::D;
  return std::nullopt;
}

OhmmeterConfig OhmmeterConfig::of(ConfigLabel label) {
  switch (label) {
    case ConfigLabel::A: return {label, DriveLayer::TopDriven, SenseSide::SourceRef};
    case ConfigLabel::B: return {label, DriveLayer::TopDriven, SenseSide::GroundRef};
    case ConfigLabel::C: return {label, DriveLayer::BottomDriven, SenseSide::SourceRef};
    case ConfigLabel::D: return {label, DriveLayer::BottomDriven, SenseSide::GroundRef};
  }
  throw std::invalid_argument("unknown ohmmeter configuration label");
}

ResistanceField::ResistanceField(GridSpec grid, double cell_mohm, double wire_mohm)
    : rows(grid.rows),
      cols(grid.cols),
      cell(static_cast<std::size_t>(grid.cells()), cell_mohm),
      top_wire(static_cast<std::size_t>(grid.cells()), wire_mohm),
      bottom_wire(static_cast<std::size_t>(grid.cells()), wire_mohm) {}

std::vector<MeasurementSlot> frame_ordering(GridSpec grid) {
  if (!grid.valid()) throw std::invalid_argument("frame_ordering: invalid grid");
  std::vector<MeasurementSlot> order;
  order.reserve(static_cast<std::size_t>(grid.states_per_frame()));
  for (int j = 0; j < grid.cols; ++j) {
    for (int i = 0; i < grid.rows; ++i) {
      for (int k = 0; k < kConfigCount; ++k) {
        order.push_back({CellIndex{i, j}, static_cast<ConfigLabel>(k)});
      }
    }
  }
  return order;
}

namespace {

void check_block(const std::vector<double>& values, const GridSpec& grid, const char* name,
                 std::vector<ValidationIssue>& issues) {
  if (values.size() != static_cast<std::size_t>(grid.cells())) {
    std::ostringstream msg;
    msg << "dimension mismatch: " << name << " has " << values.size() << " entries, expected "
        << grid.cells();
    issues.push_back({msg.str()});
    return;
  }
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      const double v = values[static_cast<std::size_t>(i) * grid.cols + j];
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-positive resistance at " << name << " (" << i << "," << j << ")";
        issues.push_back({msg.str()});
      }
    }
  }
}

}  // namespace

std::vector<ValidationIssue> validate_field(const ResistanceField& field, const GridSpec& grid) {
  std::vector<ValidationIssue> issues;
  if (!grid.valid()) {
    issues.push_back({"dimension mismatch: grid must have at least one row and column"});
    return issues;
  }
  if (field.rows != grid.rows || field.cols != grid.cols) {
    std::ostringstream msg;
    msg << "dimension mismatch: field is " << field.rows << "x" << field.cols << ", grid is "
        << grid.rows << "x" << grid.cols;
    issues.push_back({msg.str()});
  }
  check_block(field.cell, grid, "cell", issues);
  check_block(field.top_wire, grid, "top_wire", issues);
  check_block(field.bottom_wire, grid, "bottom_wire", issues);
  return issues;
}

void require_valid_field(const ResistanceField& field, const GridSpec& grid) {
  const auto issues = validate_field(field, grid);
  if (issues.empty()) return;
  std::ostringstream msg;
  msg << "invalid resistance field:";
  std::size_t shown = 0;
  for (const auto& issue : issues) {
    msg << " " << issue.message << ";";
    if (++shown == 4 && issues.size() > 4) {
      msg << " (+" << issues.size() - 4 << " more)";
      break;
    }
  }
  throw std::invalid_argument(msg.str());
}

}  // namespace skinest
