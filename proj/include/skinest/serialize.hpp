#pragma once

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

#include "skinest/optimizer.hpp"
#include "skinest/types.hpp"

// JSON and CSV schemas are documented in the README. JSON doubles use the
// library's shortest-round-trip encoding and CSV doubles use
// std::to_chars, so both formats round-trip bit-exactly and rerunning a
// seeded scenario rewrites byte-identical files.

namespace skinest {

nlohmann::json field_to_json(const ResistanceField& field);
ResistanceField field_from_json(const nlohmann::json& j);

nlohmann::json frame_to_json(const MeasurementFrame& frame);
MeasurementFrame frame_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const SolveReport& report);  // wall time excluded

/// CSV with header i,j,component,mohm; component is cell/top_wire/bottom_wire
/// and i,j are 1-based.
std::string field_to_csv(const ResistanceField& field);
ResistanceField field_from_csv(const std::string& text);

/// CSV with header i,j,config,v_s,v_r in frame_ordering sequence, i,j 1-based.
std::string frame_to_csv(const MeasurementFrame& frame);
MeasurementFrame frame_from_csv(const std::string& text);

/// Shortest exact decimal form of a double (std::to_chars).
std::string format_double(double value);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace skinest
