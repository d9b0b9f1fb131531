#include "skinest/serialize.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skinest {

namespace {

using nlohmann::json;

json grid_block(const std::vector<double>& values, int rows, int cols) {
  json block = json::array();
  for (int i = 0; i < rows; ++i) {
    json row = json::array();
    for (int j = 0; j < cols; ++j) {
      row.push_back(values[static_cast<std::size_t>(i) * cols + j]);
    }
    block.push_back(std::move(row));
  }
  return block;
}

std::vector<double> grid_block_from(const json& block, int rows, int cols, const char* name) {
  if (!block.is_array() || static_cast<int>(block.size()) != rows) {
    throw std::invalid_argument(std::string("bad JSON grid block: ") + name);
  }
  std::vector<double> values(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = block[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw std::invalid_argument(std::string("bad JSON grid row: ") + name);
    }
    for (int j = 0; j < cols; ++j) {
      values[static_cast<std::size_t>(i) * cols + j] = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return values;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string current;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  cells.push_back(current);
  return cells;
}

double parse_double(const std::string& text, const char* context) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string("bad number in ") + context + ": '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, const char* context) {
  int value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string("bad integer in ") + context + ": '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

json field_to_json(const ResistanceField& field) {
  json j;
  j["rows"] = field.rows;
  j["cols"] = field.cols;
  j["cell"] = grid_block(field.cell, field.rows, field.cols);
  j["top_wire"] = grid_block(field.top_wire, field.rows, field.cols);
  j["bottom_wire"] = grid_block(field.bottom_wire, field.rows, field.cols);
  return j;
}

ResistanceField field_from_json(const json& j) {
  ResistanceField field;
  field.rows = j.at("rows").get<int>();
  field.cols = j.at("cols").get<int>();
  if (field.rows < 1 || field.cols < 1) {
    throw std::invalid_argument("field_from_json: invalid dimensions");
  }
  field.cell = grid_block_from(j.at("cell"), field.rows, field.cols, "cell");
  field.top_wire = grid_block_from(j.at("top_wire"), field.rows, field.cols, "top_wire");
  field.bottom_wire = grid_block_from(j.at("bottom_wire"), field.rows, field.cols, "bottom_wire");
  return field;
}

json frame_to_json(const MeasurementFrame& frame) {
  json j;
  j["rows"] = frame.rows;
  j["cols"] = frame.cols;
  json readings = json::array();
  for (const MeasurementSlot& slot : frame_ordering(frame.grid())) {
    const Reading& r = frame.at(slot.cell.i, slot.cell.j, slot.config);
    json entry;
    entry["i"] = slot.cell.i + 1;
    entry["j"] = slot.cell.j + 1;
    entry["config"] = config_name(slot.config);
    entry["v_s"] = r.v_s;
    entry["v_r"] = r.v_r;
    readings.push_back(std::move(entry));
  }
  j["readings"] = std::move(readings);
  if (frame.timestamp) j["timestamp"] = *frame.timestamp;
  return j;
}

MeasurementFrame frame_from_json(const json& j) {
  const GridSpec grid{j.at("rows").get<int>(), j.at("cols").get<int>()};
  if (!grid.valid()) throw std::invalid_argument("frame_from_json: invalid dimensions");
  MeasurementFrame frame(grid);
  const json& readings = j.at("readings");
  if (static_cast<int>(readings.size()) != grid.states_per_frame()) {
    throw std::invalid_argument("frame_from_json: wrong reading count");
  }
  std::vector<bool> seen(readings.size(), false);
  for (const json& entry : readings) {
    const int i = entry.at("i").get<int>() - 1;
    const int jj = entry.at("j").get<int>() - 1;
    const auto config = parse_config(entry.at("config").get<std::string>());
    if (i < 0 || i >= grid.rows || jj < 0 || jj >= grid.cols || !config) {
      throw std::invalid_argument("frame_from_json: reading out of range");
    }
    const int slot = frame.slot_index(i, jj, *config);
    seen[static_cast<std::size_t>(slot)] = true;
    frame.readings[static_cast<std::size_t>(slot)] =
        Reading{entry.at("v_s").get<double>(), entry.at("v_r").get<double>()};
  }
  for (bool s : seen) {
    if (!s) throw std::invalid_argument("frame_from_json: missing reading slot");
  }
  if (j.contains("timestamp")) frame.timestamp = j.at("timestamp").get<std::int64_t>();
  return frame;
}

json report_to_json(const SolveReport& report) {
  json j;
  j["objective"] = report.objective;
  j["cost_f"] = report.cost_f;
  j["cost_c"] = report.cost_c;
  j["cost_r"] = report.cost_r;
  j["max_kcl_residual"] = report.max_kcl_residual;
  j["max_data_residual"] = report.max_data_residual;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  return j;
}

std::string field_to_csv(const ResistanceField& field) {
  std::ostringstream out;
  out << "i,j,component,mohm\n";
  const char* names[3] = {"cell", "top_wire", "bottom_wire"};
  const std::vector<double>* blocks[3] = {&field.cell, &field.top_wire, &field.bottom_wire};
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < field.rows; ++i) {
      for (int j = 0; j < field.cols; ++j) {
        out << (i + 1) << ',' << (j + 1) << ',' << names[b] << ','
            << format_double((*blocks[b])[static_cast<std::size_t>(i) * field.cols + j]) << '\n';
      }
    }
  }
  return out.str();
}

ResistanceField field_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("field_from_csv: empty input");
  struct Entry {
    int i, j, block;
    double value;
  };
  std::vector<Entry> entries;
  int max_i = 0, max_j = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::invalid_argument("field_from_csv: bad row");
    int block = -1;
    if (cells[2] == "cell") block = 0;
    else if (cells[2] == "top_wire") block = 1;
    else if (cells[2] == "bottom_wire") block = 2;
    else throw std::invalid_argument("field_from_csv: unknown component " + cells[2]);
    Entry e{parse_int(cells[0], "field csv") - 1, parse_int(cells[1], "field csv") - 1, block,
            parse_double(cells[3], "field csv")};
    max_i = std::max(max_i, e.i);
    max_j = std::max(max_j, e.j);
    entries.push_back(e);
  }
  const GridSpec grid{max_i + 1, max_j + 1};
  if (entries.size() != static_cast<std::size_t>(3 * grid.cells())) {
    throw std::invalid_argument("field_from_csv: wrong entry count");
  }
  ResistanceField field(grid, 0.0, 0.0);
  for (const Entry& e : entries) {
    std::vector<double>& block =
        e.block == 0 ? field.cell : (e.block == 1 ? field.top_wire : field.bottom_wire);
    block[static_cast<std::size_t>(e.i) * grid.cols + e.j] = e.value;
  }
  return field;
}

std::string frame_to_csv(const MeasurementFrame& frame) {
  std::ostringstream out;
  out << "i,j,config,v_s,v_r\n";
  for (const MeasurementSlot& slot : frame_ordering(frame.grid())) {
    const Reading& r = frame.at(slot.cell.i, slot.cell.j, slot.config);
    out << (slot.cell.i + 1) << ',' << (slot.cell.j + 1) << ',' << config_name(slot.config) << ','
        << format_double(r.v_s) << ',' << format_double(r.v_r) << '\n';
  }
  return out.str();
}

MeasurementFrame frame_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("frame_from_csv: empty input");
  struct Entry {
    int i, j;
    ConfigLabel config;
    Reading reading;
  };
  std::vector<Entry> entries;
  int max_i = 0, max_j = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw std::invalid_argument("frame_from_csv: bad row");
    const auto config = parse_config(cells[2]);
    if (!config) throw std::invalid_argument("frame_from_csv: unknown config " + cells[2]);
    Entry e{parse_int(cells[0], "frame csv") - 1, parse_int(cells[1], "frame csv") - 1, *config,
            Reading{parse_double(cells[3], "frame csv"), parse_double(cells[4], "frame csv")}};
    max_i = std::max(max_i, e.i);
    max_j = std::max(max_j, e.j);
    entries.push_back(e);
  }
  const GridSpec grid{max_i + 1, max_j + 1};
  if (entries.size() != static_cast<std::size_t>(grid.states_per_frame())) {
    throw std::invalid_argument("frame_from_csv: wrong entry count");
  }
  MeasurementFrame frame(grid);
  for (const Entry& e : entries) {
    frame.at(e.i, e.j, e.config) = e.reading;
  }
  return frame;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace skinest
