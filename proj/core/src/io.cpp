#include "dpfh/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dpfh {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_number(const std::string& field, const std::string& source, int line,
                    const std::string& column) {
  try {
    size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << source << ":" << line << ": cannot parse '" << field << "' in column " << column;
    throw ParseError(msg.str());
  }
}

}  // namespace

InputTable read_input_table(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(source_name + ":1: empty input, expected header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 4 || header[0] != "area_id" || header[1] != "y" || header[2] != "d") {
    throw ParseError(source_name + ":1: header must start with area_id,y,d,x1,...");
  }
  const bool has_group = header.back() == "group";
  const int p = static_cast<int>(header.size()) - 3 - (has_group ? 1 : 0);
  if (p < 1) {
    throw ParseError(source_name + ":1: at least one covariate column x1 is required");
  }
  for (int j = 0; j < p; ++j) {
    const std::string expect = "x" + std::to_string(j + 1);
    if (header[static_cast<size_t>(3 + j)] != expect) {
      throw ParseError(source_name + ":1: expected column '" + expect + "', found '" +
                       header[static_cast<size_t>(3 + j)] + "'");
    }
  }

  std::vector<std::string> area_ids;
  std::vector<std::string> group_labels;
  std::vector<AreaObservation> areas;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << source_name << ":" << lineno << ": expected " << header.size()
          << " fields, found " << fields.size();
      throw ParseError(msg.str());
    }
    for (const auto& f : fields) {
      if (f.empty()) {
        std::ostringstream msg;
        msg << source_name << ":" << lineno << ": missing value";
        throw ParseError(msg.str());
      }
    }
    const double y = parse_number(fields[1], source_name, lineno, "y");
    const double d = parse_number(fields[2], source_name, lineno, "d");
    if (!(d > 0.0)) {
      std::ostringstream msg;
      msg << source_name << ":" << lineno << ": d must be > 0";
      throw ParseError(msg.str());
    }
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) {
      x[j] = parse_number(fields[static_cast<size_t>(3 + j)], source_name, lineno,
                          "x" + std::to_string(j + 1));
    }
    area_ids.push_back(fields[0]);
    if (has_group) {
      group_labels.push_back(fields.back());
    }
    areas.push_back(AreaObservation{y, std::move(x), d});
  }
  if (areas.empty()) {
    throw ParseError(source_name + ":" + std::to_string(lineno) + ": no data rows");
  }
  return InputTable{std::move(area_ids), std::move(group_labels), Dataset(std::move(areas))};
}

InputTable read_input_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path + ": cannot open file");
  }
  return read_input_table(in, path);
}

std::string format_full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::map<std::string, std::string> read_config(std::istream& in,
                                               const std::string& source_name) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string s = trim(line);
    if (s.empty()) continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << source_name << ":" << lineno << ": expected 'key = value'";
      throw ParseError(msg.str());
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream msg;
      msg << source_name << ":" << lineno << ": empty key";
      throw ParseError(msg.str());
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path + ": cannot open file");
  }
  return read_config(in, path);
}

}  // namespace dpfh
