#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "dpfh/types.hpp"

namespace dpfh {

/// Input-file problem, carrying the 1-based line number in the message.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed area-level table: mandatory columns area_id, y, d, x1..xp and an
/// optional trailing group column used only for reporting.
struct InputTable {
  std::vector<std::string> area_ids;
  std::vector<std::string> groups;  ///< empty when no group column present
  Dataset data;
};

/// Read a comma-separated table with header `area_id,y,d,x1,...,xp[,group]`.
/// Throws ParseError (with line numbers) on malformed input and propagates
/// Dataset validation errors (rank, size) unchanged.
InputTable read_input_table(std::istream& in, const std::string& source_name = "<input>");
InputTable read_input_table_file(const std::string& path);

/// Shortest decimal rendering that round-trips a double (17 significant digits).
std::string format_full(double x);

/// `key = value` configuration file with `#` comments and blank lines.
/// Keys are returned verbatim; duplicate keys keep the last value.
std::map<std::string, std::string> read_config(std::istream& in,
                                               const std::string& source_name = "<config>");
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace dpfh
