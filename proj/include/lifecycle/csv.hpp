#pragma once

#include "lifecycle/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace lifecycle::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or nullopt.
  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require(std::string_view name, std::string_view file) const {
    if (auto i = find(name)) return *i;
    throw Error(ErrorKind::Data, std::string(file) + ": missing column '" + std::string(name) + "'");
  }
};

// RFC 4180: comma separated, optional double-quoted fields with "" escapes.
inline Table read(std::istream& in) {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false, first = true;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    if (first) {
      table.header = std::move(record);
      first = false;
    } else if (!(record.size() == 1 && record[0].empty())) {
      table.rows.push_back(std::move(record));
    }
    record.clear();
    any = false;
  };
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      end_record();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw Error(ErrorKind::Data, "unterminated quoted CSV field");
  if (any) end_record();
  if (first) throw Error(ErrorKind::Data, "CSV input is empty");
  return table;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open '" + path + "'");
  try {
    return read(in);
  } catch (const Error& e) {
    throw Error(ErrorKind::Data, path + ": " + e.what());
  }
}

inline std::string escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

// Fixed six decimals; negative zero prints as zero.
inline std::string fixed6(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string{}; }

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

inline void write(std::ostream& out, const Table& table) {
  write_row(out, table.header);
  for (const auto& row : table.rows) write_row(out, row);
}

inline void write_file(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Data, "cannot write '" + path + "'");
  write(out, table);
}

}  // namespace lifecycle::csv
