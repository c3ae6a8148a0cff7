#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "banditrex/errors.hpp"

namespace banditrex::csv {

/// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(where + ": not a number: '" + std::string(s) + "'");
  return out;
}

inline long long parse_int(std::string_view s, const std::string& where) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(where + ": not an integer: '" + std::string(s) + "'");
  return out;
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += escape(fields[i]);
  }
  return line;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style parser: quoted fields may contain commas, doubled quotes
/// and newlines. First row is the header.
inline Table parse(std::istream& in, const std::string& name) {
  Table table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_data = false;
  int line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (table.header.empty()) {
      table.header = std::move(row);
    } else {
      if (row.size() != table.header.size())
        throw ParseError(name + ":" + std::to_string(line) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(row.size()));
      table.rows.push_back(std::move(row));
    }
    row.clear();
    row_has_data = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
        if (c == '\n') ++line;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_data = true;
        break;
      case ',':
        end_field();
        row_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_data || !field.empty() || !row.empty()) end_row();
        ++line;
        break;
      default:
        field += c;
        row_has_data = true;
        break;
    }
  }
  if (in_quotes) throw ParseError(name + ": unterminated quoted field");
  if (row_has_data || !field.empty() || !row.empty()) end_row();
  if (table.header.empty()) throw ParseError(name + ": missing header row");
  return table;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingDataFile("cannot open " + path);
  return parse(in, path);
}

inline void expect_header(const Table& t, const std::vector<std::string>& expected,
                          const std::string& name) {
  if (t.header != expected) {
    std::string got;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (i) got += ',';
      got += t.header[i];
    }
    throw ParseError(name + ": unexpected header '" + got + "'");
  }
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write " + path);
  }

  void row(const std::vector<std::string>& fields) {
    out_ << join_row(fields) << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace banditrex::csv
