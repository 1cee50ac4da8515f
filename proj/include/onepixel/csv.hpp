#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "onepixel/attack.hpp"
#include "onepixel/errors.hpp"

namespace onepixel {

enum class Label { Mitosis, Normal };

inline std::string_view label_name(Label l) {
  return l == Label::Mitosis ? "mitosis" : "normal";
}

inline Label parse_label(std::string_view name) {
  if (name == "mitosis") return Label::Mitosis;
  if (name == "normal") return Label::Normal;
  throw ConfigError("unknown label: " + std::string(name));
}

// One line of results.csv: an attack record flattened next to its dataset
// label. The trace is persisted separately (traces.csv) to keep this file
// one-row-per-attack.
struct ResultRow {
  std::string image_id;
  Label label = Label::Mitosis;
  AttackDirection direction = AttackDirection::MitosisToNormal;
  double orig_score = 0.0;
  double final_score = 0.0;
  Outcome outcome = Outcome::Failed;
  int iterations = 0;
  std::uint64_t evaluations = 0;
  int x = 0;
  int y = 0;
  int r = 0;
  int g = 0;
  int b = 0;
  int np = 0;
  double f = 0.0;
  double cr = 0.0;
  int max_iter = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ResultRow&) const = default;
};

inline constexpr std::string_view kResultsHeader =
    "image_id,label,direction,orig_score,final_score,outcome,iterations,"
    "evaluations,x,y,r,g,b,np,f,cr,max_iter,tol,seed";
inline constexpr std::size_t kResultsColumns = 19;

inline constexpr std::string_view kTracesHeader = "image_id,iteration,best_score";

inline ResultRow make_result_row(Label label, const AttackRecord& rec) {
  ResultRow row;
  row.image_id = rec.image_id;
  row.label = label;
  row.direction = rec.direction;
  row.orig_score = rec.original_score;
  row.final_score = rec.final_score;
  row.outcome = rec.outcome;
  row.iterations = rec.iterations;
  row.evaluations = rec.evaluations;
  row.x = rec.best_perturbation.x;
  row.y = rec.best_perturbation.y;
  row.r = rec.best_perturbation.r;
  row.g = rec.best_perturbation.g;
  row.b = rec.best_perturbation.b;
  row.np = rec.de_params.population_size;
  row.f = rec.de_params.mutation_factor;
  row.cr = rec.de_params.recombination;
  row.max_iter = rec.de_params.max_iterations;
  row.tol = rec.de_params.tolerance;
  row.seed = rec.de_params.rng_seed;
  return row;
}

// Shortest decimal form that parses back to the exact same double.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error("failed to format a double");
  return std::string(buf.data(), end);
}

namespace detail {

inline double parse_csv_double(std::string_view text, std::string_view field,
                               std::size_t row) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw CsvError("field '" + std::string(field) + "' is not a number: '" +
                       std::string(text) + "'",
                   row);
  return value;
}

template <typename Int>
Int parse_csv_int(std::string_view text, std::string_view field, std::size_t row) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw CsvError("field '" + std::string(field) + "' is not an integer: '" +
                       std::string(text) + "'",
                   row);
  return value;
}

inline int parse_channel(std::string_view text, std::string_view field,
                         std::size_t row) {
  const int v = parse_csv_int<int>(text, field, row);
  if (v < 0 || v > 255)
    throw CsvError("field '" + std::string(field) + "' outside [0, 255]: '" +
                       std::string(text) + "'",
                   row);
  return v;
}

}  // namespace detail

// RFC 4180 quoting: fields holding commas, quotes, or line breaks are wrapped
// in double quotes with embedded quotes doubled.
inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_result_row(const ResultRow& row) {
  std::string out;
  out += csv_escape(row.image_id);
  out += ',';
  out += label_name(row.label);
  out += ',';
  out += direction_name(row.direction);
  out += ',';
  out += format_double(row.orig_score);
  out += ',';
  out += format_double(row.final_score);
  out += ',';
  out += outcome_name(row.outcome);
  out += ',';
  out += std::to_string(row.iterations);
  out += ',';
  out += std::to_string(row.evaluations);
  out += ',';
  out += std::to_string(row.x);
  out += ',';
  out += std::to_string(row.y);
  out += ',';
  out += std::to_string(row.r);
  out += ',';
  out += std::to_string(row.g);
  out += ',';
  out += std::to_string(row.b);
  out += ',';
  out += std::to_string(row.np);
  out += ',';
  out += format_double(row.f);
  out += ',';
  out += format_double(row.cr);
  out += ',';
  out += std::to_string(row.max_iter);
  out += ',';
  out += format_double(row.tol);
  out += ',';
  out += std::to_string(row.seed);
  return out;
}

// Reads one CSV record (quoted fields may span lines). Returns false on a
// clean end of input. `row` is the 1-based number of the record read, used in
// error messages.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t row) {
  fields.clear();
  int c = in.get();
  // Skip a trailing blank line at EOF.
  if (c == std::istream::traits_type::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (;; c = in.get()) {
    if (c == std::istream::traits_type::eof()) {
      if (quoted) throw CsvError("unterminated quoted field", row);
      break;
    }
    any = true;
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(ch);
    }
  }
  if (!any && fields.empty() && field.empty()) return false;
  fields.push_back(std::move(field));
  return true;
}

inline ResultRow parse_result_row(const std::vector<std::string>& fields,
                                  std::size_t row) {
  if (fields.size() != kResultsColumns)
    throw CsvError("expected " + std::to_string(kResultsColumns) +
                       " columns, found " + std::to_string(fields.size()),
                   row);
  ResultRow out;
  out.image_id = fields[0];
  try {
    out.label = parse_label(fields[1]);
    out.direction = parse_direction(fields[2]);
  } catch (const ConfigError& e) {
    throw CsvError(e.what(), row);
  }
  out.orig_score = detail::parse_csv_double(fields[3], "orig_score", row);
  out.final_score = detail::parse_csv_double(fields[4], "final_score", row);
  try {
    out.outcome = parse_outcome(fields[5]);
  } catch (const ConfigError& e) {
    throw CsvError(e.what(), row);
  }
  out.iterations = detail::parse_csv_int<int>(fields[6], "iterations", row);
  out.evaluations =
      detail::parse_csv_int<std::uint64_t>(fields[7], "evaluations", row);
  out.x = detail::parse_csv_int<int>(fields[8], "x", row);
  out.y = detail::parse_csv_int<int>(fields[9], "y", row);
  out.r = detail::parse_channel(fields[10], "r", row);
  out.g = detail::parse_channel(fields[11], "g", row);
  out.b = detail::parse_channel(fields[12], "b", row);
  out.np = detail::parse_csv_int<int>(fields[13], "np", row);
  out.f = detail::parse_csv_double(fields[14], "f", row);
  out.cr = detail::parse_csv_double(fields[15], "cr", row);
  out.max_iter = detail::parse_csv_int<int>(fields[16], "max_iter", row);
  out.tol = detail::parse_csv_double(fields[17], "tol", row);
  out.seed = detail::parse_csv_int<std::uint64_t>(fields[18], "seed", row);
  return out;
}

// Reads a full results file, header included. Header mismatches report the
// first differing column.
inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<std::string> fields;
  std::size_t row = 1;
  if (!read_csv_record(in, fields, row))
    throw CsvError("missing header row", row);
  {
    std::vector<std::string> expected;
    std::size_t start = 0;
    const std::string header(kResultsHeader);
    for (;;) {
      const std::size_t comma = header.find(',', start);
      expected.push_back(header.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    for (std::size_t i = 0; i < expected.size() || i < fields.size(); ++i) {
      const std::string got = i < fields.size() ? fields[i] : "<missing>";
      const std::string want = i < expected.size() ? expected[i] : "<none>";
      if (got != want)
        throw CsvError("header column " + std::to_string(i + 1) + " is '" +
                           got + "', expected '" + want + "'",
                       row);
    }
  }
  std::vector<ResultRow> rows;
  while (read_csv_record(in, fields, ++row))
    rows.push_back(parse_result_row(fields, row));
  return rows;
}

inline std::vector<ResultRow> read_results_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open results file: " + path);
  return read_results_csv(in);
}

inline void write_results_csv(std::ostream& out,
                              const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const ResultRow& row : rows) out << format_result_row(row) << '\n';
}

// traces.csv holds one row per (attack, trace index): the best raw score
// after initialization (iteration 0) and after each completed generation.
inline void write_trace_rows(std::ostream& out, const std::string& image_id,
                             const std::vector<double>& trace) {
  const std::string id = csv_escape(image_id);
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << id << ',' << i << ',' << format_double(trace[i]) << '\n';
}

inline std::map<std::string, std::vector<double>> read_traces_csv(std::istream& in) {
  std::vector<std::string> fields;
  std::size_t row = 1;
  if (!read_csv_record(in, fields, row))
    throw CsvError("missing header row", row);
  if (fields.size() != 3 || fields[0] != "image_id" ||
      fields[1] != "iteration" || fields[2] != "best_score")
    throw CsvError("unexpected traces header", row);
  std::map<std::string, std::vector<double>> traces;
  while (read_csv_record(in, fields, ++row)) {
    if (fields.size() != 3)
      throw CsvError("expected 3 columns, found " + std::to_string(fields.size()),
                     row);
    const std::size_t iteration =
        detail::parse_csv_int<std::size_t>(fields[1], "iteration", row);
    std::vector<double>& trace = traces[fields[0]];
    if (iteration != trace.size())
      throw CsvError("trace rows for '" + fields[0] +
                         "' are not consecutive from 0",
                     row);
    trace.push_back(detail::parse_csv_double(fields[2], "best_score", row));
  }
  return traces;
}

}  // namespace onepixel
