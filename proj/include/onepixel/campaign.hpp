#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "onepixel/attack.hpp"
#include "onepixel/csv.hpp"
#include "onepixel/errors.hpp"
#include "onepixel/oracle.hpp"
#include "onepixel/png_io.hpp"
#include "onepixel/rng.hpp"
#include "onepixel/stats.hpp"

namespace onepixel {

struct DatasetEntry {
  std::string image_id;
  std::string path;
  Label label = Label::Mitosis;

  bool operator==(const DatasetEntry&) const = default;
};

// Mitosis images are attacked downward, normal images upward.
inline AttackDirection natural_direction(Label label) {
  return label == Label::Mitosis ? AttackDirection::MitosisToNormal
                                 : AttackDirection::NormalToMitosis;
}

namespace detail {

inline void add_entry(std::vector<DatasetEntry>& entries, std::set<std::string>& seen,
                      DatasetEntry entry) {
  if (!seen.insert(entry.image_id).second)
    throw ConfigError("duplicate image_id in dataset: " + entry.image_id);
  entries.push_back(std::move(entry));
}

inline std::vector<DatasetEntry> load_directory_manifest(
    const std::filesystem::path& dir) {
  std::vector<DatasetEntry> entries;
  std::set<std::string> seen;
  bool any_label_dir = false;
  for (const auto& [sub, label] :
       {std::pair{"mitosis", Label::Mitosis}, std::pair{"normal", Label::Normal}}) {
    const std::filesystem::path label_dir = dir / sub;
    if (!std::filesystem::is_directory(label_dir)) continue;
    any_label_dir = true;
    for (const auto& item : std::filesystem::directory_iterator(label_dir)) {
      if (!item.is_regular_file()) continue;
      std::string ext = item.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext != ".png") continue;
      add_entry(entries, seen,
                DatasetEntry{item.path().stem().string(), item.path().string(),
                             label});
    }
  }
  if (!any_label_dir)
    throw ConfigError("dataset directory needs a mitosis/ or normal/ subdirectory: " +
                      dir.string());
  return entries;
}

inline std::vector<DatasetEntry> load_csv_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open manifest: " + file.string());
  std::vector<std::string> fields;
  std::size_t row = 1;
  if (!read_csv_record(in, fields, row))
    throw CsvError("manifest is empty", row);
  if (fields.size() != 3 || fields[0] != "image_id" || fields[1] != "path" ||
      fields[2] != "label")
    throw CsvError("manifest header must be image_id,path,label", row);
  std::vector<DatasetEntry> entries;
  std::set<std::string> seen;
  const std::filesystem::path base = file.parent_path();
  while (read_csv_record(in, fields, ++row)) {
    if (fields.size() != 3)
      throw CsvError("expected 3 columns, found " + std::to_string(fields.size()),
                     row);
    Label label = Label::Mitosis;
    try {
      label = parse_label(fields[2]);
    } catch (const ConfigError& e) {
      throw CsvError(e.what(), row);
    }
    std::filesystem::path p(fields[1]);
    if (p.is_relative()) p = base / p;
    add_entry(entries, seen, DatasetEntry{fields[0], p.string(), label});
  }
  return entries;
}

}  // namespace detail

// Accepts either a directory with mitosis/ and normal/ PNG subdirectories
// (image_id = file stem) or a CSV manifest with header image_id,path,label
// (relative paths resolved against the manifest's directory). Entries come
// back sorted by image_id.
inline std::vector<DatasetEntry> load_manifest(const std::string& path) {
  std::vector<DatasetEntry> entries =
      std::filesystem::is_directory(path)
          ? detail::load_directory_manifest(path)
          : detail::load_csv_manifest(path);
  std::sort(entries.begin(), entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) {
              return a.image_id < b.image_id;
            });
  return entries;
}

struct FilteredEntry {
  DatasetEntry entry;
  double original_score = 0.0;

  bool operator==(const FilteredEntry&) const = default;
};

struct FilterOutcome {
  std::vector<FilteredEntry> kept;
  std::size_t examined = 0;
  std::size_t excluded = 0;
  std::size_t errored = 0;
};

// Keeps the confidently classified entries: mitosis scoring >= mitosis_min,
// normal scoring <= normal_max (both boundaries inclusive). Undecodable
// images and oracle failures are logged and skipped.
inline FilterOutcome filter_dataset(const std::vector<DatasetEntry>& entries,
                                    Oracle& oracle, double mitosis_min = 0.9,
                                    double normal_max = 0.1,
                                    std::ostream* log = nullptr) {
  FilterOutcome out;
  for (const DatasetEntry& entry : entries) {
    ++out.examined;
    double score = 0.0;
    try {
      score = oracle.score(decode_png_file(entry.path)).value();
    } catch (const std::exception& e) {
      ++out.errored;
      if (log)
        *log << "filter: " << entry.image_id << " skipped: " << e.what() << '\n';
      continue;
    }
    const bool keep = entry.label == Label::Mitosis ? score >= mitosis_min
                                                    : score <= normal_max;
    if (keep) {
      out.kept.push_back(FilteredEntry{entry, score});
    } else {
      ++out.excluded;
      if (log)
        *log << "filter: " << entry.image_id << " excluded (score "
             << format_double(score) << ")\n";
    }
  }
  return out;
}

// Duration strings for CLI flags: "500ms", "30s", "5m", "2h".
inline std::chrono::milliseconds parse_duration(const std::string& text) {
  std::size_t pos = 0;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  if (pos == 0 || pos == text.size())
    throw ConfigError("duration must look like 30s, 5m, 2h, or 500ms: '" + text +
                      "'");
  const std::uint64_t amount = std::stoull(text.substr(0, pos));
  const std::string unit = text.substr(pos);
  if (unit == "ms") return std::chrono::milliseconds(amount);
  if (unit == "s") return std::chrono::seconds(amount);
  if (unit == "m") return std::chrono::minutes(amount);
  if (unit == "h") return std::chrono::hours(amount);
  throw ConfigError("unknown duration unit '" + unit + "' in '" + text + "'");
}

struct CampaignConfig {
  de::Config de;  // rng_seed is ignored; per-attack seeds derive from `seed`
  double success_threshold = 0.5;
  std::optional<double> strong_threshold;
  bool early_stop_on_strong = false;
  // Unset attacks every entry in its natural direction; set restricts the
  // campaign to entries whose natural direction matches.
  std::optional<AttackDirection> direction;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::optional<std::chrono::milliseconds> budget;
  double mitosis_min = 0.9;
  double normal_max = 0.1;

  bool wants(Label label) const {
    return !direction || *direction == natural_direction(label);
  }

  AttackConfig attack_config_for(const std::string& image_id, Label label) const {
    AttackConfig cfg;
    cfg.direction = natural_direction(label);
    cfg.de = de;
    cfg.de.rng_seed = derive_attack_seed(seed, image_id);
    cfg.success_threshold = success_threshold;
    cfg.strong_threshold = strong_threshold;
    cfg.early_stop_on_strong = early_stop_on_strong;
    return cfg;
  }

  void validate() const {
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (mitosis_min < 0.0 || mitosis_min > 1.0 || normal_max < 0.0 ||
        normal_max > 1.0)
      throw ConfigError("filter thresholds must be within [0, 1]");
    // Threshold geometry is direction-specific; validate via a probe config.
    AttackConfig probe;
    probe.de = de;
    probe.de.rng_seed = 0;
    probe.success_threshold = success_threshold;
    probe.strong_threshold = strong_threshold;
    if (direction) {
      probe.direction = *direction;
      probe.validate();
    } else {
      probe.direction = AttackDirection::MitosisToNormal;
      probe.validate();
      probe.direction = AttackDirection::NormalToMitosis;
      probe.validate();
    }
  }
};

// Owns the campaign output directory. Rows and traces append (with a flush
// per record) while the campaign runs, so an interrupted run resumes by
// skipping ids already on disk; finalize() rewrites both files sorted by
// image_id for stable comparison.
class CampaignSink {
 public:
  explicit CampaignSink(std::string out_dir) : dir_(std::move(out_dir)) {
    namespace fs = std::filesystem;
    fs::create_directories(dir_);
    const bool have_results = fs::exists(results_path());
    if (have_results) {
      rows_ = read_results_csv_file(results_path());
      for (const ResultRow& row : rows_) done_.insert(row.image_id);
      if (fs::exists(traces_path())) {
        std::ifstream in(traces_path(), std::ios::binary);
        if (!in) throw Error("cannot open " + traces_path());
        traces_ = read_traces_csv(in);
      }
    }
    results_out_.open(results_path(), std::ios::binary | std::ios::app);
    if (!results_out_) throw Error("cannot open " + results_path() + " for append");
    traces_out_.open(traces_path(), std::ios::binary | std::ios::app);
    if (!traces_out_) throw Error("cannot open " + traces_path() + " for append");
    if (!have_results) {
      results_out_ << kResultsHeader << '\n';
      results_out_.flush();
      traces_out_ << kTracesHeader << '\n';
      traces_out_.flush();
    }
  }

  const std::string& dir() const { return dir_; }
  std::string results_path() const { return dir_ + "/results.csv"; }
  std::string traces_path() const { return dir_ + "/traces.csv"; }
  std::string errors_path() const { return dir_ + "/errors.log"; }
  std::string stats_path() const { return dir_ + "/stats.json"; }

  bool already_done(const std::string& image_id) const {
    return done_.count(image_id) > 0;
  }

  std::size_t row_count() const { return rows_.size(); }

  void append(Label label, const AttackRecord& rec) {
    std::lock_guard<std::mutex> lock(mutex_);
    const ResultRow row = make_result_row(label, rec);
    results_out_ << format_result_row(row) << '\n';
    results_out_.flush();
    if (!results_out_) throw Error("write to " + results_path() + " failed");
    write_trace_rows(traces_out_, rec.image_id, rec.trace);
    traces_out_.flush();
    if (!traces_out_) throw Error("write to " + traces_path() + " failed");
    rows_.push_back(row);
    traces_[rec.image_id] = rec.trace;
    done_.insert(rec.image_id);
  }

  void log_error(const std::string& image_id, const std::string& what) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!errors_out_.is_open()) {
      errors_out_.open(errors_path(), std::ios::binary | std::ios::app);
      if (!errors_out_) throw Error("cannot open " + errors_path());
    }
    errors_out_ << image_id << ": " << what << '\n';
    errors_out_.flush();
  }

  // Sorts by image_id and rewrites results.csv and traces.csv atomically
  // (tmp file + rename). Returns the sorted rows.
  const std::vector<ResultRow>& finalize() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::sort(rows_.begin(), rows_.end(),
              [](const ResultRow& a, const ResultRow& b) {
                return a.image_id < b.image_id;
              });
    results_out_.close();
    traces_out_.close();
    {
      const std::string tmp = results_path() + ".tmp";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot open " + tmp);
      write_results_csv(out, rows_);
      out.close();
      if (!out) throw Error("write to " + tmp + " failed");
      std::filesystem::rename(tmp, results_path());
    }
    {
      const std::string tmp = traces_path() + ".tmp";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot open " + tmp);
      out << kTracesHeader << '\n';
      for (const ResultRow& row : rows_) {
        const auto it = traces_.find(row.image_id);
        if (it != traces_.end()) write_trace_rows(out, it->first, it->second);
      }
      out.close();
      if (!out) throw Error("write to " + tmp + " failed");
      std::filesystem::rename(tmp, traces_path());
    }
    return rows_;
  }

  const std::vector<ResultRow>& rows() const { return rows_; }
  const std::map<std::string, std::vector<double>>& traces() const {
    return traces_;
  }

 private:
  std::string dir_;
  std::mutex mutex_;
  std::ofstream results_out_;
  std::ofstream traces_out_;
  std::ofstream errors_out_;
  std::vector<ResultRow> rows_;
  std::map<std::string, std::vector<double>> traces_;
  std::set<std::string> done_;
};

struct CampaignRunSummary {
  std::size_t eligible = 0;       // filtered entries matching the direction
  std::size_t resumed = 0;        // already on disk, skipped
  std::size_t attacked = 0;       // completed this run
  std::size_t errored = 0;        // aborted by oracle/decode failure
  std::size_t budget_skipped = 0; // never started, budget expired
  std::size_t cancel_skipped = 0; // never started, cancellation requested
  bool truncated = false;         // budget expired with work remaining
  bool cancelled = false;
};

// Attacks every eligible entry not already in the sink, with a bounded worker
// pool. Per-attack seeds derive from (campaign seed, image_id), so results do
// not depend on the parallelism level or scheduling order. A set `cancel`
// flag stops new attacks from starting; in-flight attacks finish and are
// recorded.
inline CampaignRunSummary run_campaign(const std::vector<FilteredEntry>& filtered,
                                       Oracle& oracle, const CampaignConfig& config,
                                       CampaignSink& sink,
                                       std::ostream* progress = nullptr,
                                       const std::atomic<bool>* cancel = nullptr) {
  config.validate();
  std::vector<FilteredEntry> pending;
  CampaignRunSummary summary;
  for (const FilteredEntry& fe : filtered) {
    if (!config.wants(fe.entry.label)) continue;
    ++summary.eligible;
    if (sink.already_done(fe.entry.image_id)) {
      ++summary.resumed;
      continue;
    }
    pending.push_back(fe);
  }
  std::sort(pending.begin(), pending.end(),
            [](const FilteredEntry& a, const FilteredEntry& b) {
              return a.entry.image_id < b.entry.image_id;
            });

  std::optional<std::chrono::steady_clock::time_point> deadline;
  if (config.budget) deadline = std::chrono::steady_clock::now() + *config.budget;

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> attacked{0};
  std::atomic<std::size_t> errored{0};
  std::atomic<std::size_t> budget_skipped{0};
  std::atomic<std::size_t> cancel_skipped{0};
  std::atomic<bool> expired{false};
  std::mutex progress_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      if (cancel && cancel->load()) {
        cancel_skipped.fetch_add(1);
        continue;
      }
      if (deadline && std::chrono::steady_clock::now() >= *deadline)
        expired.store(true);
      if (expired.load()) {
        budget_skipped.fetch_add(1);
        continue;
      }
      const FilteredEntry& fe = pending[i];
      const AttackConfig attack_cfg =
          config.attack_config_for(fe.entry.image_id, fe.entry.label);
      try {
        const RgbImage image = decode_png_file(fe.entry.path);
        const AttackRecord rec = run_attack(image, oracle, attack_cfg,
                                            fe.entry.image_id, fe.original_score);
        sink.append(fe.entry.label, rec);
        attacked.fetch_add(1);
        if (progress) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          *progress << "attack " << rec.image_id << ": "
                    << outcome_name(rec.outcome) << " (score "
                    << format_double(rec.original_score) << " -> "
                    << format_double(rec.final_score) << ", "
                    << rec.iterations << " iterations)\n";
        }
      } catch (const std::exception& e) {
        sink.log_error(fe.entry.image_id, e.what());
        errored.fetch_add(1);
        if (progress) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          *progress << "attack " << fe.entry.image_id << " errored: " << e.what()
                    << '\n';
        }
      }
    }
  };

  const std::size_t workers =
      std::min(static_cast<std::size_t>(config.parallelism),
               std::max<std::size_t>(pending.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  summary.attacked = attacked.load();
  summary.errored = errored.load();
  summary.budget_skipped = budget_skipped.load();
  summary.cancel_skipped = cancel_skipped.load();
  summary.truncated = summary.budget_skipped > 0;
  summary.cancelled = summary.cancel_skipped > 0;
  return summary;
}

// -------- Reporting --------

struct DirectionReport {
  std::size_t count = 0;
  std::size_t early_converged = 0;
  std::size_t failed = 0;
  std::size_t success = 0;
  std::size_t strong_success = 0;
  std::size_t attacked = 0;  // count − early_converged
  std::optional<double> success_rate;         // null when attacked == 0
  std::optional<double> strong_success_rate;
  std::optional<SummaryStats> before;  // orig scores, attacked rows only
  std::optional<SummaryStats> after;   // final scores, attacked rows only
  std::optional<SummaryStats> change;  // final − orig, attacked rows only
  std::vector<std::pair<Rgb, std::size_t>> color_histogram;

  bool operator==(const DirectionReport&) const = default;
};

struct CampaignReport {
  std::size_t rows = 0;
  DirectionReport mitosis_to_normal;
  DirectionReport normal_to_mitosis;

  bool operator==(const CampaignReport&) const = default;
};

// Exact perturbation colors of successful attacks, most frequent first
// (ties broken by ascending r, g, b).
inline std::vector<std::pair<Rgb, std::size_t>> color_histogram(
    const std::vector<ResultRow>& rows) {
  std::map<std::array<int, 3>, std::size_t> counts;
  for (const ResultRow& row : rows)
    if (row.outcome == Outcome::Success || row.outcome == Outcome::StrongSuccess)
      ++counts[{row.r, row.g, row.b}];
  std::vector<std::pair<Rgb, std::size_t>> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts)
    out.emplace_back(Rgb{static_cast<std::uint8_t>(key[0]),
                         static_cast<std::uint8_t>(key[1]),
                         static_cast<std::uint8_t>(key[2])},
                     n);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

namespace detail {

inline DirectionReport direction_report(const std::vector<ResultRow>& rows,
                                        AttackDirection direction) {
  DirectionReport rep;
  std::vector<ResultRow> mine;
  for (const ResultRow& row : rows)
    if (row.direction == direction) mine.push_back(row);
  rep.count = mine.size();
  std::vector<double> before, after, change;
  for (const ResultRow& row : mine) {
    switch (row.outcome) {
      case Outcome::EarlyConverged: ++rep.early_converged; break;
      case Outcome::Failed: ++rep.failed; break;
      case Outcome::Success: ++rep.success; break;
      case Outcome::StrongSuccess: ++rep.strong_success; break;
    }
    if (row.outcome != Outcome::EarlyConverged) {
      before.push_back(row.orig_score);
      after.push_back(row.final_score);
      change.push_back(row.final_score - row.orig_score);
    }
  }
  rep.attacked = rep.count - rep.early_converged;
  if (rep.attacked > 0) {
    rep.success_rate =
        static_cast<double>(rep.success + rep.strong_success) / rep.attacked;
    rep.strong_success_rate = static_cast<double>(rep.strong_success) / rep.attacked;
    rep.before = summarize(before);
    rep.after = summarize(after);
    rep.change = summarize(change);
  }
  rep.color_histogram = color_histogram(mine);
  return rep;
}

}  // namespace detail

// Aggregates a result set. Everything here is derivable from results.csv
// alone, so a report rebuilt from the file matches the one built in-process.
inline CampaignReport build_report(const std::vector<ResultRow>& rows) {
  CampaignReport report;
  report.rows = rows.size();
  report.mitosis_to_normal =
      detail::direction_report(rows, AttackDirection::MitosisToNormal);
  report.normal_to_mitosis =
      detail::direction_report(rows, AttackDirection::NormalToMitosis);
  return report;
}

inline nlohmann::json stats_to_json(const SummaryStats& s) {
  return {
      {"count", s.count},       {"min", s.min},
      {"max", s.max},           {"mean", s.mean},
      {"median", s.median},     {"std", s.std_dev},
      {"q1", s.q1},             {"q3", s.q3},
      {"whisker_low", s.whisker_low},
      {"whisker_high", s.whisker_high},
      {"outliers", s.outliers},
  };
}

inline nlohmann::json direction_report_to_json(const DirectionReport& rep) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [color, n] : rep.color_histogram)
    hist.push_back({{"r", color.r}, {"g", color.g}, {"b", color.b}, {"count", n}});
  nlohmann::json j = {
      {"count", rep.count},
      {"outcomes",
       {{"early_converged", rep.early_converged},
        {"failed", rep.failed},
        {"success", rep.success},
        {"strong_success", rep.strong_success}}},
      {"attacked", rep.attacked},
      {"success_rate", rep.success_rate ? nlohmann::json(*rep.success_rate)
                                        : nlohmann::json(nullptr)},
      {"strong_success_rate",
       rep.strong_success_rate ? nlohmann::json(*rep.strong_success_rate)
                               : nlohmann::json(nullptr)},
      {"before", rep.before ? stats_to_json(*rep.before) : nlohmann::json(nullptr)},
      {"after", rep.after ? stats_to_json(*rep.after) : nlohmann::json(nullptr)},
      {"change", rep.change ? stats_to_json(*rep.change) : nlohmann::json(nullptr)},
      {"color_histogram", hist},
  };
  return j;
}

inline nlohmann::json report_to_json(const CampaignReport& report) {
  return {
      {"rows", report.rows},
      {"directions",
       {{"mitosis_to_normal", direction_report_to_json(report.mitosis_to_normal)},
        {"normal_to_mitosis", direction_report_to_json(report.normal_to_mitosis)}}},
  };
}

inline nlohmann::json record_to_json(const AttackRecord& rec) {
  return {
      {"image_id", rec.image_id},
      {"direction", direction_name(rec.direction)},
      {"original_score", rec.original_score},
      {"final_score", rec.final_score},
      {"best_perturbation",
       {{"x", rec.best_perturbation.x},
        {"y", rec.best_perturbation.y},
        {"r", rec.best_perturbation.r},
        {"g", rec.best_perturbation.g},
        {"b", rec.best_perturbation.b}}},
      {"outcome", outcome_name(rec.outcome)},
      {"iterations", rec.iterations},
      {"evaluations", rec.evaluations},
      {"trace", rec.trace},
      {"de",
       {{"np", rec.de_params.population_size},
        {"f", rec.de_params.mutation_factor},
        {"cr", rec.de_params.recombination},
        {"max_iter", rec.de_params.max_iterations},
        {"tol", rec.de_params.tolerance},
        {"seed", rec.de_params.rng_seed}}},
  };
}

}  // namespace onepixel
