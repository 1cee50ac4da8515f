// onepixel: black-box one-pixel attacks against image classifiers.
//
// Exit codes: 0 success; 1 attack did not cross the success threshold;
// 2 configuration, input, or runtime error; 3 campaign truncated by budget.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "onepixel/onepixel.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

struct OracleFlags {
  std::string oracle_spec;
  std::string endpoint;
  std::string field_path;
  std::string timeout = "30s";
  int retries = 2;
  std::string retry_backoff = "100ms";
  std::size_t cache = 0;
};

void add_oracle_flags(CLI::App* cmd, OracleFlags& of) {
  cmd->add_option("--oracle", of.oracle_spec,
                  "Inline synthetic oracle spec: constant:score=S | "
                  "planted:base=B,trigger=R-G-B,w=W,delta=D | "
                  "darkness:threshold=T,steepness=K");
  cmd->add_option("--endpoint", of.endpoint, "Model server URL")
      ->default_str("http://localhost:5000/model/predict");
  cmd->add_option("--field-path", of.field_path,
                  "Slash-delimited score locator in the JSON response")
      ->default_str("predictions/0/probability");
  cmd->add_option("--timeout", of.timeout, "Per-request timeout")
      ->capture_default_str();
  cmd->add_option("--retries", of.retries,
                  "Retries for transport failures and 5xx responses")
      ->capture_default_str();
  cmd->add_option("--retry-backoff", of.retry_backoff,
                  "Initial retry backoff, doubled per retry")
      ->capture_default_str();
  cmd->add_option("--cache", of.cache,
                  "LRU score cache capacity (0 disables caching)")
      ->capture_default_str();
}

std::shared_ptr<onepixel::Oracle> make_oracle(const OracleFlags& of,
                                              int parallelism) {
  using namespace onepixel;
  if (!of.oracle_spec.empty() && !of.endpoint.empty())
    throw ConfigError("--oracle and --endpoint are mutually exclusive");
  std::shared_ptr<Oracle> oracle;
  if (!of.oracle_spec.empty()) {
    oracle = parse_oracle_spec(of.oracle_spec);
  } else {
    HttpOracleConfig cfg = apply_env_overrides(HttpOracleConfig{});
    if (!of.endpoint.empty()) cfg.endpoint = of.endpoint;
    if (!of.field_path.empty()) cfg.field_path = of.field_path;
    cfg.timeout = parse_duration(of.timeout);
    cfg.retries = of.retries;
    cfg.retry_backoff = parse_duration(of.retry_backoff);
    cfg.max_parallel = std::max(cfg.max_parallel, parallelism);
    oracle = std::make_shared<HttpOracle>(cfg);
  }
  if (of.cache > 0) oracle = std::make_shared<CachedOracle>(oracle, of.cache);
  return oracle;
}

struct DeFlags {
  onepixel::de::Config de;
};

void add_de_flags(CLI::App* cmd, DeFlags& df) {
  cmd->add_option("--np", df.de.population_size, "DE population size")
      ->capture_default_str();
  cmd->add_option("--f", df.de.mutation_factor, "DE mutation factor")
      ->capture_default_str();
  cmd->add_option("--cr", df.de.recombination, "DE crossover probability")
      ->capture_default_str();
  cmd->add_option("--max-iter", df.de.max_iterations, "DE generation cap")
      ->capture_default_str();
  cmd->add_option("--tol", df.de.tolerance,
                  "Convergence tolerance: stop when std(scores) <= tol * "
                  "|mean(scores)|")
      ->capture_default_str();
}

const std::vector<std::string> kDirections = {"mitosis_to_normal",
                                              "normal_to_mitosis"};

// ---- attack ----

struct AttackCmd {
  std::string image_path;
  std::string image_id;
  std::string direction = "mitosis_to_normal";
  OracleFlags oracle;
  DeFlags de;
  std::uint64_t seed = 0;
  double success_threshold = 0.5;
  std::optional<double> strong_threshold;
  bool early_stop = false;
  std::string out_dir;
};

int run_attack_cmd(const AttackCmd& c) {
  using namespace onepixel;
  const RgbImage image = decode_png_file(c.image_path);
  const std::string id =
      c.image_id.empty() ? std::filesystem::path(c.image_path).stem().string()
                         : c.image_id;
  AttackConfig cfg;
  cfg.direction = parse_direction(c.direction);
  cfg.de = c.de.de;
  cfg.de.rng_seed = c.seed;
  cfg.success_threshold = c.success_threshold;
  cfg.strong_threshold = c.strong_threshold;
  cfg.early_stop_on_strong = c.early_stop;
  auto oracle = make_oracle(c.oracle, 1);

  const AttackRecord rec = run_attack(image, *oracle, cfg, id);
  std::cout << record_to_json(rec).dump(2) << std::endl;

  if (!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    const std::string stem = c.out_dir + "/" + sanitize_filename(id);
    encode_png_file(apply_perturbation(image, rec.best_perturbation),
                    stem + "_adv.png");
    std::ofstream trace_out(stem + "_trace.csv",
                            std::ios::binary | std::ios::trunc);
    if (!trace_out) throw Error("cannot open " + stem + "_trace.csv");
    trace_out << kTracesHeader << '\n';
    write_trace_rows(trace_out, id, rec.trace);
    if (!trace_out) throw Error("failed to write " + stem + "_trace.csv");
    std::cerr << "wrote " << stem << "_adv.png and " << stem << "_trace.csv\n";
  }
  const bool crossed =
      rec.outcome == Outcome::Success || rec.outcome == Outcome::StrongSuccess;
  return crossed ? 0 : 1;
}

// ---- campaign ----

struct CampaignCmd {
  std::string manifest;
  std::string out_dir;
  std::string direction;  // empty: both directions by label
  OracleFlags oracle;
  DeFlags de;
  std::uint64_t seed = 0;
  int parallel = 1;
  std::string budget;  // empty: unlimited
  double mitosis_min = 0.9;
  double normal_max = 0.1;
  double success_threshold = 0.5;
  std::optional<double> strong_threshold;
  bool early_stop = false;
};

int run_campaign_cmd(const CampaignCmd& c) {
  using namespace onepixel;
  CampaignConfig cfg;
  cfg.de = c.de.de;
  cfg.success_threshold = c.success_threshold;
  cfg.strong_threshold = c.strong_threshold;
  cfg.early_stop_on_strong = c.early_stop;
  if (!c.direction.empty()) cfg.direction = parse_direction(c.direction);
  cfg.seed = c.seed;
  cfg.parallelism = c.parallel;
  if (!c.budget.empty()) cfg.budget = parse_duration(c.budget);
  cfg.mitosis_min = c.mitosis_min;
  cfg.normal_max = c.normal_max;
  cfg.validate();

  auto oracle = make_oracle(c.oracle, c.parallel);
  const std::vector<DatasetEntry> entries = load_manifest(c.manifest);
  std::cerr << "manifest: " << entries.size() << " entries\n";
  const FilterOutcome filtered =
      filter_dataset(entries, *oracle, cfg.mitosis_min, cfg.normal_max, &std::cerr);
  std::cerr << "filter: kept " << filtered.kept.size() << " of "
            << filtered.examined << " (" << filtered.excluded << " excluded, "
            << filtered.errored << " errored)\n";

  CampaignSink sink(c.out_dir);
  const CampaignRunSummary summary =
      run_campaign(filtered.kept, *oracle, cfg, sink, &std::cerr, &g_interrupted);
  const std::vector<ResultRow>& rows = sink.finalize();

  const CampaignReport report = build_report(rows);
  const nlohmann::json report_json = report_to_json(report);
  {
    std::ofstream stats_out(sink.stats_path(), std::ios::binary | std::ios::trunc);
    if (!stats_out) throw Error("cannot open " + sink.stats_path());
    stats_out << report_json.dump(2) << '\n';
    if (!stats_out) throw Error("failed to write " + sink.stats_path());
  }
  emit_plots(report, rows, sink.traces(), sink.dir());

  nlohmann::json out = {
      {"out_dir", sink.dir()},
      {"eligible", summary.eligible},
      {"resumed", summary.resumed},
      {"attacked", summary.attacked},
      {"errored", summary.errored},
      {"budget_skipped", summary.budget_skipped},
      {"truncated", summary.truncated},
      {"cancelled", summary.cancelled},
      {"report", report_json},
  };
  std::cout << out.dump(2) << std::endl;

  if (summary.cancelled) return 130;
  return summary.truncated ? 3 : 0;
}

// ---- filter ----

struct FilterCmd {
  std::string manifest;
  OracleFlags oracle;
  double mitosis_min = 0.9;
  double normal_max = 0.1;
  std::string out_manifest;
};

int run_filter_cmd(const FilterCmd& c) {
  using namespace onepixel;
  auto oracle = make_oracle(c.oracle, 1);
  const std::vector<DatasetEntry> entries = load_manifest(c.manifest);
  const FilterOutcome res =
      filter_dataset(entries, *oracle, c.mitosis_min, c.normal_max, &std::cerr);

  nlohmann::json kept = nlohmann::json::array();
  for (const FilteredEntry& fe : res.kept)
    kept.push_back({{"image_id", fe.entry.image_id},
                    {"path", fe.entry.path},
                    {"label", label_name(fe.entry.label)},
                    {"score", fe.original_score}});
  nlohmann::json out = {
      {"examined", res.examined},
      {"kept", kept},
      {"excluded", res.excluded},
      {"errored", res.errored},
  };
  std::cout << out.dump(2) << std::endl;

  if (!c.out_manifest.empty()) {
    std::ofstream mout(c.out_manifest, std::ios::binary | std::ios::trunc);
    if (!mout) throw Error("cannot open " + c.out_manifest);
    mout << "image_id,path,label\n";
    for (const FilteredEntry& fe : res.kept)
      mout << csv_escape(fe.entry.image_id) << ','
           << csv_escape(std::filesystem::absolute(fe.entry.path).string()) << ','
           << label_name(fe.entry.label) << '\n';
    if (!mout) throw Error("failed to write " + c.out_manifest);
    std::cerr << "wrote " << c.out_manifest << "\n";
  }
  return 0;
}

// ---- stats ----

struct StatsCmd {
  std::string results_csv;
  std::string out_file;
};

int run_stats_cmd(const StatsCmd& c) {
  using namespace onepixel;
  const std::vector<ResultRow> rows = read_results_csv_file(c.results_csv);
  const nlohmann::json j = report_to_json(build_report(rows));
  std::cout << j.dump(2) << std::endl;
  if (!c.out_file.empty()) {
    std::ofstream out(c.out_file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + c.out_file);
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed to write " + c.out_file);
  }
  return 0;
}

// ---- render ----

struct RenderCmd {
  std::string results_csv;
  std::string out_dir;
  std::string traces_csv;  // default: traces.csv next to results.csv
  std::vector<std::string> image_ids;
  std::string images_manifest;
};

int run_render_cmd(const RenderCmd& c) {
  using namespace onepixel;
  const std::vector<ResultRow> rows = read_results_csv_file(c.results_csv);
  const CampaignReport report = build_report(rows);

  std::map<std::string, std::vector<double>> traces;
  if (!c.image_ids.empty()) {
    std::string traces_path = c.traces_csv;
    if (traces_path.empty())
      traces_path = (std::filesystem::path(c.results_csv).parent_path() /
                     "traces.csv")
                        .string();
    std::ifstream in(traces_path, std::ios::binary);
    if (!in) throw Error("cannot open traces file: " + traces_path);
    traces = read_traces_csv(in);
  }

  PlotOptions options;
  options.image_ids = c.image_ids;
  if (!c.image_ids.empty()) {
    if (c.images_manifest.empty())
      throw ConfigError(
          "--image-id rendering needs --images to locate source PNGs");
    auto sources = std::make_shared<std::map<std::string, std::string>>();
    for (const DatasetEntry& e : load_manifest(c.images_manifest))
      (*sources)[e.image_id] = e.path;
    options.load_source = [sources](const ResultRow& row) {
      const auto it = sources->find(row.image_id);
      if (it == sources->end())
        throw ConfigError("image_id '" + row.image_id +
                          "' is not in the --images manifest");
      return decode_png_file(it->second);
    };
  }

  const std::vector<std::string> written =
      emit_plots(report, rows, traces, c.out_dir, options);
  nlohmann::json out = {{"written", written}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// ---- serve ----

struct ServeCmd {
  std::string oracle_spec = "planted:base=0.97,trigger=255-255-0,w=0.5,delta=-0.95";
  std::string bind_address = "127.0.0.1";
  int port = 5000;
  std::string latency = "0ms";
  double failure_rate = 0.0;
  std::uint64_t failure_seed = 0;
};

int run_serve_cmd(const ServeCmd& c) {
  using namespace onepixel;
  ServerConfig cfg;
  cfg.bind_address = c.bind_address;
  cfg.port = c.port;
  cfg.oracle = parse_oracle_spec(c.oracle_spec);
  cfg.latency = parse_duration(c.latency);
  cfg.failure_rate = c.failure_rate;
  cfg.seed = c.failure_seed;

  ModelServer server(cfg);
  server.start();
  nlohmann::json out = {{"url", server.url()}, {"port", server.port()}};
  std::cout << out.dump() << std::endl;
  std::cerr << "serving " << c.oracle_spec << " at " << server.url()
            << " (Ctrl-C to stop)\n";
  while (!g_interrupted.load())
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  std::cerr << "served " << server.requests_served() << " predict requests\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "onepixel: black-box one-pixel adversarial attacks on image "
      "classifiers via differential evolution",
      "onepixel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "onepixel 1.0.0");

  AttackCmd attack;
  CLI::App* attack_cmd = app.add_subcommand(
      "attack", "Attack a single PNG and print the attack record as JSON");
  attack_cmd->add_option("image", attack.image_path, "Source PNG")
      ->required()
      ->check(CLI::ExistingFile);
  attack_cmd->add_option("--image-id", attack.image_id,
                         "Record id (default: image file stem)");
  attack_cmd
      ->add_option("--direction", attack.direction,
                   "mitosis_to_normal minimizes the score, normal_to_mitosis "
                   "maximizes it")
      ->check(CLI::IsMember(kDirections))
      ->capture_default_str();
  add_oracle_flags(attack_cmd, attack.oracle);
  add_de_flags(attack_cmd, attack.de);
  attack_cmd->add_option("--seed", attack.seed, "DE RNG seed")
      ->capture_default_str();
  attack_cmd
      ->add_option("--success-threshold", attack.success_threshold,
                   "Score the attack must cross (strictly) to count as success")
      ->capture_default_str();
  attack_cmd->add_option(
      "--strong-threshold", attack.strong_threshold,
      "Strong-success bound (default 0.05 minimizing, 0.95 maximizing)");
  attack_cmd->add_flag("--early-stop", attack.early_stop,
                       "Stop evolving once the strong threshold is crossed");
  attack_cmd->add_option("--out", attack.out_dir,
                         "Directory for the adversarial PNG and trace CSV");

  CampaignCmd campaign;
  CLI::App* campaign_cmd = app.add_subcommand(
      "campaign", "Filter a labeled dataset and attack every eligible image");
  campaign_cmd
      ->add_option("manifest", campaign.manifest,
                   "Dataset: directory with mitosis/ and normal/ PNG "
                   "subdirectories, or a CSV manifest (image_id,path,label)")
      ->required();
  campaign_cmd->add_option("--out-dir", campaign.out_dir, "Output directory")
      ->required();
  campaign_cmd
      ->add_option("--direction", campaign.direction,
                   "Restrict to one direction (default: attack mitosis images "
                   "downward and normal images upward)")
      ->check(CLI::IsMember(kDirections));
  add_oracle_flags(campaign_cmd, campaign.oracle);
  add_de_flags(campaign_cmd, campaign.de);
  campaign_cmd->add_option("--seed", campaign.seed,
                           "Campaign seed; per-image seeds derive from it")
      ->capture_default_str();
  campaign_cmd->add_option("--parallel", campaign.parallel, "Worker threads")
      ->capture_default_str();
  campaign_cmd->add_option(
      "--budget", campaign.budget,
      "Wall-clock budget (e.g. 5m); no new attacks start after it expires");
  campaign_cmd
      ->add_option("--mitosis-min", campaign.mitosis_min,
                   "Keep mitosis images scoring at least this")
      ->capture_default_str();
  campaign_cmd
      ->add_option("--normal-max", campaign.normal_max,
                   "Keep normal images scoring at most this")
      ->capture_default_str();
  campaign_cmd
      ->add_option("--success-threshold", campaign.success_threshold,
                   "Score an attack must cross (strictly) to count as success")
      ->capture_default_str();
  campaign_cmd->add_option(
      "--strong-threshold", campaign.strong_threshold,
      "Strong-success bound (default 0.05 minimizing, 0.95 maximizing)");
  campaign_cmd->add_flag("--early-stop", campaign.early_stop,
                         "Stop each attack once the strong threshold is crossed");

  FilterCmd filter;
  CLI::App* filter_cmd = app.add_subcommand(
      "filter", "Score a dataset and report the confidently classified entries");
  filter_cmd->add_option("manifest", filter.manifest, "Dataset directory or CSV")
      ->required();
  add_oracle_flags(filter_cmd, filter.oracle);
  filter_cmd
      ->add_option("--mitosis-min", filter.mitosis_min,
                   "Keep mitosis images scoring at least this")
      ->capture_default_str();
  filter_cmd
      ->add_option("--normal-max", filter.normal_max,
                   "Keep normal images scoring at most this")
      ->capture_default_str();
  filter_cmd->add_option("--out", filter.out_manifest,
                         "Write the kept entries as a CSV manifest");

  StatsCmd stats;
  CLI::App* stats_cmd = app.add_subcommand(
      "stats", "Recompute the campaign report from a results CSV");
  stats_cmd->add_option("results", stats.results_csv, "results.csv path")
      ->required()
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", stats.out_file, "Also write the JSON here");

  RenderCmd render;
  CLI::App* render_cmd = app.add_subcommand(
      "render", "Render box plots, convergence traces, and adversarial PNGs");
  render_cmd->add_option("results", render.results_csv, "results.csv path")
      ->required()
      ->check(CLI::ExistingFile);
  render_cmd->add_option("--out-dir", render.out_dir, "Output directory")
      ->required();
  render_cmd->add_option("--traces", render.traces_csv,
                         "traces.csv path (default: next to results.csv)");
  render_cmd->add_option("--image-id", render.image_ids,
                         "Render trace SVG + adversarial PNG for this id "
                         "(repeatable)");
  render_cmd->add_option("--images", render.images_manifest,
                         "Dataset directory or CSV locating the source PNGs");

  ServeCmd serve;
  CLI::App* serve_cmd = app.add_subcommand(
      "serve", "Run a mock model server backed by a synthetic oracle");
  serve_cmd->add_option("--oracle", serve.oracle_spec, "Synthetic oracle spec")
      ->capture_default_str();
  serve_cmd->add_option("--bind", serve.bind_address, "Bind address")
      ->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)")
      ->capture_default_str();
  serve_cmd->add_option("--latency", serve.latency, "Artificial per-request delay")
      ->capture_default_str();
  serve_cmd
      ->add_option("--failure-rate", serve.failure_rate,
                   "Fraction of predict requests answered 503")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  serve_cmd->add_option("--failure-seed", serve.failure_seed,
                        "Seed for the injected-failure coin")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  try {
    if (attack_cmd->parsed()) return run_attack_cmd(attack);
    if (campaign_cmd->parsed()) return run_campaign_cmd(campaign);
    if (filter_cmd->parsed()) return run_filter_cmd(filter);
    if (stats_cmd->parsed()) return run_stats_cmd(stats);
    if (render_cmd->parsed()) return run_render_cmd(render);
    if (serve_cmd->parsed()) return run_serve_cmd(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}
