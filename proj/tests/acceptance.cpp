// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails. Criteria 7 and 8
// audit the artifacts produced by criterion 4's campaign.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "onepixel/onepixel.hpp"

using namespace onepixel;

namespace {

int g_failures = 0;

using Verdict = std::pair<bool, std::string>;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }
  std::string str() const {
    std::ostringstream s;
    s.precision(1);
    s << std::fixed << seconds() << "s";
    return s.str();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

template <typename Fn>
void criterion(int n, const std::string& label, Fn&& fn) {
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& ex) {
    v = {false, std::string("exception: ") + ex.what()};
  }
  if (!v.first) ++g_failures;
  std::cout << (v.first ? "PASS" : "FAIL") << " criterion " << n << ": "
            << label << " (" << v.second << ")" << std::endl;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RgbImage dark_image(int w, int h, Rng& rng) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set(x, y,
              {static_cast<std::uint8_t>(20 + rng.below(40)),
               static_cast<std::uint8_t>(20 + rng.below(40)),
               static_cast<std::uint8_t>(20 + rng.below(40))});
  return img;
}

// Artifacts of criterion 4, audited again by criteria 7 and 8.
struct CampaignArtifacts {
  std::unique_ptr<test::TempDir> dir;
  std::string out_dir;
  std::map<std::string, std::string> source_paths;
  std::vector<ResultRow> rows;
};

CampaignArtifacts g_campaign;

// ---- criteria ----

Verdict de_finds_analytic_optimum() {
  Timer timer;
  const std::vector<int> center = {11, 47, 5, 63, 0};
  const de::Bounds bounds(std::vector<std::pair<int, int>>(5, {0, 63}));
  de::Config cfg;
  cfg.population_size = 50;
  cfg.mutation_factor = 0.5;
  cfg.recombination = 0.7;
  cfg.max_iterations = 100;
  cfg.tolerance = 0.0;
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.rng_seed = seed;
    const de::RunResult res = de::minimize(
        [&](const std::vector<int>& v) {
          double s = 0;
          for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - center[i];
            s += d * d;
          }
          return s;
        },
        bounds, cfg);
    if (res.best_vector == center) ++exact;
  }
  const bool ok = exact == 10 && timer.seconds() < 5.0;
  return {ok, std::to_string(exact) + "/10 seeds exact, " + timer.str()};
}

Verdict de_matches_brute_force() {
  Timer timer;
  Rng img_rng(8080);
  const RgbImage image = dark_image(8, 8, img_rng);
  const auto oracle = parse_oracle_spec("planted");

  // Reference optimum over the coarse color lattice.
  const int lattice[4] = {0, 85, 170, 255};
  double coarse_best = 1.0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int r : lattice)
        for (int g : lattice)
          for (int b : lattice) {
            const PixelPerturbation p{x, y, static_cast<std::uint8_t>(r),
                                      static_cast<std::uint8_t>(g),
                                      static_cast<std::uint8_t>(b)};
            coarse_best = std::min(
                coarse_best, oracle->score(apply_perturbation(image, p)).value());
          }

  const de::Bounds bounds(std::vector<std::pair<int, int>>{
      {0, 7}, {0, 7}, {0, 255}, {0, 255}, {0, 255}});
  de::Config cfg;  // defaults: NP=200, F=0.5, CR=0.7, 100 iters, tol=0.01
  int within = 0;
  for (std::uint64_t seed = 101; seed <= 110; ++seed) {
    cfg.rng_seed = seed;
    const de::RunResult res = de::minimize(
        [&](const std::vector<int>& v) {
          const PixelPerturbation p{v[0], v[1], static_cast<std::uint8_t>(v[2]),
                                    static_cast<std::uint8_t>(v[3]),
                                    static_cast<std::uint8_t>(v[4])};
          return oracle->score(apply_perturbation(image, p)).value();
        },
        bounds, cfg);
    if (res.best_energy <= coarse_best + 0.05) ++within;
  }
  const bool ok = within >= 9 && timer.seconds() < 60.0;
  std::ostringstream detail;
  detail << "exhaustive optimum " << coarse_best << ", " << within
         << "/10 seeds within 0.05, " << timer.str();
  return {ok, detail.str()};
}

Verdict convergence_rule_hand_values() {
  const bool tight = de::check_convergence({0.96, 0.95, 0.97}, 0.01);
  const bool spread = de::check_convergence({0.1, 0.9}, 0.01);
  return {tight && !spread, std::string("tight=") + (tight ? "true" : "false") +
                                " spread=" + (spread ? "true" : "false")};
}

Verdict synthetic_campaign_success_rate() {
  Timer timer;
  g_campaign.dir = std::make_unique<test::TempDir>();
  const test::TempDir& dir = *g_campaign.dir;
  std::filesystem::create_directories(dir.file("data/mitosis"));
  std::filesystem::create_directories(dir.file("data/normal"));

  Rng rng(20260816);
  for (int i = 0; i < 200; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "img_%03d", i);
    const std::string path = dir.file("data/mitosis/" + std::string(name) + ".png");
    encode_png_file(dark_image(16, 16, rng), path);
    g_campaign.source_paths[name] = path;
  }

  ServerConfig server_cfg;
  server_cfg.oracle = parse_oracle_spec("planted");
  ModelServer server(server_cfg);
  server.start();

  HttpOracleConfig http_cfg;
  http_cfg.endpoint = server.url();
  http_cfg.max_parallel = 8;
  HttpOracle oracle(http_cfg);

  const auto entries = load_manifest(dir.file("data"));
  const FilterOutcome filtered = filter_dataset(entries, oracle, 0.9, 0.1);
  if (filtered.kept.size() != 200)
    return {false, "filter kept " + std::to_string(filtered.kept.size()) +
                       " of 200"};

  CampaignConfig cfg;  // default DE parameters
  cfg.direction = AttackDirection::MitosisToNormal;
  cfg.seed = 42;
  cfg.parallelism = 8;

  g_campaign.out_dir = dir.file("campaign");
  CampaignSink sink(g_campaign.out_dir);
  const CampaignRunSummary summary = run_campaign(filtered.kept, oracle, cfg, sink);
  g_campaign.rows = sink.finalize();
  const std::size_t served = server.requests_served();
  server.stop();

  const CampaignReport report = build_report(g_campaign.rows);
  {
    std::ofstream stats_out(sink.stats_path(), std::ios::binary | std::ios::trunc);
    stats_out << report_to_json(report).dump(2) << '\n';
  }

  const DirectionReport& down = report.mitosis_to_normal;
  if (summary.attacked != 200 || down.attacked == 0)
    return {false, "attacked " + std::to_string(summary.attacked) + " of 200"};
  const double rate = *down.success_rate;
  const bool ok = rate >= 0.90 && timer.seconds() < 300.0;
  std::ostringstream detail;
  detail << down.success << "+" << down.strong_success << " of " << down.attacked
         << " non-early-converged succeeded (rate " << rate << ", "
         << down.early_converged << " early-converged), " << served
         << " HTTP queries, " << timer.str();
  return {ok, detail.str()};
}

Verdict outcome_tiers_on_boundaries() {
  const auto tier = [](AttackDirection d, double final_score) {
    return classify_outcome(d, false, 3, final_score, 0.5,
                            d == AttackDirection::MitosisToNormal ? 0.05 : 0.95);
  };
  const bool minimize_ok =
      tier(AttackDirection::MitosisToNormal, 0.04) == Outcome::StrongSuccess &&
      tier(AttackDirection::MitosisToNormal, 0.4) == Outcome::Success &&
      tier(AttackDirection::MitosisToNormal, 0.6) == Outcome::Failed;
  const bool maximize_ok =
      tier(AttackDirection::NormalToMitosis, 0.96) == Outcome::StrongSuccess &&
      tier(AttackDirection::NormalToMitosis, 0.6) == Outcome::Success &&
      tier(AttackDirection::NormalToMitosis, 0.4) == Outcome::Failed;
  return {minimize_ok && maximize_ok,
          std::string("minimize ") + (minimize_ok ? "ok" : "wrong") +
              ", maximize " + (maximize_ok ? "ok" : "wrong")};
}

Verdict filter_keeps_exact_boundary_set() {
  test::TempDir dir;
  std::filesystem::create_directories(dir.file("mitosis"));
  std::filesystem::create_directories(dir.file("normal"));
  // at(0,0).r / 100 is the score, so the kept set is known in advance:
  // mitosis needs r >= 90, normal needs r <= 10, both boundaries inclusive.
  const auto plant = [&](const std::string& rel, int r) {
    RgbImage img(2, 2);
    img.set(0, 0, {static_cast<std::uint8_t>(r), 0, 0});
    encode_png_file(img, dir.file(rel));
  };
  plant("mitosis/m89.png", 89);
  plant("mitosis/m90.png", 90);
  plant("mitosis/m91.png", 91);
  plant("normal/n09.png", 9);
  plant("normal/n10.png", 10);
  plant("normal/n11.png", 11);

  FunctionOracle oracle(
      [](const RgbImage& img) { return img.at(0, 0).r / 100.0; });
  const FilterOutcome res =
      filter_dataset(load_manifest(dir.str()), oracle, 0.9, 0.1);

  std::vector<std::string> kept;
  for (const FilteredEntry& fe : res.kept) kept.push_back(fe.entry.image_id);
  const std::vector<std::string> want = {"m90", "m91", "n09", "n10"};
  std::ostringstream detail;
  detail << "kept {";
  for (std::size_t i = 0; i < kept.size(); ++i)
    detail << (i ? ", " : "") << kept[i];
  detail << "}, excluded " << res.excluded;
  return {kept == want && res.examined == 6 && res.errored == 0, detail.str()};
}

Verdict adversarial_pngs_differ_in_one_pixel() {
  if (g_campaign.rows.empty()) return {false, "criterion 4 campaign unavailable"};
  const std::string adv_dir = g_campaign.dir->file("adv");
  std::filesystem::create_directories(adv_dir);
  std::size_t checked = 0;
  for (const ResultRow& row : g_campaign.rows) {
    if (row.outcome != Outcome::Success && row.outcome != Outcome::StrongSuccess)
      continue;
    const RgbImage source = decode_png_file(g_campaign.source_paths.at(row.image_id));
    const PixelPerturbation p{row.x, row.y, static_cast<std::uint8_t>(row.r),
                              static_cast<std::uint8_t>(row.g),
                              static_cast<std::uint8_t>(row.b)};
    const std::string path = adv_dir + "/" + row.image_id + "_adv.png";
    encode_png_file(apply_perturbation(source, p), path);
    const std::size_t diff = pixel_diff_count(source, decode_png_file(path));
    if (diff != 1)
      return {false, row.image_id + " differs in " + std::to_string(diff) +
                         " pixels"};
    ++checked;
  }
  return {checked > 0,
          std::to_string(checked) + " adversarial PNGs, each exactly one pixel off"};
}

Verdict stats_replay_and_csv_round_trip() {
  if (g_campaign.rows.empty()) return {false, "criterion 4 campaign unavailable"};
  const std::string csv_path = g_campaign.out_dir + "/results.csv";
  const std::vector<ResultRow> replayed = read_results_csv_file(csv_path);
  if (replayed != g_campaign.rows) return {false, "CSV round-trip lost data"};

  std::ostringstream rewritten;
  write_results_csv(rewritten, replayed);
  if (rewritten.str() != slurp(csv_path))
    return {false, "re-serialized CSV differs from the emitted file"};

  const nlohmann::json recomputed = report_to_json(build_report(replayed));
  const nlohmann::json emitted =
      nlohmann::json::parse(slurp(g_campaign.out_dir + "/stats.json"));
  if (recomputed != emitted)
    return {false, "stats recomputed from results.csv differ from stats.json"};
  return {true, std::to_string(replayed.size()) +
                    " rows lossless, stats.json replayed field-for-field"};
}

Verdict http_loop_matches_in_process() {
  Timer timer;
  // Exact score transport.
  ServerConfig clean_cfg;
  clean_cfg.oracle = parse_oracle_spec("darkness");
  ModelServer clean(clean_cfg);
  clean.start();
  HttpOracleConfig http_cfg;
  http_cfg.endpoint = clean.url();
  DarknessOracle local;
  Rng rng(7171);
  int exact = 0;
  for (int i = 0; i < 50; ++i) {
    const RgbImage img = test::random_image(1 + static_cast<int>(rng.below(24)),
                                            1 + static_cast<int>(rng.below(24)), rng);
    if (http_score(http_cfg, encode_png_string(img)).value() ==
        local.score(img).value())
      ++exact;
  }
  clean.stop();

  // Retry resilience under injected failures.
  ServerConfig flaky_cfg;
  flaky_cfg.oracle = parse_oracle_spec("darkness");
  flaky_cfg.failure_rate = 0.2;
  flaky_cfg.seed = 2026;
  ModelServer flaky(flaky_cfg);
  flaky.start();
  http_cfg.endpoint = flaky.url();
  http_cfg.retries = 2;
  http_cfg.retry_backoff = std::chrono::milliseconds(5);
  const std::string probe = encode_png_string(test::random_image(8, 8, rng));
  int succeeded = 0;
  for (int i = 0; i < 500; ++i) {
    try {
      http_score(http_cfg, probe);
      ++succeeded;
    } catch (const OracleError&) {
    }
  }
  flaky.stop();

  const bool ok = exact == 50 && succeeded >= 475 && timer.seconds() < 30.0;
  std::ostringstream detail;
  detail << exact << "/50 scores bit-exact, " << succeeded
         << "/500 attempts survived rate-0.2 failures, " << timer.str();
  return {ok, detail.str()};
}

Verdict campaign_parallelism_determinism() {
  test::TempDir dir;
  std::filesystem::create_directories(dir.file("data/mitosis"));
  std::filesystem::create_directories(dir.file("data/normal"));
  Rng rng(5150);
  for (int i = 0; i < 12; ++i)
    encode_png_file(dark_image(8, 8, rng),
                    dir.file("data/mitosis/m" + std::to_string(i) + ".png"));
  for (int i = 0; i < 4; ++i) {
    RgbImage img(8, 8, {40, 40, 40});
    img.set(i, 3, {255, 255, 0});
    encode_png_file(img, dir.file("data/normal/n" + std::to_string(i) + ".png"));
  }

  const auto run = [&](const std::string& out_dir, int parallel) {
    const std::string cmd =
        "'" ONEPIXEL_BIN "' campaign '" + dir.file("data") + "' --out-dir '" +
        out_dir + "' --oracle planted --np 30 --max-iter 30 --seed 7 --parallel " +
        std::to_string(parallel) + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  if (run(dir.file("serial"), 1) != 0) return {false, "--parallel 1 run failed"};
  if (run(dir.file("wide"), 8) != 0) return {false, "--parallel 8 run failed"};

  const std::string serial = slurp(dir.file("serial") + "/results.csv");
  const std::string wide = slurp(dir.file("wide") + "/results.csv");
  if (serial.empty() || serial != wide)
    return {false, "results.csv differs between parallelism levels"};
  return {true, "16 attacks, --parallel 1 and 8 byte-identical"};
}

}  // namespace

int main() {
  criterion(1, "DE finds the analytic optimum exactly", de_finds_analytic_optimum);
  criterion(2, "DE matches exhaustive single-pixel search", de_matches_brute_force);
  criterion(3, "convergence rule on hand-computed values",
            convergence_rule_hand_values);
  criterion(4, "synthetic HTTP campaign success rate",
            synthetic_campaign_success_rate);
  criterion(5, "outcome tiers on threshold boundaries", outcome_tiers_on_boundaries);
  criterion(6, "filtering keeps exactly the confident entries",
            filter_keeps_exact_boundary_set);
  criterion(7, "every successful attack changes exactly one pixel",
            adversarial_pngs_differ_in_one_pixel);
  criterion(8, "stats replay from results.csv, CSV round-trip lossless",
            stats_replay_and_csv_round_trip);
  criterion(9, "HTTP scores bit-exact and retry-resilient",
            http_loop_matches_in_process);
  criterion(10, "campaign output independent of parallelism",
            campaign_parallelism_determinism);

  if (g_failures == 0) {
    std::cout << "all 10 criteria passed" << std::endl;
    return 0;
  }
  std::cout << g_failures << " criteria failed" << std::endl;
  return 1;
}
