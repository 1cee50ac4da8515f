#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "onepixel/de.hpp"
#include "onepixel/errors.hpp"
#include "onepixel/image.hpp"
#include "onepixel/oracle.hpp"

namespace onepixel {

enum class AttackDirection {
  MitosisToNormal,  // drive the score down
  NormalToMitosis,  // drive the score up
};

enum class Outcome { EarlyConverged, Failed, Success, StrongSuccess };

inline std::string_view direction_name(AttackDirection d) {
  return d == AttackDirection::MitosisToNormal ? "mitosis_to_normal"
                                               : "normal_to_mitosis";
}

inline AttackDirection parse_direction(std::string_view name) {
  if (name == "mitosis_to_normal") return AttackDirection::MitosisToNormal;
  if (name == "normal_to_mitosis") return AttackDirection::NormalToMitosis;
  throw ConfigError("unknown attack direction: " + std::string(name));
}

inline std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::EarlyConverged: return "early_converged";
    case Outcome::Failed: return "failed";
    case Outcome::Success: return "success";
    case Outcome::StrongSuccess: return "strong_success";
  }
  throw std::logic_error("unreachable outcome");
}

inline Outcome parse_outcome(std::string_view name) {
  if (name == "early_converged") return Outcome::EarlyConverged;
  if (name == "failed") return Outcome::Failed;
  if (name == "success") return Outcome::Success;
  if (name == "strong_success") return Outcome::StrongSuccess;
  throw ConfigError("unknown outcome: " + std::string(name));
}

struct AttackConfig {
  AttackDirection direction = AttackDirection::MitosisToNormal;
  de::Config de;
  double success_threshold = 0.5;
  // Unset means the conventional tier bound for the direction: 0.05 when
  // minimizing, 0.95 when maximizing.
  std::optional<double> strong_threshold;
  bool early_stop_on_strong = false;

  double resolved_strong_threshold() const {
    if (strong_threshold) return *strong_threshold;
    return direction == AttackDirection::MitosisToNormal ? 0.05 : 0.95;
  }

  void validate() const {
    de.validate();
    const double strong = resolved_strong_threshold();
    if (success_threshold < 0.0 || success_threshold > 1.0)
      throw ConfigError("success_threshold must be within [0, 1]");
    if (strong < 0.0 || strong > 1.0)
      throw ConfigError("strong_threshold must be within [0, 1]");
    if (direction == AttackDirection::MitosisToNormal) {
      if (strong > success_threshold)
        throw ConfigError(
            "minimizing attack needs strong_threshold <= success_threshold");
    } else if (strong < success_threshold) {
      throw ConfigError(
          "maximizing attack needs strong_threshold >= success_threshold");
    }
  }

  bool operator==(const AttackConfig&) const = default;
};

struct AttackRecord {
  std::string image_id;
  AttackDirection direction = AttackDirection::MitosisToNormal;
  double original_score = 0.0;
  double final_score = 0.0;
  PixelPerturbation best_perturbation;
  Outcome outcome = Outcome::Failed;
  int iterations = 0;
  std::size_t evaluations = 0;
  // Best raw score after initialization (index 0) and after each generation.
  std::vector<double> trace;
  de::Config de_params;

  bool operator==(const AttackRecord&) const = default;
};

// Oracle failure mid-attack; carries whatever trace accumulated before the
// failure so the abort is diagnosable.
class AttackError : public Error {
 public:
  AttackError(std::string image_id, const std::string& what,
              std::vector<double> partial_trace, std::size_t evaluations)
      : Error("attack on '" + image_id + "' aborted: " + what),
        image_id_(std::move(image_id)),
        partial_trace_(std::move(partial_trace)),
        evaluations_(evaluations) {}

  const std::string& image_id() const { return image_id_; }
  const std::vector<double>& partial_trace() const { return partial_trace_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::string image_id_;
  std::vector<double> partial_trace_;
  std::size_t evaluations_;
};

// Tier rules, strict comparisons: a final score sitting exactly on a
// threshold does not cross it.
inline Outcome classify_outcome(AttackDirection direction,
                                bool converged_after_initial, int iterations,
                                double final_score, double success_threshold,
                                double strong_threshold) {
  if (converged_after_initial && iterations == 0) return Outcome::EarlyConverged;
  if (direction == AttackDirection::MitosisToNormal) {
    if (final_score < strong_threshold) return Outcome::StrongSuccess;
    if (final_score < success_threshold) return Outcome::Success;
    return Outcome::Failed;
  }
  if (final_score > strong_threshold) return Outcome::StrongSuccess;
  if (final_score > success_threshold) return Outcome::Success;
  return Outcome::Failed;
}

inline Outcome classify_outcome(const AttackConfig& config,
                                bool converged_after_initial, int iterations,
                                double final_score) {
  return classify_outcome(config.direction, converged_after_initial, iterations,
                          final_score, config.success_threshold,
                          config.resolved_strong_threshold());
}

namespace detail {

inline PixelPerturbation perturbation_from_vector(const std::vector<int>& v) {
  return PixelPerturbation{v[0], v[1], static_cast<std::uint8_t>(v[2]),
                           static_cast<std::uint8_t>(v[3]),
                           static_cast<std::uint8_t>(v[4])};
}

}  // namespace detail

// Runs one attack: measures the original score (unless the caller already
// holds it from filtering), evolves a perturbation over
// (x, y, r, g, b) ∈ [0,w−1]×[0,h−1]×[0,255]³, re-queries the winner, and
// classifies the outcome. Maximizing attacks negate the score inside the
// optimizer only; the record's trace and scores stay raw.
inline AttackRecord run_attack(const RgbImage& image, Oracle& oracle,
                               const AttackConfig& config, std::string image_id,
                               std::optional<double> known_original = std::nullopt) {
  config.validate();
  const bool minimize = config.direction == AttackDirection::MitosisToNormal;
  const auto raw = [minimize](double energy) { return minimize ? energy : -energy; };

  std::size_t extra_evaluations = 0;
  double original = 0.0;
  if (known_original) {
    original = ScoreValue(*known_original).value();
  } else {
    try {
      original = oracle.score(image).value();
    } catch (const std::exception& e) {
      throw AttackError(image_id, e.what(), {}, 0);
    }
    extra_evaluations = 1;
  }

  const de::Bounds bounds({{0, static_cast<int>(image.width()) - 1},
                           {0, static_cast<int>(image.height()) - 1},
                           {0, 255},
                           {0, 255},
                           {0, 255}});
  const auto objective = [&](const std::vector<int>& v) {
    const double s =
        oracle.score(apply_perturbation(image, detail::perturbation_from_vector(v)))
            .value();
    return minimize ? s : -s;
  };

  de::StopPredicate early_stop;
  if (config.early_stop_on_strong) {
    const double strong = config.resolved_strong_threshold();
    early_stop = [&raw, strong, minimize](double best_energy) {
      const double score = raw(best_energy);
      return minimize ? score < strong : score > strong;
    };
  }

  de::RunResult result;
  try {
    result = de::minimize(objective, bounds, config.de, early_stop);
  } catch (const de::RunAborted& aborted) {
    std::vector<double> partial;
    partial.reserve(aborted.partial_trace().size());
    for (double e : aborted.partial_trace()) partial.push_back(raw(e));
    throw AttackError(image_id, aborted.what(), std::move(partial),
                      aborted.evaluations() + extra_evaluations);
  }

  AttackRecord record;
  record.image_id = std::move(image_id);
  record.direction = config.direction;
  record.original_score = original;
  record.best_perturbation = detail::perturbation_from_vector(result.best_vector);
  record.iterations = result.iterations_completed;
  record.trace.reserve(result.trace.size());
  for (double e : result.trace) record.trace.push_back(raw(e));

  double final_score = 0.0;
  try {
    final_score =
        oracle.score(apply_perturbation(image, record.best_perturbation)).value();
  } catch (const std::exception& e) {
    throw AttackError(record.image_id, e.what(), record.trace,
                      result.evaluations + extra_evaluations);
  }
  record.final_score = final_score;
  record.evaluations = result.evaluations + extra_evaluations + 1;
  record.outcome = classify_outcome(config, result.converged_after_initial,
                                    record.iterations, record.final_score);
  record.de_params = config.de;
  return record;
}

}  // namespace onepixel
