#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>

#include "onepixel/errors.hpp"
#include "onepixel/image.hpp"
#include "onepixel/rng.hpp"

namespace onepixel {

// Classifier confidence in [0, 1]: 1 reads as mitosis, 0 as normal tissue.
// Construction validates the range; out-of-range values are an error, never
// clamped, so a misconfigured response field shows up instead of hiding.
class ScoreValue {
 public:
  ScoreValue() = default;
  explicit ScoreValue(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw OracleError(OracleErrorKind::ScoreOutOfRange,
                        "score " + std::to_string(v) + " outside [0, 1]");
  }

  double value() const { return value_; }

 private:
  double value_ = 0;
};

// A black-box confidence scorer. Implementations must be deterministic for a
// fixed configuration (same image, same score) and safe to call from
// concurrent attack workers.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual ScoreValue score(const RgbImage& image) = 0;
};

struct OracleStats {
  std::size_t total_queries = 0;
  std::size_t cache_hits = 0;
  std::chrono::nanoseconds total_latency{0};
};

class ConstantOracle : public Oracle {
 public:
  explicit ConstantOracle(double score) : score_(score) {}
  ScoreValue score(const RgbImage&) override { return score_; }

 private:
  ScoreValue score_;
};

// Wraps an arbitrary pure function as an oracle.
class FunctionOracle : public Oracle {
 public:
  explicit FunctionOracle(std::function<double(const RgbImage&)> fn)
      : fn_(std::move(fn)) {}
  ScoreValue score(const RgbImage& image) override { return ScoreValue(fn_(image)); }

 private:
  std::function<double(const RgbImage&)> fn_;
};

// Synthetic classifier with a planted single-pixel vulnerability:
//
//   score = clamp_01(base + delta * max over pixels of proximity(pixel))
//   proximity(p) = max(0, 1 - L1(color(p), trigger) / (3 * 255 * width))
//
// Any pixel whose color falls inside the trigger's L1 basin moves the score
// by up to delta; the proximity ramp gives the evolution a searchable
// landscape instead of a needle.
class PlantedOracle : public Oracle {
 public:
  PlantedOracle(double base_score, Rgb trigger, double width, double delta)
      : base_(base_score), trigger_(trigger), width_(width), delta_(delta) {
    if (!(base_score >= 0.0 && base_score <= 1.0))
      throw ConfigError("planted oracle base score must lie in [0, 1]");
    if (!(width > 0)) throw ConfigError("planted oracle width must be > 0");
  }

  ScoreValue score(const RgbImage& image) override {
    double best = 0;
    const double radius = 3.0 * 255.0 * width_;
    for (const Rgb& p : image.pixels()) {
      const double l1 = std::abs(static_cast<double>(p.r) - trigger_.r) +
                        std::abs(static_cast<double>(p.g) - trigger_.g) +
                        std::abs(static_cast<double>(p.b) - trigger_.b);
      best = std::max(best, 1.0 - l1 / radius);
    }
    const double raw = base_ + delta_ * std::max(best, 0.0);
    return ScoreValue(std::min(std::max(raw, 0.0), 1.0));
  }

  Rgb trigger() const { return trigger_; }
  double base_score() const { return base_; }

 private:
  double base_;
  Rgb trigger_;
  double width_;
  double delta_;
};

// Synthetic classifier that scores overall darkness: the mean over pixels of
// 1 - (r+g+b)/765, squashed through a logistic curve centered at `threshold`.
// One pixel barely moves the mean, so this oracle doubles as a baseline that
// single-pixel attacks should fail against.
class DarknessOracle : public Oracle {
 public:
  explicit DarknessOracle(double threshold = 0.5, double steepness = 12.0)
      : threshold_(threshold), steepness_(steepness) {
    if (!(steepness > 0)) throw ConfigError("darkness oracle steepness must be > 0");
  }

  ScoreValue score(const RgbImage& image) override {
    double sum = 0;
    for (const Rgb& p : image.pixels())
      sum += 1.0 - (static_cast<double>(p.r) + p.g + p.b) / 765.0;
    const double darkness = sum / static_cast<double>(image.pixels().size());
    return ScoreValue(1.0 / (1.0 + std::exp(-steepness_ * (darkness - threshold_))));
  }

 private:
  double threshold_;
  double steepness_;
};

// Memoizes an inner oracle, keyed by a 64-bit hash of the raw pixel data,
// with LRU eviction. Errors pass through uncached. In verify mode every
// cache hit re-queries the inner oracle and a score mismatch is reported as
// a purity violation.
class CachedOracle : public Oracle {
 public:
  CachedOracle(std::shared_ptr<Oracle> inner, std::size_t capacity,
               bool verify = false)
      : inner_(std::move(inner)), capacity_(capacity), verify_(verify) {
    if (capacity_ < 1) throw ConfigError("cache capacity must be >= 1");
    if (!inner_) throw ConfigError("cache needs an inner oracle");
  }

  ScoreValue score(const RgbImage& image) override {
    const std::uint64_t key = hash_image(image);
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.total_queries;
    auto it = map_.find(key);
    if (it != map_.end()) {
      ++stats_.cache_hits;
      lru_.splice(lru_.begin(), lru_, it->second);
      const double cached = it->second->second;
      if (verify_) {
        const double fresh = query_inner_locked(image);
        if (fresh != cached)
          throw OracleError(OracleErrorKind::PurityViolation,
                            "oracle purity violation: image scored " +
                                std::to_string(cached) + " then " +
                                std::to_string(fresh));
      }
      return ScoreValue(cached);
    }
    const double fresh = query_inner_locked(image);
    lru_.emplace_front(key, fresh);
    map_[key] = lru_.begin();
    if (lru_.size() > capacity_) {
      map_.erase(lru_.back().first);
      lru_.pop_back();
    }
    return ScoreValue(fresh);
  }

  OracleStats stats() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return stats_;
  }

  static std::uint64_t hash_image(const RgbImage& image) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    mix(static_cast<std::uint64_t>(image.width()));
    mix(static_cast<std::uint64_t>(image.height()));
    for (const Rgb& p : image.pixels()) {
      h ^= p.r; h *= 0x100000001b3ULL;
      h ^= p.g; h *= 0x100000001b3ULL;
      h ^= p.b; h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  // Caller holds mutex_. The cache serializes inner queries; per-attack
  // evaluation ordering is the evolution engine's concern, not ours.
  double query_inner_locked(const RgbImage& image) {
    const auto start = std::chrono::steady_clock::now();
    const double v = inner_->score(image).value();
    stats_.total_latency += std::chrono::steady_clock::now() - start;
    return v;
  }

  std::shared_ptr<Oracle> inner_;
  std::size_t capacity_;
  bool verify_;
  mutable std::mutex mutex_;
  std::list<std::pair<std::uint64_t, double>> lru_;
  std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, double>>::iterator> map_;
  OracleStats stats_;
};

}  // namespace onepixel
