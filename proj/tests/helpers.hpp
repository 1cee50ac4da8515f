#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>

#include "onepixel/image.hpp"
#include "onepixel/oracle.hpp"
#include "onepixel/rng.hpp"

namespace test {

// Self-deleting scratch directory unique to one test.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("onepixel_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string data_file(const std::string& name) {
  return std::string(ONEPIXEL_SOURCE_DIR) + "/tests/data/" + name;
}

inline onepixel::RgbImage random_image(int w, int h, onepixel::Rng& rng) {
  onepixel::RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set(x, y,
              {static_cast<std::uint8_t>(rng.below(256)),
               static_cast<std::uint8_t>(rng.below(256)),
               static_cast<std::uint8_t>(rng.below(256))});
  return img;
}

// Forwards to an inner oracle while counting calls.
class CountingOracle : public onepixel::Oracle {
 public:
  explicit CountingOracle(std::shared_ptr<onepixel::Oracle> inner)
      : inner_(std::move(inner)) {}

  onepixel::ScoreValue score(const onepixel::RgbImage& image) override {
    calls_.fetch_add(1);
    return inner_->score(image);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<onepixel::Oracle> inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace test
