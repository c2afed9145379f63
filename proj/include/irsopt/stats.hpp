#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsopt/vendor_json.hpp"

namespace irsopt {

// Welford running mean/variance per dimension, used to standardize
// observations. Frozen (no updates) during evaluation.
class RunningMeanVar {
 public:
  RunningMeanVar() = default;
  explicit RunningMeanVar(std::size_t dim)
      : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void update(std::span<const double> x) {
    if (x.size() != mean_.size())
      throw std::invalid_argument("normalizer dimension mismatch");
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(count_);
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }

  std::vector<double> normalize(std::span<const double> x) const {
    if (x.size() != mean_.size())
      throw std::invalid_argument("normalizer dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sd = std::sqrt(variance(i) + 1e-8);
      out[i] = std::clamp((x[i] - mean_[i]) / sd, -10.0, 10.0);
    }
    return out;
  }

  double variance(std::size_t i) const {
    return count_ > 1 ? m2_[i] / static_cast<double>(count_ - 1) : 1.0;
  }
  double mean(std::size_t i) const { return mean_[i]; }
  long count() const { return count_; }
  std::size_t dim() const { return mean_.size(); }

  nlohmann::json to_json() const {
    return {{"count", count_}, {"mean", mean_}, {"m2", m2_}};
  }
  static RunningMeanVar from_json(const nlohmann::json& j) {
    RunningMeanVar s;
    s.count_ = j.at("count").get<long>();
    s.mean_ = j.at("mean").get<std::vector<double>>();
    s.m2_ = j.at("m2").get<std::vector<double>>();
    if (s.mean_.size() != s.m2_.size())
      throw std::invalid_argument("corrupt normalizer record");
    return s;
  }

 private:
  long count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace irsopt
