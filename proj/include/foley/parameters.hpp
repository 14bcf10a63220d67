#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "foley/tensor.hpp"

namespace foley {

// splitmix64-seeded xoshiro256** so parameter init and batch sampling are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n).
  std::size_t below(std::size_t n);

 private:
  std::uint64_t s_[4];
};

// Ordered, named collection of trainable leaves.
class ParameterStore {
 public:
  // Weight drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor& find(const std::string& name) const;
  std::size_t scalar_count() const;

  void zero_grad();

  // Copies values from same-shaped tensors (checkpoint restore).
  void load_values(const std::vector<std::pair<std::string, Tensor>>& values);

  // Rounds every value to the nearest float (checkpoint storage precision).
  void round_to_float();

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace foley
