#include "foley/parameters.hpp"

#include <cmath>

#include "foley/errors.hpp"

namespace foley {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ParameterError("Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : entries_) {
    if (n == name) throw ParameterError("parameter '" + name + "' registered twice");
  }
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(data), true));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [_, t] : entries_) out.push_back(t);
  return out;
}

const Tensor& ParameterStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ParameterError("no parameter named '" + name + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParameterStore::load_values(const std::vector<std::pair<std::string, Tensor>>& values) {
  if (values.size() != entries_.size()) {
    throw FormatError("checkpoint holds " + std::to_string(values.size()) + " tensors, model expects " +
                      std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [name, t] = entries_[i];
    const auto& [vname, v] = values[i];
    if (vname != name) throw FormatError("checkpoint tensor '" + vname + "' where '" + name + "' was expected");
    if (v.shape() != t.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + to_string(v.shape()) + ", model expects " +
                        to_string(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(v.data().begin(), v.data().end(), dst.begin());
  }
}

void ParameterStore::round_to_float() {
  for (auto& [_, t] : entries_) {
    for (auto& v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace foley
