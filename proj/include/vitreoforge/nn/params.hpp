#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vitreoforge/aligned.hpp"
#include "vitreoforge/error.hpp"
#include "vitreoforge/rng.hpp"

namespace vitreoforge::nn {

enum class InitRule { Uniform, Ones, Zeros };

// Location of one named parameter block inside the flat weight store.
struct ParamSlot {
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t fan_in = 1;
  InitRule init = InitRule::Uniform;
};

// Records parameter blocks in declaration order; the order defines the on-disk layout.
class ParamLayout {
 public:
  ParamSlot add(std::size_t size, std::size_t fan_in, InitRule init = InitRule::Uniform) {
    ParamSlot s{total_, size, std::max<std::size_t>(fan_in, 1), init};
    total_ += size;
    slots_.push_back(s);
    return s;
  }
  std::size_t total() const noexcept { return total_; }
  const std::vector<ParamSlot>& slots() const noexcept { return slots_; }

 private:
  std::size_t total_ = 0;
  std::vector<ParamSlot> slots_;
};

// Flat weights plus gradient accumulators.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::size_t n) : w_(n, T{0}), g_(n, T{0}) {}
  explicit ParamStore(AlignedVector<T> weights) : w_(std::move(weights)), g_(w_.size(), T{0}) {}
  explicit ParamStore(const std::vector<T>& weights) : ParamStore(AlignedVector<T>(weights.begin(), weights.end())) {}

  std::size_t size() const noexcept { return w_.size(); }
  T* w(const ParamSlot& s) noexcept { return w_.data() + s.offset; }
  const T* w(const ParamSlot& s) const noexcept { return w_.data() + s.offset; }
  T* g(const ParamSlot& s) noexcept { return g_.data() + s.offset; }

  AlignedVector<T>& weights() noexcept { return w_; }
  const AlignedVector<T>& weights() const noexcept { return w_; }
  AlignedVector<T>& grads() noexcept { return g_; }
  const AlignedVector<T>& grads() const noexcept { return g_; }

  void zero_grad() { std::fill(g_.begin(), g_.end(), T{0}); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights, constants for norm affine terms.
  void initialize(const ParamLayout& layout, std::uint64_t seed) {
    if (layout.total() != w_.size()) throw InvalidInput("ParamStore: layout size mismatch");
    Rng rng = make_rng(seed);
    for (const auto& s : layout.slots()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < s.size; ++i) {
        switch (s.init) {
          case InitRule::Uniform: w_[s.offset + i] = static_cast<T>(u(rng)); break;
          case InitRule::Ones: w_[s.offset + i] = T{1}; break;
          case InitRule::Zeros: w_[s.offset + i] = T{0}; break;
        }
      }
    }
  }

  template <typename U>
  ParamStore<U> cast() const {
    AlignedVector<U> out(w_.size());
    std::transform(w_.begin(), w_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return ParamStore<U>(std::move(out));
  }

 private:
  AlignedVector<T> w_;
  AlignedVector<T> g_;
};

// Forward-pass switches. Dropout is active only when training and an RNG is supplied.
struct RunContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

}  // namespace vitreoforge::nn
