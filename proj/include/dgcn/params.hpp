// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dgcn/tensor.hpp"

namespace dgcn {

/// Named collection of trainable tensors. Iteration (and therefore random
/// initialisation) follows lexicographic path order.
class ParamStore {
 public:
  /// Registers a tensor initialised from U(-bound, bound); bound 0 means zeros.
  Tensor add(const std::string& name, Shape shape, double bound);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;

  void initialize(std::mt19937_64& rng);
  void zero_grad();
  /// Sum of squared values of every tensor, as a differentiable scalar.
  Tensor squared_norm() const;

  /// Deep copy of values (fresh tensors, no gradients).
  ParamStore clone() const;
  /// Copies values from `other`, which must hold the same names and shapes.
  void assign(const ParamStore& other);

  void freeze(bool frozen);

 private:
  struct Entry {
    Tensor tensor;
    double bound = 0.0;
  };
  std::map<std::string, Entry> entries_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every tensor of a store.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// One update from the current gradients; tensors without a gradient
  /// are treated as having zero gradient.
  void step(ParamStore& params);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace dgcn
