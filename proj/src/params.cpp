// SPDX-License-Identifier: Apache-2.0
#include "dgcn/params.hpp"

#include <cmath>

namespace dgcn {

Tensor ParamStore::add(const std::string& name, Shape shape, double bound) {
  if (entries_.count(name)) throw Error("parameter '" + name + "' registered twice");
  auto t = Tensor::zeros(std::move(shape), true);
  entries_.emplace(name, Entry{t, bound});
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("no parameter named '" + name + "'");
  return it->second.tensor;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [_, e] : entries_) out.push_back(e.tensor);
  return out;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::initialize(std::mt19937_64& rng) {
  for (auto& [_, e] : entries_) {
    auto values = e.tensor.mutable_data();
    if (e.bound == 0.0) {
      std::fill(values.begin(), values.end(), 0.0);
      continue;
    }
    std::uniform_real_distribution<double> dist(-e.bound, e.bound);
    for (auto& v : values) v = dist(rng);
  }
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.tensor.zero_grad();
}

Tensor ParamStore::squared_norm() const {
  Tensor total;
  for (const auto& [_, e] : entries_) {
    auto s = sum_squares(e.tensor);
    total = total.defined() ? dgcn::add(total, s) : s;
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [k, e] : entries_) {
    auto t = e.tensor.detach();
    t.set_requires_grad(e.tensor.requires_grad());
    out.entries_.emplace(k, Entry{t, e.bound});
  }
  return out;
}

void ParamStore::assign(const ParamStore& other) {
  for (auto& [k, e] : entries_) {
    const auto& src = other.get(k);
    if (src.shape() != e.tensor.shape()) {
      throw Error("parameter '" + k + "': shape " + shape_str(src.shape()) + " does not match " +
                  shape_str(e.tensor.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), e.tensor.mutable_data().begin());
  }
}

void ParamStore::freeze(bool frozen) {
  for (auto& [_, e] : entries_) e.tensor.set_requires_grad(!frozen);
}

void Adam::step(ParamStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Tensor p = params.get(name);
    if (!p.requires_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    auto values = p.mutable_data();
    auto g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace dgcn
