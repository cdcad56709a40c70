#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "depthstyle/ops.hpp"

namespace depthstyle {

/// Named, insertion-ordered parameter collection with stable element addresses.
template <typename Scalar>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> value;
  };

  ParamSet() = default;
  ParamSet(const ParamSet& o) : entries_(o.entries_), index_(o.index_) {}
  ParamSet& operator=(const ParamSet& o) {
    entries_ = o.entries_;
    index_ = o.index_;
    return *this;
  }
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Tensor<Scalar>& add(const std::string& name, Tensor<Scalar> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, std::move(value)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<Scalar>& at(const std::string& name) { return entries_[lookup(name)].value; }
  const Tensor<Scalar>& at(const std::string& name) const { return entries_[lookup(name)].value; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Total number of scalar parameters.
  Index count() const {
    Index total = 0;
    for (const auto& e : entries_) total += e.value.size();
    return total;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor<Scalar>(e.value.shape()));
    return out;
  }

  void set_zero() {
    for (auto& e : entries_) e.value.flat().setZero();
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& e : entries_) h = fnv1a(e.value, h);
    return h;
  }

  bool all_finite() const {
    for (const auto& e : entries_)
      if (!e.value.all_finite()) return false;
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binds a parameter (and optionally its gradient slot) for use in an Ops call.
template <typename Scalar>
class ParamBinder {
 public:
  explicit ParamBinder(const ParamSet<Scalar>& params, ParamSet<Scalar>* grads = nullptr)
      : params_(params), grads_(grads) {}

  ParamRef<Scalar> operator()(const std::string& name) const {
    return {&params_.at(name), grads_ ? &grads_->at(name) : nullptr};
  }

 private:
  const ParamSet<Scalar>& params_;
  ParamSet<Scalar>* grads_;
};

}  // namespace depthstyle
