#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semistereo/tensor.hpp"

namespace semistereo::model {

/// Named tensors in insertion order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t element_count() const noexcept;
  bool empty() const noexcept { return entries_.empty(); }

  std::vector<Entry>::iterator begin() { return entries_.begin(); }
  std::vector<Entry>::iterator end() { return entries_.end(); }
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }

  ParameterSet zeros_like() const;
  bool same_layout(const ParameterSet& other) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace semistereo::model
