#include "semistereo/model/parameters.hpp"

#include "semistereo/error.hpp"

namespace semistereo::model {

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return entries_[it->second].second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return entries_[it->second].second;
}

std::size_t ParameterSet::element_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor::zeros_like(t));
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].first != other.entries_[i].first ||
        !entries_[i].second.same_shape(other.entries_[i].second))
      return false;
  return true;
}

}  // namespace semistereo::model
