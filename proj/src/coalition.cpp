#include "anomshap/coalition.hpp"

#include "anomshap/errors.hpp"

namespace anomshap {

Coalition Coalition::full(std::size_t d) {
  Coalition c(d);
  std::fill(c.mask_.begin(), c.mask_.end(), 1);
  c.count_ = d;
  return c;
}

Coalition Coalition::of(std::size_t d, std::initializer_list<std::size_t> members) {
  return from_members(d, std::span<const std::size_t>(members.begin(), members.size()));
}

Coalition Coalition::from_members(std::size_t d, std::span<const std::size_t> members) {
  Coalition c(d);
  for (auto i : members) c.insert(i);
  return c;
}

Coalition Coalition::from_bits(std::size_t d, std::uint64_t bits) {
  if (d > 64) throw ArgumentError("bitmask coalitions support at most 64 features");
  Coalition c(d);
  for (std::size_t i = 0; i < d; ++i)
    if ((bits >> i) & 1u) c.insert(i);
  return c;
}

void Coalition::insert(std::size_t i) {
  if (i >= mask_.size()) throw ArgumentError("feature index out of range");
  if (!mask_[i]) {
    mask_[i] = 1;
    ++count_;
  }
}

void Coalition::erase(std::size_t i) {
  if (i >= mask_.size()) throw ArgumentError("feature index out of range");
  if (mask_[i]) {
    mask_[i] = 0;
    --count_;
  }
}

std::vector<std::size_t> Coalition::members() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> Coalition::complement() const {
  std::vector<std::size_t> out;
  out.reserve(mask_.size() - count_);
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (!mask_[i]) out.push_back(i);
  return out;
}

}  // namespace anomshap
