#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace anomshap {

/// A subset of the feature indices {0, ..., d-1}.
class Coalition {
 public:
  Coalition() = default;
  explicit Coalition(std::size_t d) : mask_(d, 0) {}

  static Coalition full(std::size_t d);
  static Coalition of(std::size_t d, std::initializer_list<std::size_t> members);
  static Coalition from_members(std::size_t d, std::span<const std::size_t> members);
  /// Bit i of `bits` selects feature i; requires d <= 64.
  static Coalition from_bits(std::size_t d, std::uint64_t bits);

  std::size_t dim() const noexcept { return mask_.size(); }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  bool is_full() const noexcept { return count_ == mask_.size(); }
  bool contains(std::size_t i) const { return mask_.at(i) != 0; }

  void insert(std::size_t i);
  void erase(std::size_t i);

  std::vector<std::size_t> members() const;
  std::vector<std::size_t> complement() const;

  friend bool operator==(const Coalition& a, const Coalition& b) { return a.mask_ == b.mask_; }

 private:
  std::vector<std::uint8_t> mask_;
  std::size_t count_ = 0;
};

}  // namespace anomshap
