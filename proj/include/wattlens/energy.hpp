#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace wattlens {

// Energy as an integer count of femtojoules. All model arithmetic goes
// through this type so that sums are exact and order-independent.
class Energy {
 public:
  constexpr Energy() = default;
  static constexpr Energy from_fj(std::int64_t fj) { return Energy(fj); }

  constexpr std::int64_t fj() const { return fj_; }
  constexpr double pj() const { return static_cast<double>(fj_) / 1000.0; }

  constexpr Energy& operator+=(Energy o) {
    fj_ += o.fj_;
    return *this;
  }
  constexpr Energy& operator-=(Energy o) {
    fj_ -= o.fj_;
    return *this;
  }
  friend constexpr Energy operator+(Energy a, Energy b) { return Energy(a.fj_ + b.fj_); }
  friend constexpr Energy operator-(Energy a, Energy b) { return Energy(a.fj_ - b.fj_); }
  friend constexpr Energy operator*(Energy a, std::int64_t n) { return Energy(a.fj_ * n); }
  friend constexpr Energy operator*(std::int64_t n, Energy a) { return Energy(a.fj_ * n); }
  friend constexpr auto operator<=>(Energy, Energy) = default;

 private:
  constexpr explicit Energy(std::int64_t fj) : fj_(fj) {}
  std::int64_t fj_ = 0;
};

// Fixed three-decimal picojoule rendering, e.g. "82000.000".
std::string format_pj(Energy e);

}  // namespace wattlens
