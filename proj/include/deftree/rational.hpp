#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>

namespace deftree {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

/// Parses "p/q" or a plain integer string into an exact rational.
inline Rat parse_rat(const std::string& text) {
  try {
    auto slash = text.find('/');
    if (slash == std::string::npos) return Rat(BigInt(text));
    BigInt num(text.substr(0, slash));
    BigInt den(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator");
    return Rat(num, den);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a rational: '" + text + "'");
  }
}

/// Canonical "p/q" (or integer) rendering; bit-exact round trip with parse_rat.
inline std::string format_rat(const Rat& r) { return r.str(); }

/// Nonnegative extended rational: a finite value or +infinity.
///
/// The product 0 * inf is never formed; callers branch on the zero factor
/// first (the suprema it would stand for are suprema of all-zero sets).
class ExtReal {
 public:
  ExtReal() : finite_(0) {}
  explicit ExtReal(Rat v) : finite_(std::move(v)) {
    if (finite_ < 0) throw std::invalid_argument("ExtReal is nonnegative");
  }
  static ExtReal infinity() {
    ExtReal e;
    e.inf_ = true;
    return e;
  }

  bool is_inf() const { return inf_; }
  const Rat& value() const {
    if (inf_) throw std::logic_error("value() on infinity");
    return finite_;
  }
  bool is_zero() const { return !inf_ && finite_ == 0; }
  bool is_positive() const { return inf_ || finite_ > 0; }

  /// Multiplies by a strictly positive rational.
  ExtReal scaled(const Rat& factor) const {
    if (factor <= 0) throw std::logic_error("scaled() needs factor > 0");
    return inf_ ? infinity() : ExtReal(finite_ * factor);
  }
  /// Divides by a strictly positive rational.
  ExtReal over(const Rat& divisor) const {
    if (divisor <= 0) throw std::logic_error("over() needs divisor > 0");
    return inf_ ? infinity() : ExtReal(finite_ / divisor);
  }

  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.finite_ == b.finite_);
  }
  friend bool operator!=(const ExtReal& a, const ExtReal& b) { return !(a == b); }
  friend bool operator<(const ExtReal& a, const ExtReal& b) {
    if (a.inf_) return false;
    if (b.inf_) return true;
    return a.finite_ < b.finite_;
  }
  friend bool operator<=(const ExtReal& a, const ExtReal& b) { return a < b || a == b; }
  friend bool operator>(const ExtReal& a, const ExtReal& b) { return b < a; }
  friend bool operator>=(const ExtReal& a, const ExtReal& b) { return b <= a; }

  static ExtReal max(const ExtReal& a, const ExtReal& b) { return a < b ? b : a; }

  std::string str() const { return inf_ ? "inf" : format_rat(finite_); }

 private:
  Rat finite_;
  bool inf_ = false;
};

}  // namespace deftree
