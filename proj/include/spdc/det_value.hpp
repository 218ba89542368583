#ifndef SPDC_DET_VALUE_HPP
#define SPDC_DET_VALUE_HPP

#include <cmath>
#include <cstdint>

namespace spdc {

// Overflow-safe determinant carrier: sign in {-1,0,+1} plus magnitude kept
// as mantissa-in-[1,2) and a wide binary exponent, so products of hundreds
// of diagonal factors never leave range. log_magnitude() is the natural log
// of |det|; it is meaningless when sign() == 0.
class DetValue {
 public:
  DetValue() : sign_(0), mant_(0.0), exp2_(0) {}

  static DetValue zero() { return DetValue(); }

  static DetValue one() {
    DetValue d;
    d.sign_ = 1;
    d.mant_ = 1.0;
    return d;
  }

  static DetValue from_value(double v) {
    DetValue d;
    if (v == 0.0) return d;
    d.sign_ = v > 0.0 ? 1 : -1;
    int e = 0;
    double m = std::frexp(std::fabs(v), &e);  // m in [0.5, 1)
    d.mant_ = 2.0 * m;
    d.exp2_ = e - 1;
    return d;
  }

  int sign() const { return sign_; }

  double log_magnitude() const {
    return std::log(mant_) + static_cast<double>(exp2_) * kLn2;
  }

  // sign * mantissa * 2^exp2; overflows to +/-inf (or 0) outside range.
  double value() const {
    if (sign_ == 0) return 0.0;
    double mag = (exp2_ > 2000)    ? HUGE_VAL
                 : (exp2_ < -2000) ? 0.0
                                   : std::ldexp(mant_, static_cast<int>(exp2_));
    return sign_ > 0 ? mag : -mag;
  }

  DetValue& operator*=(const DetValue& o) {
    if (sign_ == 0 || o.sign_ == 0) {
      *this = zero();
      return *this;
    }
    sign_ *= o.sign_;
    exp2_ += o.exp2_;
    mant_ *= o.mant_;  // in [1,4)
    if (mant_ >= 2.0) {
      mant_ *= 0.5;
      ++exp2_;
    }
    return *this;
  }

  friend DetValue operator*(DetValue a, const DetValue& b) { return a *= b; }

  DetValue& scale(double v) { return *this *= from_value(v); }

  // Exact sign flip / identity; used for the +/-1 rotation factor.
  DetValue& flip_sign(int s) {
    sign_ *= s;
    return *this;
  }

  bool operator==(const DetValue& o) const {
    return sign_ == o.sign_ && (sign_ == 0 || (mant_ == o.mant_ && exp2_ == o.exp2_));
  }

  // Same sign and log magnitudes within tol (tol ~ relative error of |det|).
  bool approx_equal(const DetValue& o, double tol) const {
    if (sign_ != o.sign_) return false;
    if (sign_ == 0) return true;
    return std::fabs(log_magnitude() - o.log_magnitude()) <= tol;
  }

 private:
  static constexpr double kLn2 = 0.6931471805599453;
  int sign_;
  double mant_;
  std::int64_t exp2_;
};

}  // namespace spdc

#endif
