#pragma once

#include <cmath>
#include <vector>

namespace changraph {

/// One term a*sin(b*x + c).
struct SinTerm {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Scalar function of x from the fixed family  p(x) + sum_i a_i sin(b_i x + c_i),
/// with p a polynomial given by its coefficient list (low degree first).
/// First and second derivatives are exact. The family is closed under
/// addition and subtraction, which is how edge widths l = h_hi - h_lo keep
/// exact derivatives.
class HFunction {
public:
  HFunction() = default;
  HFunction(std::vector<double> poly, std::vector<SinTerm> sins = {})
      : poly_(std::move(poly)), sins_(std::move(sins)) {}

  static HFunction constant(double c) { return HFunction({c}); }

  double operator()(double x) const {
    double v = 0.0;
    for (std::size_t i = poly_.size(); i-- > 0;) v = v * x + poly_[i];
    for (const auto& s : sins_) v += s.a * std::sin(s.b * x + s.c);
    return v;
  }

  double d(double x) const {
    double v = 0.0;
    for (std::size_t i = poly_.size(); i-- > 1;) v = v * x + static_cast<double>(i) * poly_[i];
    for (const auto& s : sins_) v += s.a * s.b * std::cos(s.b * x + s.c);
    return v;
  }

  double dd(double x) const {
    double v = 0.0;
    for (std::size_t i = poly_.size(); i-- > 2;)
      v = v * x + static_cast<double>(i) * static_cast<double>(i - 1) * poly_[i];
    for (const auto& s : sins_) v -= s.a * s.b * s.b * std::sin(s.b * x + s.c);
    return v;
  }

  HFunction operator-(const HFunction& o) const {
    std::vector<double> p(std::max(poly_.size(), o.poly_.size()), 0.0);
    for (std::size_t i = 0; i < poly_.size(); ++i) p[i] += poly_[i];
    for (std::size_t i = 0; i < o.poly_.size(); ++i) p[i] -= o.poly_[i];
    std::vector<SinTerm> s = sins_;
    for (auto t : o.sins_) {
      t.a = -t.a;
      s.push_back(t);
    }
    return HFunction(std::move(p), std::move(s));
  }

  const std::vector<double>& poly() const { return poly_; }
  const std::vector<SinTerm>& sins() const { return sins_; }

private:
  std::vector<double> poly_;
  std::vector<SinTerm> sins_;
};

}  // namespace changraph
