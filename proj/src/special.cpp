#include "sckpd/special.hpp"

#include "sckpd/common.hpp"

#include <cmath>

namespace sckpd {

namespace {

constexpr double kShift = 10.0;

void require_positive(double x, const char *name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(name) + " requires a finite positive argument");
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double z = 1.0 / (x * x);
  // Bernoulli coefficients B_2k / (2k)
  const double series =
      z * (1.0 / 12 -
           z * (1.0 / 120 -
                z * (1.0 / 252 -
                     z * (1.0 / 240 -
                          z * (1.0 / 132 -
                               z * (691.0 / 32760 - z * (1.0 / 12 - z * 3617.0 / 8160)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double z = inv * inv;
  // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
  const double series =
      inv * z *
      (1.0 / 6 -
       z * (1.0 / 30 -
            z * (1.0 / 42 -
                 z * (1.0 / 30 - z * (5.0 / 66 - z * (691.0 / 2730 - z * 7.0 / 6))))));
  return acc + inv + 0.5 * z + series;
}

}  // namespace sckpd
