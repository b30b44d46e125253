#pragma once

namespace sckpd {

// Both throw DomainError for x <= 0.
double digamma(double x);
double trigamma(double x);

}  // namespace sckpd
