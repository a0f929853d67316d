#pragma once

namespace debiasreg {

// Standard normal cdf Phi(x).
double normal_cdf(double x);

// Standard normal density.
double normal_pdf(double x);

// Inverse of the standard normal cdf, accurate to better than 1e-10.
// Rational approximation (Acklam) refined by one Halley step on erfc.
double normal_quantile(double p);

// Two-sided critical value: P(|N(0,1)| > z) = alpha.
double normal_two_sided_quantile(double alpha);

}  // namespace debiasreg
