#pragma once

namespace stmgnn {

/// Digamma function psi(x) for x > 0. Recurrence below 6, then the
/// Bernoulli asymptotic series; absolute error under 1e-12 on (0, inf).
double digamma(double x);

/// Standard normal density.
double norm_pdf(double z);

/// Standard normal CDF via erfc; accurate in both tails.
double norm_cdf(double z);

/// log(1 - Phi(z)), stable for large positive z.
double log_norm_sf(double z);

/// Hazard phi(z) / (1 - Phi(z)), stable for large positive z.
double norm_hazard(double z);

/// Inverse standard normal CDF (Acklam's rational approximation with one
/// Halley polish step); tau in (0, 1).
double inv_norm_cdf(double tau);

}  // namespace stmgnn
