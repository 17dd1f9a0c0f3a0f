#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace stmgnn {

class RngStream;

/// Clamp bounds applied to constrained parameters before any log.
inline constexpr double kProbClamp = 1e-6;
inline constexpr double kPosFloor = 1e-6;

enum class HeadKind { Zinb, Nb, Gaussian, TruncNormal };

HeadKind head_kind_from_string(const std::string& s);
const char* to_string(HeadKind kind);

/// Typing of a distribution parameter. Decides the activation the model
/// applies to the fused raw embedding: sigmoid for Probability, softplus
/// with a floor for Positive, identity for Real.
enum class ParamKind { Probability, Positive, Real };

// ---------------------------------------------------------------------------
// ZINB: P(Y=0) = pi + (1-pi)(1-p)^r,
//       P(Y=y) = (1-pi) * Gamma(y+r)/(Gamma(r)Gamma(y+1)) * p^y (1-p)^r.
// Mean is (1-pi) * r * p / (1-p).
// ---------------------------------------------------------------------------

struct ZinbParams {
  double pi = 0.5;
  double p = 0.5;
  double r = 1.0;
};

struct ZinbGrad {
  double d_pi = 0.0;
  double d_p = 0.0;
  double d_r = 0.0;
};

double zinb_pmf(long long y, const ZinbParams& params);
double zinb_log_pmf(long long y, const ZinbParams& params);

/// Negative log-likelihood of a single count. Computed in log space via
/// log-gamma; never exponentiates the PMF.
double zinb_nll(double y, const ZinbParams& params);

/// Sum of elementwise NLL over an array with matching parameter arrays.
/// Throws NumericError naming the offending index on non-finite output.
double zinb_nll(std::span<const double> y, std::span<const ZinbParams> params);

/// Same with a single parameter triple broadcast over y.
double zinb_nll(std::span<const double> y, const ZinbParams& params);

/// Partials of the per-element NLL with respect to the constrained
/// parameters (pi, p, r).
ZinbGrad zinb_nll_grad(double y, const ZinbParams& params);

/// Partials with respect to the unconstrained pre-activations
/// (pi = sigmoid(a), p = sigmoid(b), r = softplus(c)).
ZinbGrad zinb_nll_grad_preact(double y, const ZinbParams& params);

double zinb_mean(const ZinbParams& params);

/// Smallest integer q with CDF(q) >= tau, tau in (0, 1).
long long zinb_quantile(const ZinbParams& params, double tau);

/// Structural-zero Bernoulli then gamma-Poisson NB draw.
long long zinb_sample(const ZinbParams& params, RngStream& rng);

// NB building blocks (pi pinned to zero; shared by the NB head).
double nb_log_pmf(long long y, double p, double r);
long long nb_sample(double p, double r, RngStream& rng);

// ---------------------------------------------------------------------------
// Head-agnostic interface. Parameters are passed as a span in the head's
// declared channel order; the model stays head-agnostic through this.
// ---------------------------------------------------------------------------

class DistributionHead {
 public:
  virtual ~DistributionHead() = default;

  virtual HeadKind kind() const = 0;
  virtual int param_count() const = 0;
  virtual ParamKind param_kind(int k) const = 0;
  virtual const char* param_name(int k) const = 0;

  virtual double nll(double y, std::span<const double> theta) const = 0;
  virtual void nll_grad(double y, std::span<const double> theta,
                        std::span<double> grad) const = 0;
  virtual double mean(std::span<const double> theta) const = 0;
  virtual double quantile(std::span<const double> theta, double tau) const = 0;
  virtual double sample(std::span<const double> theta, RngStream& rng) const = 0;

  /// P(Y = y) on the integer support. Continuous heads integrate the unit
  /// bin [y-0.5, y+0.5), with the y = 0 bin opening at -inf (Gaussian) or
  /// at the truncation point (Truncated Normal).
  virtual double count_prob(long long y, std::span<const double> theta) const = 0;
};

/// Singleton per head kind.
const DistributionHead& head_family(HeadKind kind);

/// Chain-rule factor d(theta)/d(preactivation) for a parameter value that
/// already passed its activation.
double preactivation_chain(ParamKind kind, double theta);

/// Gradient with respect to pre-activations for any head.
void nll_grad_preact(const DistributionHead& head, double y,
                     std::span<const double> theta, std::span<double> grad);

}  // namespace stmgnn
