#include "stmgnn/count_distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "stmgnn/errors.hpp"
#include "stmgnn/rng.hpp"
#include "stmgnn/special.hpp"

namespace stmgnn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;
constexpr long long kQuantileScanCap = 20'000'000;

void check_prob(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    std::ostringstream os;
    os << name << " must lie in the open interval (0,1), got " << v;
    throw std::invalid_argument(os.str());
  }
}

void check_pos(double v, const char* name) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << name << " must be positive, got " << v;
    throw std::invalid_argument(os.str());
  }
}

void check_zinb(const ZinbParams& q) {
  check_prob(q.pi, "pi");
  check_prob(q.p, "p");
  check_pos(q.r, "r");
}

long long check_count(double y) {
  if (!(y >= 0.0) || y != std::floor(y)) {
    std::ostringstream os;
    os << "count must be a non-negative integer, got " << y;
    throw std::invalid_argument(os.str());
  }
  return static_cast<long long>(y);
}

/// log(exp(a) + exp(b)) without overflow.
double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "zinb") return HeadKind::Zinb;
  if (s == "nb") return HeadKind::Nb;
  if (s == "gaussian") return HeadKind::Gaussian;
  if (s == "trunc_normal") return HeadKind::TruncNormal;
  throw UsageError("unknown head kind: " + s);
}

const char* to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::Zinb: return "zinb";
    case HeadKind::Nb: return "nb";
    case HeadKind::Gaussian: return "gaussian";
    case HeadKind::TruncNormal: return "trunc_normal";
  }
  return "zinb";
}

// --------------------------------------------------------------------------
// NB core in log space.
// --------------------------------------------------------------------------

double nb_log_pmf(long long y, double p, double r) {
  if (y == 0) return r * std::log1p(-p);
  return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) +
         y * std::log(p) + r * std::log1p(-p);
}

long long nb_sample(double p, double r, RngStream& rng) {
  const double lambda = rng.gamma(r) * (p / (1.0 - p));
  return rng.poisson(lambda);
}

// --------------------------------------------------------------------------
// ZINB operations.
// --------------------------------------------------------------------------

double zinb_log_pmf(long long y, const ZinbParams& q) {
  check_zinb(q);
  if (y < 0) throw std::invalid_argument("count must be non-negative");
  if (y == 0) {
    return log_sum_exp(std::log(q.pi),
                       std::log1p(-q.pi) + q.r * std::log1p(-q.p));
  }
  return std::log1p(-q.pi) + nb_log_pmf(y, q.p, q.r);
}

double zinb_pmf(long long y, const ZinbParams& q) {
  return std::exp(zinb_log_pmf(y, q));
}

double zinb_nll(double y, const ZinbParams& q) {
  return -zinb_log_pmf(check_count(y), q);
}

double zinb_nll(std::span<const double> y, std::span<const ZinbParams> params) {
  if (y.size() != params.size()) {
    throw std::invalid_argument("zinb_nll: y and params sizes differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double term = zinb_nll(y[i], params[i]);
    if (!std::isfinite(term)) {
      std::ostringstream os;
      os << "zinb_nll: non-finite likelihood at index " << i << " (y=" << y[i]
         << ", pi=" << params[i].pi << ", p=" << params[i].p
         << ", r=" << params[i].r << ")";
      throw NumericError(os.str());
    }
    total += term;
  }
  return total;
}

double zinb_nll(std::span<const double> y, const ZinbParams& q) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double term = zinb_nll(y[i], q);
    if (!std::isfinite(term)) {
      std::ostringstream os;
      os << "zinb_nll: non-finite likelihood at index " << i;
      throw NumericError(os.str());
    }
    total += term;
  }
  return total;
}

ZinbGrad zinb_nll_grad(double yv, const ZinbParams& q) {
  check_zinb(q);
  const long long y = check_count(yv);
  ZinbGrad g;
  if (y == 0) {
    // P0 = pi + (1-pi) s with s = (1-p)^r.
    const double s = std::exp(q.r * std::log1p(-q.p));
    const double p0 = q.pi + (1.0 - q.pi) * s;
    g.d_pi = -(1.0 - s) / p0;
    g.d_p = (1.0 - q.pi) * q.r * s / ((1.0 - q.p) * p0);
    g.d_r = -(1.0 - q.pi) * s * std::log1p(-q.p) / p0;
  } else {
    g.d_pi = 1.0 / (1.0 - q.pi);
    g.d_p = -static_cast<double>(y) / q.p + q.r / (1.0 - q.p);
    g.d_r = -(digamma(y + q.r) - digamma(q.r) + std::log1p(-q.p));
  }
  return g;
}

double preactivation_chain(ParamKind kind, double theta) {
  switch (kind) {
    case ParamKind::Probability: return theta * (1.0 - theta);
    case ParamKind::Positive: return -std::expm1(-theta);  // sigmoid of the preactivation
    case ParamKind::Real: return 1.0;
  }
  return 1.0;
}

ZinbGrad zinb_nll_grad_preact(double y, const ZinbParams& q) {
  ZinbGrad g = zinb_nll_grad(y, q);
  g.d_pi *= preactivation_chain(ParamKind::Probability, q.pi);
  g.d_p *= preactivation_chain(ParamKind::Probability, q.p);
  g.d_r *= preactivation_chain(ParamKind::Positive, q.r);
  return g;
}

double zinb_mean(const ZinbParams& q) {
  check_zinb(q);
  return (1.0 - q.pi) * q.r * q.p / (1.0 - q.p);
}

namespace {

/// CDF scan shared by ZINB and NB quantiles. The NB mass sequence uses the
/// multiplicative recurrence nb(y+1) = nb(y) * p (y+r) / (y+1), which keeps
/// the scan O(1) per step without lgamma calls.
long long mixture_quantile(double pi, double p, double r, double tau) {
  double nb_mass = std::exp(r * std::log1p(-p));
  double cdf = pi + (1.0 - pi) * nb_mass;
  long long y = 0;
  double nb_term = nb_mass;
  while (cdf < tau) {
    if (y >= kQuantileScanCap) {
      std::ostringstream os;
      os << "quantile scan exceeded " << kQuantileScanCap
         << " terms (pi=" << pi << ", p=" << p << ", r=" << r << ")";
      throw NumericError(os.str());
    }
    nb_term *= p * (y + r) / (y + 1.0);
    ++y;
    cdf += (1.0 - pi) * nb_term;
  }
  return y;
}

}  // namespace

long long zinb_quantile(const ZinbParams& q, double tau) {
  check_zinb(q);
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("quantile: tau must lie in (0, 1)");
  }
  return mixture_quantile(q.pi, q.p, q.r, tau);
}

long long zinb_sample(const ZinbParams& q, RngStream& rng) {
  check_zinb(q);
  if (rng.uniform() < q.pi) return 0;
  return nb_sample(q.p, q.r, rng);
}

// --------------------------------------------------------------------------
// Head implementations.
// --------------------------------------------------------------------------

namespace {

class ZinbHead final : public DistributionHead {
 public:
  HeadKind kind() const override { return HeadKind::Zinb; }
  int param_count() const override { return 3; }
  ParamKind param_kind(int k) const override {
    return k == 2 ? ParamKind::Positive : ParamKind::Probability;
  }
  const char* param_name(int k) const override {
    static const char* names[] = {"pi", "p", "r"};
    return names[k];
  }
  double nll(double y, std::span<const double> t) const override {
    return zinb_nll(y, unpack(t));
  }
  void nll_grad(double y, std::span<const double> t,
                std::span<double> grad) const override {
    const ZinbGrad g = zinb_nll_grad(y, unpack(t));
    grad[0] = g.d_pi;
    grad[1] = g.d_p;
    grad[2] = g.d_r;
  }
  double mean(std::span<const double> t) const override {
    return zinb_mean(unpack(t));
  }
  double quantile(std::span<const double> t, double tau) const override {
    return static_cast<double>(zinb_quantile(unpack(t), tau));
  }
  double sample(std::span<const double> t, RngStream& rng) const override {
    return static_cast<double>(zinb_sample(unpack(t), rng));
  }
  double count_prob(long long y, std::span<const double> t) const override {
    return zinb_pmf(y, unpack(t));
  }

 private:
  static ZinbParams unpack(std::span<const double> t) {
    return ZinbParams{t[0], t[1], t[2]};
  }
};

class NbHead final : public DistributionHead {
 public:
  HeadKind kind() const override { return HeadKind::Nb; }
  int param_count() const override { return 2; }
  ParamKind param_kind(int k) const override {
    return k == 1 ? ParamKind::Positive : ParamKind::Probability;
  }
  const char* param_name(int k) const override {
    static const char* names[] = {"p", "r"};
    return names[k];
  }
  double nll(double y, std::span<const double> t) const override {
    check_prob(t[0], "p");
    check_pos(t[1], "r");
    return -nb_log_pmf(check_count(y), t[0], t[1]);
  }
  void nll_grad(double y, std::span<const double> t,
                std::span<double> grad) const override {
    check_prob(t[0], "p");
    check_pos(t[1], "r");
    const long long yi = check_count(y);
    const double p = t[0], r = t[1];
    grad[0] = -static_cast<double>(yi) / p + r / (1.0 - p);
    grad[1] = -(digamma(yi + r) - digamma(r) + std::log1p(-p));
  }
  double mean(std::span<const double> t) const override {
    check_prob(t[0], "p");
    check_pos(t[1], "r");
    return t[1] * t[0] / (1.0 - t[0]);
  }
  double quantile(std::span<const double> t, double tau) const override {
    check_prob(t[0], "p");
    check_pos(t[1], "r");
    if (!(tau > 0.0 && tau < 1.0)) {
      throw std::invalid_argument("quantile: tau must lie in (0, 1)");
    }
    return static_cast<double>(mixture_quantile(0.0, t[0], t[1], tau));
  }
  double sample(std::span<const double> t, RngStream& rng) const override {
    return static_cast<double>(nb_sample(t[0], t[1], rng));
  }
  double count_prob(long long y, std::span<const double> t) const override {
    return std::exp(nb_log_pmf(y, t[0], t[1]));
  }
};

class GaussianHead final : public DistributionHead {
 public:
  HeadKind kind() const override { return HeadKind::Gaussian; }
  int param_count() const override { return 2; }
  ParamKind param_kind(int k) const override {
    return k == 0 ? ParamKind::Real : ParamKind::Positive;
  }
  const char* param_name(int k) const override {
    static const char* names[] = {"mu", "sigma"};
    return names[k];
  }
  double nll(double y, std::span<const double> t) const override {
    check_pos(t[1], "sigma");
    const double z = (y - t[0]) / t[1];
    return 0.5 * kLogTwoPi + std::log(t[1]) + 0.5 * z * z;
  }
  void nll_grad(double y, std::span<const double> t,
                std::span<double> grad) const override {
    check_pos(t[1], "sigma");
    const double mu = t[0], sigma = t[1];
    const double z = (y - mu) / sigma;
    grad[0] = -z / sigma;
    grad[1] = (1.0 - z * z) / sigma;
  }
  double mean(std::span<const double> t) const override { return t[0]; }
  double quantile(std::span<const double> t, double tau) const override {
    check_pos(t[1], "sigma");
    return t[0] + t[1] * inv_norm_cdf(tau);
  }
  double sample(std::span<const double> t, RngStream& rng) const override {
    return t[0] + t[1] * rng.normal();
  }
  double count_prob(long long y, std::span<const double> t) const override {
    const double mu = t[0], sigma = t[1];
    const double hi = norm_cdf((y + 0.5 - mu) / sigma);
    if (y == 0) return hi;  // the zero bin opens at -inf
    const double lo = norm_cdf((y - 0.5 - mu) / sigma);
    return std::max(hi - lo, 0.0);
  }
};

class TruncNormalHead final : public DistributionHead {
 public:
  HeadKind kind() const override { return HeadKind::TruncNormal; }
  int param_count() const override { return 2; }
  ParamKind param_kind(int k) const override {
    return k == 0 ? ParamKind::Real : ParamKind::Positive;
  }
  const char* param_name(int k) const override {
    static const char* names[] = {"mu", "sigma"};
    return names[k];
  }
  double nll(double y, std::span<const double> t) const override {
    check_pos(t[1], "sigma");
    if (!(y >= 0.0)) {
      throw std::invalid_argument("truncated normal support is [0, inf)");
    }
    const double mu = t[0], sigma = t[1];
    const double z = (y - mu) / sigma;
    const double alpha = -mu / sigma;
    return 0.5 * kLogTwoPi + std::log(sigma) + 0.5 * z * z + log_norm_sf(alpha);
  }
  void nll_grad(double y, std::span<const double> t,
                std::span<double> grad) const override {
    check_pos(t[1], "sigma");
    const double mu = t[0], sigma = t[1];
    const double z = (y - mu) / sigma;
    const double alpha = -mu / sigma;
    const double h = norm_hazard(alpha);
    grad[0] = (-z + h) / sigma;
    grad[1] = (1.0 - z * z + alpha * h) / sigma;
  }
  double mean(std::span<const double> t) const override {
    check_pos(t[1], "sigma");
    const double alpha = -t[0] / t[1];
    return t[0] + t[1] * norm_hazard(alpha);
  }
  double quantile(std::span<const double> t, double tau) const override {
    check_pos(t[1], "sigma");
    if (!(tau > 0.0 && tau < 1.0)) {
      throw std::invalid_argument("quantile: tau must lie in (0, 1)");
    }
    // Bisection on the renormalized CDF to |F(x) - tau| <= 1e-9.
    const double mu = t[0], sigma = t[1];
    double lo = 0.0;
    double hi = std::max(mu, 0.0) + 8.0 * sigma;
    while (cdf(hi, mu, sigma) < tau) hi = 2.0 * hi + sigma;
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
      mid = 0.5 * (lo + hi);
      const double f = cdf(mid, mu, sigma);
      if (std::abs(f - tau) <= 1e-9) break;
      if (f < tau) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-13 * (1.0 + std::abs(mid))) break;
    }
    return mid;
  }
  double sample(std::span<const double> t, RngStream& rng) const override {
    return quantile(t, rng.uniform_open());
  }
  double count_prob(long long y, std::span<const double> t) const override {
    const double mu = t[0], sigma = t[1];
    const double hi = cdf(y + 0.5, mu, sigma);
    if (y == 0) return hi;  // the zero bin opens at the truncation point
    const double lo = cdf(y - 0.5, mu, sigma);
    return std::max(hi - lo, 0.0);
  }

 private:
  static double cdf(double x, double mu, double sigma) {
    if (x <= 0.0) return 0.0;
    const double alpha = -mu / sigma;
    const double tail = 0.5 * std::erfc(alpha / 1.4142135623730951);
    return (norm_cdf((x - mu) / sigma) - norm_cdf(alpha)) / tail;
  }
};

}  // namespace

const DistributionHead& head_family(HeadKind kind) {
  static const ZinbHead zinb;
  static const NbHead nb;
  static const GaussianHead gaussian;
  static const TruncNormalHead trunc_normal;
  switch (kind) {
    case HeadKind::Zinb: return zinb;
    case HeadKind::Nb: return nb;
    case HeadKind::Gaussian: return gaussian;
    case HeadKind::TruncNormal: return trunc_normal;
  }
  throw UsageError("unknown head kind");
}

void nll_grad_preact(const DistributionHead& head, double y,
                     std::span<const double> theta, std::span<double> grad) {
  head.nll_grad(y, theta, grad);
  for (int k = 0; k < head.param_count(); ++k) {
    grad[k] *= preactivation_chain(head.param_kind(k), theta[k]);
  }
}

}  // namespace stmgnn
