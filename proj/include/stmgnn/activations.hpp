#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "stmgnn/errors.hpp"

namespace stmgnn {

enum class Activation { Relu, Identity, Tanh };

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Derivative of sigmoid expressed through its value s = sigmoid(x).
inline double sigmoid_deriv_from_value(double s) { return s * (1.0 - s); }

inline double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/// Derivative of softplus expressed through its value v = softplus(x):
/// softplus'(x) = sigmoid(x) = 1 - exp(-v).
inline double softplus_deriv_from_value(double v) { return -std::expm1(-v); }

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

/// Derivative from the pre-activation value.
inline double activation_deriv(Activation a, double pre) {
  switch (a) {
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  throw UsageError("unknown activation: " + s);
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

}  // namespace stmgnn
