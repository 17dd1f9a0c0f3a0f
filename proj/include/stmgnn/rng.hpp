#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stmgnn {

/// Deterministic random stream derived from a root seed and a stream name.
///
/// Every source of randomness in a run flows from the single config seed
/// through named sub-streams ("init", "shuffle", "synth", ...), so results
/// are reproducible across module boundaries. All variate generators are
/// implemented here on top of the (standardised, hence portable) mt19937_64
/// engine; none of the implementation-defined std distributions are used.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_name);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  /// Uniform on (0, 1); safe as a log argument.
  double uniform_open();

  /// Unbiased uniform integer on [0, n); n > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal variate (Marsaglia polar method).
  double normal();

  /// Gamma(shape, scale=1) variate, shape > 0 (Marsaglia-Tsang).
  double gamma(double shape);

  /// Poisson(lambda) variate, lambda >= 0.
  long long poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a 64-bit hash; used for stream-name mixing and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace stmgnn
