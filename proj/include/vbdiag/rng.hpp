#pragma once

#include <cstdint>
#include <random>

namespace vbdiag {

/// Identifies one reproducible random stream. Identical (seed, stream_id)
/// pairs give bit-identical draws.
struct RngPolicy {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Child stream for job `k`; distinct k give independent streams.
  RngPolicy substream(std::uint64_t k) const;
};

class Rng {
 public:
  explicit Rng(const RngPolicy& policy);

  double uniform();  // (0, 1)
  double normal();   // N(0, 1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape);  // Gamma(shape, 1)
  double beta(double a, double b);
  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vbdiag
