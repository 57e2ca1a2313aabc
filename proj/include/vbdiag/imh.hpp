#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vbdiag/families.hpp"
#include "vbdiag/parallel.hpp"
#include "vbdiag/rng.hpp"

namespace vbdiag {

using LogDensity1D = std::function<double(double)>;

inline constexpr double kDefaultBurnIn = 0.5;
inline constexpr std::size_t kDefaultChainLength = 4000;
inline constexpr std::size_t kDefaultProjectionChainLength = 6000;
inline constexpr double kDefaultSkewScale = 0.85;
inline constexpr double kConfirmationThreshold = 0.95;

/// Univariate independent Metropolis-Hastings path.
///
/// samples[0] is the proposal mean; each later entry is one transition.
/// `accept_count` and `acceptance_rate` cover only the retained proposals,
/// i.e. transitions into samples[t] for t >= ceil(burn_in_fraction * n).
struct ChainResult {
  std::vector<double> samples;
  std::size_t accept_count = 0;
  std::size_t retained = 0;
  std::size_t n_total = 0;
  double burn_in_fraction = kDefaultBurnIn;
  double acceptance_rate = 0.0;
};

ChainResult imh_chain(const LogDensity1D& log_target, const MarginalFamily& proposal, std::size_t n,
                      double burn_in_fraction, const RngPolicy& rng);

/// E[min(1, p(y)q(x) / (p(x)q(y)))] for target N(0, v), proposal N(0, 1),
/// by nested adaptive Gauss-Kronrod quadrature.
double expected_acceptance_rate_exact(double variance_ratio);

/// Monotone map between target/proposal variance ratio and EAR.
struct EARTable {
  std::vector<double> ratio;
  std::vector<double> ear;

  /// Throws MonotonicityViolation / InvalidTable.
  void validate() const;
  double min_ear() const { return ear.back(); }
  double max_ratio() const { return ratio.back(); }
};

/// lo, lo+step, ... up to hi (inclusive, within step/2).
std::vector<double> make_grid(double lo, double hi, double step);
/// 1.0, 1.1, ..., 19.9: 190 cells.
std::vector<double> default_ear_grid();

EARTable build_ear_table(std::span<const double> grid, Execution exec = Execution::Parallel);
/// Same spacing as `table`, continued to 10x its largest ratio.
EARTable extend_ear_table(const EARTable& table, Execution exec = Execution::Parallel);

/// Inverse lookup with linear interpolation; returns a ratio >= 1.
/// Throws OutOfRange below the table minimum.
double ear_lookup(const EARTable& table, double acceptance_rate);

/// CSV with header "ratio,ear" and 6 decimals.
void write_ear_csv(std::ostream& out, const EARTable& table);
EARTable read_ear_csv(std::istream& in);

enum class ReadBranch { Greater, Less, NonNormal };
std::string to_string(ReadBranch branch);

struct VbaimhDiagnosis {
  double first_rate = 0.0;
  double confirm_rate = 0.0;
  double table_ratio = 1.0;
  ReadBranch branch = ReadBranch::Greater;
  bool non_normal = false;
  bool extended_table = false;
};

struct VarianceRead {
  double variance = 0.0;
  VbaimhDiagnosis diagnosis;
};

/// Reads the variance of a univariate target from IMH acceptance rates.
///
/// First pass: proposal N(center, proposal_variance), ratio r from the
/// table. Confirmation pass with variance r * proposal_variance decides the
/// branch: rate >= 0.95 keeps r * pv; a rate below the first pass means the
/// target is narrower and pv / r is returned; anything else is flagged as
/// non-normal and skew_scale * r * pv is returned.
VarianceRead vbaimh_variance(const LogDensity1D& log_target, double center, double proposal_variance,
                             const EARTable& table, std::size_t n, const RngPolicy& rng,
                             double skew_scale = kDefaultSkewScale);

}  // namespace vbdiag
