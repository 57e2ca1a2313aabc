#include "vbdiag/imh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vbdiag/errors.hpp"

namespace vbdiag {

ChainResult imh_chain(const LogDensity1D& log_target, const MarginalFamily& proposal, std::size_t n,
                      double burn_in_fraction, const RngPolicy& policy) {
  require(n >= 100, "InvalidArgument", "imh_chain needs n >= 100");
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "InvalidArgument", "burn-in fraction must be in [0,1)");
  require(!proposal.is_conditional(), "InvalidArgument", "IMH proposal must be an unconditional family");

  Rng rng(policy);
  ChainResult out;
  out.n_total = n;
  out.burn_in_fraction = burn_in_fraction;
  out.samples.resize(n);

  double x = proposal.mean();
  double lt = log_target(x);
  if (!std::isfinite(lt)) throw Error("NonFiniteTarget", "target log-density is not finite at the proposal mean");
  double log_w = lt - proposal.log_density(x);
  out.samples[0] = x;

  const auto start = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(burn_in_fraction * n)));
  for (std::size_t t = 1; t < n; ++t) {
    const double y = proposal.sample(rng);
    const double log_w_y = log_target(y) - proposal.log_density(y);
    const double u = rng.uniform();
    const bool accept = std::log(u) < log_w_y - log_w;  // -inf target never accepted
    if (accept) {
      x = y;
      log_w = log_w_y;
    }
    if (t >= start) {
      ++out.retained;
      if (accept) ++out.accept_count;
    }
    out.samples[t] = x;
  }
  out.acceptance_rate = out.retained > 0 ? static_cast<double>(out.accept_count) / static_cast<double>(out.retained) : 0.0;
  return out;
}

std::string to_string(ReadBranch branch) {
  switch (branch) {
    case ReadBranch::Greater: return "greater";
    case ReadBranch::Less: return "less";
    case ReadBranch::NonNormal: return "non_normal";
  }
  return "unknown";
}

VarianceRead vbaimh_variance(const LogDensity1D& log_target, double center, double proposal_variance,
                             const EARTable& table, std::size_t n, const RngPolicy& rng, double skew_scale) {
  require(proposal_variance > 0.0 && std::isfinite(proposal_variance), "InvalidArgument",
          "proposal variance must be positive");
  require(n >= 2000, "InvalidArgument", "vbaimh_variance needs n >= 2000");
  require(skew_scale > 0.0 && skew_scale <= 1.0, "InvalidArgument", "skew scale must be in (0,1]");

  VarianceRead read;
  auto& diag = read.diagnosis;

  const auto first = imh_chain(log_target, MarginalFamily::normal(center, proposal_variance), n, kDefaultBurnIn,
                               rng.substream(0));
  diag.first_rate = first.acceptance_rate;

  double ratio = 0.0;
  if (diag.first_rate >= table.min_ear()) {
    ratio = ear_lookup(table, diag.first_rate);
  } else {
    const EARTable wider = extend_ear_table(table, Execution::Serial);
    if (diag.first_rate < wider.min_ear() || diag.first_rate <= 0.0)
      throw Error("DegenerateTarget", "acceptance rate " + std::to_string(diag.first_rate) +
                                          " is below the extended EAR table");
    diag.extended_table = true;
    ratio = ear_lookup(wider, diag.first_rate);
  }
  diag.table_ratio = ratio;

  const double widened = ratio * proposal_variance;
  const auto confirm =
      imh_chain(log_target, MarginalFamily::normal(center, widened), n, kDefaultBurnIn, rng.substream(1));
  diag.confirm_rate = confirm.acceptance_rate;

  // Near ratio 1 a narrower target also clears the threshold (EAR(r^2) is
  // still above 0.95), so the confirm run must not have dropped either.
  if (diag.confirm_rate >= kConfirmationThreshold && diag.confirm_rate >= diag.first_rate) {
    diag.branch = ReadBranch::Greater;
    read.variance = widened;
  } else if (diag.confirm_rate < diag.first_rate) {
    diag.branch = ReadBranch::Less;
    read.variance = proposal_variance / ratio;
  } else {
    diag.branch = ReadBranch::NonNormal;
    diag.non_normal = true;
    read.variance = skew_scale * widened;
  }
  return read;
}

}  // namespace vbdiag
