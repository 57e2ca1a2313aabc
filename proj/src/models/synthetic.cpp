#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <numeric>

#include "vbdiag/errors.hpp"
#include "vbdiag/models.hpp"

namespace vbdiag::models {

std::vector<double> make_normal_data(const NormalDataSpec& spec, const RngPolicy& policy) {
  require(spec.variance > 0.0, "InvalidArgument", "normal data variance must be positive");
  Rng rng(policy);
  std::vector<double> y(spec.n);
  for (auto& v : y) v = rng.normal();
  if (spec.n < 2) {
    for (auto& v : y) v = spec.mean + std::sqrt(spec.variance) * v;
    return y;
  }
  // Standardize so the sample mean and variance (n denominator) hit the
  // requested summary statistics exactly.
  const double n = static_cast<double>(spec.n);
  const double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - m) * (v - m);
  const double k = std::sqrt(spec.variance / (ss / n));
  for (auto& v : y) v = spec.mean + k * (v - m);
  return y;
}

std::vector<double> make_mixture_data(const MixtureDataSpec& spec, const RngPolicy& policy) {
  require(spec.weight >= 0.0 && spec.weight <= 1.0 && spec.var1 > 0.0 && spec.var2 > 0.0, "InvalidArgument",
          "invalid mixture data spec");
  Rng rng(policy);
  std::vector<double> x(spec.n);
  for (auto& v : x) {
    const bool first = rng.uniform() < spec.weight;
    v = first ? rng.normal(spec.mu1, std::sqrt(spec.var1)) : rng.normal(spec.mu2, std::sqrt(spec.var2));
  }
  return x;
}

void write_data_csv(std::ostream& out, std::span<const double> data) {
  out << "x\n" << std::setprecision(17);
  for (double v : data) out << v << '\n';
}

std::vector<double> read_data_csv(std::istream& in) {
  std::vector<double> data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header
      throw Error("InvalidData", "non-numeric value at line " + std::to_string(line_no));
    }
    if (used != line.size()) throw Error("InvalidData", "trailing characters at line " + std::to_string(line_no));
    data.push_back(v);
  }
  return data;
}

}  // namespace vbdiag::models
