#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "vbdiag/errors.hpp"
#include "vbdiag/imh.hpp"

namespace vbdiag {
namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr unsigned kInnerDepth = 6;
constexpr unsigned kOuterDepth = 8;
constexpr double kRelTol = 1e-9;

double gaussian_pdf(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

double expected_acceptance_rate_exact(double v) {
  require(v > 0.0 && std::isfinite(v), "InvalidArgument", "variance ratio must be positive");
  if (v == 1.0) return 1.0;

  // The integrand min(p(x)q(y), p(y)q(x)) is even in x and y separately and
  // has its only kink on |y| = |x|, so integrate the positive quadrant with
  // the inner integral split at y = x.
  const double span = 12.0 * std::max(1.0, std::sqrt(v));
  auto joint = [v](double x, double y) {
    return std::min(gaussian_pdf(x, v) * gaussian_pdf(y, 1.0), gaussian_pdf(y, v) * gaussian_pdf(x, 1.0));
  };
  auto inner = [&](double x) {
    auto fy = [&](double y) { return joint(x, y); };
    double lower = 0.0;
    if (x > 0.0) lower = gauss_kronrod<double, 15>::integrate(fy, 0.0, x, kInnerDepth, kRelTol);
    if (x >= span) return lower;
    return lower + gauss_kronrod<double, 15>::integrate(fy, x, span, kInnerDepth, kRelTol);
  };
  // Split the outer range where the integrand mass lives to keep the
  // adaptive refinement shallow.
  const double s = std::max(1.0, std::sqrt(v));
  double total = 0.0;
  double a = 0.0;
  for (double b : {0.5 * s, 1.5 * s, 3.0 * s, 6.0 * s, span}) {
    total += gauss_kronrod<double, 15>::integrate(inner, a, b, kOuterDepth, kRelTol);
    a = b;
  }
  return std::min(1.0, 4.0 * total);
}

void EARTable::validate() const {
  require(!ratio.empty() && ratio.size() == ear.size(), "InvalidTable", "EAR table columns differ in length");
  require(std::abs(ratio.front() - 1.0) < 1e-12, "InvalidTable", "EAR table must start at ratio 1");
  require(std::abs(ear.front() - 1.0) < 1e-9, "InvalidTable", "EAR at ratio 1 must be 1");
  for (std::size_t i = 1; i < ratio.size(); ++i) {
    require(ratio[i] > ratio[i - 1], "InvalidTable", "EAR table ratios must ascend");
    require(ear[i] < ear[i - 1], "MonotonicityViolation",
            "EAR values not strictly decreasing at ratio " + std::to_string(ratio[i]));
    require(ear[i] > 0.0, "InvalidTable", "EAR values must be positive");
  }
}

std::vector<double> make_grid(double lo, double hi, double step) {
  require(step > 0.0 && hi >= lo, "InvalidArgument", "grid needs step > 0 and hi >= lo");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5));
  for (std::size_t i = 0; i <= count; ++i) {
    // Rounded to 1e-9 so 1.0 + 0.1 * k prints and compares cleanly.
    grid.push_back(std::round((lo + step * static_cast<double>(i)) * 1e9) / 1e9);
  }
  return grid;
}

std::vector<double> default_ear_grid() { return make_grid(1.0, 19.9, 0.1); }

EARTable build_ear_table(std::span<const double> grid, Execution exec) {
  EARTable table;
  table.ratio.assign(grid.begin(), grid.end());
  table.ear.resize(grid.size());
  parallel_for(exec, grid.size(), [&](std::size_t i) { table.ear[i] = expected_acceptance_rate_exact(grid[i]); });
  table.validate();
  return table;
}

EARTable extend_ear_table(const EARTable& table, Execution exec) {
  const double step = table.ratio.size() > 1 ? table.ratio[1] - table.ratio[0] : 0.1;
  const auto grid = make_grid(1.0, 10.0 * table.max_ratio(), step * std::max(1.0, table.max_ratio() / 20.0));
  return build_ear_table(grid, exec);
}

double ear_lookup(const EARTable& table, double acceptance_rate) {
  require(acceptance_rate <= 1.0 + 1e-12, "OutOfRange", "acceptance rate above 1");
  if (acceptance_rate >= table.ear.front()) return table.ratio.front();
  if (acceptance_rate < table.min_ear())
    throw Error("OutOfRange", "acceptance rate " + std::to_string(acceptance_rate) +
                                  " is below the table minimum; extend the grid");
  // ear is strictly decreasing: find the first index with ear <= rate.
  std::size_t hi = 1;
  while (table.ear[hi] > acceptance_rate) ++hi;
  const std::size_t lo = hi - 1;
  const double w = (table.ear[lo] - acceptance_rate) / (table.ear[lo] - table.ear[hi]);
  return table.ratio[lo] + w * (table.ratio[hi] - table.ratio[lo]);
}

void write_ear_csv(std::ostream& out, const EARTable& table) {
  out << "ratio,ear\n" << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < table.ratio.size(); ++i) out << table.ratio[i] << ',' << table.ear[i] << '\n';
}

EARTable read_ear_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("ratio,ear", 0) == 0, "InvalidTable",
          "EAR csv must start with header 'ratio,ear'");
  EARTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    double r = 0.0, e = 0.0;
    char comma = 0;
    if (!(row >> r >> comma >> e) || comma != ',')
      throw Error("InvalidTable", "malformed EAR csv row at line " + std::to_string(line_no));
    table.ratio.push_back(r);
    table.ear.push_back(e);
  }
  table.validate();
  return table;
}

}  // namespace vbdiag
