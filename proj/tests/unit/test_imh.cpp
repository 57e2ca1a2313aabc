#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "helpers.hpp"

using namespace vbdiag;
using testing::error_code;
using testing::shared_table;

namespace {

double closed_form_ear(double v) {
  v = std::max(v, 1.0 / v);
  return 2.0 - 4.0 / std::numbers::pi * std::atan(std::sqrt(v));
}

LogDensity1D normal_log(double mean, double var) {
  return [=](double x) { return -0.5 * (x - mean) * (x - mean) / var; };
}

EARTable reference_table() {
  std::ifstream in(VBDIAG_TEST_DATA "/ear_table_reference.csv");
  REQUIRE(in.good());
  return read_ear_csv(in);
}

}  // namespace

TEST_SUITE("imh") {
  TEST_CASE("exact EAR against reference cells and the closed form") {
    CHECK(expected_acceptance_rate_exact(1.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(expected_acceptance_rate_exact(2.0) - 0.7833) < 1e-3);
    CHECK(std::abs(expected_acceptance_rate_exact(10.0) - 0.3900) < 1e-3);
    for (double v : {1.3, 2.0, 4.6, 7.77, 19.9, 55.0})
      CHECK(std::abs(expected_acceptance_rate_exact(v) - closed_form_ear(v)) < 1e-5);
  }

  TEST_CASE("EAR is symmetric under ratio inversion") {
    for (double v : {1.5, 2.0, 3.6, 4.6, 10.0})
      CHECK(std::abs(expected_acceptance_rate_exact(v) - expected_acceptance_rate_exact(1.0 / v)) < 1e-5);
  }

  TEST_CASE("default table reproduces every reference cell") {
    const auto& t = shared_table();
    const auto pub = reference_table();
    REQUIRE(t.ratio.size() == 190);
    REQUIRE(pub.ratio.size() == 190);
    double worst = 0.0;
    for (std::size_t i = 0; i < 190; ++i) {
      CHECK(std::abs(t.ratio[i] - pub.ratio[i]) < 1e-9);
      worst = std::max(worst, std::abs(t.ear[i] - pub.ear[i]));
    }
    CHECK(worst < 0.002);
    CHECK(t.ear.front() == doctest::Approx(1.0));
    CHECK_NOTHROW(t.validate());
  }

  TEST_CASE("two-row grid") {
    const std::vector<double> grid{1.0, 3.0, 5.0};
    const auto t = build_ear_table(grid);
    CHECK(std::abs(t.ear[1] - 0.6671) < 0.002);
    CHECK(std::abs(t.ear[2] - 0.5354) < 0.002);
  }

  TEST_CASE("serial and parallel table builds are bitwise identical") {
    const auto grid = make_grid(1.0, 6.0, 0.25);
    const auto a = build_ear_table(grid, Execution::Serial);
    const auto b = build_ear_table(grid, Execution::Parallel);
    CHECK(a.ear == b.ear);
  }

  TEST_CASE("table validation") {
    EARTable bad{{1.0, 2.0, 3.0}, {1.0, 0.7, 0.75}};
    CHECK(error_code([&] { bad.validate(); }) == "MonotonicityViolation");
    EARTable off{{1.5, 2.0}, {1.0, 0.7}};
    CHECK(error_code([&] { off.validate(); }) == "InvalidTable");
  }

  TEST_CASE("lookup examples") {
    const auto& t = shared_table();
    CHECK(ear_lookup(t, 1.0) == doctest::Approx(1.0));
    CHECK(std::abs(ear_lookup(t, 0.5555) - 4.6) < 0.05);
    CHECK(std::abs(ear_lookup(t, 0.7833) - 2.0) < 0.05);
    CHECK(error_code([&] { ear_lookup(t, 0.2); }) == "OutOfRange");
  }

  TEST_CASE("lookup inverts the exact EAR on the grid") {
    const auto& t = shared_table();
    for (std::size_t i = 0; i < t.ratio.size(); i += 7) {
      const double back = ear_lookup(t, expected_acceptance_rate_exact(t.ratio[i]));
      CHECK(std::abs(back - t.ratio[i]) <= 0.1);
    }
    // off-grid points interpolate within one step
    for (double v : {1.05, 3.33, 12.71}) CHECK(std::abs(ear_lookup(t, closed_form_ear(v)) - v) < 0.1);
  }

  TEST_CASE("extended table continues the spacing") {
    const std::vector<double> grid = make_grid(1.0, 2.0, 0.5);
    const auto t = build_ear_table(grid);
    const auto w = extend_ear_table(t);
    CHECK(w.max_ratio() == doctest::Approx(20.0));
    CHECK(w.ratio[1] == doctest::Approx(1.5));
    CHECK_NOTHROW(w.validate());
  }

  TEST_CASE("csv round trip") {
    const auto& t = shared_table();
    std::stringstream s;
    write_ear_csv(s, t);
    std::string header;
    std::getline(s, header);
    CHECK(header == "ratio,ear");
    std::string row;
    std::getline(s, row);
    CHECK(row == "1.000000,1.000000");
    s.seekg(0);
    const auto back = read_ear_csv(s);
    REQUIRE(back.ratio.size() == t.ratio.size());
    for (std::size_t i = 0; i < t.ratio.size(); ++i) CHECK(std::abs(back.ear[i] - t.ear[i]) <= 5e-7);
    std::stringstream junk("ratio,ear\n1.0,1.0\n2.0,abc\n");
    CHECK(error_code([&] { read_ear_csv(junk); }) == "InvalidTable");
  }

  TEST_CASE("chain bookkeeping") {
    const auto c = imh_chain(normal_log(0, 2), MarginalFamily::normal(0, 1), 1000, 0.5, RngPolicy{1, 0});
    CHECK(c.samples.size() == 1000);
    CHECK(c.samples[0] == 0.0);
    CHECK(c.n_total == 1000);
    CHECK(c.retained == 500);
    CHECK(c.acceptance_rate == doctest::Approx(double(c.accept_count) / c.retained));
    CHECK(error_code([] {
            imh_chain([](double x) { return x == 0 ? -INFINITY : 0.0; }, MarginalFamily::normal(0, 1), 200, 0.5,
                      RngPolicy{});
          }) == "NonFiniteTarget");
    CHECK(error_code([] { imh_chain(normal_log(0, 1), MarginalFamily::normal(0, 1), 50, 0.5, RngPolicy{}); }) ==
          "InvalidArgument");
  }

  TEST_CASE("identical target and proposal always accept") {
    const auto c = imh_chain(normal_log(0, 1), MarginalFamily::normal(0, 1), 100000, 0.5, RngPolicy{2, 0});
    CHECK(c.acceptance_rate > 0.995);
  }

  TEST_CASE("chain rate matches exact EAR with bounded weights") {
    // Target narrower than the proposal keeps the importance weight bounded,
    // so the rate concentrates at the binomial-like scale. By scale
    // invariance this is the EAR of ratio v.
    const std::size_t n = 100000;
    std::uint64_t stream = 0;
    for (double v = 1.0; v <= 19.95; v += 1.0) {
      const auto c = imh_chain(normal_log(0, 1.0 / v), MarginalFamily::normal(0, 1), n, 0.5, RngPolicy{3, stream++});
      CAPTURE(v);
      CHECK(std::abs(c.acceptance_rate - closed_form_ear(v)) < 3.0 * std::sqrt(0.25 / c.retained));
    }
    for (double v : {1.2, 1.5, 1.8}) {
      const auto c = imh_chain(normal_log(0, v), MarginalFamily::normal(0, 1), n, 0.5, RngPolicy{3, stream++});
      CAPTURE(v);
      CHECK(std::abs(c.acceptance_rate - closed_form_ear(v)) < 3.0 * std::sqrt(0.25 / c.retained));
    }
  }

  TEST_CASE("chain rate at ratio 2") {
    const auto c = imh_chain(normal_log(0, 2.0), MarginalFamily::normal(0, 1), 100000, 0.5, RngPolicy{4, 0});
    CHECK(std::abs(c.acceptance_rate - 0.7833) < 0.01);
  }

  TEST_CASE("wide targets give heavy-tailed rate estimates") {
    // Ratio 4.6: the importance weight has infinite variance, so single
    // chains scatter far beyond the binomial scale. The center of many
    // chains still sits near the exact value.
    std::vector<double> rates;
    for (std::uint64_t s = 0; s < 31; ++s)
      rates.push_back(
          imh_chain(normal_log(0, 4.6), MarginalFamily::normal(0, 1), 100000, 0.5, RngPolicy{5, s}).acceptance_rate);
    CHECK(std::abs(testing::median(rates) - 0.5555) < 0.03);
  }

  TEST_CASE("vbaimh: matched target") {
    const auto r = vbaimh_variance(normal_log(0, 1), 0.0, 1.0, shared_table(), 4000, RngPolicy{6, 0});
    CHECK(std::abs(r.variance - 1.0) < 0.05);
    CHECK(r.diagnosis.confirm_rate > 0.95);
    CHECK(r.diagnosis.branch == ReadBranch::Greater);
  }

  TEST_CASE("vbaimh: narrower target takes the reciprocal branch") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto r = vbaimh_variance(normal_log(0, 0.5), 0.0, 1.0, shared_table(), 4000, RngPolicy{7, s});
      CHECK(std::abs(r.variance - 0.5) < 0.05);
      CHECK(r.diagnosis.branch == ReadBranch::Less);
      CHECK_FALSE(r.diagnosis.non_normal);
    }
  }

  TEST_CASE("vbaimh: slightly narrower target is not read as wider") {
    // confirm rate sits near EAR(1/0.9^2) ~ 0.93-0.95, under the first rate
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto r = vbaimh_variance(normal_log(0, 0.9), 0.0, 1.0, shared_table(), 4000, RngPolicy{17, s});
      CAPTURE(s);
      CHECK(r.diagnosis.branch == ReadBranch::Less);
      CHECK(std::abs(r.variance - 0.9) < 0.05);
    }
  }

  TEST_CASE("vbaimh: wider target, ratio within the finite-variance regime") {
    const auto r = vbaimh_variance(normal_log(0, 1.5), 0.0, 1.0, shared_table(), 4000, RngPolicy{8, 0});
    CHECK(std::abs(r.variance - 1.5) < 0.1);
    CHECK(r.diagnosis.branch == ReadBranch::Greater);
  }

  TEST_CASE("vbaimh: target N(0, 3.6)") {
    // Single reads at this ratio inherit the heavy-tailed rate noise; the
    // median over independent reads is the stable quantity.
    std::vector<double> reads;
    int greater = 0;
    for (std::uint64_t s = 0; s < 21; ++s) {
      const auto r = vbaimh_variance(normal_log(0, 3.6), 0.0, 1.0, shared_table(), 100000, RngPolicy{9, s});
      reads.push_back(r.variance);
      greater += r.diagnosis.branch == ReadBranch::Greater;
    }
    CHECK(std::abs(testing::median(reads) - 3.6) < 0.25);
    CHECK(greater > 10);
  }

  TEST_CASE("vbaimh: proposal variance scales the read") {
    const auto a = vbaimh_variance(normal_log(0, 0.5), 0.0, 1.0, shared_table(), 4000, RngPolicy{10, 0});
    const auto b = vbaimh_variance(normal_log(0, 0.5 * 9.0), 0.0, 9.0, shared_table(), 4000, RngPolicy{10, 0});
    CHECK(b.variance == doctest::Approx(9.0 * a.variance).epsilon(1e-9));
  }

  TEST_CASE("vbaimh is translation invariant") {
    for (double shift : {-7.25, 3.0, 1000.0}) {
      const auto a = vbaimh_variance(normal_log(0, 1.7), 0.0, 1.0, shared_table(), 4000, RngPolicy{12, 0});
      const auto b = vbaimh_variance(normal_log(shift, 1.7), shift, 1.0, shared_table(), 4000, RngPolicy{12, 0});
      CHECK(a.diagnosis.first_rate == b.diagnosis.first_rate);
      CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-12));
    }
  }

  TEST_CASE("vbaimh flags skewed targets") {
    // Gamma(2) shape: skewed, no normal read confirms.
    auto log_gamma = [](double x) { return x > 0 ? std::log(x) - x : -INFINITY; };
    int flagged = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto r = vbaimh_variance(log_gamma, 2.0, 0.3, shared_table(), 4000, RngPolicy{13, s});
      flagged += r.diagnosis.non_normal;
      if (r.diagnosis.non_normal) CHECK(r.variance == doctest::Approx(0.85 * r.diagnosis.table_ratio * 0.3));
    }
    CHECK(flagged >= 3);
  }

  TEST_CASE("vbaimh beyond the extended table is degenerate") {
    // EAR(1e4) = 0.013, below the extended table's last cell at ratio 199.
    CHECK(error_code([] {
            vbaimh_variance(normal_log(0, 1e-4), 0.0, 1.0, shared_table(), 4000, RngPolicy{14, 0});
          }) == "DegenerateTarget");
  }

  TEST_CASE("vbaimh argument checks") {
    CHECK(error_code([] { vbaimh_variance(normal_log(0, 1), 0, 1, shared_table(), 1000, RngPolicy{}); }) ==
          "InvalidArgument");
    CHECK(error_code([] { vbaimh_variance(normal_log(0, 1), 0, 0, shared_table(), 4000, RngPolicy{}); }) ==
          "InvalidArgument");
    CHECK(error_code([] { vbaimh_variance(normal_log(0, 1), 0, 1, shared_table(), 4000, RngPolicy{}, 1.5); }) ==
          "InvalidArgument");
  }
}
