#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

#include "helpers.hpp"

using namespace vbdiag;
using namespace vbdiag::models;
using testing::error_code;

namespace {

void check_gradient(const TargetModel& m, const Vector& at, double tol) {
  const Vector g = m.gradient(at);
  const Vector fd = finite_diff_gradient(m, at);
  CAPTURE(at.transpose());
  CHECK((g - fd).cwiseAbs().maxCoeff() < tol * std::max(1.0, g.cwiseAbs().maxCoeff()));
}

// Standard error of a column mean by batch means.
double batch_se(const Vector& x, int batches = 50) {
  const Eigen::Index len = x.size() / batches;
  Vector means(batches);
  for (int b = 0; b < batches; ++b) means[b] = x.segment(b * len, len).mean();
  const double m = means.mean();
  return std::sqrt((means.array() - m).square().sum() / (batches - 1) / batches);
}

DataSummary summary(std::size_t n, double mean, double var) {
  return DataSummary{n, mean, static_cast<double>(n) * var};
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("MVN density, gradient and Hessian") {
    std::mt19937_64 gen(1);
    const Matrix s = testing::random_spd(3, gen);
    Vector mu(3);
    mu << 1, 2, 3;
    const MvnTarget t(mu, s);
    const auto m = t.as_model();
    Vector x(3);
    x << 0.5, -1, 4;
    const double want = -0.5 * (x - mu).dot(s.inverse() * (x - mu));
    CHECK(t.log_density(x) - t.log_density(mu) == doctest::Approx(want).epsilon(1e-12));
    check_gradient(m, x, 1e-7);
    CHECK((m.hessian_at(x) + s.inverse()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(error_code([] { MvnTarget(Vector::Zero(2), Matrix::Ones(2, 2)); }) == "InvalidModel");
  }

  TEST_CASE("covariance_from") {
    Vector sd(2);
    sd << 2, 3;
    Matrix rho(2, 2);
    rho << 1, 0.5, 0.5, 1;
    Matrix want(2, 2);
    want << 4, 3, 3, 9;
    CHECK((covariance_from(sd, rho) - want).norm() < 1e-14);
  }

  TEST_CASE("semi-conjugate gradient and Hessian") {
    const SemiConjugateNormalModel model(summary(1033, 221.86, 440.64), SemiConjugatePrior{});
    const auto m = model.as_model();
    for (double mu : {215.0, 221.86, 224.0})
      for (double s2 : {380.0, 440.0, 520.0}) {
        Vector x(2);
        x << mu, s2;
        check_gradient(m, x, 1e-6);
        const Matrix h = m.hessian(x);
        const Matrix fd = finite_diff_hessian(m, x);
        CHECK((h - fd).cwiseAbs().maxCoeff() < 1e-4 * h.cwiseAbs().maxCoeff());
      }
    Vector bad(2);
    bad << 0.0, -1.0;
    CHECK(m.log_density(bad) == -INFINITY);
  }

  TEST_CASE("CAVI reaches its fixed point") {
    const SemiConjugatePrior pr;
    const SemiConjugateNormalModel model(summary(1033, 201.67, 440.64), pr);
    const auto fit = cavi_semiconjugate(model);
    const auto& f = fit.vb.marginals();
    const double m = f[0].mean(), v = f[0].variance();
    const double a = f[1].parameters()[0], b = f[1].parameters()[1];
    const double n = 1033;
    CHECK(a == doctest::Approx(pr.alpha + n / 2));
    CHECK(b == doctest::Approx(pr.beta + 0.5 * n * 440.64 + 0.5 * n * ((m - 201.67) * (m - 201.67) + v)).epsilon(1e-10));
    CHECK(v == doctest::Approx(1.0 / (n * a / b + 1.0 / pr.eta2)).epsilon(1e-10));
    CHECK(m == doctest::Approx(v * (n * 201.67 * a / b + pr.gamma / pr.eta2)).epsilon(1e-10));
    // values fixed by this fit
    CHECK(m == doctest::Approx(208.085).epsilon(2e-6));
    CHECK(v == doctest::Approx(0.318).epsilon(2e-3));
    CHECK(b == doctest::Approx(249452.7).epsilon(1e-6));
  }

  TEST_CASE("CAVI limits") {
    // prior dominates when the prior on mu is tight
    SemiConjugatePrior tight;
    tight.eta2 = 1e-8;
    const auto a = cavi_semiconjugate(SemiConjugateNormalModel(summary(1033, 150.0, 440.64), tight));
    CHECK(a.vb.mean()[0] == doctest::Approx(tight.gamma).epsilon(1e-6));
    // data dominate when it is vague
    SemiConjugatePrior vague;
    vague.eta2 = 1e8;
    const auto b = cavi_semiconjugate(SemiConjugateNormalModel(summary(1033, 150.0, 440.64), vague));
    CHECK(b.vb.mean()[0] == doctest::Approx(150.0).epsilon(1e-6));
    CHECK(b.vb.variance()[0] == doctest::Approx(440.64 / 1033).epsilon(1e-2));
  }

  TEST_CASE("semi-conjugate Gibbs: prior-only run matches prior moments") {
    SemiConjugatePrior pr;
    pr.alpha = 5.0;
    pr.beta = 8.0;
    pr.gamma = -3.0;
    pr.eta2 = 2.0;
    const SemiConjugateNormalModel model(DataSummary{}, pr);
    const auto g = gibbs_semiconjugate(model, 200000, RngPolicy{1, 0});
    const double n = static_cast<double>(g.samples.rows());
    const double ig_var = pr.beta * pr.beta / ((pr.alpha - 1) * (pr.alpha - 1) * (pr.alpha - 2));
    CHECK(std::abs(g.mean[0] - pr.gamma) < 3 * std::sqrt(pr.eta2 / n));
    CHECK(std::abs(g.mean[1] - pr.beta / (pr.alpha - 1)) < 3 * std::sqrt(ig_var / n));
  }

  TEST_CASE("semi-conjugate Gibbs agrees with quadrature of the mu marginal") {
    const SemiConjugateNormalModel model(summary(1033, 201.67, 440.64), SemiConjugatePrior{});
    const auto& pr = model.prior();
    const auto& d = model.data();
    const double k = 0.5 * d.n + pr.alpha;
    auto log_marg = [&](double mu) {
      const double scale = 0.5 * d.centered_ss + pr.beta + 0.5 * d.n * (mu - d.mean) * (mu - d.mean);
      return -k * std::log(scale) - (mu - pr.gamma) * (mu - pr.gamma) / (2 * pr.eta2);
    };
    const double c = log_marg(208.0);
    using boost::math::quadrature::gauss_kronrod;
    auto w = [&](double mu) { return std::exp(log_marg(mu) - c); };
    const double z = gauss_kronrod<double, 61>::integrate(w, 195.0, 220.0, 15, 1e-12);
    const double m1 = gauss_kronrod<double, 61>::integrate([&](double mu) { return mu * w(mu); }, 195.0, 220.0, 15,
                                                           1e-12) / z;
    const auto g = gibbs_semiconjugate(model, 200000, RngPolicy{2, 0});
    CHECK(std::abs(g.mean[0] - m1) < 3 * batch_se(g.samples.col(0)));
  }

  TEST_CASE("semi-conjugate Gibbs moments are stable under doubling the run") {
    const SemiConjugateNormalModel model(summary(1033, 201.67, 440.64), SemiConjugatePrior{});
    const auto vb = cavi_semiconjugate(model).vb;
    const auto a = gibbs_semiconjugate(model, 200000, RngPolicy{3, 0}, vb.variance());
    const auto b = gibbs_semiconjugate(model, 400000, RngPolicy{3, 1}, vb.variance());
    for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(a.estimate.ratios[i] / b.estimate.ratios[i] - 1.0) < 0.02);
    CHECK(b.estimate.method == MethodTag::Gibbs);
  }

  TEST_CASE("Gibbs run length is validated") {
    const SemiConjugateNormalModel model(summary(10, 0, 1), SemiConjugatePrior{});
    CHECK(error_code([&] { gibbs_semiconjugate(model, 5000, RngPolicy{}); }) == "InvalidArgument");
  }

  TEST_CASE("mixture gradient") {
    const auto data = make_mixture_data(MixtureDataSpec{}, RngPolicy{209, 0});
    const MixtureModel model(data, MixturePrior{});
    const auto m = model.as_model();
    for (const auto& v : {std::vector<double>{0.4, 1.0, 3.5, 1.0, 0.5}, std::vector<double>{0.3, 0.8, 3.3, 1.4, 0.4},
                          std::vector<double>{0.6, 1.5, 3.0, 0.7, 0.9}}) {
      const Vector x = Eigen::Map<const Vector>(v.data(), 5);
      check_gradient(m, x, 1e-6);
    }
    Vector out(5);
    out << 1.2, 1, 3, 1, 1;
    CHECK(m.log_density(out) == -INFINITY);
    out << 0.5, 1, 3, -1, 1;
    CHECK(m.log_density(out) == -INFINITY);
  }

  TEST_CASE("mixture posterior is invariant under a label swap") {
    const auto data = make_mixture_data(MixtureDataSpec{}, RngPolicy{1, 0});
    const MixtureModel model(data, MixturePrior{});
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (double pi : {0.25, 0.5, 0.375, 0.8125}) {  // 1 - (1 - pi) == pi exactly
      Vector a(5), b(5);
      a << pi, u(gen), u(gen), u(gen), u(gen);
      b << 1.0 - pi, a[2], a[1], a[4], a[3];
      CHECK(model.log_posterior(a) == model.log_posterior(b));
    }
  }

  TEST_CASE("mixture Gibbs on mirrored data has a symmetric weight posterior") {
    auto half = make_mixture_data(MixtureDataSpec{100, 0.5, -1.5, 1.0, 1.5, 1.0}, RngPolicy{4, 0});
    std::vector<double> data = half;
    for (double x : half) data.push_back(-x);
    MixturePrior pr;
    pr.a0 = 2.0;
    pr.c = {0.0, 0.0};
    const MixtureModel model(data, pr);
    const auto g = gibbs_mixture(model, 100000, RngPolicy{5, 0});
    CHECK(std::abs(g.mean[0] - 0.5) < 3 * batch_se(g.samples.col(0)));
    CHECK((g.samples.col(1).array() <= g.samples.col(2).array()).all());
  }

  TEST_CASE("mixture Gibbs counts empty components instead of failing") {
    const MixtureModel model({0.0, 0.1}, MixturePrior{});
    const auto g = gibbs_mixture(model, 10000, RngPolicy{6, 0});
    CHECK(g.empty_component_draws > 0);
    CHECK(g.mean.allFinite());
  }

  TEST_CASE("mixture VB helper") {
    const auto vb = mixture_vb(40, 60, 1.0, 160, 3.5, 240, 80, 80, 120, 60);
    CHECK(vb.dim() == 5);
    CHECK(vb.mean()[MixtureModel::kPi] == doctest::Approx(0.4));
    CHECK(vb.marginals()[MixtureModel::kMu1].link() == MixtureModel::kS1);
    CHECK(vb.marginals()[MixtureModel::kMu2].link() == MixtureModel::kS2);
  }

  TEST_CASE("synthetic data") {
    CHECK(make_normal_data(NormalDataSpec{0, 1, 1}, RngPolicy{}).empty());
    const auto y = make_normal_data(NormalDataSpec{}, RngPolicy{7, 0});
    const auto s = DataSummary::from(y);
    CHECK(s.n == 1033);
    CHECK(s.mean == doctest::Approx(221.86).epsilon(1e-12));
    CHECK(s.centered_ss / s.n == doctest::Approx(440.64).epsilon(1e-12));

    const auto x = make_mixture_data(MixtureDataSpec{}, RngPolicy{8, 0});
    REQUIRE(x.size() == 400);
    double mean = 0;
    for (double v : x) mean += v;
    mean /= 400;
    // mixture variance: 0.4 * (1 + 1) + 0.6 * (0.5 + 12.25) - 2.5^2
    const double var = 0.4 * 2.0 + 0.6 * 12.75 - 6.25;
    CHECK(std::abs(mean - 2.5) < 3 * std::sqrt(var / 400));
  }

  TEST_CASE("data csv round trip") {
    const std::vector<double> y{1.5, -2.25, 1e-17, 3.141592653589793};
    std::stringstream s;
    write_data_csv(s, y);
    CHECK(s.str().rfind("x\n", 0) == 0);
    CHECK(read_data_csv(s) == y);
    std::stringstream bare("1\n2\n\n3\n");
    CHECK(read_data_csv(bare) == std::vector<double>{1, 2, 3});
    std::stringstream junk("x\n1\nfoo\n");
    CHECK(error_code([&] { read_data_csv(junk); }) == "InvalidData");
  }
}
