#include "vbdiag/report.hpp"

#include <cstdio>
#include <sstream>

namespace vbdiag::report {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + ' ' : s + std::string(width - s.size(), ' ');
}

Json pair_json(std::size_t i, std::size_t j) { return Json::array({i + 1, j + 1}); }

}  // namespace

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const VarianceRead& read) {
  const auto& d = read.diagnosis;
  return Json{{"acceptance", d.first_rate},          {"table_ratio", d.table_ratio},
              {"confirm_acceptance", d.confirm_rate}, {"branch", to_string(d.branch)},
              {"non_normal", d.non_normal},           {"extended_table", d.extended_table},
              {"variance", read.variance}};
}

Json to_json(const CovarianceEstimate& est) {
  Json rho = Json::array();
  for (const auto& [i, j] : correlation_pairs(est.dim())) {
    rho.push_back(Json{{"pair", pair_json(i, j)}, {"rho", est.rho(i, j)}});
  }
  return Json{{"method", to_string(est.method)},
              {"sigma2", to_json(est.sigma2)},
              {"ratios", to_json(est.ratios)},
              {"correlations", rho},
              {"rho", to_json(est.rho)},
              {"flags",
               {{"indefinite", est.indefinite},
                {"rho_clamped", est.rho_clamped},
                {"projected_to_pd", est.projected_to_pd}}}};
}

Json to_json(const AffineFit& fit) {
  return Json{{"A", to_json(fit.A)},
              {"B", to_json(fit.B)},
              {"log_lik", fit.log_lik},
              {"identity_log_lik", fit.identity_log_lik},
              {"n_samples", fit.n_samples},
              {"dropped_samples", fit.dropped_samples},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"restarts", fit.restarts},
              {"best_restart", fit.best_restart}};
}

Json to_json(const MarginalReport& rep) {
  Json dirs = Json::array();
  for (std::size_t k = 0; k < rep.reads.size(); ++k) {
    const auto& r = rep.reads[k];
    Json entry = {{"direction", to_json(rep.standardized_directions[k])},
                  {"alpha", to_json(r.alpha)},
                  {"center", r.center},
                  {"proposal_variance", r.proposal_variance},
                  {"l", r.l()}};
    entry["read"] = to_json(r.read);
    dirs.push_back(std::move(entry));
  }
  return Json{{"projections", dirs}, {"non_normal", rep.non_normal}, {"estimate", to_json(rep.estimate)}};
}

Json to_json(const StepwiseReport& rep) {
  const auto& st = rep.state;
  Json step1 = Json::array();
  for (std::size_t i = 0; i < st.step1.size(); ++i) {
    Json e = {{"index", i + 1}, {"m2", st.m2[static_cast<Eigen::Index>(i)]}};
    e["read"] = to_json(st.step1[i]);
    step1.push_back(std::move(e));
  }
  Json step2 = Json::array();
  for (std::size_t k = 0; k < st.step2.size(); ++k) {
    const auto& pr = st.step2[k];
    Json e = {{"pair", pair_json(pr.i, pr.j)},
              {"lambda2", Json::array({st.lambda2[k].first, st.lambda2[k].second})},
              {"r", st.r[static_cast<Eigen::Index>(k)]}};
    e["reads"] = Json::array({to_json(pr.first), to_json(pr.second)});
    step2.push_back(std::move(e));
  }
  return Json{{"step1", step1},
              {"step2", step2},
              {"mu_s", to_json(st.mu_s)},
              {"mu_ss", to_json(st.mu_ss)},
              {"non_normal", rep.non_normal},
              {"estimate", to_json(rep.estimate)}};
}

Json to_json(const models::GibbsResult& res) {
  return Json{{"draws", res.samples.rows()},
              {"mean", to_json(res.mean)},
              {"covariance", to_json(res.covariance)},
              {"empty_component_draws", res.empty_component_draws},
              {"estimate", to_json(res.estimate)}};
}

Json to_json(const VBApproximation& vb) {
  Json factors = Json::array();
  for (const auto& f : vb.marginals()) {
    Json e = {{"family", to_string(f.kind())}, {"parameters", f.parameters()}};
    if (f.link()) e["link"] = *f.link() + 1;
    factors.push_back(std::move(e));
  }
  return Json{{"factors", factors}, {"mean", to_json(vb.mean())}, {"variance", to_json(vb.variance())}};
}

std::string comparison_table(const std::vector<std::pair<std::string, CovarianceEstimate>>& columns) {
  if (columns.empty()) return {};
  const std::size_t p = columns.front().second.dim();
  constexpr std::size_t kLabel = 10, kCol = 11;
  std::ostringstream out;
  out << pad("", kLabel);
  for (const auto& [name, est] : columns) out << pad(name, kCol);
  out << '\n';
  for (std::size_t i = 0; i < p; ++i) {
    out << pad("ratio " + std::to_string(i + 1), kLabel);
    for (const auto& [name, est] : columns) out << pad(fixed(est.ratios[static_cast<Eigen::Index>(i)], 3), kCol);
    out << '\n';
  }
  for (const auto& [i, j] : correlation_pairs(p)) {
    out << pad("rho " + std::to_string(i + 1) + std::to_string(j + 1), kLabel);
    for (const auto& [name, est] : columns) out << pad(fixed(est.rho(i, j), 3), kCol);
    out << '\n';
  }
  return out.str();
}

std::string stepwise_table(const StepwiseReport& rep) {
  const auto& st = rep.state;
  std::ostringstream out;
  out << "step 1     acceptance  m2\n";
  for (std::size_t i = 0; i < st.step1.size(); ++i) {
    out << pad("m" + std::to_string(i + 1) + "^2", 11) << pad(fixed(st.step1[i].diagnosis.first_rate, 3), 12)
        << fixed(st.m2[static_cast<Eigen::Index>(i)], 3) << '\n';
  }
  out << "step 2     acceptance     lambda2        r\n";
  for (std::size_t k = 0; k < st.step2.size(); ++k) {
    const auto& pr = st.step2[k];
    out << pad("r" + std::to_string(pr.i + 1) + std::to_string(pr.j + 1), 11)
        << pad(fixed(pr.first.diagnosis.first_rate, 3) + " " + fixed(pr.second.diagnosis.first_rate, 3), 15)
        << pad(fixed(st.lambda2[k].first, 3) + " " + fixed(st.lambda2[k].second, 3), 15)
        << fixed(st.r[static_cast<Eigen::Index>(k)], 3) << '\n';
  }
  return out.str();
}

std::string marginal_table(const MarginalReport& rep) {
  std::ostringstream out;
  out << pad("direction", 32) << pad("acceptance", 12) << "l\n";
  for (std::size_t k = 0; k < rep.reads.size(); ++k) {
    std::string dir = "(";
    const auto& a = rep.standardized_directions[k];
    for (Eigen::Index i = 0; i < a.size(); ++i) dir += (i ? "," : "") + fixed(a[i], 3);
    dir += ")";
    out << pad(dir, 32) << pad(fixed(rep.reads[k].read.diagnosis.first_rate, 3), 12) << fixed(rep.reads[k].l(), 4)
        << '\n';
  }
  return out.str();
}

}  // namespace vbdiag::report
