#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "vbdiag/affine.hpp"
#include "vbdiag/errors.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/marginal.hpp"
#include "vbdiag/models.hpp"
#include "vbdiag/report.hpp"
#include "vbdiag/stepwise.hpp"

namespace vbdiag::cli {
namespace {

namespace fs = std::filesystem;
using report::Json;

// Stream ids keep every method on its own random stream, whatever subset runs.
constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kAffineStream = 1;
constexpr std::uint64_t kMarginalStream = 2;
constexpr std::uint64_t kStepwiseStream = 3;
constexpr std::uint64_t kGibbsStream = 4;

struct Problem {
  TargetModel model;
  std::optional<VBApproximation> vb;
  std::optional<Matrix> exact_covariance;
  std::optional<models::SemiConjugateNormalModel> semiconjugate;
  std::optional<models::MixtureModel> mixture;
  std::vector<double> data;
  int cavi_iterations = 0;
};

std::vector<double> load_data(const RunConfig& cfg) {
  if (!cfg.data_path.empty()) {
    fs::path path(cfg.data_path);
    if (path.is_relative() && !fs::exists(path)) path = fs::path(cfg.source).parent_path() / path;
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open data file '" + cfg.data_path + "'");
    return models::read_data_csv(in);
  }
  const RngPolicy rng{cfg.data_seed, kDataStream};
  if (cfg.model == ModelKind::Mixture) return models::make_mixture_data(cfg.mixture_data, rng);
  return models::make_normal_data(cfg.normal_data, rng);
}

Problem build_problem(const RunConfig& cfg) {
  Problem pb;
  switch (cfg.model) {
    case ModelKind::Mvn: {
      const models::MvnTarget target(cfg.mvn_mean, cfg.mvn_cov);
      pb.model = target.as_model();
      pb.exact_covariance = cfg.mvn_cov;
      pb.vb = cfg.vb;
      break;
    }
    case ModelKind::SemiConjugate: {
      pb.data = load_data(cfg);
      pb.semiconjugate.emplace(models::DataSummary::from(pb.data), cfg.sc_prior);
      pb.model = pb.semiconjugate->as_model();
      if (cfg.vb) {
        pb.vb = cfg.vb;
      } else {
        auto fit = models::cavi_semiconjugate(*pb.semiconjugate);
        pb.cavi_iterations = fit.iterations;
        pb.vb = std::move(fit.vb);
      }
      break;
    }
    case ModelKind::Mixture: {
      pb.data = load_data(cfg);
      pb.mixture.emplace(pb.data, cfg.mix_prior);
      pb.model = pb.mixture->as_model();
      pb.vb = cfg.vb;
      break;
    }
  }
  require(pb.vb.has_value(), "ConfigError", "model needs a [vb] section");
  require(pb.vb->dim() == pb.model.dim, "ConfigError", "VB dimension does not match the model");
  return pb;
}

EARTable make_table(const RunConfig& cfg) {
  return build_ear_table(cfg.grid.empty() ? default_ear_grid() : cfg.grid, Execution::Parallel);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IoError", "cannot write '" + path.string() + "'");
  out << text;
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("IoError", "cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

Json data_json(const Problem& pb) {
  if (pb.data.empty()) return nullptr;
  const auto s = models::DataSummary::from(pb.data);
  return Json{{"n", s.n}, {"mean", s.mean}, {"centered_ss", s.centered_ss}};
}

Json settings_json(const RunConfig& cfg) {
  return Json{{"chain_length", cfg.chain_length},
              {"projection_chain_length", cfg.projection_chain_length},
              {"skew_scale", cfg.skew_scale},
              {"grid", cfg.grid.empty() ? Json("1:19.9:0.1") : Json(cfg.grid)},
              {"affine",
               {{"structure", to_string(cfg.affine.cls)},
                {"bandwidth", cfg.affine.bandwidth},
                {"n_samples", cfg.affine_samples},
                {"restarts", cfg.affine_restarts}}},
              {"marginal", {{"overdetermined", cfg.overdetermined}, {"custom_directions", cfg.directions.size()}}},
              {"gibbs", {{"iterations", cfg.gibbs_iterations}, {"compare", cfg.gibbs_compare}}}};
}

models::GibbsResult run_gibbs(const RunConfig& cfg, const Problem& pb) {
  const RngPolicy rng{cfg.seed, kGibbsStream};
  if (pb.semiconjugate) return models::gibbs_semiconjugate(*pb.semiconjugate, cfg.gibbs_iterations, rng, pb.vb->variance());
  if (pb.mixture) return models::gibbs_mixture(*pb.mixture, cfg.gibbs_iterations, rng, pb.vb->variance());
  throw Error("UnsupportedModel", "no Gibbs sampler for the mvn model; its moments are exact");
}

void collect_flags(const CovarianceEstimate& est, const std::string& method, std::vector<std::string>& flags) {
  if (est.indefinite) flags.push_back(method + ":indefinite");
  if (est.rho_clamped) flags.push_back(method + ":rho_clamped");
  if (est.projected_to_pd) flags.push_back(method + ":projected_to_pd");
}

}  // namespace

std::string error_line(const std::string& code, const std::string& message) {
  return "error[" + code + "]: " + message;
}

int cmd_ear_table(const EarTableArgs& args, std::ostream& out) {
  const auto grid = args.grid.empty() ? default_ear_grid() : parse_grid(args.grid);
  const auto table = build_ear_table(grid, Execution::Parallel);
  if (!args.out_dir.empty()) {
    const auto dir = prepare_out_dir(args.out_dir);
    std::ofstream f(dir / "ear_table.csv", std::ios::binary);
    if (!f) throw Error("IoError", "cannot write ear_table.csv");
    write_ear_csv(f, table);
  }
  out << "rows " << table.ratio.size() << ", ratio " << table.ratio.front() << " to " << table.max_ratio() << '\n';
  // The worked example row when the grid contains it.
  for (std::size_t i = 0; i < table.ratio.size(); ++i) {
    if (std::abs(table.ratio[i] - 4.6) < 1e-9) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "ratio %.1f -> ear %.4f\n", table.ratio[i], table.ear[i]);
      out << buf;
    }
  }
  if (table.ratio.size() == 1) out << "ratio 1.0 -> ear 1.0000\n";
  if (args.lookup) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "lookup %.4f -> ratio %.4f\n", *args.lookup, ear_lookup(table, *args.lookup));
    out << buf;
  }
  return kExitOk;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const bool all = cfg.method == "all";
  if (!all && cfg.method != "affine" && cfg.method != "marginal" && cfg.method != "stepwise")
    throw Error("ConfigError", "method must be affine, marginal, stepwise or all (got '" + cfg.method + "')");
  const auto dir = prepare_out_dir(cfg.out_dir);
  const Problem pb = build_problem(cfg);
  const VBApproximation& vb = *pb.vb;
  const EARTable table = make_table(cfg);

  Json doc = {{"command", "diagnose"},
              {"model", to_string(cfg.model)},
              {"seed", cfg.seed},
              {"method", cfg.method},
              {"settings", settings_json(cfg)},
              {"data", data_json(pb)},
              {"vb", report::to_json(vb)}};
  if (pb.cavi_iterations > 0) doc["cavi_iterations"] = pb.cavi_iterations;

  std::vector<std::pair<std::string, CovarianceEstimate>> columns;
  if (pb.exact_covariance) {
    auto exact = CovarianceEstimate::from_covariance(*pb.exact_covariance, vb.variance(), MethodTag::Exact);
    doc["exact"] = report::to_json(exact);
    columns.emplace_back("true", exact);
  }

  Json results = Json::object();
  std::vector<std::string> flags;
  std::string details;
  bool failed = false;
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      failed = true;
      results[name] = Json{{"error", {{"code", e.code()}, {"message", e.what()}}}};
      err << error_line(e.code(), name + ": " + e.what()) << '\n';
    }
  };

  if (all || cfg.method == "affine") {
    guarded("affine", [&] {
      AffineOptions opt;
      opt.n_samples = cfg.affine_samples;
      opt.restarts = cfg.affine_restarts;
      const auto fit = fit_affine(pb.model, vb, cfg.affine, {cfg.seed, kAffineStream}, opt);
      const auto est = corrected_covariance(fit, vb);
      results["affine"] = Json{{"fit", report::to_json(fit)}, {"estimate", report::to_json(est)}};
      columns.emplace_back("affine", est);
      collect_flags(est, "affine", flags);
      if (!fit.converged) flags.push_back("affine:not_converged");
    });
  }
  if (all || cfg.method == "marginal") {
    guarded("marginal", [&] {
      MarginalOptions opt;
      opt.chain_length = cfg.projection_chain_length;
      opt.overdetermined = cfg.overdetermined;
      opt.skew_scale = cfg.skew_scale;
      const auto rep = run_marginal(pb.model, vb, table, {cfg.seed, kMarginalStream}, opt, cfg.directions);
      results["marginal"] = report::to_json(rep);
      columns.emplace_back("marginal", rep.estimate);
      collect_flags(rep.estimate, "marginal", flags);
      if (rep.non_normal) flags.push_back("marginal:non_normal");
      details += "\nmarginal projections\n" + report::marginal_table(rep);
      std::ofstream csv(dir / "marginal_projections.csv", std::ios::binary);
      write_projection_csv(csv, rep.reads);
    });
  }
  if (all || cfg.method == "stepwise") {
    guarded("stepwise", [&] {
      StepwiseOptions opt;
      opt.chain_length = cfg.chain_length;
      opt.skew_scale = cfg.skew_scale;
      const auto rep = run_stepwise(pb.model, vb, table, {cfg.seed, kStepwiseStream}, opt);
      results["stepwise"] = report::to_json(rep);
      columns.emplace_back("stepwise", rep.estimate);
      collect_flags(rep.estimate, "stepwise", flags);
      if (rep.non_normal) flags.push_back("stepwise:non_normal");
      details += "\nstepwise reads\n" + report::stepwise_table(rep);
    });
  }
  if (cfg.gibbs_compare && !pb.exact_covariance) {
    guarded("gibbs", [&] {
      const auto g = run_gibbs(cfg, pb);
      results["gibbs"] = report::to_json(g);
      columns.emplace_back("gibbs", g.estimate);
    });
  }

  doc["results"] = results;
  doc["flags"] = flags;
  const int code = failed ? kExitError : flags.empty() ? kExitOk : kExitFlagged;
  doc["status"] = failed ? "error" : flags.empty() ? "ok" : "flagged";

  const std::string table_text = report::comparison_table(columns) + details;
  write_file(dir / "report.json", doc.dump(2) + "\n");
  write_file(dir / "report.txt", table_text);
  out << table_text;
  if (!flags.empty()) {
    out << "flags:";
    for (const auto& f : flags) out << ' ' << f;
    out << '\n';
  }
  return code;
}

int cmd_gibbs(const RunConfig& cfg, std::ostream& out) {
  const Problem pb = build_problem(cfg);
  if (pb.exact_covariance) {
    const auto exact = CovarianceEstimate::from_covariance(*pb.exact_covariance, pb.vb->variance(), MethodTag::Exact);
    out << report::comparison_table({{"exact", exact}});
    throw Error("UnsupportedModel", "no Gibbs sampler for the mvn model; exact moments printed instead");
  }
  const auto dir = prepare_out_dir(cfg.out_dir);
  const auto g = run_gibbs(cfg, pb);
  Json doc = {{"command", "gibbs"},
              {"model", to_string(cfg.model)},
              {"seed", cfg.seed},
              {"iterations", cfg.gibbs_iterations},
              {"data", data_json(pb)},
              {"vb", report::to_json(*pb.vb)},
              {"gibbs", report::to_json(g)}};
  write_file(dir / "gibbs.json", doc.dump(2) + "\n");
  const auto text = report::comparison_table({{"gibbs", g.estimate}});
  write_file(dir / "gibbs.txt", text);
  out << text;
  return kExitOk;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  if (cfg.model == ModelKind::Mvn) throw Error("UnsupportedModel", "the mvn model has no dataset");
  const auto dir = prepare_out_dir(cfg.out_dir);
  const auto data = load_data(cfg);
  std::ofstream f(dir / "data.csv", std::ios::binary);
  if (!f) throw Error("IoError", "cannot write data.csv");
  models::write_data_csv(f, data);
  const auto s = models::DataSummary::from(data);
  out << "wrote " << s.n << " observations, mean " << s.mean << ", variance "
      << (s.n > 0 ? s.centered_ss / static_cast<double>(s.n) : 0.0) << '\n';
  return kExitOk;
}

}  // namespace vbdiag::cli
