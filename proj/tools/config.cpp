#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vbdiag/errors.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/stepwise.hpp"

namespace vbdiag::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, bool& ok) {
  ok = false;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    ok = used == text.size() && std::isfinite(v);
    return v;
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

IniFile IniFile::parse(const std::string& text, const std::string& name) {
  IniFile f;
  f.name_ = name;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, f.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error("ConfigError", name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  std::istringstream lines(text);
  std::string line, section;
  int no = 0;
  while (std::getline(lines, line)) {
    ++no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      f.lines_[section] = no;
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) f.lines_[section + "." + trim(t.substr(0, eq))] = no;
  }
  return f;
}

void IniFile::fail(const std::string& section, const std::string& key, const std::string& what) const {
  auto it = lines_.find(key.empty() ? section : section + "." + key);
  const std::string where = it != lines_.end() ? ":" + std::to_string(it->second) : "";
  const std::string label = key.empty() ? "[" + section + "]" : section + "." + key;
  throw Error("ConfigError", name_ + where + ": " + label + ": " + what);
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  return static_cast<bool>(tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(section + "." + key, '.')));
}

std::string IniFile::str(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? tree_.get<std::string>(section + "." + key) : fallback;
}

double IniFile::num(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  bool ok = false;
  const double v = to_double(str(section, key, ""), ok);
  if (!ok) fail(section, key, "expected a number, got '" + str(section, key, "") + "'");
  return v;
}

std::uint64_t IniFile::count(const std::string& section, const std::string& key, std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const auto text = str(section, key, "");
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] != '-') {
      const auto v = std::stoull(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  fail(section, key, "expected a non-negative integer, got '" + text + "'");
}

bool IniFile::flag(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const auto v = str(section, key, "");
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  fail(section, key, "expected true or false, got '" + v + "'");
}

std::vector<double> IniFile::list(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  if (!has(section, key)) return out;
  std::stringstream ss(str(section, key, ""));
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool ok = false;
    const double v = to_double(trim(item), ok);
    if (!ok) fail(section, key, "bad list entry '" + trim(item) + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::vector<double>> IniFile::lists(const std::string& section, const std::string& key) const {
  std::vector<std::vector<double>> out;
  if (!has(section, key)) return out;
  std::stringstream ss(str(section, key, ""));
  std::string group;
  while (std::getline(ss, group, ';')) {
    std::vector<double> row;
    std::stringstream gs(group);
    std::string item;
    while (std::getline(gs, item, ',')) {
      bool ok = false;
      const double v = to_double(trim(item), ok);
      if (!ok) fail(section, key, "bad list entry '" + trim(item) + "'");
      row.push_back(v);
    }
    if (!row.empty()) out.push_back(std::move(row));
  }
  return out;
}

void IniFile::check_keys(const std::map<std::string, std::vector<std::string>>& allowed) const {
  for (const auto& [section, body] : tree_) {
    const auto it = allowed.find(section);
    if (it == allowed.end()) fail(section, "", "unknown section");
    if (body.empty() && !body.data().empty()) fail(section, "", "key outside a section");
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        fail(section, key, "unknown key");
    }
  }
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Mvn: return "mvn";
    case ModelKind::SemiConjugate: return "semiconjugate";
    case ModelKind::Mixture: return "mixture";
  }
  return "unknown";
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    bool ok = false;
    const double v = to_double(trim(item), ok);
    if (!ok) throw Error("InvalidArgument", "grid must look like lo:hi[:step], got '" + spec + "'");
    parts.push_back(v);
  }
  if (parts.size() != 2 && parts.size() != 3)
    throw Error("InvalidArgument", "grid must look like lo:hi[:step], got '" + spec + "'");
  if (parts[0] != 1.0) throw Error("InvalidArgument", "grid must start at ratio 1");
  return make_grid(parts[0], parts[1], parts.size() == 3 ? parts[2] : 0.1);
}

namespace {

void read_mvn(const IniFile& ini, RunConfig& cfg) {
  const auto mean = ini.list("model", "mean");
  if (mean.empty()) ini.fail("model", "mean", "mvn model needs a mean list");
  const auto p = static_cast<Eigen::Index>(mean.size());
  cfg.mvn_mean = Eigen::Map<const Vector>(mean.data(), p);
  if (ini.has("model", "covariance")) {
    const auto c = ini.list("model", "covariance");
    if (static_cast<Eigen::Index>(c.size()) != p * p) ini.fail("model", "covariance", "need p*p row-major entries");
    cfg.mvn_cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(c.data(), p, p);
  } else {
    const auto sd = ini.list("model", "sd");
    if (static_cast<Eigen::Index>(sd.size()) != p) ini.fail("model", "sd", "need one sd per coordinate");
    for (double v : sd)
      if (!(v > 0.0)) ini.fail("model", "sd", "standard deviations must be positive");
    const auto r = ini.list("model", "rho");
    const auto pairs = correlation_pairs(static_cast<std::size_t>(p));
    if (r.size() != pairs.size() && !(r.empty() && p == 1))
      ini.fail("model", "rho", "need p(p-1)/2 correlations in pair order 12,13,23,14,...");
    Matrix rho = Matrix::Identity(p, p);
    for (std::size_t k = 0; k < pairs.size(); ++k) rho(pairs[k].first, pairs[k].second) = rho(pairs[k].second, pairs[k].first) = r[k];
    cfg.mvn_cov = models::covariance_from(Eigen::Map<const Vector>(sd.data(), p), rho);
  }
}

void read_vb(const IniFile& ini, RunConfig& cfg) {
  if (cfg.model == ModelKind::Mvn) {
    const auto p = cfg.mvn_mean.size();
    Vector mean = cfg.mvn_mean;
    if (ini.has("vb", "mean")) {
      const auto m = ini.list("vb", "mean");
      if (static_cast<Eigen::Index>(m.size()) != p) ini.fail("vb", "mean", "need one mean per coordinate");
      mean = Eigen::Map<const Vector>(m.data(), p);
    }
    Vector var;
    if (ini.has("vb", "variance")) {
      const auto v = ini.list("vb", "variance");
      if (static_cast<Eigen::Index>(v.size()) != p) ini.fail("vb", "variance", "need one variance per coordinate");
      var = Eigen::Map<const Vector>(v.data(), p);
    } else if (ini.has("vb", "variance_ratio")) {
      const auto r = ini.list("vb", "variance_ratio");
      if (static_cast<Eigen::Index>(r.size()) != p) ini.fail("vb", "variance_ratio", "need one ratio per coordinate");
      var = cfg.mvn_cov.diagonal().cwiseQuotient(Eigen::Map<const Vector>(r.data(), p));
    } else {
      // Mean-field optimum for a Gaussian target: q_i variance 1 / (Sigma^-1)_ii.
      var = cfg.mvn_cov.inverse().diagonal().cwiseInverse();
    }
    std::vector<MarginalFamily> f;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!(var[i] > 0.0)) ini.fail("vb", "variance", "variances must be positive");
      f.push_back(MarginalFamily::normal(mean[i], var[i]));
    }
    cfg.vb = VBApproximation(std::move(f));
  } else if (cfg.model == ModelKind::SemiConjugate) {
    const auto fit = ini.str("vb", "fit", "cavi");
    if (fit == "cavi") return;
    if (fit != "explicit") ini.fail("vb", "fit", "expected cavi or explicit");
    const auto mu = ini.list("vb", "mu");
    const auto s = ini.list("vb", "sigma2");
    if (mu.size() != 2) ini.fail("vb", "mu", "need mean,variance");
    if (s.size() != 2) ini.fail("vb", "sigma2", "need shape,scale");
    cfg.vb = VBApproximation({MarginalFamily::normal(mu[0], mu[1]), MarginalFamily::inverse_gamma(s[0], s[1])});
  } else {
    const char* keys[] = {"pi", "mu1", "mu2", "sigma1", "sigma2"};
    std::vector<double> v[5];
    for (int k = 0; k < 5; ++k) {
      v[k] = ini.list("vb", keys[k]);
      if (v[k].size() != 2) ini.fail("vb", keys[k], "need two parameters");
    }
    cfg.vb = models::mixture_vb(v[0][0], v[0][1], v[1][0], v[1][1], v[2][0], v[2][1], v[3][0], v[3][1], v[4][0],
                                v[4][1]);
  }
}

template <class T, std::size_t N>
void read_pair(const IniFile& ini, const char* key, std::array<T, N>& out) {
  if (!ini.has("model", key)) return;
  const auto v = ini.list("model", key);
  if (v.size() == 1) {
    out.fill(v[0]);
  } else if (v.size() == N) {
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  } else {
    ini.fail("model", key, "need one or two values");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& name) {
  const IniFile ini = IniFile::parse(text, name);
  ini.check_keys({
      {"run", {"seed", "threads", "method", "out_dir"}},
      {"model", {"type", "mean", "sd", "rho", "covariance", "alpha", "beta", "gamma", "eta2", "a0", "c", "d2", "e", "f"}},
      {"data", {"path", "seed", "n", "mean", "variance", "weight", "mu1", "var1", "mu2", "var2"}},
      {"vb", {"mean", "variance", "variance_ratio", "fit", "mu", "sigma2", "pi", "mu1", "mu2", "sigma1"}},
      {"imh", {"chain_length", "projection_chain_length", "skew_scale", "grid"}},
      {"affine", {"structure", "bandwidth", "n_samples", "restarts"}},
      {"marginal", {"overdetermined", "directions"}},
      {"gibbs", {"iterations", "compare"}},
  });

  RunConfig cfg;
  cfg.source = name;
  cfg.seed = ini.count("run", "seed", 1);
  cfg.threads = static_cast<int>(ini.count("run", "threads", 0));
  cfg.method = ini.str("run", "method", "all");
  cfg.out_dir = ini.str("run", "out_dir", "out");

  const auto type = ini.str("model", "type", "");
  if (type == "mvn") {
    cfg.model = ModelKind::Mvn;
    read_mvn(ini, cfg);
  } else if (type == "semiconjugate") {
    cfg.model = ModelKind::SemiConjugate;
    cfg.sc_prior.alpha = ini.num("model", "alpha", cfg.sc_prior.alpha);
    cfg.sc_prior.beta = ini.num("model", "beta", cfg.sc_prior.beta);
    cfg.sc_prior.gamma = ini.num("model", "gamma", cfg.sc_prior.gamma);
    cfg.sc_prior.eta2 = ini.num("model", "eta2", cfg.sc_prior.eta2);
    cfg.normal_data.n = ini.count("data", "n", cfg.normal_data.n);
    cfg.normal_data.mean = ini.num("data", "mean", cfg.normal_data.mean);
    cfg.normal_data.variance = ini.num("data", "variance", cfg.normal_data.variance);
  } else if (type == "mixture") {
    cfg.model = ModelKind::Mixture;
    cfg.mix_prior.a0 = ini.num("model", "a0", cfg.mix_prior.a0);
    read_pair(ini, "c", cfg.mix_prior.c);
    read_pair(ini, "d2", cfg.mix_prior.d2);
    read_pair(ini, "e", cfg.mix_prior.e);
    read_pair(ini, "f", cfg.mix_prior.f);
    auto& md = cfg.mixture_data;
    md.n = ini.count("data", "n", md.n);
    md.weight = ini.num("data", "weight", md.weight);
    md.mu1 = ini.num("data", "mu1", md.mu1);
    md.var1 = ini.num("data", "var1", md.var1);
    md.mu2 = ini.num("data", "mu2", md.mu2);
    md.var2 = ini.num("data", "var2", md.var2);
  } else {
    ini.fail("model", "type", type.empty() ? "missing model type" : "unknown model type '" + type + "'");
  }
  cfg.data_path = ini.str("data", "path", "");
  cfg.data_seed = ini.count("data", "seed", cfg.seed);
  cfg.data_seed_explicit = ini.has("data", "seed");

  read_vb(ini, cfg);

  cfg.chain_length = ini.count("imh", "chain_length", cfg.chain_length);
  cfg.projection_chain_length = ini.count("imh", "projection_chain_length", cfg.projection_chain_length);
  cfg.skew_scale = ini.num("imh", "skew_scale", cfg.skew_scale);
  if (ini.has("imh", "grid")) {
    try {
      cfg.grid = parse_grid(ini.str("imh", "grid", ""));
    } catch (const Error& e) {
      ini.fail("imh", "grid", e.what());
    }
  }

  const std::size_t p = cfg.model == ModelKind::Mvn   ? static_cast<std::size_t>(cfg.mvn_mean.size())
                        : cfg.model == ModelKind::Mixture ? 5
                                                          : 2;
  try {
    cfg.affine.cls = affine_class_from_string(ini.str("affine", "structure", "lower_triangular"));
  } catch (const Error& e) {
    ini.fail("affine", "structure", e.what());
  }
  cfg.affine.dim = p;
  cfg.affine.bandwidth = ini.count("affine", "bandwidth", 1);
  cfg.affine_samples = ini.count("affine", "n_samples", 0);
  cfg.affine_restarts = static_cast<int>(ini.count("affine", "restarts", 5));

  cfg.overdetermined = ini.flag("marginal", "overdetermined", false);
  for (const auto& d : ini.lists("marginal", "directions")) {
    if (d.size() != p) ini.fail("marginal", "directions", "each direction needs " + std::to_string(p) + " entries");
    cfg.directions.emplace_back(Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(p)));
  }

  cfg.gibbs_iterations = ini.count("gibbs", "iterations", cfg.gibbs_iterations);
  cfg.gibbs_compare = ini.flag("gibbs", "compare", false);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

}  // namespace vbdiag::cli
