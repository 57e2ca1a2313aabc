#pragma once

#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vbdiag/affine.hpp"
#include "vbdiag/core.hpp"
#include "vbdiag/models.hpp"

namespace vbdiag::cli {

/// INI file with line numbers kept per key so value errors can point at
/// the offending line.
class IniFile {
 public:
  static IniFile load(const std::string& path);
  static IniFile parse(const std::string& text, const std::string& name);

  bool has(const std::string& section, const std::string& key) const;
  std::string str(const std::string& section, const std::string& key, const std::string& fallback) const;
  double num(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t count(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& section, const std::string& key) const;
  /// "a,b,c; d,e,f" -> {{a,b,c},{d,e,f}}
  std::vector<std::vector<double>> lists(const std::string& section, const std::string& key) const;

  /// Rejects keys outside `allowed` for `section` (and unknown sections).
  void check_keys(const std::map<std::string, std::vector<std::string>>& allowed) const;

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const;

 private:
  std::string name_;
  boost::property_tree::ptree tree_;
  std::map<std::string, int> lines_;  // "section.key" -> line
};

enum class ModelKind { Mvn, SemiConjugate, Mixture };

struct RunConfig {
  std::string source;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string method = "all";
  std::string out_dir = "out";

  ModelKind model = ModelKind::Mvn;
  // mvn
  Vector mvn_mean;
  Matrix mvn_cov;
  // semiconjugate
  models::SemiConjugatePrior sc_prior;
  models::NormalDataSpec normal_data;
  // mixture
  models::MixturePrior mix_prior;
  models::MixtureDataSpec mixture_data;
  std::string data_path;  // overrides generated data when set
  std::uint64_t data_seed = 1;
  bool data_seed_explicit = false;  // [data] seed given; --seed leaves it alone

  // [vb]
  std::optional<VBApproximation> vb;  // absent: CAVI (semiconjugate) or mean-field (mvn)

  // [imh]
  std::size_t chain_length = 4000;
  std::size_t projection_chain_length = 6000;
  double skew_scale = 0.85;
  std::vector<double> grid;  // empty: default 1.0..19.9

  // [affine]
  AffineStructure affine;
  std::size_t affine_samples = 0;
  int affine_restarts = 5;

  // [marginal]
  bool overdetermined = false;
  std::vector<Vector> directions;

  // [gibbs]
  std::size_t gibbs_iterations = 100000;
  bool gibbs_compare = false;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& name);

std::string to_string(ModelKind kind);

/// "lo:hi" or "lo:hi:step" (step defaults to 0.1).
std::vector<double> parse_grid(const std::string& spec);

}  // namespace vbdiag::cli
