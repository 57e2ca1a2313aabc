#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "helpers.hpp"

using namespace vbdiag;
using namespace vbdiag::cli;
using testing::error_code;
namespace fs = std::filesystem;

namespace {

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() + ": " + e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vbdiag_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kMatchedMvn = R"([run]
seed = 3
method = all

[model]
type = mvn
mean = 0, 1
sd = 1, 2
rho = 0

[vb]
variance = 1, 4

[imh]
chain_length = 4000
)";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config errors carry file and line") {
    const std::string text = "[run]\nseed = 1\n\n[model]\ntype = mvn\nmean = 0, 0\nsd = 1, -1\nrho = 0\n";
    const auto msg = message_of([&] { parse_run_config(text, "bad.ini"); });
    CHECK(msg.rfind("ConfigError", 0) == 0);
    CHECK(msg.find("bad.ini:7") != std::string::npos);
    CHECK(msg.find("model.sd") != std::string::npos);
  }

  TEST_CASE("unknown keys and sections are rejected") {
    CHECK(message_of([] { parse_run_config("[run]\nsed = 1\n", "a.ini"); }).find("a.ini:2") != std::string::npos);
    CHECK(error_code([] { parse_run_config("[runn]\nseed = 1\n", "a.ini"); }) == "ConfigError");
    CHECK(error_code([] { parse_run_config("[model]\ntype = spline\n", "a.ini"); }) == "ConfigError");
    CHECK(error_code([] { parse_run_config("[run]\nseed = abc\n[model]\ntype = mvn\n", "a.ini"); }) ==
          "ConfigError");
  }

  TEST_CASE("shipped configs parse") {
    for (const char* name : {"mvn_3d.ini", "semiconjugate.ini", "semiconjugate_shifted.ini", "mixture.ini"}) {
      CAPTURE(name);
      CHECK_NOTHROW(load_run_config(std::string(VBDIAG_CONFIG_DIR) + "/" + name));
    }
    const auto cfg = load_run_config(std::string(VBDIAG_CONFIG_DIR) + "/mvn_3d.ini");
    CHECK(cfg.mvn_cov(2, 2) == doctest::Approx(16.0));
    CHECK(cfg.vb->variance()[0] == doctest::Approx(0.01 / 2.2));
  }

  TEST_CASE("grid parsing") {
    CHECK(parse_grid("1:1") == std::vector<double>{1.0});
    CHECK(parse_grid("1:2:0.5").size() == 3);
    CHECK(parse_grid("1:19.9").size() == 190);
    CHECK(error_code([] { parse_grid("2"); }) == "InvalidArgument");
  }

  TEST_CASE("ear-table output") {
    std::ostringstream out;
    const auto dir = scratch("ear");
    CHECK(cmd_ear_table({"1:1", std::nullopt, dir.string()}, out) == kExitOk);
    CHECK(slurp(dir / "ear_table.csv") == "ratio,ear\n1.000000,1.000000\n");
    std::ostringstream out2;
    cmd_ear_table({"", 0.5555, ""}, out2);
    CHECK(out2.str().find("ratio 4.6 -> ear 0.5555") != std::string::npos);
    const auto pos = out2.str().find("lookup 0.5555 -> ratio ");
    REQUIRE(pos != std::string::npos);
    const double r = std::stod(out2.str().substr(pos + 23));
    CHECK(std::abs(r - 4.6) < 0.05);
  }

  TEST_CASE("diagnose with VB equal to the posterior") {
    auto cfg = parse_run_config(kMatchedMvn, "matched.ini");
    cfg.out_dir = scratch("matched").string();
    std::ostringstream out, err;
    const int code = cmd_diagnose(cfg, out, err);
    CHECK(err.str().empty());
    CHECK(code == kExitOk);
    const auto j = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "report.json"));
    for (const char* m : {"affine", "marginal", "stepwise"}) {
      const auto& ratios = j["results"][m]["estimate"]["ratios"];
      CAPTURE(m);
      for (double r : ratios) CHECK(std::abs(r - 1.0) < 0.1);
      for (const auto& row : j["results"][m]["estimate"]["rho"])
        for (double v : row)
          if (v != 1.0) CHECK(std::abs(v) < 0.1);
    }
    CHECK(fs::exists(fs::path(cfg.out_dir) / "report.txt"));
    CHECK(fs::exists(fs::path(cfg.out_dir) / "marginal_projections.csv"));
  }

  TEST_CASE("diagnose is byte-for-byte reproducible") {
    auto cfg = load_run_config(std::string(VBDIAG_CONFIG_DIR) + "/mvn_3d.ini");
    std::string first;
    for (int run = 0; run < 2; ++run) {
      cfg.out_dir = scratch("repro" + std::to_string(run)).string();
      std::ostringstream out, err;
      cmd_diagnose(cfg, out, err);
      const auto text = slurp(fs::path(cfg.out_dir) / "report.json");
      CHECK(!text.empty());
      if (run == 0) first = text;
      else CHECK(text == first);
    }
  }

  TEST_CASE("gibbs command validation") {
    auto cfg = parse_run_config(kMatchedMvn, "matched.ini");
    cfg.out_dir = scratch("gibbs_mvn").string();
    std::ostringstream out;
    CHECK(error_code([&] { cmd_gibbs(cfg, out); }) == "UnsupportedModel");
    CHECK(out.str().find("exact") != std::string::npos);

    auto sc = load_run_config(std::string(VBDIAG_CONFIG_DIR) + "/semiconjugate.ini");
    sc.gibbs_iterations = 500;
    sc.out_dir = scratch("gibbs_sc").string();
    CHECK(error_code([&] { cmd_gibbs(sc, out); }) == "InvalidArgument");
  }

  TEST_CASE("gen-data writes a readable column") {
    auto cfg = load_run_config(std::string(VBDIAG_CONFIG_DIR) + "/mixture.ini");
    cfg.out_dir = scratch("gen").string();
    std::ostringstream out;
    CHECK(cmd_gen_data(cfg, out) == kExitOk);
    std::ifstream in(fs::path(cfg.out_dir) / "data.csv");
    CHECK(models::read_data_csv(in).size() == 400);
  }

  TEST_CASE("error line format") { CHECK(error_line("NegativeVariance", "x") == "error[NegativeVariance]: x"); }
}
