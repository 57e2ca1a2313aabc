#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "config.hpp"

namespace vbdiag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFlagged = 2;

struct EarTableArgs {
  std::string grid;  // empty: default grid
  std::optional<double> lookup;
  std::string out_dir;  // empty: no file
};

int cmd_ear_table(const EarTableArgs& args, std::ostream& out);
int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_gibbs(const RunConfig& cfg, std::ostream& out);
int cmd_gen_data(const RunConfig& cfg, std::ostream& out);

/// "error[Code]: message" for the CLI's stderr.
std::string error_line(const std::string& code, const std::string& message);

}  // namespace vbdiag::cli
