#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vbdiag/affine.hpp"
#include "vbdiag/core.hpp"
#include "vbdiag/marginal.hpp"
#include "vbdiag/models.hpp"
#include "vbdiag/stepwise.hpp"

namespace vbdiag::report {

using Json = nlohmann::ordered_json;

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // row-major nested arrays
Json to_json(const VarianceRead& read);
Json to_json(const CovarianceEstimate& est);
Json to_json(const AffineFit& fit);
Json to_json(const MarginalReport& rep);
Json to_json(const StepwiseReport& rep);
Json to_json(const models::GibbsResult& res);
Json to_json(const VBApproximation& vb);

/// Rows "ratio i" and "rho ij" (pair order 12, 13, 23, 14, ...), one
/// column per estimate; the layout of the method comparison tables.
std::string comparison_table(const std::vector<std::pair<std::string, CovarianceEstimate>>& columns);

/// Acceptance/read table for the stepwise steps.
std::string stepwise_table(const StepwiseReport& rep);
/// Direction/acceptance/l table for the marginal method.
std::string marginal_table(const MarginalReport& rep);

}  // namespace vbdiag::report
