#pragma once

#include <span>
#include <string>

#include "spidereval/curvefit.hpp"
#include "spidereval/error_analysis.hpp"
#include "spidereval/reliability.hpp"

namespace spidereval::svg {

/// Empirical markers plus the fitted curve.
std::string learning_curve(const std::string& title, std::span<const curvefit::Point> points,
                           curvefit::CurveForm form, const curvefit::Params& params);

/// One box per subsample size (quartiles, whiskers at min/max).
std::string icc_boxplot(const reliability::IccBootstrapReport& report);

/// Paired bars of error share and frequency per category of one criterion.
std::string share_frequency(const std::string& criterion,
                            std::span<const error_analysis::CategorySummary> rows);

}  // namespace spidereval::svg
