#pragma once

#include "vcsel/dataset.hpp"
#include "vcsel/kernel.hpp"
#include "vcsel/model.hpp"

namespace vcsel {

/// Bounding-set quantities for a fitted model.
///
///   rho     = max (y^2 + |y| + 1)
///   c_K     = max K(t,t)^{1/2} over visits
///   c_x     = max |x|
///   J_hat   = sum_j ||beta_j||
///   b_bound = rho^{1/2} + (c_K c_x / lambda + 1) rho
///   in_omega <=> lambda J_hat <= rho and |b| <= b_bound
///
/// lambda = 1 gives the unit-penalty set; lambda = 0 leaves both bounds vacuous.
struct BoundingSetDiagnostics {
    double rho = 0.0;
    double c_K = 0.0;
    double c_x = 0.0;
    double J_hat = 0.0;
    double b_bound = 0.0;
    double lambda = 1.0;
    bool in_omega = false;
};

BoundingSetDiagnostics bounding_set_diagnostics(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                         const FittedModel& model, double lambda = 1.0);

}  // namespace vcsel
