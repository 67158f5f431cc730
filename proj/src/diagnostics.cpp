#include "vcsel/diagnostics.hpp"

#include "vcsel/error.hpp"

#include <cmath>
#include <limits>

namespace vcsel {

BoundingSetDiagnostics bounding_set_diagnostics(const LongitudinalDataset& ds, const GramBlocks& blocks,
                                         const FittedModel& model, double lambda) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");
    const Eigen::VectorXd y = ds.responses();
    BoundingSetDiagnostics d;
    d.lambda = lambda;
    d.rho = (y.array().square() + y.array().abs() + 1.0).maxCoeff();
    d.c_K = std::sqrt(blocks.gram.diagonal().maxCoeff());
    d.c_x = blocks.design.size() ? blocks.design.cwiseAbs().maxCoeff() : 0.0;
    d.J_hat = model.component_norms().sum();
    d.b_bound = lambda > 0.0 ? std::sqrt(d.rho) + (d.c_K * d.c_x / lambda + 1.0) * d.rho
                             : std::numeric_limits<double>::infinity();
    d.in_omega = lambda * d.J_hat <= d.rho && std::abs(model.b) <= d.b_bound;
    return d;
}

}  // namespace vcsel
