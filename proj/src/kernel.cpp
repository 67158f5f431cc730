#include "vcsel/kernel.hpp"

namespace vcsel {

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "sobolev1") return KernelFamily::Sobolev1;
    if (name == "cubic" || name == "cubic-spline") return KernelFamily::CubicSpline;
    if (name == "gaussian") return KernelFamily::Gaussian;
    throw ValidationError("unknown kernel '" + name + "' (expected sobolev1, cubic or gaussian)");
}

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::Sobolev1: return "sobolev1";
        case KernelFamily::CubicSpline: return "cubic";
        case KernelFamily::Gaussian: return "gaussian";
    }
    return "?";
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const LongitudinalDataset& ds) {
    spec.validate();
    return gram_matrix(spec, ds.times());
}

std::vector<Eigen::MatrixXd> GramBlocks::sigma_all() const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(p()));
    for (Eigen::Index j = 0; j < p(); ++j) out.push_back(sigma(j));
    return out;
}

Eigen::MatrixXd GramBlocks::aggregate(const Eigen::VectorXd& theta) const {
    if (theta.size() != p()) throw ValidationError("aggregate: theta length does not match p");
    if ((theta.array() < 0.0).any()) throw ValidationError("aggregate: negative theta entry");
    const Eigen::MatrixXd weights = design * theta.asDiagonal() * design.transpose();
    return gram.cwiseProduct(weights);
}

Eigen::VectorXd GramBlocks::sigma_times(Eigen::Index j, const Eigen::VectorXd& v) const {
    const auto x = design.col(j);
    return x.cwiseProduct(gram * x.cwiseProduct(v));
}

double GramBlocks::sigma_quad(Eigen::Index j, const Eigen::VectorXd& v) const {
    const Eigen::VectorXd w = design.col(j).cwiseProduct(v);
    return w.dot(gram * w);
}

GramBlocks build_gram_blocks(const KernelSpec& spec, const LongitudinalDataset& ds) {
    spec.validate();
    GramBlocks blocks;
    blocks.kernel = spec;
    blocks.times = ds.times();
    blocks.gram = gram_matrix(spec, blocks.times);
    blocks.design = ds.design();
    blocks.visit_index.reserve(ds.N());
    for (std::size_t i = 0; i < ds.n(); ++i)
        for (std::size_t v = 0; v < ds.subjects()[i].visits.size(); ++v) blocks.visit_index.push_back({i, v});
    return blocks;
}

}  // namespace vcsel
