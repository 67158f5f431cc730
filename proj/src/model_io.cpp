#include "vcsel/model.hpp"

#include "vcsel/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace vcsel {

using nlohmann::json;

std::vector<double> default_tau0_grid() {
    std::vector<double> grid;
    const int points = 15;
    for (int i = 0; i < points; ++i) grid.push_back(std::pow(10.0, -6.0 + 8.0 * i / (points - 1)));
    return grid;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd json_to_vec(const json& j) {
    auto vals = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json config_to_json(const FitConfig& c) {
    json out;
    out["kernel"] = to_string(c.kernel.family);
    out["bandwidth"] = c.kernel.bandwidth;
    out["tau0"] = c.tau0 ? json(*c.tau0) : json(nullptr);
    out["tau0_grid"] = c.tau0_grid;
    out["M"] = c.M ? json(*c.M) : json(nullptr);
    out["lambda"] = c.lambda ? json(*c.lambda) : json(nullptr);
    out["jitter"] = c.jitter;
    out["cd_tol"] = c.cd_tol;
    out["cd_max_iter"] = c.cd_max_iter;
    out["bisect_tol"] = c.bisect_tol;
    out["selection_rel_eps"] = c.selection_rel_eps;
    return out;
}

FitConfig config_from_json(const json& j) {
    FitConfig c;
    c.kernel.family = parse_kernel_family(j.at("kernel").get<std::string>());
    c.kernel.bandwidth = j.at("bandwidth").get<double>();
    if (!j.at("tau0").is_null()) c.tau0 = j.at("tau0").get<double>();
    c.tau0_grid = j.at("tau0_grid").get<std::vector<double>>();
    if (!j.at("M").is_null()) c.M = j.at("M").get<double>();
    if (!j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
    c.jitter = j.at("jitter").get<double>();
    c.cd_tol = j.at("cd_tol").get<double>();
    c.cd_max_iter = j.at("cd_max_iter").get<int>();
    c.bisect_tol = j.at("bisect_tol").get<double>();
    c.selection_rel_eps = j.at("selection_rel_eps").get<double>();
    return c;
}

}  // namespace

void write_model(const FittedModel& m, std::ostream& out) {
    json j;
    j["format"] = "vcsel-model";
    j["version"] = kModelFormatVersion;
    j["kernel"] = {{"family", to_string(m.kernel.family)}, {"bandwidth", m.kernel.bandwidth}};
    j["covariates"] = m.covariate_names;
    j["intercept"] = m.b;
    j["theta"] = vec_to_json(m.theta);
    j["u"] = vec_to_json(m.u);
    j["knot_times"] = vec_to_json(m.knot_times);
    json xs = json::array();
    for (Eigen::Index r = 0; r < m.knot_x.rows(); ++r) xs.push_back(vec_to_json(m.knot_x.row(r).transpose()));
    j["knot_x"] = std::move(xs);
    j["selected"] = m.selected;
    j["tau0"] = m.tau0;
    j["tau1"] = m.tau1;
    j["time_divisor"] = m.time_divisor;
    j["config"] = config_to_json(m.config);
    out << j.dump(1) << '\n';
}

void write_model(const FittedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file '" + path.string() + "'");
    write_model(model, out);
}

FittedModel read_model(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "vcsel-model") throw ValidationError("not a vcsel model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw ValidationError("unsupported model format version " + std::to_string(version));
        FittedModel m;
        m.kernel.family = parse_kernel_family(j.at("kernel").at("family").get<std::string>());
        m.kernel.bandwidth = j.at("kernel").at("bandwidth").get<double>();
        m.covariate_names = j.at("covariates").get<std::vector<std::string>>();
        m.b = j.at("intercept").get<double>();
        m.theta = json_to_vec(j.at("theta"));
        m.u = json_to_vec(j.at("u"));
        m.knot_times = json_to_vec(j.at("knot_times"));
        const auto& xs = j.at("knot_x");
        m.knot_x.resize(static_cast<Eigen::Index>(xs.size()), m.knot_times.size());
        for (std::size_t r = 0; r < xs.size(); ++r) {
            const Eigen::VectorXd row = json_to_vec(xs[r]);
            if (row.size() != m.knot_times.size()) throw ValidationError("knot_x row length mismatch");
            m.knot_x.row(static_cast<Eigen::Index>(r)) = row.transpose();
        }
        m.selected = j.at("selected").get<std::vector<std::size_t>>();
        m.tau0 = j.at("tau0").get<double>();
        m.tau1 = j.at("tau1").get<double>();
        m.time_divisor = j.at("time_divisor").get<double>();
        m.config = config_from_json(j.at("config"));

        const auto p = static_cast<Eigen::Index>(m.covariate_names.size());
        if (m.theta.size() != p || m.knot_x.rows() != p || m.u.size() != m.knot_times.size())
            throw ValidationError("model file has inconsistent dimensions");
        for (auto s : m.selected)
            if (s >= m.covariate_names.size()) throw ValidationError("selected index out of range");
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

FittedModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path.string() + "'");
    return read_model(in);
}

}  // namespace vcsel
