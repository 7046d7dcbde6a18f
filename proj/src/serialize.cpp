#include "icrl/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace icrl {

namespace {

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "/" + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional = {}) {
    check_schema_keys(j, path, required, optional);
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError("expected a number at " + path);
    return j.get<double>();
}

long get_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError("expected an integer at " + path);
    return j.get<long>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError("expected a string at " + path);
    return j.get<std::string>();
}

const json& get_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError("expected an array at " + path);
    return j;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& path) {
    get_array(j, path);
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) =
            get_number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path) {
    get_array(j, path);
    if (j.empty()) throw SchemaError("empty matrix at " + path);
    const std::size_t cols = get_array(j[0], path + "[0]").size();
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string row_path = path + "[" + std::to_string(r) + "]";
        const json& row = get_array(j[r], row_path);
        if (row.size() != cols) throw SchemaError("ragged matrix row at " + row_path);
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                get_number(row[c], row_path + "[" + std::to_string(c) + "]");
        }
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

// JSON carries 1-based variable indices.
std::vector<int> indices_from_json(const json& j, const std::string& path) {
    get_array(j, path);
    std::vector<int> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(static_cast<int>(
                          get_integer(j[i], path + "[" + std::to_string(i) + "]")) -
                      1);
    }
    return out;
}

json indices_to_json(const std::vector<int>& v) {
    json out = json::array();
    for (int i : v) out.push_back(i + 1);
    return out;
}

const char* family_name(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::uniform: return "uniform";
        case NoiseFamily::laplace: return "laplace";
    }
    return "gaussian";
}

}  // namespace

void check_schema_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional) {
    if (!j.is_object()) {
        throw SchemaError("expected an object at " + (path.empty() ? "<root>" : path));
    }
    for (const char* key : required) {
        if (!j.contains(key)) {
            throw SchemaError("missing field " + joined(path, key));
        }
    }
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        auto matches = [&key](const char* k) { return key == k; };
        if (!std::any_of(required.begin(), required.end(), matches) &&
            !std::any_of(optional.begin(), optional.end(), matches)) {
            throw SchemaError("unknown field " + joined(path, key));
        }
    }
}

std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ParseError("not a number: '" + s + "'");
    }
    return v;
}

json noise_to_json(const NoiseSpec& n) {
    return json{{"family", family_name(n.family)}, {"variance", n.variance}};
}

NoiseSpec noise_from_json(const json& j, const std::string& path) {
    check_keys(j, path, {"family", "variance"});
    NoiseSpec n;
    const std::string fam = get_string(j["family"], joined(path, "family"));
    if (fam == "gaussian") {
        n.family = NoiseFamily::gaussian;
    } else if (fam == "uniform") {
        n.family = NoiseFamily::uniform;
    } else if (fam == "laplace") {
        n.family = NoiseFamily::laplace;
    } else {
        throw ValidationError(joined(path, "family") + ": unknown noise family '" + fam + "'");
    }
    n.variance = get_number(j["variance"], joined(path, "variance"));
    if (!(n.variance >= 0.0)) {
        throw ValidationError(joined(path, "variance") + ": variance must be >= 0");
    }
    return n;
}

namespace {

json term_to_json(const BasisTerm& t, const std::vector<int>& parents, bool slot_indexed) {
    json factors = json::array();
    for (const BasisFactor& f : t.factors) {
        const int var = slot_indexed ? parents[static_cast<std::size_t>(f.index)] : f.index;
        json jf{{"var", var + 1}};
        if (f.kind == FactorKind::power) {
            jf["kind"] = "power";
            jf["exponent"] = f.exponent;
        } else {
            jf["kind"] = "tanh";
        }
        factors.push_back(std::move(jf));
    }
    return json{{"coefficient", t.coefficient}, {"factors", std::move(factors)}};
}

BasisTerm term_from_json(const json& j, const std::vector<int>& parents, bool slot_indexed,
                         const std::string& path) {
    check_keys(j, path, {"coefficient", "factors"});
    BasisTerm t;
    t.coefficient = get_number(j["coefficient"], joined(path, "coefficient"));
    const json& factors = get_array(j["factors"], joined(path, "factors"));
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const std::string fpath = joined(path, "factors[" + std::to_string(i) + "]");
        const json& jf = factors[i];
        check_keys(jf, fpath, {"var", "kind"}, {"exponent"});
        BasisFactor f;
        const int var = static_cast<int>(get_integer(jf["var"], joined(fpath, "var"))) - 1;
        if (slot_indexed) {
            const auto it = std::find(parents.begin(), parents.end(), var);
            if (it == parents.end()) {
                throw ValidationError(fpath + ": var " + std::to_string(var + 1) +
                                      " is not a parent of this mechanism");
            }
            f.index = static_cast<int>(it - parents.begin());
        } else {
            f.index = var;
        }
        const std::string kind = get_string(jf["kind"], joined(fpath, "kind"));
        if (kind == "power") {
            f.kind = FactorKind::power;
            if (!jf.contains("exponent")) {
                throw SchemaError("missing field " + joined(fpath, "exponent"));
            }
            f.exponent = static_cast<int>(get_integer(jf["exponent"], joined(fpath, "exponent")));
        } else if (kind == "tanh") {
            f.kind = FactorKind::tanh;
        } else {
            throw ValidationError(joined(fpath, "kind") + ": unknown factor kind '" + kind + "'");
        }
        t.factors.push_back(f);
    }
    return t;
}

}  // namespace

json mechanism_to_json(const Mechanism& m) {
    json out{{"parents", indices_to_json(m.parents)},
             {"noise", noise_to_json(m.noise)}};
    if (m.form == MechanismForm::linear) {
        out["form"] = "linear";
        out["coefficients"] = vector_to_json(m.coefficients);
    } else {
        out["form"] = "basis";
        json terms = json::array();
        for (const BasisTerm& t : m.terms) terms.push_back(term_to_json(t, m.parents, true));
        out["terms"] = std::move(terms);
    }
    return out;
}

Mechanism mechanism_from_json(const json& j, int d, const std::string& path) {
    check_keys(j, path, {"parents", "form", "noise"}, {"coefficients", "terms"});
    Mechanism m;
    m.parents = indices_from_json(j["parents"], joined(path, "parents"));
    for (int p : m.parents) {
        if (p < 0 || p >= d) {
            throw ValidationError(joined(path, "parents") + ": index " + std::to_string(p + 1) +
                                  " outside [1, " + std::to_string(d) + "]");
        }
    }
    const std::string form = get_string(j["form"], joined(path, "form"));
    if (form == "linear") {
        m.form = MechanismForm::linear;
        if (!j.contains("coefficients")) {
            throw SchemaError("missing field " + joined(path, "coefficients"));
        }
        m.coefficients = vector_from_json(j["coefficients"], joined(path, "coefficients"));
    } else if (form == "basis") {
        m.form = MechanismForm::basis;
        if (!j.contains("terms")) {
            throw SchemaError("missing field " + joined(path, "terms"));
        }
        const json& terms = get_array(j["terms"], joined(path, "terms"));
        for (std::size_t i = 0; i < terms.size(); ++i) {
            m.terms.push_back(term_from_json(terms[i], m.parents, true,
                                             joined(path, "terms[" + std::to_string(i) + "]")));
        }
    } else {
        throw ValidationError(joined(path, "form") + ": unknown mechanism form '" + form + "'");
    }
    m.noise = noise_from_json(j["noise"], joined(path, "noise"));
    return m;
}

json scm_to_json(const Scm& scm) {
    json latents = json::array();
    for (const Mechanism& m : scm.latent_mechanisms) latents.push_back(mechanism_to_json(m));
    return json{{"version", "1"},
                {"d", scm.d},
                {"latent_mechanisms", std::move(latents)},
                {"target_mechanism", mechanism_to_json(scm.target_mechanism)}};
}

Scm scm_from_json(const json& j, const std::string& path) {
    check_keys(j, path, {"d", "latent_mechanisms", "target_mechanism"}, {"version"});
    Scm scm;
    scm.d = static_cast<int>(get_integer(j["d"], joined(path, "d")));
    const json& latents = get_array(j["latent_mechanisms"], joined(path, "latent_mechanisms"));
    if (static_cast<int>(latents.size()) != scm.d) {
        throw ValidationError(joined(path, "latent_mechanisms") + ": expected " +
                              std::to_string(scm.d) + " entries, got " +
                              std::to_string(latents.size()));
    }
    for (std::size_t i = 0; i < latents.size(); ++i) {
        scm.latent_mechanisms.push_back(mechanism_from_json(
            latents[i], scm.d,
            joined(path, "latent_mechanisms[" + std::to_string(i) + "]")));
    }
    scm.target_mechanism =
        mechanism_from_json(j["target_mechanism"], scm.d, joined(path, "target_mechanism"));
    validate(scm);
    return scm;
}

json intervention_to_json(const Intervention& iv) {
    return json{{"targets", indices_to_json(iv.targets)}, {"values", vector_to_json(iv.values)}};
}

Intervention intervention_from_json(const json& j, const std::string& path) {
    check_keys(j, path, {"targets", "values"}, {"label"});
    Intervention iv;
    iv.targets = indices_from_json(j["targets"], joined(path, "targets"));
    iv.values = vector_from_json(j["values"], joined(path, "values"));
    if (iv.values.size() != static_cast<Eigen::Index>(iv.targets.size())) {
        throw ValidationError(path + ": targets and values have different lengths");
    }
    return iv;
}

json envset_to_json(const EnvironmentSet& envs) {
    json list = json::array();
    for (std::size_t i = 0; i < envs.environments.size(); ++i) {
        json e = intervention_to_json(envs.environments[i]);
        if (i < envs.labels.size()) e["label"] = envs.labels[i];
        list.push_back(std::move(e));
    }
    return json{{"environments", std::move(list)}};
}

EnvironmentSet envset_from_json(const json& j, const std::string& path) {
    check_keys(j, path, {"environments"});
    const json& list = get_array(j["environments"], joined(path, "environments"));
    if (list.empty()) throw ValidationError(path + ": environment set must be nonempty");
    EnvironmentSet envs;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string epath = joined(path, "environments[" + std::to_string(i) + "]");
        envs.environments.push_back(intervention_from_json(list[i], epath));
        std::string label = list[i].contains("label")
                                ? get_string(list[i]["label"], joined(epath, "label"))
                                : "e" + std::to_string(i);
        if (!seen.insert(label).second) {
            throw ValidationError(epath + ": duplicate label '" + label + "'");
        }
        envs.labels.push_back(std::move(label));
    }
    return envs;
}

namespace {

json layer_to_json(const FlowLayer& layer) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, OrthogonalLayer>) {
                return json{{"type", "orthogonal"}, {"matrix", matrix_to_json(l.q)}};
            } else if constexpr (std::is_same_v<T, SignedPowerLayer>) {
                return json{{"type", "signed_power"}, {"gamma", vector_to_json(l.gamma)}};
            } else {
                return json{{"type", "shift"}, {"offset", vector_to_json(l.offset)}};
            }
        },
        layer);
}

FlowLayer layer_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("type")) {
        throw SchemaError("missing field " + joined(path, "type"));
    }
    const std::string type = get_string(j["type"], joined(path, "type"));
    if (type == "orthogonal") {
        check_keys(j, path, {"type", "matrix"});
        return OrthogonalLayer{matrix_from_json(j["matrix"], joined(path, "matrix"))};
    }
    if (type == "signed_power") {
        check_keys(j, path, {"type", "gamma"});
        return SignedPowerLayer{vector_from_json(j["gamma"], joined(path, "gamma"))};
    }
    if (type == "shift") {
        check_keys(j, path, {"type", "offset"});
        return ShiftLayer{vector_from_json(j["offset"], joined(path, "offset"))};
    }
    throw ValidationError(joined(path, "type") + ": unknown layer type '" + type + "'");
}

FlowMixer flow_from_json(const json& j, const std::string& path, bool allow_embedding) {
    if (allow_embedding) {
        check_keys(j, path, {"kind", "d", "layers"}, {"embedding"});
    } else {
        check_keys(j, path, {"d", "layers"});
    }
    FlowMixer flow;
    flow.dim = static_cast<int>(get_integer(j["d"], joined(path, "d")));
    const json& layers = get_array(j["layers"], joined(path, "layers"));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        flow.layers.push_back(
            layer_from_json(layers[i], joined(path, "layers[" + std::to_string(i) + "]")));
    }
    if (allow_embedding && j.contains("embedding")) {
        const std::string epath = joined(path, "embedding");
        check_keys(j["embedding"], epath, {"matrix"});
        flow.embedding =
            LinearMixer::from_matrix(matrix_from_json(j["embedding"]["matrix"],
                                                      joined(epath, "matrix")));
    }
    validate_mixer(flow);
    return flow;
}

}  // namespace

json mixer_to_json(const Mixer& m) {
    if (const auto* lin = std::get_if<LinearMixer>(&m)) {
        return json{{"kind", "linear"}, {"matrix", matrix_to_json(lin->matrix)}};
    }
    const auto& flow = std::get<FlowMixer>(m);
    json layers = json::array();
    for (const FlowLayer& l : flow.layers) layers.push_back(layer_to_json(l));
    json out{{"kind", "flow"}, {"d", flow.dim}, {"layers", std::move(layers)}};
    if (flow.embedding) {
        out["embedding"] = json{{"matrix", matrix_to_json(flow.embedding->matrix)}};
    }
    return out;
}

Mixer mixer_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("kind")) {
        throw SchemaError("missing field " + joined(path, "kind"));
    }
    const std::string kind = get_string(j["kind"], joined(path, "kind"));
    if (kind == "linear") {
        check_keys(j, path, {"kind", "matrix"});
        return LinearMixer::from_matrix(matrix_from_json(j["matrix"], joined(path, "matrix")));
    }
    if (kind == "flow") {
        return Mixer{flow_from_json(j, path, true)};
    }
    throw ValidationError(joined(path, "kind") + ": unknown mixer kind '" + kind + "'");
}

json reparam_to_json(const ReparamMap& psi) {
    json layers = json::array();
    for (const FlowLayer& l : psi.flow.layers) layers.push_back(layer_to_json(l));
    return json{{"d", psi.flow.dim}, {"layers", std::move(layers)}};
}

ReparamMap reparam_from_json(const json& j, const std::string& path) {
    return ReparamMap{flow_from_json(j, path, false)};
}

json predictor_to_json(const Predictor& f) {
    if (const auto* lin = std::get_if<LinearPredictor>(&f)) {
        return json{{"form", "linear"}, {"theta", vector_to_json(lin->theta)}};
    }
    const auto& basis = std::get<BasisPredictor>(f);
    json terms = json::array();
    for (const BasisTerm& t : basis.terms) terms.push_back(term_to_json(t, {}, false));
    return json{{"form", "basis"}, {"d", basis.dim}, {"terms", std::move(terms)}};
}

Predictor predictor_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("form")) {
        throw SchemaError("missing field " + joined(path, "form"));
    }
    const std::string form = get_string(j["form"], joined(path, "form"));
    if (form == "linear") {
        check_keys(j, path, {"form", "theta"});
        return LinearPredictor{vector_from_json(j["theta"], joined(path, "theta"))};
    }
    if (form == "basis") {
        check_keys(j, path, {"form", "d", "terms"});
        BasisPredictor basis;
        basis.dim = static_cast<int>(get_integer(j["d"], joined(path, "d")));
        const json& terms = get_array(j["terms"], joined(path, "terms"));
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const std::string tpath = joined(path, "terms[" + std::to_string(i) + "]");
            BasisTerm t = term_from_json(terms[i], {}, false, tpath);
            for (const BasisFactor& fac : t.factors) {
                if (fac.index < 0 || fac.index >= basis.dim) {
                    throw ValidationError(tpath + ": var outside [1, " +
                                          std::to_string(basis.dim) + "]");
                }
            }
            basis.terms.push_back(std::move(t));
        }
        return basis;
    }
    throw ValidationError(joined(path, "form") + ": unknown predictor form '" + form + "'");
}

json risk_report_to_json(const RiskReport& r) {
    return json{{"per_env_risk", r.per_env_risk},
                {"env_labels", r.env_labels},
                {"worst_case", r.worst_case},
                {"argmax_env", r.argmax_env},
                {"noise_floor", r.noise_floor},
                {"a_max", r.a_max},
                {"mode", r.mode == RiskMode::exact ? "exact" : "monte_carlo"},
                {"n", r.n},
                {"seed", r.seed}};
}

std::string risk_report_csv(const RiskReport& r) {
    std::ostringstream os;
    os << "env_label,risk\n";
    for (std::size_t i = 0; i < r.per_env_risk.size(); ++i) {
        os << r.env_labels[i] << ',' << fmt_double(r.per_env_risk[i]) << '\n';
    }
    os << "worst_case," << fmt_double(r.worst_case) << '\n';
    return os.str();
}

json decomposition_to_json(const DecompositionReport& r) {
    return json{{"bias_sq", r.bias_sq}, {"noise", r.noise},   {"cross", r.cross},
                {"total", r.total},     {"direct_risk", r.direct_risk}, {"n", r.n}};
}

std::string decomposition_csv(const DecompositionReport& r) {
    std::ostringstream os;
    os << "bias_sq,noise,cross,total,direct_risk,n\n"
       << fmt_double(r.bias_sq) << ',' << fmt_double(r.noise) << ',' << fmt_double(r.cross)
       << ',' << fmt_double(r.total) << ',' << fmt_double(r.direct_risk) << ',' << r.n << '\n';
    return os.str();
}

json disentanglement_to_json(const DisentanglementReport& r) {
    json perm = json::array();
    for (int p : r.permutation) perm.push_back(p + 1);
    return json{{"verdict", r.verdict},
                {"permutation", std::move(perm)},
                {"scales", vector_to_json(r.scales)},
                {"matched_abs_corr", vector_to_json(r.matched_abs_corr)},
                {"ratio_dispersion", vector_to_json(r.ratio_dispersion)},
                {"mcc", r.mcc}};
}

std::string disentanglement_csv(const DisentanglementReport& r) {
    std::ostringstream os;
    os << "coord,pi,scale,abs_corr,ratio_dispersion\n";
    for (std::size_t i = 0; i < r.permutation.size(); ++i) {
        const Eigen::Index k = static_cast<Eigen::Index>(i);
        os << (i + 1) << ',' << (r.permutation[i] + 1) << ',' << fmt_double(r.scales(k)) << ','
           << fmt_double(r.matched_abs_corr(k)) << ',' << fmt_double(r.ratio_dispersion(k))
           << '\n';
    }
    os << "verdict," << (r.verdict ? "true" : "false") << ",mcc," << fmt_double(r.mcc) << '\n';
    return os.str();
}

json linearity_to_json(const LinearityReport& r) {
    return json{{"r_squared", r.r_squared},
                {"max_abs_residual", r.max_abs_residual},
                {"coefficients", vector_to_json(r.coefficients)},
                {"intercept", r.intercept},
                {"linear", r.linear}};
}

json linear_fit_to_json(const LinearFitReport& r) {
    return json{{"matrix", matrix_to_json(r.matrix)},
                {"intercept", vector_to_json(r.intercept)},
                {"relative_residual", r.relative_residual},
                {"condition", r.condition},
                {"identified", r.identified}};
}

json non_identifiability_to_json(const NonIdentifiabilityReport& r) {
    json psi_components = json::array();
    for (const LinearityReport& lr : r.psi_components) {
        psi_components.push_back(linearity_to_json(lr));
    }
    return json{{"risk_causal", risk_report_to_json(r.risk_causal)},
                {"risk_reparam", risk_report_to_json(r.risk_reparam)},
                {"risk_gap", r.risk_gap},
                {"risk_tolerance", r.risk_tolerance},
                {"disentanglement", disentanglement_to_json(r.disentanglement)},
                {"psi_components", std::move(psi_components)},
                {"psi_nonlinear", r.psi_nonlinear},
                {"f_hat_linearity", linearity_to_json(r.f_hat_linearity)},
                {"exhibited", r.exhibited}};
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
    os << "env,row";
    for (Eigen::Index c = 0; c < data.z.cols(); ++c) os << ",z" << (c + 1);
    os << ",y\n";
    for (Eigen::Index r = 0; r < data.z.rows(); ++r) {
        os << data.env_index << ',' << r;
        for (Eigen::Index c = 0; c < data.z.cols(); ++c) os << ',' << fmt_double(data.z(r, c));
        os << ',' << fmt_double(data.y(r)) << '\n';
    }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_dataset_csv(os, data);
    if (!os.good()) throw IoError("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("dataset csv: empty file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "env" || header[1] != "row" ||
        header.back() != "y") {
        throw ParseError("dataset csv: expected header env,row,z1..zd,y");
    }
    const std::size_t d = header.size() - 3;

    Dataset data;
    std::vector<std::vector<double>> zs;
    std::vector<double> ys;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ParseError("dataset csv: row with " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(header.size()));
        }
        if (first) {
            data.env_index = static_cast<int>(parse_double(fields[0]));
            first = false;
        }
        std::vector<double> row(d);
        for (std::size_t c = 0; c < d; ++c) row[c] = parse_double(fields[c + 2]);
        zs.push_back(std::move(row));
        ys.push_back(parse_double(fields.back()));
    }
    data.z.resize(static_cast<Eigen::Index>(zs.size()), static_cast<Eigen::Index>(d));
    data.y.resize(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t r = 0; r < zs.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            data.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = zs[r][c];
        }
        data.y(static_cast<Eigen::Index>(r)) = ys[r];
    }
    return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    return read_dataset_csv(is);
}

Eigen::MatrixXd read_latents_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());

    std::string line;
    std::vector<std::vector<double>> rows;
    long z_begin = -1;
    long z_count = -1;
    bool first_line = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (first_line) {
            first_line = false;
            if (!fields.empty() && fields[0] == "env") {
                // Dataset layout: take the z block only.
                z_begin = 2;
                z_count = static_cast<long>(fields.size()) - 3;
                if (z_count < 1) throw ParseError("dataset csv without z columns");
                continue;
            }
            bool numeric = true;
            for (const std::string& f : fields) {
                try {
                    parse_double(f);
                } catch (const ParseError&) {
                    numeric = false;
                    break;
                }
            }
            z_begin = 0;
            z_count = static_cast<long>(fields.size());
            if (!numeric) continue;  // plain header row
        }
        if (static_cast<long>(fields.size()) < z_begin + z_count) {
            throw ParseError("csv row too short in " + path.string());
        }
        std::vector<double> row(static_cast<std::size_t>(z_count));
        for (long c = 0; c < z_count; ++c) {
            row[static_cast<std::size_t>(c)] = parse_double(fields[static_cast<std::size_t>(z_begin + c)]);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no data rows in " + path.string());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

}  // namespace icrl
