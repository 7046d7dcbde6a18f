#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>

#include "icrl/counterexample.hpp"
#include "icrl/identifiability.hpp"
#include "icrl/mixing.hpp"
#include "icrl/risk.hpp"
#include "icrl/scm.hpp"

namespace icrl {

using json = nlohmann::json;

// Shortest decimal string that parses back to the same double.
std::string fmt_double(double v);
double parse_double(const std::string& s);

// Strict schema guard: every required key present, nothing outside
// required/optional allowed; violations name the offending path.
void check_schema_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {});

// All JSON documents use 1-based latent indices (parents, targets, basis
// factor "var") to match the z1..zd column naming; the C++ API is 0-based.

json noise_to_json(const NoiseSpec& n);
NoiseSpec noise_from_json(const json& j, const std::string& path);

json mechanism_to_json(const Mechanism& m);
Mechanism mechanism_from_json(const json& j, int d, const std::string& path);

json scm_to_json(const Scm& scm);
Scm scm_from_json(const json& j, const std::string& path = "scm");

json intervention_to_json(const Intervention& iv);
Intervention intervention_from_json(const json& j, const std::string& path);

json envset_to_json(const EnvironmentSet& envs);
EnvironmentSet envset_from_json(const json& j, const std::string& path = "envset");

json mixer_to_json(const Mixer& m);
Mixer mixer_from_json(const json& j, const std::string& path = "mixer");

json reparam_to_json(const ReparamMap& psi);
ReparamMap reparam_from_json(const json& j, const std::string& path = "psi");

json predictor_to_json(const Predictor& f);
Predictor predictor_from_json(const json& j, const std::string& path = "predictor");

json risk_report_to_json(const RiskReport& r);
// Rows `env_label,risk` plus a final `worst_case,<value>` summary row.
std::string risk_report_csv(const RiskReport& r);

json decomposition_to_json(const DecompositionReport& r);
// Header plus one row: bias_sq,noise,cross,total,direct_risk,n.
std::string decomposition_csv(const DecompositionReport& r);
json disentanglement_to_json(const DisentanglementReport& r);
// Rows `coord,pi,scale,abs_corr,ratio_dispersion` plus a verdict/mcc line.
std::string disentanglement_csv(const DisentanglementReport& r);
json linearity_to_json(const LinearityReport& r);
json linear_fit_to_json(const LinearFitReport& r);
json non_identifiability_to_json(const NonIdentifiabilityReport& r);

// Dataset CSV: header env,row,z1..zd,y with round-trip decimals.
void write_dataset_csv(std::ostream& os, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(std::istream& is);
Dataset read_dataset_csv(const std::filesystem::path& path);

// Latent matrix from a CSV: either the z-block of a dataset file or a plain
// numeric table (optional non-numeric header row is skipped).
Eigen::MatrixXd read_latents_csv(const std::filesystem::path& path);

json parse_json_file(const std::filesystem::path& path);
json parse_json_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace icrl
