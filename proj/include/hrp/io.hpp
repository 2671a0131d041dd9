#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "hrp/inference.hpp"
#include "hrp/measures.hpp"

namespace hrp::io {

// Contents of a parameter file. Either model parameters (Q, l, optional
// per-margin alpha vector) with a threshold, or a spectral family block.
struct ParamFile {
    int d = 0;
    std::optional<HrParams> hr;
    std::optional<GenHrParams> gen;
    std::optional<Threshold> threshold;
    std::optional<MeasureModel> model;
    std::optional<Eigen::VectorXd> nonstandard_alpha;
    std::string family_name;  // empty when no family block
};

ParamFile load_params(const std::string& path);
ParamFile parse_params(const nlohmann::json& j);

// CSV data files: header "x1,...,xd", one row per observation, 17 significant
// digits, '.' decimal separator.
Eigen::MatrixXd read_csv(const std::string& path);
void write_csv(const std::string& path, const Eigen::MatrixXd& data);
void write_column_csv(const std::string& path, const std::string& name,
                      const std::vector<double>& values);

nlohmann::json params_to_json(const HrParams& p, const Threshold& a);
nlohmann::json params_to_json(const GenHrParams& p, const Threshold& a);

nlohmann::json fit_report_to_json(const FitReport& report);
nlohmann::json lrt_to_json(const LrtResult& result);
nlohmann::json value_error_to_json(const ValueWithError& ve);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace hrp::io
