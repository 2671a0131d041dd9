#include "hrp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hrp/error.hpp"

namespace hrp::io {

namespace {

using nlohmann::json;

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
    if (!j.is_array()) fail(ErrorCode::BadConfig, std::string(what) + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) fail(ErrorCode::BadConfig, std::string(what) + ": expected numbers");
        v[i] = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty())
        fail(ErrorCode::BadConfig, std::string(what) + ": expected a nonempty array of rows");
    const std::size_t rows = j.size();
    const Eigen::VectorXd first = vector_from_json(j[0], what);
    Eigen::MatrixXd m(rows, first.size());
    m.row(0) = first;
    for (std::size_t i = 1; i < rows; ++i) {
        const Eigen::VectorXd r = vector_from_json(j[i], what);
        if (r.size() != first.size())
            fail(ErrorCode::BadConfig, std::string(what) + ": ragged rows");
        m.row(i) = r;
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (int i = 0; i < m.rows(); ++i) out.push_back(vector_to_json(m.row(i)));
    return out;
}

MeasureModel family_from_json(const json& j, std::string& name_out) {
    const std::string name = j.at("family").get<std::string>();
    name_out = name;
    if (!j.contains("alpha") || !j["alpha"].is_number())
        fail(ErrorCode::BadConfig, "family block requires a scalar alpha");
    const double alpha = j["alpha"].get<double>();
    if (name == "gaussian")
        return MeasureModel(GaussianSpec{matrix_from_json(j.at("Sigma"), "Sigma")}, alpha);
    if (name == "lognormal")
        return MeasureModel(LogNormalSpec{vector_from_json(j.at("m"), "m"),
                                          matrix_from_json(j.at("Sigma"), "Sigma")},
                            alpha);
    if (name == "frechet")
        return MeasureModel(FrechetSpec{vector_from_json(j.at("lambda"), "lambda"),
                                        j.at("beta").get<double>()},
                            alpha);
    if (name == "weibull")
        return MeasureModel(WeibullSpec{vector_from_json(j.at("lambda"), "lambda"),
                                        j.at("beta").get<double>()},
                            alpha);
    if (name == "gamma")
        return MeasureModel(GammaSpec{vector_from_json(j.at("theta"), "theta"),
                                      vector_from_json(j.at("beta"), "beta")},
                            alpha);
    fail(ErrorCode::BadConfig, "unknown family: " + name);
}

}  // namespace

ParamFile parse_params(const json& j) {
    ParamFile pf;
    if (j.contains("family")) {
        pf.model = family_from_json(j, pf.family_name);
        pf.d = pf.model->dim();
        if (j.contains("nonstandard_alpha"))
            pf.nonstandard_alpha = vector_from_json(j["nonstandard_alpha"], "nonstandard_alpha");
        return pf;
    }
    if (!j.contains("Q") || !j.contains("l"))
        fail(ErrorCode::BadConfig, "parameter file needs either a family block or Q and l");
    const Eigen::MatrixXd q = matrix_from_json(j["Q"], "Q");
    const Eigen::VectorXd l = vector_from_json(j["l"], "l");
    pf.d = static_cast<int>(l.size());
    if (j.contains("d") && j["d"].get<int>() != pf.d)
        fail(ErrorCode::BadConfig, "declared d does not match the parameter arrays");
    if (j.contains("alpha") && j["alpha"].is_array()) {
        pf.gen = validate_gen(vector_from_json(j["alpha"], "alpha"), q, l);
    } else {
        pf.hr = validate_hr(q, l);
    }
    if (j.contains("a")) pf.threshold = Threshold(vector_from_json(j["a"], "a"));
    return pf;
}

ParamFile load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::FileError, "cannot open parameter file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(ErrorCode::BadConfig, std::string("invalid JSON: ") + e.what());
    }
    return parse_params(j);
}

Eigen::MatrixXd read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::FileError, "cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::BadConfig, "empty data file: " + path);
    int d = 1;
    for (char c : line)
        if (c == ',') ++d;

    std::vector<double> values;
    long rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                fail(ErrorCode::BadConfig, "non-numeric CSV cell: " + cell);
            values.push_back(v);
            ++col;
        }
        if (col != d) fail(ErrorCode::BadConfig, "ragged CSV row in " + path);
        ++rows;
    }
    Eigen::MatrixXd m(rows, d);
    for (long i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = values[i * d + j];
    return m;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_csv(const std::string& path, const Eigen::MatrixXd& data) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::FileError, "cannot write data file: " + path);
    for (int j = 0; j < data.cols(); ++j) {
        if (j) out << ',';
        out << 'x' << (j + 1);
    }
    out << '\n';
    for (long i = 0; i < data.rows(); ++i) {
        for (int j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            out << format_double(data(i, j));
        }
        out << '\n';
    }
}

void write_column_csv(const std::string& path, const std::string& name,
                      const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::FileError, "cannot write data file: " + path);
    out << name << '\n';
    for (double v : values) out << format_double(v) << '\n';
}

json params_to_json(const HrParams& p, const Threshold& a) {
    json j;
    j["d"] = p.dim();
    j["Q"] = matrix_to_json(p.q());
    j["l"] = vector_to_json(p.l());
    j["a"] = vector_to_json(a.a);
    return j;
}

json params_to_json(const GenHrParams& p, const Threshold& a) {
    json j;
    j["d"] = p.dim();
    j["Q"] = matrix_to_json(p.q());
    j["l"] = vector_to_json(p.l());
    j["a"] = vector_to_json(a.a);
    j["alpha"] = vector_to_json(p.alpha());
    return j;
}

json fit_report_to_json(const FitReport& report) {
    json j;
    j["model"] = (report.model == ModelKind::Standard) ? "hr" : "gen";
    j["params"] = (report.model == ModelKind::Standard)
                      ? params_to_json(*report.hr, report.threshold)
                      : params_to_json(*report.gen, report.threshold);
    j["loglik"] = report.loglik;
    j["std_errors"] = vector_to_json(report.std_errors);
    j["info"] = matrix_to_json(report.info);
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["gradient_norm"] = report.gradient_norm;
    if (!report.neg_loglik_trace.empty()) j["neg_loglik_trace"] = report.neg_loglik_trace;
    return j;
}

json lrt_to_json(const LrtResult& result) {
    json j;
    j["stat"] = result.stat;
    j["df"] = result.df;
    j["p_value"] = result.p_value;
    j["fit_null"] = fit_report_to_json(result.fit_null);
    j["fit_alt"] = fit_report_to_json(result.fit_alt);
    return j;
}

json value_error_to_json(const ValueWithError& ve) {
    return json{{"value", ve.value}, {"abs_error", ve.abs_error}};
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::FileError, "cannot write output file: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace hrp::io
