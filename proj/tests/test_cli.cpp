#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hrp/core.hpp"
#include "hrp/inference.hpp"
#include "hrp/io.hpp"

using nlohmann::json;

namespace {

const std::string kCli = HRP_CLI_PATH;
const std::string kSchemaDir = HRP_SCHEMA_DIR;

std::string tmp_path(const std::string& name) {
    return std::string("/tmp/hrp_cli_test_") + name;
}

int run_cli(const std::string& args, const std::string& stderr_file = "") {
    std::string cmd = kCli + " " + args;
    if (!stderr_file.empty()) cmd += " 2>" + stderr_file;
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// Minimal JSON-schema checker: type / required / properties / items.
bool matches_schema(const json& value, const json& schema, std::string& why) {
    if (schema.contains("type")) {
        const std::string t = schema["type"].get<std::string>();
        const bool ok = (t == "object" && value.is_object()) ||
                        (t == "array" && value.is_array()) ||
                        (t == "number" && value.is_number()) ||
                        (t == "integer" && value.is_number_integer()) ||
                        (t == "string" && value.is_string()) ||
                        (t == "boolean" && value.is_boolean()) ||
                        (t == "null" && value.is_null());
        if (!ok) {
            why = "expected type " + t + " got " + value.dump().substr(0, 40);
            return false;
        }
    }
    if (schema.contains("required"))
        for (const auto& key : schema["required"]) {
            if (!value.contains(key.get<std::string>())) {
                why = "missing required key " + key.get<std::string>();
                return false;
            }
        }
    if (schema.contains("properties") && value.is_object())
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
            if (value.contains(it.key()))
                if (!matches_schema(value[it.key()], it.value(), why)) {
                    why = it.key() + ": " + why;
                    return false;
                }
    if (schema.contains("items") && value.is_array())
        for (const auto& v : value)
            if (!matches_schema(v, schema["items"], why)) return false;
    return true;
}

void check_schema(const std::string& json_path, const std::string& schema_name) {
    json value, schema;
    {
        std::ifstream in(json_path);
        REQUIRE(in.good());
        in >> value;
    }
    {
        std::ifstream in(kSchemaDir + "/" + schema_name);
        REQUIRE(in.good());
        in >> schema;
    }
    std::string why;
    const bool ok = matches_schema(value, schema, why);
    INFO(schema_name, ": ", why);
    CHECK(ok);
}

const char* kParams2d = R"({
  "d": 2,
  "Q": [[1.0, -1.0], [-1.0, 1.0]],
  "l": [-0.5, -0.5],
  "a": [1.0, 1.0]
})";

const char* kFrechetFamily = R"({
  "family": "frechet",
  "lambda": [1.0, 1.0],
  "beta": 3.0,
  "alpha": 1.0
})";

}  // namespace

TEST_CASE("simulate with n = 0 writes an empty csv") {
    const std::string params = tmp_path("p0.json");
    const std::string out = tmp_path("empty.csv");
    spit(params, kParams2d);
    const int rc = run_cli("simulate --params " + params + " --n 0 --out " + out);
    CHECK(rc == 0);
    CHECK(slurp(out) == "x1,x2\n");
}

TEST_CASE("simulate then fit round trip") {
    const std::string params = tmp_path("p1.json");
    const std::string data = tmp_path("sample.csv");
    const std::string report = tmp_path("fit.json");
    spit(params, kParams2d);
    CHECK(run_cli("simulate --params " + params + " --n 5000 --seed 7 --out " + data) == 0);
    CHECK(run_cli("fit --params " + params + " --data " + data + " --out " + report) == 0);
    check_schema(report, "fit_report.schema.json");

    json rep;
    std::ifstream(report) >> rep;
    CHECK(rep["model"] == "hr");
    CHECK(rep["converged"].get<bool>());
    const auto q = rep["params"]["Q"];
    const auto l = rep["params"]["l"];
    const double tol = 4.0 / std::sqrt(5000.0) * 3.0;
    CHECK(std::fabs(q[0][0].get<double>() - 1.0) < tol);
    CHECK(std::fabs(l[0].get<double>() + 0.5) < tol);
    CHECK(std::fabs(l[1].get<double>() + 0.5) < tol);
}

TEST_CASE("fit rejects data inside the threshold with exit 1") {
    const std::string params = tmp_path("p2.json");
    const std::string data = tmp_path("inside.csv");
    const std::string report = tmp_path("fit2.json");
    const std::string errs = tmp_path("err2.txt");
    spit(params, kParams2d);
    spit(data, "x1,x2\n0.5,0.5\n0.25,0.75\n");
    const int rc =
        run_cli("fit --params " + params + " --data " + data + " --out " + report, errs);
    CHECK(rc == 1);
    json err = json::parse(slurp(errs));
    CHECK(err["error"] == "RowInsideThreshold");
    check_schema(errs, "error.schema.json");
}

TEST_CASE("byte-identical outputs for identical configuration") {
    const std::string params = tmp_path("p3.json");
    const std::string d1 = tmp_path("s1.csv");
    const std::string d2 = tmp_path("s2.csv");
    spit(params, kParams2d);
    CHECK(run_cli("simulate --params " + params + " --n 500 --seed 99 --out " + d1) == 0);
    CHECK(run_cli("simulate --params " + params + " --n 500 --seed 99 --out " + d2) == 0);
    CHECK(slurp(d1) == slurp(d2));
    // a different seed changes the artifact
    CHECK(run_cli("simulate --params " + params + " --n 500 --seed 100 --out " + d2) == 0);
    CHECK(slurp(d1) != slurp(d2));
}

TEST_CASE("density command") {
    const std::string params = tmp_path("p4.json");
    const std::string data = tmp_path("pts.csv");
    const std::string out = tmp_path("dens.csv");
    spit(params, kParams2d);
    spit(data, "x1,x2\n2.0,3.0\n0.5,0.25\n");
    CHECK(run_cli("density --params " + params + " --data " + data + " --out " + out) == 0);
    std::ifstream in(out);
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    CHECK(header == "log_density");
    CHECK(std::isfinite(std::strtod(row1.c_str(), nullptr)));
    CHECK(row2 == "-inf");
}

TEST_CASE("measure command on a family") {
    const std::string params = tmp_path("p5.json");
    const std::string data = tmp_path("upts.csv");
    const std::string out = tmp_path("measure.json");
    spit(params, kFrechetFamily);
    spit(data, "x1,x2\n0.5,0.5\n1.5,2.0\n");
    CHECK(run_cli("measure --params " + params + " --data " + data + " --out " + out +
                  " --family frechet") == 0);
    check_schema(out, "measure_report.schema.json");
    json rep;
    std::ifstream(out) >> rep;
    CHECK(rep["rows"] == 2);
    CHECK(rep["copula"][0].is_number());   // (0.5, 0.5) is in the unit cube
    CHECK(rep["copula"][1].is_null());
}

TEST_CASE("measure command on model parameters emits constants and moments") {
    const std::string params = tmp_path("p5m.json");
    const std::string out = tmp_path("model_measure.json");
    spit(params, kParams2d);
    CHECK(run_cli("measure --params " + params + " --out " + out) == 0);
    check_schema(out, "model_measure.schema.json");
    json rep;
    std::ifstream(out) >> rep;
    CHECK(rep["norm_const"]["value"].get<double>() > 0.0);
    CHECK(rep["norm_const"]["abs_error"].get<double>() >= 0.0);
    // symmetric parameters: equal log-means
    CHECK(rep["mean_log"][0].get<double>() ==
          doctest::Approx(rep["mean_log"][1].get<double>()).epsilon(1e-4));
}

TEST_CASE("lrt command") {
    const std::string params = tmp_path("p6.json");
    const std::string data = tmp_path("lrt_data.csv");
    const std::string out = tmp_path("lrt.json");
    spit(params, kParams2d);
    CHECK(run_cli("simulate --params " + params + " --n 2000 --seed 3 --out " + data) == 0);
    CHECK(run_cli("lrt --params " + params + " --data " + data + " --out " + out) == 0);
    check_schema(out, "lrt_result.schema.json");
    json rep;
    std::ifstream(out) >> rep;
    CHECK(rep["df"] == 1);
    CHECK(rep["stat"].get<double>() >= 0.0);
    CHECK(rep["p_value"].get<double>() <= 1.0);
}

TEST_CASE("oracle command") {
    const std::string params = tmp_path("p7.json");
    const std::string out = tmp_path("oracle.json");
    spit(params, kFrechetFamily);
    CHECK(run_cli("oracle --params " + params + " --n 20000 --seed 1 --out " + out) == 0);
    check_schema(out, "oracle_report.schema.json");
    json rep;
    std::ifstream(out) >> rep;
    for (const auto& row : rep["comparisons"])
        CHECK(std::fabs(row["z"].get<double>()) < 5.0);
}

TEST_CASE("unknown flags are errors") {
    const std::string params = tmp_path("p8.json");
    spit(params, kParams2d);
    const std::string errs = tmp_path("err8.txt");
    const int rc = run_cli("simulate --params " + params + " --n 1 --out /tmp/x.csv "
                           "--definitely-not-a-flag 3",
                           errs);
    CHECK(rc != 0);
}

TEST_CASE("bad parameter file yields exit 1") {
    const std::string params = tmp_path("p9.json");
    spit(params, "{\"Q\": [[1.0]]}");
    const std::string errs = tmp_path("err9.txt");
    const int rc = run_cli("simulate --params " + params + " --n 1 --out /tmp/y.csv", errs);
    CHECK(rc == 1);
}
