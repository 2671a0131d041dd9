// Command line interface: simulation, density and measure evaluation,
// maximum likelihood fitting, the equal-tail-index likelihood ratio test,
// and closed-form versus Monte Carlo oracle comparisons.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrp/error.hpp"
#include "hrp/inference.hpp"
#include "hrp/io.hpp"
#include "hrp/measures.hpp"
#include "hrp/pareto.hpp"
#include "hrp/rng.hpp"

namespace {

using nlohmann::json;

struct Args {
    std::string command;
    std::string params_path;
    std::string data_path;
    std::string out_path;
    std::uint64_t seed = 0;
    long n = 0;
    double tol = 1e-6;
    std::string model = "hr";
    std::string family;
};

hrp::io::ParamFile load(const Args& args) {
    if (args.params_path.empty())
        hrp::fail(hrp::ErrorCode::BadConfig, "--params is required for this command");
    hrp::io::ParamFile pf = hrp::io::load_params(args.params_path);
    if (!args.family.empty() && pf.family_name != args.family)
        hrp::fail(hrp::ErrorCode::BadConfig,
                  "--family does not match the parameter file (" + pf.family_name + ")");
    return pf;
}

hrp::Threshold require_threshold(const hrp::io::ParamFile& pf) {
    if (!pf.threshold)
        hrp::fail(hrp::ErrorCode::BadConfig, "parameter file must provide a threshold a");
    return *pf.threshold;
}

int run_simulate(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    Eigen::MatrixXd out;
    if (pf.model) {
        out = hrp::breiman_sample(*pf.model, args.n, args.seed, pf.nonstandard_alpha);
    } else if (pf.gen) {
        out = hrp::sample_gen(args.n, require_threshold(pf), *pf.gen, args.seed);
    } else {
        out = hrp::sample(args.n, require_threshold(pf), *pf.hr, args.seed);
    }
    hrp::io::write_csv(args.out_path, out);
    return 0;
}

int run_density(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    const Eigen::MatrixXd data = hrp::io::read_csv(args.data_path);
    const hrp::Threshold a = require_threshold(pf);
    std::vector<double> values(data.rows());
    if (pf.gen) {
        for (long i = 0; i < data.rows(); ++i)
            values[i] = hrp::loglik_gen(data.row(i), a, *pf.gen);
    } else if (pf.hr) {
        const hrp::HrDensity dens(a, *pf.hr);
        for (long i = 0; i < data.rows(); ++i)
            values[i] = dens.logpdf(data.row(i).transpose());
    } else {
        hrp::fail(hrp::ErrorCode::BadConfig, "density requires model parameters, not a family");
    }
    hrp::io::write_column_csv(args.out_path, "log_density", values);
    return 0;
}

int run_measure(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    if (!pf.model) {
        // model parameters: emit the normalization constant and log-moments
        if (!pf.hr)
            hrp::fail(hrp::ErrorCode::BadConfig,
                      "measure requires a family block or standard model parameters");
        const hrp::Threshold a = require_threshold(pf);
        hrp::NormConstOptions opts;
        opts.tol = args.tol;
        opts.seed = args.seed;
        const hrp::ValueWithError nc = hrp::norm_const(a, *pf.hr, opts);
        const hrp::Moments mom = hrp::moments(a, *pf.hr, opts);
        json out;
        out["norm_const"] = hrp::io::value_error_to_json(nc);
        json mean = json::array(), cov = json::array(), stat = json::array();
        for (int i = 0; i < pf.d; ++i) mean.push_back(mom.mean_log[i]);
        for (int i = 0; i < pf.d; ++i) {
            json row1 = json::array(), row2 = json::array();
            for (int j = 0; j < pf.d; ++j) {
                row1.push_back(mom.cov_log(i, j));
                row2.push_back(mom.stat_mat(i, j));
            }
            cov.push_back(row1);
            stat.push_back(row2);
        }
        out["mean_log"] = mean;
        out["cov_log"] = cov;
        out["stat_mat"] = stat;
        hrp::io::write_json(args.out_path, out);
        return 0;
    }
    if (args.data_path.empty())
        hrp::fail(hrp::ErrorCode::BadConfig, "measure with a family block requires --data");
    const Eigen::MatrixXd data = hrp::io::read_csv(args.data_path);
    const hrp::MeasureModel& model = *pf.model;
    hrp::MeasureMcOptions mc;
    mc.seed = args.seed;
    if (args.n > 0) mc.n_draws = args.n;

    json lambda = json::array(), tail = json::array(), copula = json::array();
    for (long i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd z = data.row(i).transpose();
        try {
            lambda.push_back(hrp::lambda_density(model, z));
        } catch (const hrp::Error&) {
            lambda.push_back(nullptr);
        }
        try {
            tail.push_back(hrp::io::value_error_to_json(hrp::tail_V(model, z, mc)));
        } catch (const hrp::Error&) {
            tail.push_back(nullptr);
        }
        if ((z.array() > 0.0).all() && (z.array() < 1.0).all()) {
            copula.push_back(hrp::ev_copula(model, z, mc));
        } else {
            copula.push_back(nullptr);
        }
    }
    json out;
    out["family"] = pf.family_name;
    out["alpha"] = model.alpha();
    out["rows"] = data.rows();
    out["lambda"] = lambda;
    out["tail_v"] = tail;
    out["copula"] = copula;
    hrp::io::write_json(args.out_path, out);
    return 0;
}

int run_fit(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    const Eigen::MatrixXd data = hrp::io::read_csv(args.data_path);
    const hrp::Threshold a = require_threshold(pf);
    hrp::FitOptions opts;
    opts.tol = args.tol;
    opts.seed = args.seed;
    const hrp::FitReport report = (args.model == "gen") ? hrp::fit_gen(data, a, opts)
                                                        : hrp::fit_hr(data, a, opts);
    hrp::io::write_json(args.out_path, hrp::io::fit_report_to_json(report));
    return 0;
}

int run_lrt(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    const Eigen::MatrixXd data = hrp::io::read_csv(args.data_path);
    const hrp::Threshold a = require_threshold(pf);
    hrp::FitOptions opts;
    opts.tol = args.tol;
    opts.seed = args.seed;
    const hrp::LrtResult result = hrp::lrt_equal_alpha(data, a, opts);
    hrp::io::write_json(args.out_path, hrp::io::lrt_to_json(result));
    return 0;
}

json comparison_row(const std::string& quantity, double closed, double mc, double se) {
    json row;
    row["quantity"] = quantity;
    row["closed_form"] = closed;
    row["monte_carlo"] = mc;
    row["std_error"] = se;
    row["z"] = (se > 0.0) ? (mc - closed) / se : 0.0;
    return row;
}

// Closed forms of the given parameter file against simulation-based
// estimates: tail function and exceedance ratios for spectral families, face
// probabilities and log-moments for model parameters.
int run_oracle(const Args& args) {
    const hrp::io::ParamFile pf = load(args);
    const long n = (args.n > 0) ? args.n : 100000;
    json table = json::array();

    if (pf.model) {
        const hrp::MeasureModel& model = *pf.model;
        const int d = model.dim();
        hrp::MeasureMcOptions mc;
        mc.seed = hrp::derive_seed(args.seed, 1);
        mc.n_draws = n;
        const Eigen::MatrixXd sample = hrp::breiman_sample(model, n, args.seed);
        const long k = static_cast<long>(std::sqrt(static_cast<double>(n)));

        std::vector<Eigen::VectorXd> points;
        points.push_back(Eigen::VectorXd::Ones(d));
        Eigen::VectorXd ramp(d);
        for (int i = 0; i < d; ++i) ramp[i] = 1.0 + 0.5 * i;
        points.push_back(ramp);
        const hrp::ValueWithError v1 = hrp::tail_V(model, points[0], mc);
        for (const auto& x : points) {
            const hrp::ValueWithError v = hrp::tail_V(model, x, mc);
            const double ratio = hrp::empirical_exceedance_ratio(sample, x, k);
            const double se = std::sqrt(std::max(ratio * (1.0 - ratio), 1.0 / n) /
                                        static_cast<double>(k));
            table.push_back(comparison_row("exceedance_ratio", v.value / v1.value,
                                           ratio, se));
        }
    } else {
        const hrp::Threshold a = require_threshold(pf);
        const hrp::HrParams p = pf.hr ? *pf.hr : hrp::gen_reduce(*pf.gen, a).std_params;
        const hrp::Threshold at = pf.hr ? a : hrp::Threshold::ones(p.dim());
        const Eigen::MatrixXd sample = hrp::sample(n, at, p, args.seed);
        const hrp::Moments mom = hrp::moments(at, p);
        const Eigen::MatrixXd w = sample.array().log().matrix();
        for (int j = 0; j < p.dim(); ++j) {
            const double mean = w.col(j).mean();
            const double sd = std::sqrt((w.col(j).array() - mean).square().sum() /
                                        (n - 1.0) / n);
            table.push_back(comparison_row("mean_log_" + std::to_string(j + 1),
                                           mom.mean_log[j], mean, sd));
        }
        const hrp::FacePartition fp = hrp::face_partition(hrp::standardize(p, at));
        Eigen::VectorXd freq = Eigen::VectorXd::Zero(p.dim());
        for (long i = 0; i < n; ++i) {
            int arg = 0;
            double best = -1.0;
            for (int j = 0; j < p.dim(); ++j) {
                const double s = std::pow(sample(i, j) / at.a[j], p.alpha());
                if (s > best) {
                    best = s;
                    arg = j;
                }
            }
            freq[arg] += 1.0;
        }
        freq /= static_cast<double>(n);
        for (int j = 0; j < p.dim(); ++j) {
            const double se = std::sqrt(fp.probs[j] * (1.0 - fp.probs[j]) / n);
            table.push_back(comparison_row("face_prob_" + std::to_string(j + 1),
                                           fp.probs[j], freq[j], se));
        }
    }
    json out;
    out["n"] = n;
    out["seed"] = args.seed;
    out["comparisons"] = table;
    hrp::io::write_json(args.out_path, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Husler-Reiss Pareto peaks-over-threshold toolkit"};
    app.require_subcommand(1);

    Args args;
    enum DataFlag { kNoData = 0, kDataRequired = 1, kDataOptional = 2 };
    auto add_common = [&](CLI::App* cmd, int data_flag, bool needs_out) {
        cmd->add_option("--params", args.params_path, "parameter JSON file")->required();
        if (data_flag != kNoData) {
            auto* opt = cmd->add_option("--data", args.data_path, "input CSV file");
            if (data_flag == kDataRequired) opt->required();
        }
        if (needs_out)
            cmd->add_option("--out", args.out_path, "output file")->required();
        cmd->add_option("--seed", args.seed, "random seed (default 0)");
        cmd->add_option("--n", args.n, "sample size / Monte Carlo draws");
        cmd->add_option("--tol", args.tol, "solver tolerance");
        cmd->add_option("--model", args.model, "model: hr or gen")
            ->check(CLI::IsMember({"hr", "gen"}));
        cmd->add_option("--family", args.family, "expected spectral family name");
    };

    add_common(app.add_subcommand("simulate", "draw a sample, write CSV"), kNoData, true);
    add_common(app.add_subcommand("density", "log-densities of data rows"), kDataRequired,
               true);
    add_common(app.add_subcommand(
                   "measure", "limit-measure evaluations (family) or constants (model)"),
               kDataOptional, true);
    add_common(app.add_subcommand("fit", "maximum likelihood fit"), kDataRequired, true);
    add_common(app.add_subcommand("lrt", "equal tail index likelihood ratio test"),
               kDataRequired, true);
    add_common(app.add_subcommand("oracle", "closed form vs Monte Carlo table"), kNoData,
               true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << nlohmann::json{{"error", "BadConfig"}, {"message", e.what()}}.dump()
                  << std::endl;
        return 1;
    }

    try {
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "simulate") return run_simulate(args);
        if (cmd == "density") return run_density(args);
        if (cmd == "measure") return run_measure(args);
        if (cmd == "fit") return run_fit(args);
        if (cmd == "lrt") return run_lrt(args);
        return run_oracle(args);
    } catch (const hrp::Error& e) {
        std::cerr << nlohmann::json{{"error", e.code_name()}, {"message", e.what()}}.dump()
                  << std::endl;
        return hrp::is_validation_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump()
                  << std::endl;
        return 2;
    }
}
