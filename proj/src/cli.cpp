#include "obcs/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "obcs/errors.hpp"
#include "obcs/geometry.hpp"
#include "obcs/harness.hpp"
#include "obcs/measure.hpp"
#include "obcs/record_io.hpp"
#include "obcs/solve.hpp"

namespace obcs {

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config file '" + path + "'");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw ParameterError("config file '" + path + "' must hold a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ParameterError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

// Flag values are parsed as JSON when possible ("[250,500]", "3", "true") and
// kept as strings otherwise.
json parse_flag_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

template <class T>
T value_or(const json& j, const char* key, T fallback) {
    try {
        return j.contains(key) ? j.at(key).get<T>() : fallback;
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config key '") + key + "': " + e.what());
    }
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw ParameterError(std::string("missing required config key '") + key + "'");
    return value_or<T>(j, key, T{});
}

LinkModel model_from(const json& cfg) {
    if (!cfg.contains("model")) return Noiseless{};
    const json& mj = cfg.at("model");
    if (mj.is_string()) return make_model(mj.get<std::string>(), 0.0);
    const auto name = value_or<std::string>(mj, "name", "noiseless");
    double parameter = 0.0;
    if (name == "bitflip") parameter = value_or<double>(mj, "p", 1.0);
    if (name == "prequant") parameter = value_or<double>(mj, "sigma", 0.0);
    if (name == "logistic") parameter = value_or<double>(mj, "alpha", 1.0);
    return make_model(name, parameter);
}

std::optional<CovarianceSpec> covariance_from(const json& cfg, Eigen::Index n) {
    if (!cfg.contains("covariance")) return std::nullopt;
    const json& cj = cfg.at("covariance");
    Eigen::VectorXd d;
    if (cj.contains("diagonal")) {
        const auto values = value_or<std::vector<double>>(cj, "diagonal", {});
        d = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    } else if (cj.contains("kappa")) {
        d = Eigen::VectorXd::Ones(n);
        d.head(n / 2).setConstant(value_or<double>(cj, "kappa", 1.0));
    } else {
        throw ParameterError("covariance needs 'diagonal' or 'kappa'");
    }
    if (d.size() != n) throw ParameterError("covariance diagonal length must equal n");
    return CovarianceSpec::diagonal(d);
}

constexpr std::uint64_t kRecordStream = 0;
constexpr std::uint64_t kTruthStream = 1;

// Ground truth for simulate/estimate: drawn from RngSpec{seed, 1}.
Signal truth_from(const json& cfg, Eigen::Index n, const std::optional<CovarianceSpec>& cov) {
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 1);
    const auto kind = signal_kind_from_string(value_or<std::string>(cfg, "signal", "exact"));
    if (kind == SignalKind::low_rank) {
        const auto rows = required<Eigen::Index>(cfg, "rows");
        const auto cols = required<Eigen::Index>(cfg, "cols");
        if (rows * cols != n) throw ParameterError("rows * cols must equal the record dimension");
        return sample_lowrank_signal(RngSpec{seed, kTruthStream}, rows, cols, value_or<double>(cfg, "r", 1.0));
    }
    Signal x = sample_signal(RngSpec{seed, kTruthStream}, n, value_or<double>(cfg, "s", 1.0), kind);
    if (cov) x.values /= cov->sqrt_norm(x.values);
    return x;
}

Eigen::Index dimension_from(const json& cfg) {
    if (value_or<std::string>(cfg, "signal", "exact") == "lowrank")
        return required<Eigen::Index>(cfg, "rows") * required<Eigen::Index>(cfg, "cols");
    return required<Eigen::Index>(cfg, "n");
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json report_to_json(const EstimateReport& r, double violation) {
    json j{{"x_hat", to_vector(r.x_hat)},
           {"objective", r.objective},
           {"solver", r.solver_tag},
           {"iterations", r.iterations},
           {"constraint_violation", violation}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("error_sq", r.error_sq);
    put("normalized_error_sq", r.normalized_error_sq);
    put("sigma_metric_error_sq", r.sigma_metric_error_sq);
    put("lambda_used", r.lambda_used);
    put("w_hat", r.w_hat);
    put("beta", r.beta);
    put("bound_value", r.bound_value);
    return j;
}

ConstraintSet constraint_from(const json& cfg, Eigen::Index n) {
    const auto tag = value_or<std::string>(cfg, "constraint", "sparse");
    if (tag == "sparse") return SparseBall{value_or<double>(cfg, "s", 1.0)};
    if (tag == "correlated") {
        auto cov = covariance_from(cfg, n);
        if (!cov) throw ParameterError("correlated constraint needs a covariance");
        return CorrelatedSparse{*cov, value_or<double>(cfg, "s", 1.0)};
    }
    if (tag == "lowrank") {
        const auto rows = required<Eigen::Index>(cfg, "rows");
        const auto cols = required<Eigen::Index>(cfg, "cols");
        if (rows * cols != n) throw ParameterError("rows * cols must equal the record dimension");
        return NuclearFrobenius{value_or<double>(cfg, "r", 1.0), rows, cols};
    }
    throw ParameterError("unknown constraint '" + tag + "'");
}

void emit(const json& result, const json& cfg, std::ostream& out) {
    const auto path = value_or<std::string>(cfg, "output", "");
    if (path.empty()) {
        out << result.dump(2) << '\n';
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw ParameterError("cannot open '" + path + "' for writing");
    file << result.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_simulate(const json& cfg, std::ostream& out) {
    const Eigen::Index n = dimension_from(cfg);
    const auto m = required<Eigen::Index>(cfg, "m");
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 1);
    const auto path = required<std::string>(cfg, "output");
    const auto cov = covariance_from(cfg, n);
    const Signal truth = truth_from(cfg, n, cov);
    SynthesisOptions options;
    options.workers = value_or<unsigned>(cfg, "workers", 1);
    const auto record = synthesize(truth, model_from(cfg), m, RngSpec{seed, kRecordStream}, options, cov);
    write_record(path, record);
    out << json{{"record", path}, {"n", n}, {"m", m}, {"model", std::string(model_name(record.model))},
                {"seed", seed}}
               .dump()
        << '\n';
    return 0;
}

int cmd_estimate(const json& cfg, std::ostream& out) {
    const auto path = required<std::string>(cfg, "record");
    MeasurementRecord record = read_record(path);
    if (cfg.contains("seed") && value_or<std::uint64_t>(cfg, "seed", 0) != record.rng.seed)
        throw ParameterError("config seed does not match the record header seed");
    const ConstraintSet set = constraint_from(cfg, record.n());
    std::optional<Signal> truth;
    if (value_or<bool>(cfg, "truth", false)) {
        json signal_cfg = cfg;
        signal_cfg["seed"] = record.rng.seed;
        std::optional<CovarianceSpec> cov;
        if (const auto* k = std::get_if<CorrelatedSparse>(&set)) cov = k->cov;
        truth = truth_from(signal_cfg, record.n(), cov);
    }
    EstimateOptions options;
    if (cfg.contains("model")) options.model = model_from(cfg);
    options.compute_bound = value_or<bool>(cfg, "bound", false);
    options.beta = value_or<double>(cfg, "beta", 1.0);
    options.width_samples = value_or<std::size_t>(cfg, "width_samples", 200);
    options.width_rng = RngSpec{record.rng.seed, 0x5769647468ULL};
    const auto report = estimate(record, set, truth, options);
    emit(report_to_json(report, constraint_violation(set, report.x_hat)), cfg, out);
    return 0;
}

int cmd_sweep(const json& cfg, std::ostream& out) {
    const SweepConfig config = sweep_config_from_json(cfg);
    if (config.output.empty()) throw ParameterError("sweep needs an output path");
    const auto rows = run_sweep(config);
    write_sweep_outputs(config, rows);
    std::size_t failures = 0;
    for (const auto& r : rows) failures += !r.error.empty();
    json summary{{"rows", rows.size()}, {"failures", failures}, {"output", config.output.string()}};
    json medians = json::object();
    for (auto m : config.m_grid) {
        try {
            medians[std::to_string(m)] = median_of(rows, "error_sq", m);
        } catch (const ParameterError&) {
        }
    }
    summary["median_error_sq"] = medians;
    out << summary.dump() << '\n';
    return 0;
}

int cmd_meanwidth(const json& cfg, std::ostream& out) {
    const auto set = value_or<std::string>(cfg, "set", "sparse");
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 1);
    const auto samples = value_or<std::size_t>(cfg, "samples", 2000);
    const auto workers = value_or<unsigned>(cfg, "workers", 1);
    Eigen::Index n = 0;
    SupportFunction support;
    double s = value_or<double>(cfg, "s", 1.0);
    if (set == "ball") {
        n = required<Eigen::Index>(cfg, "n");
        support = [](const Eigen::VectorXd& g) { return g.norm(); };
    } else if (set == "sparse-exact") {
        n = required<Eigen::Index>(cfg, "n");
        const auto k = static_cast<std::size_t>(std::floor(s));
        support = [k](const Eigen::VectorXd& g) { return support_sparse_exact(g, k); };
    } else if (set == "sparse") {
        n = required<Eigen::Index>(cfg, "n");
        support = support_function_for(SparseBall{s});
    } else if (set == "lowrank") {
        const auto rows = required<Eigen::Index>(cfg, "rows");
        const auto cols = required<Eigen::Index>(cfg, "cols");
        n = rows * cols;
        s = value_or<double>(cfg, "r", 1.0);
        support = support_function_for(NuclearFrobenius{s, rows, cols});
    } else {
        throw ParameterError("unknown set '" + set + "' (expected ball, sparse-exact, sparse or lowrank)");
    }
    if (n <= 0) throw ParameterError("dimension must be positive");
    const auto est = mean_width_mc(support, n, samples, RngSpec{seed, 0}, set, workers);
    json result{{"set", est.set_tag}, {"n", n}, {"w_hat", est.w_hat}, {"std_err", est.std_err},
                {"n_samples", est.n_samples}};
    if (set != "ball" && set != "lowrank" && s < static_cast<double>(n))
        result["ratio_to_s_log_2n_over_s"] =
            est.w_hat * est.w_hat / (s * std::log(2.0 * static_cast<double>(n) / s));
    emit(result, cfg, out);
    return 0;
}

int cmd_tessellate(const json& cfg, std::ostream& out) {
    const auto n = required<Eigen::Index>(cfg, "n");
    const auto s = value_or<double>(cfg, "s", 1.0);
    const auto m = value_or<Eigen::Index>(cfg, "m", 50000);
    const auto l1_m = value_or<Eigen::Index>(cfg, "l1_m", m);
    const auto pairs = value_or<std::size_t>(cfg, "pairs", 200);
    const auto samples = value_or<std::size_t>(cfg, "samples", 100);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 1);
    const auto kind = signal_kind_from_string(value_or<std::string>(cfg, "signal", "exact"));
    AuditOptions options;
    options.near_fraction = value_or<double>(cfg, "near_fraction", options.near_fraction);
    options.near_scale = value_or<double>(cfg, "near_scale", options.near_scale);
    options.delta_target = value_or<double>(cfg, "delta", options.delta_target);
    options.workers = value_or<unsigned>(cfg, "workers", 1);

    const PointSampler on_sphere = [=](const RngSpec& rng) { return sample_signal(rng, n, s, kind).values; };
    const PointSampler differences = [=](const RngSpec& rng) {
        return Eigen::VectorXd(on_sphere(rng.child(0)) - on_sphere(rng.child(1)));
    };
    const auto audit = tessellation_audit(on_sphere, n, m, pairs, RngSpec{seed, 1}, options);
    const double l1_dev = l1_embedding_audit(differences, n, l1_m, samples, RngSpec{seed, 2}, options.workers);
    const double w = mean_width_mc(support_function_for(SparseBall{s}), n, value_or<std::size_t>(cfg, "width_samples", 500),
                                   RngSpec{seed, 3}, "sparse", options.workers)
                         .w_hat;
    const double l1_bound = 4.0 * w / std::sqrt(static_cast<double>(l1_m)) + 0.05;
    json result{
        {"tessellation",
         {{"max_abs_deviation", audit.max_abs_deviation}, {"pair_count", audit.pair_count}, {"m", audit.m},
          {"delta_target", audit.delta_target}, {"within_target", audit.max_abs_deviation <= audit.delta_target}}},
        {"l1_embedding",
         {{"max_deviation", l1_dev}, {"m", l1_m}, {"samples", samples}, {"w_hat", w}, {"bound", l1_bound},
          {"within_bound", l1_dev <= l1_bound}}},
    };
    emit(result, cfg, out);
    return 0;
}

int cmd_lambda(const json& cfg, std::ostream& out) {
    const LinkModel model = model_from(cfg);
    const auto m = value_or<Eigen::Index>(cfg, "m", 1000000);
    const auto n = value_or<Eigen::Index>(cfg, "n", 8);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 1);
    const double analytic = lambda_analytic(model);
    const Signal x = sample_signal(RngSpec{seed, kTruthStream}, n, static_cast<double>(n), SignalKind::exact_sparse);
    const auto empirical = lambda_empirical(x, model, m, RngSpec{seed, kRecordStream}, value_or<unsigned>(cfg, "workers", 1));
    char line[160];
    std::snprintf(line, sizeof line, "lambda_analytic %.10f\nlambda_empirical %.10f std_err %.10f m %lld\n",
                  analytic, empirical.value, empirical.std_err, static_cast<long long>(m));
    out << line;
    return 0;
}

struct Subcommand {
    const char* name;
    const char* description;
    std::vector<const char*> keys;
    int (*handler)(const json&, std::ostream&);
};

const std::vector<Subcommand>& subcommands() {
    static const std::vector<Subcommand> table = {
        {"simulate", "Draw a signal and its 1-bit measurements; write a binary record",
         {"n", "s", "signal", "m", "rows", "cols", "r"}, cmd_simulate},
        {"estimate", "Estimate the signal direction from a measurement record",
         {"record", "constraint", "s", "r", "rows", "cols", "signal", "truth", "bound", "beta", "width_samples"},
         cmd_estimate},
        {"sweep", "Run a Monte Carlo sweep and write CSV/JSON rows",
         {"n", "s", "r", "rows", "cols", "signal", "constraint", "m_grid", "tau", "strategy", "trials", "beta",
          "delta_constant", "compute_width", "width_samples", "record_timing", "format"},
         cmd_sweep},
        {"meanwidth", "Monte Carlo mean width of a constraint set",
         {"set", "n", "s", "r", "rows", "cols", "samples"}, cmd_meanwidth},
        {"tessellate", "Hyperplane tessellation and l1-embedding audits",
         {"n", "s", "m", "l1_m", "pairs", "samples", "signal", "near_fraction", "near_scale", "delta",
          "width_samples"},
         cmd_tessellate},
        {"lambda", "Analytic and empirical correlation coefficient of a link model", {"n", "m"}, cmd_lambda},
    };
    return table;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"1-bit compressed sensing: simulation, estimation and audits", "obcs"};
    app.require_subcommand(1);

    struct Flags {
        std::string config;
        std::map<std::string, std::string> values;
        std::string model, p, sigma, alpha;
        int verbosity = 0;
    };
    std::map<std::string, Flags> flags;
    std::map<std::string, CLI::App*> apps;
    for (const auto& sub : subcommands()) {
        auto* cmd = app.add_subcommand(sub.name, sub.description);
        auto& f = flags[sub.name];
        apps[sub.name] = cmd;
        cmd->add_option("--config,-c", f.config, "JSON config file");
        for (const char* key : {"output", "seed", "workers"}) cmd->add_option(std::string("--") + key, f.values[key]);
        for (const char* key : sub.keys) cmd->add_option(std::string("--") + key, f.values[key]);
        if (std::string(sub.name) != "meanwidth" && std::string(sub.name) != "tessellate") {
            cmd->add_option("--model", f.model, "noiseless | bitflip | prequant | logistic");
            cmd->add_option("--p", f.p, "bit-flip keep probability");
            cmd->add_option("--sigma", f.sigma, "pre-quantization noise level");
            cmd->add_option("--alpha", f.alpha, "logistic scale");
        }
        if (std::string(sub.name) == "simulate" || std::string(sub.name) == "estimate" ||
            std::string(sub.name) == "sweep")
            cmd->add_option("--kappa", f.values["kappa"], "diagonal covariance with condition number kappa");
        cmd->add_flag("-v,--verbose", f.verbosity, "more output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        for (const auto& sub : subcommands()) {
            CLI::App* cmd = apps.at(sub.name);
            if (!cmd->parsed()) continue;
            Flags& f = flags.at(sub.name);
            json cfg = load_config(f.config);
            for (const auto& [key, text] : f.values) {
                if (key == "kappa" || cmd->get_option("--" + key)->count() == 0) continue;
                cfg[key] = key == "output" || key == "record" ? json(text) : parse_flag_value(text);
            }
            if (cmd->get_option_no_throw("--kappa") && cmd->get_option("--kappa")->count())
                cfg["covariance"] = {{"kappa", parse_flag_value(f.values["kappa"])}};
            if (cmd->get_option_no_throw("--model")) {
                const bool any = cmd->get_option("--model")->count() || cmd->get_option("--p")->count() ||
                                 cmd->get_option("--sigma")->count() || cmd->get_option("--alpha")->count();
                if (any) {
                    json model = cfg.contains("model") && cfg["model"].is_object() ? cfg["model"] : json::object();
                    if (cfg.contains("model") && cfg["model"].is_string()) model["name"] = cfg["model"];
                    if (!f.model.empty()) model = json{{"name", f.model}};
                    if (cmd->get_option("--p")->count()) model["p"] = parse_flag_value(f.p);
                    if (cmd->get_option("--sigma")->count()) model["sigma"] = parse_flag_value(f.sigma);
                    if (cmd->get_option("--alpha")->count()) model["alpha"] = parse_flag_value(f.alpha);
                    cfg["model"] = model;
                }
            }
            err << cfg.dump() << '\n';
            return sub.handler(cfg, out);
        }
        return 1;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace obcs
