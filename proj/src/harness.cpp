#include "obcs/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "obcs/errors.hpp"
#include "obcs/parallel.hpp"

#ifndef OBCS_VERSION
#define OBCS_VERSION "0.0.0"
#endif
#ifndef OBCS_GIT_HASH
#define OBCS_GIT_HASH "unknown"
#endif

namespace obcs {

std::string_view library_version() { return OBCS_VERSION; }
std::string_view git_hash() { return OBCS_GIT_HASH; }

// ---------------------------------------------------------------------------
// Config

void SweepConfig::validate() const {
    if (m_grid.empty()) throw ParameterError("sweep m_grid must be nonempty");
    for (auto m : m_grid)
        if (m <= 0) throw ParameterError("sweep m_grid entries must be positive");
    if (trials < 1) throw ParameterError("sweep trials must be >= 1");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("sweep tau must lie in [0, 1]");
    if (!(s >= 1.0)) throw ParameterError("sweep s must be >= 1");
    obcs::validate(model);
    if (constraint == "lowrank") {
        if (rows <= 0 || cols <= 0) throw ParameterError("low-rank sweeps need rows and cols");
        if (static_cast<double>(std::min(rows, cols)) < s)
            throw ParameterError("rank budget exceeds min(rows, cols)");
    } else if (constraint == "sparse" || constraint == "correlated") {
        if (n <= 0 || static_cast<double>(n) < s) throw ParameterError("sweep needs 1 <= s <= n");
        if (constraint == "correlated") {
            if (!covariance_diagonal) throw ParameterError("correlated sweeps need a covariance");
            if (covariance_diagonal->size() != n)
                throw ParameterError("covariance diagonal length must equal n");
        }
    } else {
        throw ParameterError("unknown constraint '" + constraint + "' (expected sparse, correlated or lowrank)");
    }
    if (!(beta >= 0.0)) throw ParameterError("beta must be >= 0");
    if (!(delta_constant > 0.0)) throw ParameterError("delta_constant must be > 0");
    if (compute_width && width_samples < 2) throw ParameterError("width_samples must be >= 2");
}

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
    SweepConfig c;
    try {
        c.constraint = get_or<std::string>(j, "constraint", c.constraint);
        c.n = get_or<Eigen::Index>(j, "n", c.n);
        c.s = get_or<double>(j, "s", c.s);
        c.rows = get_or<Eigen::Index>(j, "rows", c.rows);
        c.cols = get_or<Eigen::Index>(j, "cols", c.cols);
        if (c.constraint == "lowrank") {
            c.s = get_or<double>(j, "r", c.s);
            c.n = c.rows * c.cols;
            c.signal_kind = SignalKind::low_rank;
        }
        if (j.contains("signal")) c.signal_kind = signal_kind_from_string(j.at("signal").get<std::string>());
        if (j.contains("model")) {
            const auto& mj = j.at("model");
            if (mj.is_string()) {
                c.model = make_model(mj.get<std::string>(), 0.0);
            } else {
                const auto name = mj.at("name").get<std::string>();
                double parameter = 0.0;
                for (const char* key : {"p", "sigma", "alpha"})
                    if (mj.contains(key)) parameter = mj.at(key).get<double>();
                c.model = make_model(name, parameter);
            }
        }
        if (j.contains("m_grid")) c.m_grid = j.at("m_grid").get<std::vector<Eigen::Index>>();
        c.tau = get_or<double>(j, "tau", c.tau);
        if (j.contains("strategy"))
            c.strategy = corruption_strategy_from_string(j.at("strategy").get<std::string>());
        c.trials = get_or<std::size_t>(j, "trials", c.trials);
        c.base_seed = get_or<std::uint64_t>(j, "seed", c.base_seed);
        if (j.contains("covariance")) {
            const auto& cj = j.at("covariance");
            if (cj.contains("diagonal")) {
                const auto d = cj.at("diagonal").get<std::vector<double>>();
                c.covariance_diagonal = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
            } else if (cj.contains("kappa")) {
                // first half of the coordinates at variance kappa, the rest at 1
                const double kappa = cj.at("kappa").get<double>();
                Eigen::VectorXd d = Eigen::VectorXd::Ones(c.n);
                d.head(c.n / 2).setConstant(kappa);
                c.covariance_diagonal = d;
            } else {
                throw ParameterError("covariance needs 'diagonal' or 'kappa'");
            }
        }
        c.beta = get_or<double>(j, "beta", c.beta);
        c.delta_constant = get_or<double>(j, "delta_constant", c.delta_constant);
        c.compute_width = get_or<bool>(j, "compute_width", c.compute_width);
        c.width_samples = get_or<std::size_t>(j, "width_samples", c.width_samples);
        c.record_timing = get_or<bool>(j, "record_timing", c.record_timing);
        c.workers = get_or<unsigned>(j, "workers", c.workers);
        c.output = get_or<std::string>(j, "output", c.output.string());
        c.format = get_or<std::string>(j, "format", c.format);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("invalid sweep config: ") + e.what());
    }
    return c;
}

nlohmann::json to_json(const SweepConfig& c) {
    nlohmann::json j;
    j["constraint"] = c.constraint;
    if (c.constraint == "lowrank") {
        j["rows"] = c.rows;
        j["cols"] = c.cols;
        j["r"] = c.s;
    } else {
        j["n"] = c.n;
        j["s"] = c.s;
        j["signal"] = std::string(to_string(c.signal_kind));
    }
    nlohmann::json model{{"name", std::string(model_name(c.model))}};
    if (const auto* b = std::get_if<BitFlip>(&c.model)) model["p"] = b->p;
    if (const auto* q = std::get_if<PreQuantNoise>(&c.model)) model["sigma"] = q->sigma;
    if (const auto* l = std::get_if<Logistic>(&c.model)) model["alpha"] = l->alpha;
    j["model"] = model;
    j["m_grid"] = c.m_grid;
    j["tau"] = c.tau;
    j["strategy"] = std::string(to_string(c.strategy));
    j["trials"] = c.trials;
    j["seed"] = c.base_seed;
    if (c.covariance_diagonal) {
        const auto& d = *c.covariance_diagonal;
        j["covariance"] = {{"diagonal", std::vector<double>(d.data(), d.data() + d.size())}};
    }
    j["beta"] = c.beta;
    j["delta_constant"] = c.delta_constant;
    j["compute_width"] = c.compute_width;
    j["width_samples"] = c.width_samples;
    j["record_timing"] = c.record_timing;
    j["workers"] = c.workers;
    if (!c.output.empty()) j["output"] = c.output.string();
    if (!c.format.empty()) j["format"] = c.format;
    return j;
}

// ---------------------------------------------------------------------------
// Bounds

double bound_thm11(double lambda, Eigen::Index m, double w, double beta) {
    return fixed_signal_error_bound(lambda, m, w, beta);
}

double delta_from_measurements(Eigen::Index m, double w, double constant) {
    return std::pow(constant * w * w / static_cast<double>(m), 1.0 / 6.0);
}

double bound_thm13(double delta, double tau) {
    auto term = [](double v) { return v > 0.0 ? v * std::sqrt(std::log(M_E / v)) : 0.0; };
    return term(delta) + 11.0 * term(tau);
}

// ---------------------------------------------------------------------------
// Sweep

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial) {
    return mix_words({base_seed, static_cast<std::uint64_t>(trial)});
}

namespace {

constexpr std::uint64_t kSignalStream = 1;
constexpr std::uint64_t kMeasureStream = 2;
constexpr std::uint64_t kCorruptStream = 3;
constexpr std::uint64_t kWidthStream = 0x5769647468ULL;

ConstraintSet constraint_for(const SweepConfig& config, const std::optional<CovarianceSpec>& cov) {
    if (config.constraint == "correlated") return CorrelatedSparse{*cov, config.s};
    if (config.constraint == "lowrank") return NuclearFrobenius{config.s, config.rows, config.cols};
    return SparseBall{config.s};
}

Signal draw_truth(const SweepConfig& config, const RngSpec& rng, const std::optional<CovarianceSpec>& cov) {
    if (config.constraint == "lowrank") return sample_lowrank_signal(rng, config.rows, config.cols, config.s);
    Signal x = sample_signal(rng, config.n, config.s, config.signal_kind);
    if (cov) x.values /= cov->sqrt_norm(x.values);
    return x;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
    config.validate();
    std::optional<CovarianceSpec> cov;
    if (config.constraint == "correlated") cov = CovarianceSpec::diagonal(*config.covariance_diagonal);
    const ConstraintSet set = constraint_for(config, cov);
    const double lambda = lambda_analytic(config.model);
    const bool noiseless = std::holds_alternative<Noiseless>(config.model);

    std::optional<double> w_hat;
    if (config.compute_width)
        w_hat = mean_width_mc(support_function_for(set), config.n, config.width_samples,
                              RngSpec{config.base_seed, kWidthStream}, constraint_tag(set), config.workers)
                    .w_hat;

    const std::size_t cells = config.m_grid.size() * config.trials;
    std::vector<SweepRow> rows(cells);
    detail::parallel_for(cells, config.workers, [&](std::size_t index) {
        const Eigen::Index m = config.m_grid[index / config.trials];
        const std::size_t trial = index % config.trials;
        SweepRow& row = rows[index];
        row.n = config.n;
        row.s = config.s;
        row.m = m;
        row.model = config.model;
        row.tau = config.tau;
        row.strategy = config.strategy;
        row.trial = trial;
        row.seed = trial_seed(config.base_seed, trial);
        row.lambda = lambda;
        row.beta = config.beta;
        row.w_hat = w_hat;

        const auto start = std::chrono::steady_clock::now();
        try {
            const Signal truth = draw_truth(config, RngSpec{row.seed, kSignalStream}, cov);
            SynthesisOptions synth;
            synth.keep_inner_products = config.tau > 0.0 && config.strategy == CorruptionStrategy::greedy_magnitude;
            MeasurementRecord record =
                synthesize(truth, config.model, m, RngSpec{row.seed, kMeasureStream}, synth, cov);
            if (config.tau > 0.0) {
                std::optional<std::span<const double>> context;
                if (record.inner_products)
                    context = std::span<const double>(record.inner_products->data(),
                                                      static_cast<std::size_t>(record.inner_products->size()));
                record.y = corrupt(record.y, config.tau, config.strategy, RngSpec{row.seed, kCorruptStream}, context);
                record.c = direction_for_bits(record, record.y);
            }
            const EstimateReport report = estimate(record, set, truth);
            row.error_sq = *report.error_sq;
            row.sigma_err_sq = report.sigma_metric_error_sq;
            row.objective = report.objective;
            if (w_hat) {
                if (lambda > 0.0) row.bound_thm11 = bound_thm11(lambda, m, *w_hat, config.beta);
                if (noiseless)
                    row.bound_thm13 =
                        bound_thm13(delta_from_measurements(m, *w_hat, config.delta_constant), config.tau);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        if (config.record_timing)
            row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

double median(std::vector<double> values) {
    if (values.empty()) throw ParameterError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

std::optional<double> field_value(const SweepRow& row, std::string_view field) {
    if (field == "m") return static_cast<double>(row.m);
    if (field == "error_sq") return row.error_sq;
    if (field == "sigma_err_sq") return row.sigma_err_sq;
    if (field == "objective") return row.objective;
    if (field == "tau") return row.tau;
    if (field == "n") return static_cast<double>(row.n);
    if (field == "s") return row.s;
    throw ParameterError("unknown sweep field '" + std::string(field) + "'");
}

}  // namespace

double median_of(const std::vector<SweepRow>& rows, std::string_view field, Eigen::Index m) {
    std::vector<double> values;
    for (const auto& row : rows) {
        if (!row.error.empty() || (m >= 0 && row.m != m)) continue;
        if (auto v = field_value(row, field)) values.push_back(*v);
    }
    return median(std::move(values));
}

ScalingFit fit_scaling(const std::vector<SweepRow>& rows, std::string_view x_field, std::string_view y_field) {
    std::map<double, std::vector<double>> groups;
    for (const auto& row : rows) {
        if (!row.error.empty()) continue;
        const auto x = field_value(row, x_field);
        const auto y = field_value(row, y_field);
        if (x && y) groups[*x].push_back(*y);
    }
    if (groups.size() < 3) throw ParameterError("fit_scaling needs at least three distinct x values");
    std::vector<double> lx, ly;
    for (auto& [x, ys] : groups) {
        const double y = median(ys);
        if (!(x > 0.0) || !(y > 0.0)) throw ParameterError("fit_scaling needs positive x and median y");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const double k = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= k;
    my /= k;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

namespace {

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string quoted = "\"";
    for (char ch : text) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    return quoted + '"';
}

std::string optional_number(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> model_field(const LinkModel& model, ModelTag tag) {
    if (tag_of(model) != tag) return std::nullopt;
    return model_parameter(model);
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << kCsvHeader << "\r\n";
    for (const auto& r : rows) {
        const bool ok = r.error.empty();
        const std::string fields[] = {
            std::to_string(r.n),
            format_double(r.s),
            std::to_string(r.m),
            csv_field(model_name(r.model)),
            optional_number(model_field(r.model, ModelTag::bitflip)),
            optional_number(model_field(r.model, ModelTag::prequant)),
            optional_number(model_field(r.model, ModelTag::logistic)),
            format_double(r.tau),
            csv_field(to_string(r.strategy)),
            std::to_string(r.trial),
            std::to_string(r.seed),
            ok ? format_double(r.error_sq) : std::string(),
            ok ? optional_number(r.sigma_err_sq) : std::string(),
            ok ? format_double(r.objective) : std::string(),
            format_double(r.lambda),
            optional_number(r.w_hat),
            ok ? optional_number(r.bound_thm11) : std::string(),
            format_double(r.beta),
            ok ? optional_number(r.bound_thm13) : std::string(),
            format_double(r.wall_time_s),
        };
        for (std::size_t i = 0; i < std::size(fields); ++i) out << (i ? "," : "") << fields[i];
        out << "\r\n";
    }
}

nlohmann::json rows_to_json(const std::vector<SweepRow>& rows) {
    auto number = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        const bool ok = r.error.empty();
        nlohmann::json j;
        j["n"] = r.n;
        j["s"] = r.s;
        j["m"] = r.m;
        j["model"] = std::string(model_name(r.model));
        j["p"] = number(model_field(r.model, ModelTag::bitflip));
        j["sigma"] = number(model_field(r.model, ModelTag::prequant));
        j["alpha"] = number(model_field(r.model, ModelTag::logistic));
        j["tau"] = r.tau;
        j["strategy"] = std::string(to_string(r.strategy));
        j["trial"] = r.trial;
        j["seed"] = r.seed;
        j["error_sq"] = ok ? nlohmann::json(r.error_sq) : nlohmann::json(nullptr);
        j["sigma_err_sq"] = ok ? number(r.sigma_err_sq) : nlohmann::json(nullptr);
        j["objective"] = ok ? nlohmann::json(r.objective) : nlohmann::json(nullptr);
        j["lambda"] = r.lambda;
        j["w_hat"] = number(r.w_hat);
        j["bound_thm11"] = ok ? number(r.bound_thm11) : nlohmann::json(nullptr);
        j["beta"] = r.beta;
        j["bound_thm13"] = ok ? number(r.bound_thm13) : nlohmann::json(nullptr);
        j["wall_time_s"] = r.wall_time_s;
        out.push_back(std::move(j));
    }
    return out;
}

nlohmann::json sweep_metadata(const SweepConfig& config, const std::vector<SweepRow>& rows) {
    nlohmann::json failures = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!rows[i].error.empty())
            failures.push_back({{"row", i}, {"m", rows[i].m}, {"trial", rows[i].trial}, {"error", rows[i].error}});
    // Worker count does not affect results; leaving it out keeps the sidecar byte-identical across runs.
    nlohmann::json echo = to_json(config);
    echo.erase("workers");
    return {
        {"config", echo},
        {"library_version", std::string(library_version())},
        {"git_hash", std::string(git_hash())},
        {"row_count", rows.size()},
        {"failures", failures},
        {"notes",
         "bound_thm13 uses delta from m = C delta^-6 w_hat^2 with C = delta_constant; absolute constants "
         "are calibration knobs and are not asserted"},
    };
}

void write_sweep_outputs(const SweepConfig& config, const std::vector<SweepRow>& rows) {
    if (config.output.empty()) throw ParameterError("sweep output path is empty");
    std::string format = config.format;
    if (format.empty()) format = config.output.extension() == ".json" ? "json" : "csv";
    {
        std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
        if (!out) throw ParameterError("cannot open '" + config.output.string() + "' for writing");
        if (format == "csv")
            write_csv(out, rows);
        else if (format == "json")
            out << rows_to_json(rows).dump(2) << '\n';
        else
            throw ParameterError("unknown output format '" + format + "'");
    }
    std::ofstream meta(config.output.string() + ".meta.json", std::ios::binary | std::ios::trunc);
    if (!meta) throw ParameterError("cannot write sweep metadata next to '" + config.output.string() + "'");
    meta << sweep_metadata(config, rows).dump(2) << '\n';
}

}  // namespace obcs
