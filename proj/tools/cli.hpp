#pragma once

// Command-line front end: argument parsing, sweep configuration files,
// atomic artifact output and run manifests.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "gmoe/gmoe.hpp"

namespace gmoe::cli {

/// Bad invocation: exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kConfigSchema = R"(sweep config (JSON object, every key optional except one of model/measure):
  "model":      "model1" | "model2" | "model3" | "model4"
  "measure":    inline measure {"dim", "atoms": [{"weight","c","gamma","a","b","nu"}]}
  "k":          fitted number of atoms (default 4)
  "n_grid":     [n1, n2, ...] strictly increasing, or {"lo": 100, "hi": 1e4, "count": 20}
  "reps":       replications per n (default 20)
  "base_seed":  unsigned integer (default 0)
  "loss":       "dbar" | "dtilde" | "auto" (default auto)
  "perturb_sd": favourable-init noise level (default 0.01)
  "zero_tol":   tolerance for zero gating locations (default 0)
  "em":         {"epsilon", "max_iter", "lambda_floor", "nu_floor", "beta_floor"}
  "orders":     {"rbar": {"4": 8}, "rtilde": {...}} user-asserted orders for large cells
  "threads":    worker count (default 1; does not change results)
A run manifest is also accepted: its "config" member is used.)";

// ---------------------------------------------------------------- files

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Collects artifacts for one run; each file goes to a temporary name in
/// the output directory and is renamed into place.
class OutputDir {
public:
    explicit OutputDir(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& bytes) {
        const auto target = std::filesystem::path(dir_) / name;
        auto tmp = target;
        tmp += ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DomainError("cannot write " + tmp.string());
            out << bytes;
            if (!out.flush()) throw DomainError("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
        hashes_[name] = sha256_hex(bytes);
    }

    /// Writes manifest.json last so that it lists every other artifact.
    void write_manifest(const std::string& command, Json config, Json seeds) {
        Json m;
        m["tool"] = "gmoe";
        m["command"] = command;
        m["config"] = std::move(config);
        m["seeds"] = std::move(seeds);
        Json artifacts = Json::object();
        for (const auto& [name, hash] : hashes_) artifacts[name] = {{"sha256", hash}};
        m["artifacts"] = std::move(artifacts);
        write("manifest.json", dump_json(m) + "\n");
    }

    const std::string& path() const { return dir_; }

private:
    std::string dir_;
    std::map<std::string, std::string> hashes_;
};

// --------------------------------------------------------------- config

inline Json em_to_json(const EmSettings& em) {
    return Json{{"epsilon", em.epsilon},
                {"max_iter", em.max_iter},
                {"lambda_floor", em.lambda_floor},
                {"nu_floor", em.nu_floor},
                {"beta_floor", em.beta_floor}};
}

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    if (cfg.model) {
        j["model"] = to_string(*cfg.model);
    } else if (cfg.measure) {
        j["measure"] = measure_to_json(*cfg.measure);
    }
    j["k"] = cfg.k;
    j["n_grid"] = cfg.n_grid;
    j["reps"] = cfg.reps;
    j["base_seed"] = cfg.base_seed;
    j["loss"] = to_string(cfg.loss);
    j["perturb_sd"] = cfg.perturb_sd;
    j["zero_tol"] = cfg.zero_tol;
    j["em"] = em_to_json(cfg.em);
    Json orders = Json::object();
    for (const auto& [name, table] : {std::pair{"rbar", &cfg.orders.asserted_rbar}, {"rtilde", &cfg.orders.asserted_rtilde}}) {
        Json t = Json::object();
        for (const auto& [m, r] : *table) t[std::to_string(m)] = r;
        orders[name] = std::move(t);
    }
    j["orders"] = std::move(orders);
    j["threads"] = cfg.threads;
    return j;
}

namespace detail {

template <typename T>
T get_as(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw DomainError(std::string("config key '") + key + "': " + e.what());
    }
}

inline std::vector<std::size_t> grid_from_json(const Json& j) {
    if (j.is_object()) {
        return log_spaced_grid(get_as<double>(j, "lo"), get_as<double>(j, "hi"), get_as<std::size_t>(j, "count"));
    }
    if (!j.is_array()) throw DomainError("config key 'n_grid': expected an array or {lo, hi, count}");
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        if (!v.is_number() || v.get<double>() < 1 || v.get<double>() != std::floor(v.get<double>())) {
            throw DomainError("config key 'n_grid': entries must be positive integers");
        }
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

}  // namespace detail

/// Applies the keys present in `j` on top of `cfg`.
inline void apply_config_json(ExperimentConfig& cfg, const Json& j) {
    if (!j.is_object()) throw DomainError("config: expected a JSON object");
    static const std::vector<std::string> known{"model", "measure", "k", "n_grid", "reps", "base_seed", "loss",
                                                "perturb_sd", "zero_tol", "em", "orders", "threads"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw DomainError("config: unknown key '" + key + "'");
        }
    }
    using detail::get_as;
    if (j.contains("model") && j.contains("measure")) throw DomainError("config: give either model or measure");
    if (j.contains("model")) {
        cfg.model = model_id_from_string(get_as<std::string>(j, "model"));
        cfg.measure.reset();
    }
    if (j.contains("measure")) {
        cfg.measure = measure_from_json(j.at("measure"));
        cfg.model.reset();
    }
    if (j.contains("k")) cfg.k = get_as<std::size_t>(j, "k");
    if (j.contains("n_grid")) cfg.n_grid = detail::grid_from_json(j.at("n_grid"));
    if (j.contains("reps")) cfg.reps = get_as<int>(j, "reps");
    if (j.contains("base_seed")) cfg.base_seed = get_as<std::uint64_t>(j, "base_seed");
    if (j.contains("loss")) cfg.loss = loss_kind_from_string(get_as<std::string>(j, "loss"));
    if (j.contains("perturb_sd")) cfg.perturb_sd = get_as<double>(j, "perturb_sd");
    if (j.contains("zero_tol")) cfg.zero_tol = get_as<double>(j, "zero_tol");
    if (j.contains("threads")) cfg.threads = get_as<unsigned>(j, "threads");
    if (j.contains("em")) {
        const auto& em = j.at("em");
        if (!em.is_object()) throw DomainError("config key 'em': expected an object");
        for (const auto& [key, value] : em.items()) {
            if (key == "epsilon") cfg.em.epsilon = get_as<double>(em, "epsilon");
            else if (key == "max_iter") cfg.em.max_iter = get_as<int>(em, "max_iter");
            else if (key == "lambda_floor") cfg.em.lambda_floor = get_as<double>(em, "lambda_floor");
            else if (key == "nu_floor") cfg.em.nu_floor = get_as<double>(em, "nu_floor");
            else if (key == "beta_floor") cfg.em.beta_floor = get_as<double>(em, "beta_floor");
            else throw DomainError("config: unknown key 'em." + key + "'");
        }
    }
    if (j.contains("orders")) {
        const auto& orders = j.at("orders");
        for (const auto& [name, table] : orders.items()) {
            std::map<int, int>* target = name == "rbar"     ? &cfg.orders.asserted_rbar
                                         : name == "rtilde" ? &cfg.orders.asserted_rtilde
                                                            : nullptr;
            if (!target) throw DomainError("config: unknown key 'orders." + name + "'");
            target->clear();
            for (const auto& [m, r] : table.items()) (*target)[std::stoi(m)] = r.get<int>();
        }
    }
}

/// `key=value` with a dotted key; the value is parsed as JSON when it can
/// be, otherwise taken as a string.
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline unsigned resolve_threads(const std::optional<unsigned>& flag) {
    if (flag) return std::max(1u, *flag);
    if (const char* env = std::getenv("GMOE_THREADS"); env && *env) {
        try {
            return std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw UsageError(std::string("GMOE_THREADS='") + env + "' is not an integer");
        }
    }
    return 1;
}

inline MixingMeasure measure_from_file(const std::string& path) {
    const Json j = read_json_file(path);
    // a fit.json carries its measure under "measure"
    return measure_from_json(j.contains("measure") ? j.at("measure") : j);
}

inline polysys::Candidate builtin_candidate(const std::string& name, const polysys::PolySystemSpec& spec) {
    if (name != "builtin-c3" && name != "builtin") throw UsageError("unknown builtin candidate '" + name + "'");
    if (spec.family == polysys::Family::RTILDE && spec.m == 2) return polysys::builtin_rtilde_m2();
    if (spec.family == polysys::Family::RBAR && spec.m == 2) return polysys::builtin_rbar_m2();
    if (spec.family == polysys::Family::RTILDE && spec.m == 3) return polysys::builtin_rtilde_m3();
    throw DomainError("no builtin candidate for " + polysys::to_string(spec.family) + " with m=" + std::to_string(spec.m));
}

// ------------------------------------------------------------- commands

struct Options {
    std::string config_path;
    std::string profile;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string output_dir = "gmoe_out";
    std::string loss;
    std::optional<std::size_t> k;
    std::string model;
    std::vector<std::string> overrides;

    // simulate / fit / loss / rate
    std::size_t n = 1000;
    std::string data_path;
    std::string init_path;
    std::string truth_path;
    std::string fitted_path;
    std::string summary_path;
    int rep = 0;
    double perturb_sd = 0.01;
    std::optional<double> epsilon;
    std::optional<int> max_iter;

    // polysys
    std::string family = "rbar";
    int m = 2;
    int r = 3;
    std::string verify;
    std::string candidate_path;
    bool search = false;
    int restarts = 200;
    double tol = 1e-12;

    // presets
    std::string preset_id;
};

inline MixingMeasure truth_from_options(const Options& o) {
    if (!o.truth_path.empty()) return measure_from_file(o.truth_path);
    if (!o.model.empty()) return model_preset(model_id_from_string(o.model));
    throw UsageError("give the true measure with --model or --truth");
}

inline int cmd_presets(const Options& o, std::ostream& out) {
    const std::string id = o.preset_id.empty() ? o.model : o.preset_id;
    std::vector<ModelId> ids;
    if (id.empty()) {
        ids = {ModelId::Model1, ModelId::Model2, ModelId::Model3, ModelId::Model4};
    } else {
        ids = {model_id_from_string(id)};
    }
    OutputDir dir(o.output_dir);
    Json listing = Json::object();
    for (auto mid : ids) {
        const auto text = measure_to_string(model_preset(mid)) + "\n";
        dir.write(to_string(mid) + ".json", text);
        if (ids.size() == 1) out << text;
        listing[to_string(mid)] = measure_to_json(model_preset(mid));
    }
    if (ids.size() > 1) out << dump_json(listing) << "\n";
    dir.write_manifest("presets", Json{{"ids", id.empty() ? Json("all") : Json(id)}}, Json::object());
    return 0;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
    const auto g = truth_from_options(o);
    const std::uint64_t seed = o.seed.value_or(0);
    const std::string label = o.model.empty() ? o.truth_path : o.model;
    const Dataset data = sample(g, o.n, seed, label);
    OutputDir dir(o.output_dir);
    dir.write("data.csv", dataset_to_csv(data));
    dir.write("data.json", dump_json(dataset_sidecar(data)) + "\n");
    dir.write("truth.json", measure_to_string(g) + "\n");
    dir.write_manifest("simulate", Json{{"source", label}, {"n", o.n}, {"measure", measure_to_json(g)}},
                       Json{{"seed", seed}});
    out << "wrote " << o.n << " rows to " << (std::filesystem::path(dir.path()) / "data.csv").string() << "\n";
    return 0;
}

inline int cmd_fit(const Options& o, std::ostream& out) {
    if (o.data_path.empty()) throw UsageError("fit needs --data <csv>");
    if (!o.k) throw UsageError("fit needs --k");
    const Dataset data = dataset_from_csv(read_text_file(o.data_path));
    EmSettings em;
    if (o.epsilon) em.epsilon = *o.epsilon;
    if (o.max_iter) em.max_iter = *o.max_iter;
    em.validate();
    const std::uint64_t seed = o.seed.value_or(0);
    MixingMeasure init = [&] {
        if (!o.init_path.empty()) return measure_from_file(o.init_path);
        return init_favourable(truth_from_options(o), *o.k, seed, o.perturb_sd, em.floors());
    }();
    const FitResult fr = fit(data, *o.k, init, em);
    OutputDir dir(o.output_dir);
    dir.write("fit.json", dump_json(fit_result_to_json(fr)) + "\n");
    Json config{{"data", o.data_path},
                {"data_sha256", sha256_hex(read_text_file(o.data_path))},
                {"k", *o.k},
                {"init", measure_to_json(init)},
                {"perturb_sd", o.perturb_sd},
                {"em", em_to_json(em)}};
    dir.write_manifest("fit", std::move(config), Json{{"init_seed", seed}});
    out << "iterations " << fr.iterations << (fr.converged ? " (converged)" : " (iteration cap reached)")
        << ", loglik " << format_double(fr.loglik_trace.back()) << "\n";
    return 0;
}

inline int cmd_loss(const Options& o, std::ostream& out) {
    if (o.fitted_path.empty()) throw UsageError("loss needs --fitted <measure.json>");
    const auto g = measure_from_file(o.fitted_path);
    const auto g0 = truth_from_options(o);
    const auto setting = classify_setting(g0);
    const LossKind kind = resolve_loss(o.loss.empty() ? LossKind::AUTO : loss_kind_from_string(o.loss), setting);
    const double value = evaluate_loss(kind, g, g0, setting);
    const auto cells = assign_cells(g, g0);
    const std::string model_id = o.model.empty() ? "inline" : o.model;
    const std::string row = loss_report_row(model_id, o.n, o.rep, g.size(), to_string(kind), value, cells.cell_sizes());
    OutputDir dir(o.output_dir);
    dir.write("loss.csv", loss_report_header() + row);
    dir.write_manifest("loss",
                       Json{{"fitted", measure_to_json(g)}, {"truth", measure_to_json(g0)}, {"loss", to_string(kind)}},
                       Json::object());
    out << loss_report_header() << row;
    return 0;
}

/// Resolution order: defaults, config file, --profile, flags, key=value.
inline ExperimentConfig sweep_config(const Options& o) {
    if (o.config_path.empty() && o.model.empty()) {
        throw UsageError(std::string("sweep needs --config <file> or --model\n") + kConfigSchema);
    }
    Json file = Json::object();
    if (!o.config_path.empty()) {
        file = read_json_file(o.config_path);
        if (file.contains("config") && file.contains("artifacts")) file = file.at("config");
    }
    ExperimentConfig cfg;
    apply_config_json(cfg, file);
    if (!o.profile.empty()) {
        ExperimentConfig p;
        if (o.profile == "desk") {
            p = desk_profile(ModelId::Model1, cfg.k);
        } else if (o.profile == "paper") {
            p = paper_profile(ModelId::Model1, cfg.k);
        } else {
            throw UsageError("unknown profile '" + o.profile + "' (expected desk or paper)");
        }
        cfg.n_grid = p.n_grid;
        cfg.reps = p.reps;
    }
    Json flags = Json::object();
    if (!o.model.empty()) flags["model"] = o.model;
    if (o.k) flags["k"] = *o.k;
    if (o.seed) flags["base_seed"] = *o.seed;
    if (!o.loss.empty()) flags["loss"] = o.loss;
    for (const auto& ov : o.overrides) apply_override(flags, ov);
    if (flags.contains("measure") || flags.contains("model")) {
        cfg.model.reset();
        cfg.measure.reset();
    }
    apply_config_json(cfg, flags);
    cfg.threads = o.threads ? std::max(1u, *o.threads) : (file.contains("threads") ? cfg.threads : resolve_threads({}));
    cfg.validate();
    return cfg;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = sweep_config(o);
    const SweepResult res = run_sweep(cfg);
    const auto summary = res.summary();
    OutputDir dir(o.output_dir);
    dir.write("results.csv", results_csv(res));
    dir.write("summary.csv", summary_csv(summary));
    Json rate_doc;
    std::optional<RateFit> rate;
    try {
        rate = fit_rate(summary);
        rate_doc = rate_to_json(*rate);
    } catch (const DomainError& e) {
        rate_doc = Json{{"slope", nullptr}, {"intercept", nullptr}, {"r_squared", nullptr}, {"error", e.what()}};
    }
    rate_doc["excluded_cell_order"] = res.excluded_cell_order;
    rate_doc["excluded_em"] = res.excluded_em;
    rate_doc["not_converged"] = res.not_converged;
    dir.write("rate.json", dump_json(rate_doc) + "\n");
    const std::string loss_name = res.rows.empty() ? "loss" : res.rows.front().loss_name;
    dir.write("plot.svg", plot_svg(summary, rate.value_or(RateFit{}), cfg.model_label() + ", k=" + std::to_string(cfg.k),
                                   "mean " + loss_name));
    Json seeds{{"base_seed", cfg.base_seed},
               {"derivation", "splitmix64 chain over (base_seed, model, n_index, rep_index); tag 1 samples, tag 2 initializes"}};
    dir.write_manifest("sweep", config_to_json(cfg), std::move(seeds));
    out << dump_json(rate_doc) << "\n";
    return 0;
}

inline int cmd_rate(const Options& o, std::ostream& out) {
    if (o.summary_path.empty()) throw UsageError("rate needs --summary <summary.csv>");
    const auto summary = summary_from_csv(read_text_file(o.summary_path));
    const RateFit fit = fit_rate(summary);
    OutputDir dir(o.output_dir);
    dir.write("rate.json", dump_json(rate_to_json(fit)) + "\n");
    dir.write("plot.svg", plot_svg(summary, fit, "rate", "mean loss"));
    dir.write_manifest("rate", Json{{"summary", o.summary_path}, {"summary_sha256", sha256_hex(read_text_file(o.summary_path))}},
                       Json::object());
    out << dump_json(rate_to_json(fit)) << "\n";
    return 0;
}

inline int cmd_polysys(const Options& o, std::ostream& out) {
    const polysys::PolySystemSpec spec{polysys::family_from_string(o.family), o.m, o.r};
    spec.validate();
    if (int{o.search} + int{!o.verify.empty()} + int{!o.candidate_path.empty()} != 1) {
        throw UsageError("polysys needs exactly one of --verify <builtin>, --candidate <file>, --search");
    }
    Json report;
    report["family"] = polysys::to_string(spec.family);
    report["m"] = spec.m;
    report["r"] = spec.r;
    polysys::Candidate cand;
    Json seeds = Json::object();
    if (o.search) {
        const std::uint64_t seed = o.seed.value_or(0);
        const auto res = polysys::search_nontrivial(spec, o.restarts, seed);
        cand = res.best;
        report["search"] = Json{{"restarts", res.restarts},
                                {"best_restart", res.best_restart},
                                {"best_residual", res.best_residual},
                                {"evidence_threshold", 1e-6},
                                {"certifying", false}};
        seeds["seed"] = seed;
    } else if (!o.verify.empty()) {
        cand = builtin_candidate(o.verify, spec);
    } else {
        cand = polysys::candidate_from_json(read_json_file(o.candidate_path));
    }
    const auto verdict = polysys::verify_candidate(spec, cand, o.tol);
    report["candidate"] = polysys::candidate_to_json(cand);
    report["residuals"] = verdict.residuals;
    report["verdict"] = Json{{"is_solution", verdict.is_solution},
                             {"is_nontrivial", verdict.is_nontrivial},
                             {"max_abs_residual", verdict.max_abs_residual},
                             {"tol", o.tol}};
    const std::string text = dump_json(report) + "\n";
    OutputDir dir(o.output_dir);
    dir.write("polysys.json", text);
    dir.write_manifest("polysys",
                       Json{{"family", report["family"]}, {"m", spec.m}, {"r", spec.r}, {"tol", o.tol},
                            {"restarts", o.search ? o.restarts : 0}},
                       std::move(seeds));
    out << text;
    return 0;
}

// ------------------------------------------------------------- dispatch

inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
    CLI::App app{"Gaussian-gated mixture of experts: simulation, EM fitting and Voronoi losses", "gmoe"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--output-dir", o.output_dir, "directory for artifacts and manifest.json");
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("--model", o.model, "preset: model1..model4")
            ->check(CLI::IsMember({"model1", "model2", "model3", "model4"}));
    };

    auto* presets = app.add_subcommand("presets", "print the preset measures");
    common(presets);
    presets->add_option("--id", o.preset_id, "preset to print (default: all)")
        ->check(CLI::IsMember({"model1", "model2", "model3", "model4"}));

    auto* simulate = app.add_subcommand("simulate", "draw a dataset from a measure");
    common(simulate);
    simulate->add_option("--truth", o.truth_path, "measure JSON instead of a preset");
    simulate->add_option("--n", o.n, "number of rows")->check(CLI::NonNegativeNumber);

    auto* fitcmd = app.add_subcommand("fit", "EM fit of a dataset");
    common(fitcmd);
    fitcmd->add_option("--data", o.data_path, "dataset CSV (x1..xd,y)");
    fitcmd->add_option("--k", o.k, "number of fitted atoms")->check(CLI::PositiveNumber);
    fitcmd->add_option("--init", o.init_path, "initial measure JSON");
    fitcmd->add_option("--truth", o.truth_path, "true measure for the favourable start");
    fitcmd->add_option("--perturb-sd", o.perturb_sd, "favourable-start noise level");
    fitcmd->add_option("--epsilon", o.epsilon, "relative log-likelihood stop");
    fitcmd->add_option("--max-iter", o.max_iter, "iteration cap");

    auto* losscmd = app.add_subcommand("loss", "Voronoi loss of a fitted measure");
    common(losscmd);
    losscmd->add_option("--fitted", o.fitted_path, "fitted measure JSON (or fit.json)");
    losscmd->add_option("--truth", o.truth_path, "true measure JSON instead of a preset");
    losscmd->add_option("--loss", o.loss, "dbar, dtilde or auto")->check(CLI::IsMember({"dbar", "dtilde", "auto"}));
    losscmd->add_option("--n", o.n, "sample size recorded in the report");
    losscmd->add_option("--rep", o.rep, "replication recorded in the report");

    auto* sweep = app.add_subcommand("sweep", "sample-size sweep with replications");
    common(sweep);
    sweep->add_option("--config", o.config_path, "sweep config or manifest JSON");
    sweep->add_option("--profile", o.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    sweep->add_option("--threads", o.threads, "worker threads (else GMOE_THREADS, else 1)");
    sweep->add_option("--loss", o.loss, "dbar, dtilde or auto")->check(CLI::IsMember({"dbar", "dtilde", "auto"}));
    sweep->add_option("--k", o.k, "number of fitted atoms")->check(CLI::PositiveNumber);
    sweep->add_option("overrides", o.overrides, "key=value config overrides, e.g. em.max_iter=500");

    auto* rate = app.add_subcommand("rate", "log-log rate fit of a summary.csv");
    common(rate);
    rate->add_option("--summary", o.summary_path, "summary CSV from a sweep");

    auto* poly = app.add_subcommand("polysys", "residuals and solution search for the polynomial systems");
    common(poly);
    poly->add_option("--family", o.family, "rbar or rtilde")->check(CLI::IsMember({"rbar", "rtilde"}));
    poly->add_option("--m", o.m, "number of atoms in the cell")->check(CLI::PositiveNumber);
    poly->add_option("--r", o.r, "system order")->check(CLI::PositiveNumber);
    poly->add_option("--verify", o.verify, "builtin candidate to evaluate (builtin-c3)");
    poly->add_option("--candidate", o.candidate_path, "candidate JSON {p, q:[q1..q5]}");
    poly->add_flag("--search", o.search, "multi-start search for a nontrivial solution");
    poly->add_option("--restarts", o.restarts, "search restarts")->check(CLI::PositiveNumber);
    poly->add_option("--tol", o.tol, "residual tolerance for the verdict");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "presets") return cmd_presets(o, out);
        if (name == "simulate") return cmd_simulate(o, out);
        if (name == "fit") return cmd_fit(o, out);
        if (name == "loss") return cmd_loss(o, out);
        if (name == "sweep") return cmd_sweep(o, out);
        if (name == "rate") return cmd_rate(o, out);
        return cmd_polysys(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace gmoe::cli
