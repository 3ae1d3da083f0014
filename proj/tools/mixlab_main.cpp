// mixlab: batch front end for chain simulation, couplings, renewal analysis,
// and correlation-bound verification. Configs are JSON; outputs are CSV/JSON
// with a .meta.json sidecar carrying the config hash, seed, and tool version.
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 bound violation.

#include <clocale>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixlab/mixlab.hpp"
#include "mixlab/serialize.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitViolation = 4;

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    unsigned threads = 0; // 0 = resolve from env / default 1
};

unsigned resolve_threads(const Options& opt) {
    if (opt.threads > 0) return opt.threads;
    if (const char* env = std::getenv("MIXLAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

json load_config(const Options& opt) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config file: " + opt.config_path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return j;
}

std::uint64_t require_seed(const json& cfg, const Options& opt) {
    if (opt.seed_override) return *opt.seed_override;
    if (!cfg.contains("seed")) throw ConfigError("stochastic command requires a seed");
    return cfg.at("seed").get<std::uint64_t>();
}

void write_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_sidecar(const std::string& path, const std::string& command, const json& effective_cfg,
                   std::optional<std::uint64_t> seed) {
    json meta;
    meta["command"] = command;
    meta["config_hash"] = mixlab::io::hex64(mixlab::io::fnv1a64(effective_cfg.dump()));
    if (seed) meta["seed"] = *seed;
    meta["tool_version"] = kVersion;
    write_file(path + ".meta.json", meta.dump(2) + "\n");
}

mixlab::Potential load_potential(const json& cfg) {
    json pj = cfg.at("potential");
    if (pj.is_string()) {
        const std::string path = pj.get<std::string>();
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open potential file: " + path);
        try {
            in >> pj;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("potential file is not valid JSON: ") + e.what());
        }
    }
    try {
        return mixlab::io::potential_from_json(pj);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid potential: ") + e.what());
    }
}

mixlab::TransitionKernel kernel_for_sampling(const mixlab::Potential& phi) {
    if (phi.normalized()) return mixlab::TransitionKernel::from_potential(phi);
    const auto check = mixlab::is_normalized(phi, 1e-9);
    if (!check.normalized)
        throw ConfigError("potential is not normalized (max row deviation " +
                          mixlab::io::format_double(check.max_deviation) +
                          "); run the normalize command first");
    return mixlab::TransitionKernel::from_potential(phi.with_normalized_flag(true));
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Options& opt) {
    json cfg = load_config(opt);
    const std::uint64_t seed = require_seed(cfg, opt);
    cfg["seed"] = seed;
    const mixlab::Potential phi = load_potential(cfg);
    const mixlab::TransitionKernel kernel = kernel_for_sampling(phi);
    mixlab::Context past = mixlab::io::context_from_json(cfg.at("past"), kernel.alphabet());
    const std::size_t steps = cfg.at("steps").get<std::size_t>();

    const mixlab::Trajectory traj = mixlab::sample_chain(kernel, past, steps, seed);
    std::ostringstream csv;
    csv << "seed,t,symbol\n";
    for (std::size_t t = 0; t < traj.samples.size(); ++t)
        csv << seed << "," << t << "," << kernel.alphabet().symbol(traj.samples[t]) << "\n";
    const std::string path = opt.out_dir + "/trajectory.csv";
    write_file(path, csv.str());
    write_sidecar(path, "simulate", cfg, seed);

    // Finite-memory kernels also report their stationary law.
    if (kernel.memory_order()) {
        const mixlab::StationaryMeasure pi = mixlab::stationary_measure(kernel);
        std::ostringstream dist;
        dist << "state,weight\n";
        const std::size_t asize = kernel.alphabet().size();
        for (std::size_t u = 0; u < pi.weights.size(); ++u) {
            std::string word(pi.order, '?');
            std::size_t rest = u;
            for (std::size_t pos = pi.order; pos-- > 0;) {
                word[pos] = kernel.alphabet().symbol(static_cast<int>(rest % asize));
                rest /= asize;
            }
            dist << word << "," << mixlab::io::format_double(pi.weights[u]) << "\n";
        }
        const std::string dist_path = opt.out_dir + "/stationary.csv";
        write_file(dist_path, dist.str());
        write_sidecar(dist_path, "simulate", cfg, seed);
    }
    return kExitOk;
}

int cmd_couple(const Options& opt) {
    json cfg = load_config(opt);
    const std::uint64_t seed = require_seed(cfg, opt);
    cfg["seed"] = seed;
    const unsigned threads = resolve_threads(opt);
    const mixlab::Potential phi = load_potential(cfg);
    const mixlab::TransitionKernel kernel = kernel_for_sampling(phi);
    const mixlab::Context x = mixlab::io::context_from_json(cfg.at("past_x"), kernel.alphabet());
    const mixlab::Context y = mixlab::io::context_from_json(cfg.at("past_y"), kernel.alphabet());
    const std::size_t steps = cfg.at("steps").get<std::size_t>();
    const std::size_t runs = cfg.value("runs", std::size_t{1});

    const mixlab::CoupledPath path0 =
        mixlab::sample_coupled_chain(kernel, x, y, steps, mixlab::SplitMix64::substream(seed, 0));
    std::ostringstream csv;
    csv << "t,u,v,clock\n";
    for (std::size_t t = 0; t < steps; ++t)
        csv << t << "," << kernel.alphabet().symbol(path0.u_samples[t]) << ","
            << kernel.alphabet().symbol(path0.v_samples[t]) << "," << path0.clock[t] << "\n";
    const std::string csv_path = opt.out_dir + "/coupled_path.csv";
    write_file(csv_path, csv.str());
    write_sidecar(csv_path, "couple", cfg, seed);

    // Maximal coupling of the two first-step rows, as a matrix.
    {
        std::vector<double> mu, nu;
        kernel.probability_row([&](std::int64_t j) { return x.at(j); }, mu);
        kernel.probability_row([&](std::int64_t j) { return y.at(j); }, nu);
        const mixlab::JointDistribution joint = mixlab::maximal_coupling(mu, nu);
        std::ostringstream mat;
        mat << "a,b,p\n";
        for (std::size_t a = 0; a < joint.size; ++a)
            for (std::size_t b = 0; b < joint.size; ++b)
                mat << kernel.alphabet().symbol(static_cast<int>(a)) << ","
                    << kernel.alphabet().symbol(static_cast<int>(b)) << ","
                    << mixlab::io::format_double(joint.at(a, b)) << "\n";
        const std::string mat_path = opt.out_dir + "/coupling_matrix.csv";
        write_file(mat_path, mat.str());
        write_sidecar(mat_path, "couple", cfg, seed);
    }

    // Disagreement frequencies P(T_n = 0) over all runs, with gamma*_n beside
    // them when the modulus is available.
    std::vector<std::vector<std::int64_t>> counts(std::max(1u, threads),
                                                  std::vector<std::int64_t>(steps, 0));
    mixlab::parallel_runs_indexed(runs, threads, [&](std::size_t r, unsigned wid) {
        const mixlab::CoupledPath p =
            mixlab::sample_coupled_chain(kernel, x, y, steps, mixlab::SplitMix64::substream(seed, r));
        for (std::size_t t = 0; t < steps; ++t)
            if (p.u_samples[t] != p.v_samples[t]) ++counts[wid][t];
    });
    json summary;
    summary["runs"] = runs;
    summary["p_disagree"] = json::array();
    summary["stderr"] = json::array();
    for (std::size_t t = 0; t < steps; ++t) {
        std::int64_t c = 0;
        for (const auto& local : counts) c += local[t];
        const double p = static_cast<double>(c) / static_cast<double>(runs);
        summary["p_disagree"].push_back(p);
        summary["stderr"].push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(runs)));
    }
    try {
        const mixlab::RenewalProfile prof = mixlab::renewal_profile(kernel.gamma(), steps);
        json gs = json::array();
        for (std::size_t t = 0; t < steps; ++t) gs.push_back(prof.gamma_star[t]);
        summary["gamma_star"] = gs;
    } catch (const std::exception&) {
        // modulus unavailable (for instance a deterministic kernel); skip
    }
    const std::string sum_path = opt.out_dir + "/disagreement.json";
    write_file(sum_path, summary.dump(2) + "\n");
    write_sidecar(sum_path, "couple", cfg, seed);
    return kExitOk;
}

int cmd_renewal(const Options& opt) {
    json cfg = load_config(opt);
    mixlab::GammaSequence gamma = [&] {
        try {
            return mixlab::io::gamma_from_json(cfg.at("gamma"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid gamma: ") + e.what());
        }
    }();
    const std::size_t n_max = cfg.at("n_max").get<std::size_t>();
    const std::size_t horizon = cfg.value("horizon", std::max<std::size_t>(n_max, 100));

    const mixlab::RenewalProfile prof = mixlab::renewal_profile(gamma, n_max);
    std::ostringstream csv;
    csv << "n,gamma_n,gamma_star_n,tau_pmf_n\n";
    for (std::size_t n = 0; n <= n_max; ++n)
        csv << n << "," << mixlab::io::format_double(prof.gamma[n]) << ","
            << mixlab::io::format_double(prof.gamma_star[n]) << ","
            << mixlab::io::format_double(prof.tau_pmf[n]) << "\n";
    const std::string path = opt.out_dir + "/renewal.csv";
    write_file(path, csv.str());
    write_sidecar(path, "renewal", cfg, std::nullopt);

    json cls = mixlab::io::classification_to_json(mixlab::classify_decay(gamma, horizon));
    cls["tau_infinity"] = prof.tau_infinity;
    cls["renewal_residual"] = prof.renewal_residual;
    const std::string cls_path = opt.out_dir + "/classification.json";
    write_file(cls_path, cls.dump(2) + "\n");
    write_sidecar(cls_path, "renewal", cfg, std::nullopt);
    return kExitOk;
}

int cmd_classify(const Options& opt) {
    json cfg = load_config(opt);
    mixlab::GammaSequence gamma = [&] {
        try {
            return mixlab::io::gamma_from_json(cfg.at("gamma"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid gamma: ") + e.what());
        }
    }();
    const std::size_t horizon = cfg.value("horizon", std::size_t{2000});
    const json cls = mixlab::io::classification_to_json(mixlab::classify_decay(gamma, horizon));
    const std::string path = opt.out_dir + "/classification.json";
    write_file(path, cls.dump(2) + "\n");
    write_sidecar(path, "classify", cfg, std::nullopt);
    return kExitOk;
}

int cmd_normalize(const Options& opt) {
    json cfg = load_config(opt);
    const mixlab::Potential phi = load_potential(cfg);
    const mixlab::NormalizationResult result = mixlab::normalize(phi);
    json out = mixlab::io::potential_to_json(result.psi);
    out["log_lambda"] = result.log_lambda;
    json rho = json::object();
    const std::size_t asize = result.alphabet.size();
    std::string key(result.order, '?');
    for (std::size_t idx = 0; idx < result.log_rho.size(); ++idx) {
        std::size_t rest = idx;
        for (std::size_t pos = result.order; pos-- > 0;) {
            key[pos] = result.alphabet.symbol(static_cast<int>(rest % asize));
            rest /= asize;
        }
        rho[key.empty() ? "" : key] = result.log_rho[idx];
    }
    out["log_rho"] = std::move(rho);
    out["max_row_deviation"] = mixlab::is_normalized(result.psi, 1e-10).max_deviation;
    const std::string path = opt.out_dir + "/normalized.json";
    write_file(path, out.dump(2) + "\n");
    write_sidecar(path, "normalize", cfg, std::nullopt);
    return kExitOk;
}

int cmd_verify(const Options& opt) {
    json cfg = load_config(opt);
    const std::string method_name = cfg.value("method", "exact");
    const bool monte_carlo = method_name == "montecarlo";
    if (!monte_carlo && method_name != "exact")
        throw ConfigError("method must be 'exact' or 'montecarlo'");
    std::uint64_t seed = 0;
    if (monte_carlo) {
        seed = require_seed(cfg, opt);
        cfg["seed"] = seed;
    } else if (cfg.contains("seed")) {
        seed = cfg.at("seed").get<std::uint64_t>();
    }
    const unsigned threads = resolve_threads(opt);
    const mixlab::Potential phi = load_potential(cfg);
    const mixlab::CylinderFunction f = [&] {
        try {
            return mixlab::io::cylinder_from_json(cfg.at("f"), phi.alphabet());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid f: ") + e.what());
        }
    }();
    const mixlab::CylinderFunction g = [&] {
        try {
            return mixlab::io::cylinder_from_json(cfg.at("g"), phi.alphabet());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid g: ") + e.what());
        }
    }();
    const std::size_t n_min = cfg.value("n_min", std::size_t{0});
    const std::size_t n_max = cfg.at("n_max").get<std::size_t>();
    const std::size_t runs = cfg.value("runs", std::size_t{100000});
    const double theta = cfg.value("theta", 0.5);
    const double gamma_scale = cfg.value("gamma_scale", 1.0);
    if (!(theta > 0.0) || !(theta < 1.0)) throw ConfigError("theta must lie in (0,1)");
    if (!(gamma_scale > 0.0)) throw ConfigError("gamma_scale must be positive");
    if (monte_carlo && runs < 1) throw ConfigError("runs must be >= 1");
    const auto schedule = mixlab::io::schedule_from_json(cfg.value("schedule", json()));

    const mixlab::BoundReport rep = mixlab::verify_bounds(
        phi, f, g, n_min, n_max,
        monte_carlo ? mixlab::MeasureMethod::MonteCarlo : mixlab::MeasureMethod::Exact, seed, runs,
        theta, schedule, gamma_scale, threads);

    std::ostringstream csv;
    csv << "n,measured,ci,sum_bound,c_bound,block_sum_bound,block_c_bound,holder,single_coord,"
           "violation\n";
    for (const auto& row : rep.rows) {
        csv << row.n << "," << mixlab::io::format_double(row.measured) << ","
            << mixlab::io::format_double(row.ci) << "," << mixlab::io::format_double(row.sum_bound)
            << "," << mixlab::io::format_double(row.c_bound) << ","
            << mixlab::io::format_double(row.block_sum_bound) << ","
            << mixlab::io::format_double(row.block_c_bound) << ","
            << mixlab::io::format_double(row.holder) << ","
            << mixlab::io::format_double(row.single_coord) << "," << (row.violation ? 1 : 0)
            << "\n";
    }
    const std::string path = opt.out_dir + "/bounds.csv";
    write_file(path, csv.str());
    write_sidecar(path, "verify", cfg, monte_carlo ? std::optional<std::uint64_t>(seed) : std::nullopt);

    json header;
    header["constant_c"] = rep.constant_c;
    header["block_constant"] = rep.block_constant;
    header["f_norm1"] = rep.f_norm1;
    header["g_norm_normalized"] = rep.g_norm_normalized;
    header["g_norm_block"] = rep.g_norm_block;
    header["g_theta"] = rep.g_theta;
    header["g_sup"] = rep.g_sup;
    header["theta"] = rep.theta;
    header["schedule"] = rep.schedule_desc;
    header["seed"] = seed;
    header["runs"] = rep.runs;
    header["clock_note"] = rep.clock_note;
    header["any_violation"] = rep.any_violation;
    const std::string hdr_path = opt.out_dir + "/bounds_header.json";
    write_file(hdr_path, header.dump(2) + "\n");
    write_sidecar(hdr_path, "verify", cfg, monte_carlo ? std::optional<std::uint64_t>(seed) : std::nullopt);

    return rep.any_violation ? kExitViolation : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    CLI::App app{"mixlab: chains with long memory, couplings, renewal bounds"};
    app.require_subcommand(1);

    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config file")->required();
        sub->add_option("--out", opt.out_dir, "output directory")->required();
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { opt.seed_override = v; }, "seed override");
        sub->add_option("--threads", opt.threads, "worker threads (default: MIXLAB_THREADS or 1)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "sample one chain trajectory");
    CLI::App* couple = app.add_subcommand("couple", "sample the coupled pair chain");
    CLI::App* renewal = app.add_subcommand("renewal", "dominating-chain profile and classification");
    CLI::App* verify = app.add_subcommand("verify", "measure correlations against the bounds");
    CLI::App* classify = app.add_subcommand("classify", "decay-regime report for a modulus");
    CLI::App* normalize = app.add_subcommand("normalize", "normalize a potential");
    for (CLI::App* sub : {simulate, couple, renewal, verify, classify, normalize}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (couple->parsed()) return cmd_couple(opt);
        if (renewal->parsed()) return cmd_renewal(opt);
        if (verify->parsed()) return cmd_verify(opt);
        if (classify->parsed()) return cmd_classify(opt);
        if (normalize->parsed()) return cmd_normalize(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}
