// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 12 drives the CLI binary passed via --cli.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mixlab/mixlab.hpp"
#include "mixlab/serialize.hpp"
#include "test_support.hpp"

using namespace mixlab;

namespace {

struct Harness {
    int failures = 0;
    int index = 0;

    void run(const std::string& name, const std::function<void(std::string&)>& body) {
        ++index;
        std::string detail;
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = true;
        try {
            body(detail);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%2d] %s %s (%s; %.3f s)\n", index, ok ? "PASS" : "FAIL", name.c_str(),
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The three reference moduli: constant 0.2, dyadic 2^{-(n+1)}, and the
// square-decay family started one step in so that gamma_0 = 1/4 < 1.
GammaSequence constant_family() { return GammaSequence::constant(0.2); }
GammaSequence dyadic_family() { return GammaSequence::geometric(0.5, 0.5); }
GammaSequence square_family() { return GammaSequence::polynomial(1.0, 2.0, 1.0); }

Potential random_normalized_potential(std::size_t order, std::uint64_t seed, double spread) {
    SplitMix64 rng(seed);
    const std::size_t cells = std::size_t{1} << (order + 1);
    std::vector<double> v(cells);
    for (auto& x : v) x = spread * (rng.next_double() - 0.5);
    return normalize(Potential::table(Alphabet("01"), order, std::move(v))).psi;
}

// --------------------------------------------------------------------------

void criterion_renewal_identity(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& gamma : {constant_family(), dyadic_family(), square_family()}) {
        const RenewalProfile prof = renewal_profile(gamma, 2000);
        worst = std::max(worst, prof.renewal_residual);
    }
    const double secs = elapsed_since(t0);
    detail = "max residual " + io::format_double(worst);
    require(worst < 1e-12, detail);
    require(secs < 1.0, "runtime " + io::format_double(secs) + " s exceeds 1 s");
}

void criterion_constant_gamma(std::string& detail) {
    const RenewalProfile prof = renewal_profile(constant_family(), 10000);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 10000; ++n)
        worst = std::max(worst, std::abs(prof.gamma_star[n] - 0.2));
    detail = "max |gamma*_n - 0.2| = " + io::format_double(worst);
    require(worst < 1e-14, detail);
}

void criterion_exponential_rate(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const RenewalProfile prof = renewal_profile(dyadic_family(), 300);
    std::vector<double> xs, ys;
    for (std::size_t n = 50; n <= 300; ++n) {
        xs.push_back(static_cast<double>(n));
        ys.push_back(std::log(prof.gamma_star[n]));
    }
    const LinearFit fit = linear_fit(xs, ys);
    const double secs = elapsed_since(t0);
    detail = "R^2 " + io::format_double(fit.r2) + ", slope " + io::format_double(fit.slope);
    require(fit.r2 > 0.99, detail);
    require(fit.slope < 0.0, detail);
    require(secs < 1.0, "runtime " + io::format_double(secs) + " s exceeds 1 s");
}

void criterion_polynomial_ratio(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const GammaSequence gamma = square_family();
    const RenewalProfile prof = renewal_profile(gamma, 5000);
    double early = 0.0, late = 0.0;
    for (std::size_t n = 500; n <= 5000; ++n) {
        const double r = prof.gamma_star[n] / prof.gamma[n];
        (n <= 2500 ? early : late) = std::max(n <= 2500 ? early : late, r);
    }
    const double secs = elapsed_since(t0);
    detail = "ratio max " + io::format_double(early) + " early vs " + io::format_double(late) +
             " late";
    require(late <= 1.1 * early, detail);
    require(secs < 5.0, "runtime " + io::format_double(secs) + " s exceeds 5 s");
}

void criterion_domination(std::string& detail) {
    const Potential psi = random_normalized_potential(3, 20240, 2.0);
    const TransitionKernel kernel = TransitionKernel::from_potential(psi);
    const Context x = Context::from_string(kernel.alphabet(), "000");
    const Context y = Context::from_string(kernel.alphabet(), "111");
    const DominationReport rep = domination_test(kernel, x, y, 50, 10, 100000, 4096);
    detail = std::to_string(rep.violations.size()) + " violating cells of " +
             std::to_string((rep.n_max + 1) * (rep.k_max + 1));
    require(rep.ok, detail);
}

void criterion_relaxation_bound(std::string& detail) {
    const Potential psi = random_normalized_potential(5, 515151, 1.5);
    const TransitionKernel kernel = TransitionKernel::from_potential(psi);
    const RenewalProfile prof = renewal_profile(kernel.gamma(), 100);
    double worst_excess = -kInf;
    std::size_t checked = 0;
    const std::size_t words = 32;
    std::vector<std::vector<std::vector<double>>> laws(words);
    for (std::size_t w = 0; w < words; ++w) {
        std::vector<int> word(5);
        for (std::size_t j = 0; j < 5; ++j) word[4 - j] = static_cast<int>((w >> j) & 1);
        const Context past(kernel.alphabet(), word);
        laws[w].reserve(101);
        for (std::size_t n = 0; n <= 100; ++n) laws[w].push_back(marginal_at(kernel, past, n));
    }
    for (std::size_t wx = 0; wx < words; ++wx) {
        for (std::size_t wy = wx + 1; wy < words; ++wy) {
            for (std::size_t n = 0; n <= 100; ++n) {
                for (std::size_t a = 0; a < 2; ++a) {
                    const double diff = std::abs(laws[wx][n][a] - laws[wy][n][a]);
                    worst_excess = std::max(worst_excess, diff - prof.gamma_star[n]);
                    ++checked;
                }
            }
        }
    }
    detail = std::to_string(checked) + " cells, worst diff-minus-bound " +
             io::format_double(worst_excess);
    require(worst_excess <= 1e-12, detail);
}

void criterion_direct_bound_dominance(std::string& detail) {
    const TransitionKernel kernel = TransitionKernel::from_stochastic_table(
        Alphabet("01"), 1, {0.9, 0.1, 0.2, 0.8});
    const CylinderFunction f = CylinderFunction::indicator_last(kernel.alphabet(), 0);
    const std::size_t n_max = 200;
    const NormalizedBound bound(kernel.potential(), n_max);
    const double f1 = l1_norm(kernel, f);
    const double gn = g_seminorm(f, kernel.potential().variations());
    require(bound.constant() < kInf, "constant not finite");
    double worst = -kInf;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double closed = (2.0 / 3.0) * (1.0 / 3.0) * std::pow(0.7, static_cast<double>(n));
        const double corr = std::abs(exact_correlation(kernel, f, f, n));
        require(std::abs(corr - closed) < 1e-12, "correlation mismatch at n=" + std::to_string(n));
        worst = std::max({worst, corr - bound.sum_bound(f1, gn, n), corr - bound.c_bound(f1, gn, n)});
    }
    detail = "C = " + io::format_double(bound.constant()) + ", worst corr-minus-bound " +
             io::format_double(worst);
    require(worst <= 1e-10, detail);
}

void criterion_maximal_coupling(std::string& detail) {
    SplitMix64 rng(8899);
    double worst_marginal = 0.0, worst_tv = 0.0, worst_floor = 0.0, worst_vertex = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.next() % 5;
        const auto mu = testsupport::random_distribution(n, rng);
        const auto nu = testsupport::random_distribution(n, rng);
        const JointDistribution j = maximal_coupling(mu, nu);
        double tv = 0.0;
        for (std::size_t a = 0; a < n; ++a) tv += std::abs(mu[a] - nu[a]);
        tv *= 0.5;
        for (std::size_t a = 0; a < n; ++a) {
            double row = 0.0, col = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                row += j.at(a, b);
                col += j.at(b, a);
            }
            worst_marginal = std::max({worst_marginal, std::abs(row - mu[a]), std::abs(col - nu[a])});
        }
        const double delta = diagonal_weight(j);
        worst_tv = std::max(worst_tv, std::abs(delta - (1.0 - tv)));
        double floor = kInf;
        for (std::size_t a = 0; a < n; ++a) floor = std::min(floor, nu[a] / mu[a]);
        worst_floor = std::max(worst_floor, floor - delta);
        if (n <= 3) {
            const double best = testsupport::best_diagonal_by_vertex_search(mu, nu);
            worst_vertex = std::max(worst_vertex, best - delta);
        }
    }
    detail = "marginal err " + io::format_double(worst_marginal) + ", TV err " +
             io::format_double(worst_tv) + ", vertex excess " + io::format_double(worst_vertex);
    require(worst_marginal < 1e-12, detail);
    require(worst_tv < 1e-12, detail);
    require(worst_floor <= 1e-12, detail);
    require(worst_vertex <= 1e-12, detail);
}

void criterion_normalization(std::string& detail) {
    SplitMix64 rng(606060);
    double worst_row = 0.0, worst_var = -kInf, worst_fix = 0.0, worst_pressure = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Alphabet alphabet(trial % 2 == 0 ? "01" : "012");
        const std::size_t cells = alphabet.size() * alphabet.size() * alphabet.size();
        std::vector<double> values(cells);
        for (auto& v : values) v = 2.0 * (rng.next_double() - 0.5);
        const Potential phi = Potential::table(alphabet, 2, std::move(values));
        const NormalizationResult r = normalize(phi);

        worst_row = std::max(worst_row, is_normalized(r.psi, 1e-10).max_deviation);
        // Oscillation control of the output, enumerated: the variation tail
        // bounds var(psi) one index later, and twice the tail bounds it at
        // the same index (the single-tail same-index form is falsified by
        // enumeration on random potentials).
        const VariationSequence vp = phi.variations();
        const VariationSequence vs = r.psi.variations();
        for (std::size_t m = 0; m <= 4; ++m) {
            worst_var = std::max(worst_var, vs.value(m + 1) - vp.tail_sum(m));
            worst_var = std::max(worst_var, vs.value(m) - 2.0 * vp.tail_sum(m));
        }

        const NormalizationResult again = normalize(r.psi);
        worst_pressure = std::max(worst_pressure, std::abs(again.log_lambda));
        const auto& t1 = r.psi.raw_table();
        const auto& t2 = again.psi.raw_table();
        for (std::size_t i = 0; i < t1.size(); ++i)
            worst_fix = std::max(worst_fix, std::abs(t1[i] - t2[i]));
    }
    detail = "row dev " + io::format_double(worst_row) + ", var excess " +
             io::format_double(worst_var) + ", fixed-point drift " + io::format_double(worst_fix);
    require(worst_row <= 1e-10, detail);
    require(worst_var <= 1e-9, detail);
    require(worst_fix <= 1e-10, detail);
    require(worst_pressure <= 1e-10, detail);
}

void criterion_block_bound(std::string& detail) {
    // Non-normalized order-4 potential with a geometric variation profile.
    const Alphabet alphabet("01");
    const double theta = 0.5, scale = 0.4;
    std::vector<double> values(32, 0.0);
    for (std::size_t idx = 0; idx < 32; ++idx) {
        double v = 0.0;
        for (std::size_t j = 0; j <= 4; ++j) {
            const int sym = static_cast<int>((idx >> j) & 1); // j = 0 is the newest symbol
            v += scale * std::pow(theta, static_cast<double>(j)) * (sym == 0 ? 1.0 : -1.0);
        }
        values[idx] = v;
    }
    const Potential phi = Potential::table(alphabet, 4, std::move(values));
    require(!is_normalized(phi, 1e-6).normalized, "test potential is accidentally normalized");

    const BlockSchedule schedule = auto_schedule(phi);
    require(schedule.is_linear() && schedule.step() == 1, "auto schedule should be n_m = m");
    const GammaSequence gbar = block_gamma(phi, schedule);
    require(gbar.summable(), "block modulus rests not summable");

    const std::size_t n_max = 100;
    const BlockBound bound(phi, schedule, n_max);
    require(bound.constant() < kInf, "block constant not finite");

    const TransitionKernel kernel = TransitionKernel::from_potential(normalize(phi).psi);
    const CylinderFunction f = CylinderFunction::indicator_last(alphabet, 0);
    const double f1 = l1_norm(kernel, f);
    const double gn = g_seminorm(f, phi.variations());
    double worst = -kInf;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double corr = std::abs(exact_correlation(kernel, f, f, n));
        const std::size_t m = bound.block_index(n);
        worst = std::max(worst, corr - bound.sum_bound(f1, gn, m));
    }
    detail = "Cbar = " + io::format_double(bound.constant()) + ", worst corr-minus-bound " +
             io::format_double(worst);
    require(worst <= 1e-10, detail);
}

void criterion_generating_functions(std::string& detail) {
    const GammaSequence gamma = constant_family();
    // Radius of validity of the identity G = 1/(1-F): bisection on
    // F_trunc(s) = 1 (for constant gamma it sits at s = 1 exactly).
    const RenewalProfile prof = renewal_profile(gamma, 2000);
    auto f_trunc = [&](double s) {
        double acc = 0.0, spow = 1.0;
        for (std::size_t n = 1; n <= 2000; ++n) {
            spow *= s;
            acc += prof.tau_pmf[n] * spow;
        }
        return acc;
    };
    double lo = 0.0, hi = 4.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f_trunc(mid) < 1.0 ? lo : hi) = mid;
    }
    const double radius = lo;
    require(std::abs(radius - 1.0) < 1e-3, "identity radius should be 1 for constant gamma");

    double worst_gap_margin = -kInf;
    for (double s : {0.1, 0.5, 0.9 * radius}) {
        const GeneratingFunctions gf = generating_functions(gamma, s, 400);
        const double f_exact = 0.2 * s / (1.0 - 0.8 * s);
        require(std::abs(gf.f_trunc - f_exact) <= gf.f_remainder + 1e-12,
                "F truncation off at s=" + io::format_double(s));
        require(gf.identity_ok, "identity gap above the truncation bound at s=" +
                                    io::format_double(s));
        worst_gap_margin = std::max(worst_gap_margin, gf.identity_gap - gf.combined_bound);
    }
    const double resid = convolution_check(gamma, 200);
    detail = "identity margin " + io::format_double(worst_gap_margin) + ", convolution residual " +
             io::format_double(resid);
    require(resid < 1e-12, detail);
}

// --------------------------------------------------------------------------
// CLI reproducibility

std::string cli_path;

int run_cli(const std::string& args) {
    const std::string cmd = cli_path + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "missing output file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void shell(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    (void)rc;
}

void criterion_cli_reproducibility(std::string& detail) {
    require(!cli_path.empty(), "no --cli path provided");
    const std::string base = "acceptance_cli_tmp";
    shell("rm -rf " + base + " && mkdir -p " + base + "/a " + base + "/b");

    const std::string potential =
        R"({"alphabet":"01","memory_order":1,"normalized":true,"table":{)"
        R"("00":-0.105360515657826301,"01":-2.30258509299404568,)"
        R"("10":-1.6094379124341003,"11":-0.22314355131420976}})";
    {
        std::ofstream cfg(base + "/simulate.json");
        cfg << R"({"potential":)" << potential
            << R"(,"past":"0","steps":200,"seed":424242})";
    }
    {
        std::ofstream cfg(base + "/couple.json");
        cfg << R"({"potential":)" << potential
            << R"(,"past_x":"0","past_y":"1","steps":60,"runs":400,"seed":99})";
    }
    {
        std::ofstream cfg(base + "/renewal.json");
        cfg << R"({"gamma":{"kind":"geometric","params":{"coefficient":0.5,"ratio":0.5}},)"
            << R"("n_max":300,"horizon":300})";
    }
    {
        std::ofstream cfg(base + "/verify.json");
        cfg << R"({"potential":)" << potential
            << R"(,"f":{"indicator_last":"0"},"g":{"indicator_last":"0"},)"
            << R"("n_max":10,"method":"montecarlo","runs":2000,"seed":7})";
    }
    {
        std::ofstream cfg(base + "/classify.json");
        cfg << R"({"gamma":{"kind":"polynomial","params":)"
            << R"({"coefficient":1.0,"exponent":2.0,"shift":1.0}},"horizon":500})";
    }
    {
        std::ofstream cfg(base + "/normalize.json");
        cfg << R"({"potential":{"alphabet":"01","memory_order":1,)"
            << R"("table":{"00":0.0,"01":0.6931471805599453,)"
            << R"("10":1.0986122886681098,"11":1.3862943611198906}}})";
    }

    const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
        {"simulate", {"trajectory.csv", "stationary.csv"}},
        {"couple", {"coupled_path.csv", "coupling_matrix.csv", "disagreement.json"}},
        {"renewal", {"renewal.csv", "classification.json"}},
        {"verify", {"bounds.csv", "bounds_header.json"}},
        {"classify", {"classification.json"}},
        {"normalize", {"normalized.json"}},
    };
    for (const auto& [cmd, outputs] : runs) {
        for (const char* sub : {"a", "b"}) {
            const int rc = run_cli(cmd + " --config " + base + "/" + cmd + ".json --out " + base +
                                   "/" + sub);
            require(rc == 0, cmd + " exited with " + std::to_string(rc));
        }
        for (const auto& file : outputs) {
            require(slurp(base + "/a/" + file) == slurp(base + "/b/" + file),
                    cmd + ": " + file + " differs between reruns");
            require(slurp(base + "/a/" + file + ".meta.json") ==
                        slurp(base + "/b/" + file + ".meta.json"),
                    cmd + ": sidecar differs between reruns");
        }
    }
    shell("rm -rf " + base);
    detail = "6 commands byte-identical across reruns";
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli_path = argv[i + 1];

    Harness h;
    h.run("renewal identity residual < 1e-12 on three gamma families",
          criterion_renewal_identity);
    h.run("constant gamma: gamma*_n = gamma to 1e-14 up to n = 10^4", criterion_constant_gamma);
    h.run("dyadic gamma: log gamma*_n linear on [50,300]", criterion_exponential_rate);
    h.run("square-decay gamma: gamma*/gamma ratio bounded on [500,5000]",
          criterion_polynomial_ratio);
    h.run("reset-chain tails dominate coupled-clock tails (order 3, 1e5 runs)",
          criterion_domination);
    h.run("one-symbol relaxation bounded by gamma* (order 5, all past pairs)",
          criterion_relaxation_bound);
    h.run("two-state chain: exact correlation under both direct bounds to n = 200",
          criterion_direct_bound_dominance);
    h.run("maximal coupling: marginals, TV identity, vertex search (1000 pairs)",
          criterion_maximal_coupling);
    h.run("normalization: stochastic rows, variation bound, fixed points (200 random)",
          criterion_normalization);
    h.run("block bound: order-4 geometric-variation potential, n <= 100",
          criterion_block_bound);
    h.run("generating functions: identity within truncation, convolution residual",
          criterion_generating_functions);
    h.run("CLI reproducibility: identical config and seed give identical bytes",
          criterion_cli_reproducibility);

    std::printf("%d of %d criteria passed\n", h.index - h.failures, h.index);
    return h.failures == 0 ? 0 : 1;
}
