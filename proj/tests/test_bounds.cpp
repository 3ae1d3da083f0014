#include <doctest.h>

#include <cmath>
#include <vector>

#include "mixlab/bounds.hpp"

using namespace mixlab;

namespace {

TransitionKernel markov_kernel(double q00, double q11) {
    return TransitionKernel::from_stochastic_table(Alphabet("01"), 1,
                                                   {q00, 1.0 - q00, 1.0 - q11, q11});
}

/// Independent gamma* recursion for oracle convolutions.
std::vector<double> brute_gamma_star(const std::vector<double>& gamma, std::size_t n_max) {
    std::vector<std::vector<double>> dist(n_max + 1);
    dist[0] = {1.0};
    for (std::size_t t = 0; t < n_max; ++t) {
        dist[t + 1].assign(t + 2, 0.0);
        for (std::size_t j = 0; j <= t; ++j) {
            dist[t + 1][0] += dist[t][j] * gamma[j];
            dist[t + 1][j + 1] = dist[t][j] * (1.0 - gamma[j]);
        }
    }
    std::vector<double> gs(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) gs[n] = dist[n][0];
    return gs;
}

} // namespace

TEST_CASE("direct bound: finite memory, convolution against brute force") {
    // geometric variations: the sum bound is the convolution of var with gamma*
    const VariationSequence vars = VariationSequence::geometric(0.5, 0.5);
    const std::size_t n_max = 60;
    NormalizedBound bound(vars, n_max);

    std::vector<double> gamma(n_max + 1);
    for (std::size_t m = 0; m <= n_max; ++m) gamma[m] = 1.0 - std::exp(-vars.value(m));
    const std::vector<double> gs = brute_gamma_star(gamma, n_max);
    for (std::size_t n : {0u, 1u, 7u, 20u, 60u}) {
        double brute = 0.0;
        for (std::size_t k = 0; k <= n; ++k) brute += vars.value(k) * gs[n - k];
        CHECK(bound.sum_bound(1.0, 1.0, n) == doctest::Approx(brute).epsilon(1e-12));
    }
    CHECK(bound.constant() < kInf);

    // zero g-seminorm kills both bounds
    CHECK(bound.sum_bound(1.0, 0.0, 10) == 0.0);
    CHECK(bound.c_bound(1.0, 0.0, 10) == 0.0);
}

TEST_CASE("direct bound: finite-memory variations truncate the sum") {
    const VariationSequence vars = VariationSequence::from_table({2.0, 1.0, 0.0});
    NormalizedBound bound(vars, 50);
    // only k = 0,1 contribute
    std::vector<double> gamma(51);
    for (std::size_t m = 0; m <= 50; ++m) gamma[m] = 1.0 - std::exp(-vars.value(m));
    const std::vector<double> gs = brute_gamma_star(gamma, 50);
    const double expect = 2.0 * gs[20] + 1.0 * gs[19];
    CHECK(bound.sum_bound(1.0, 1.0, 20) == doctest::Approx(expect).epsilon(1e-12));
    // C = var_0 + max_k var_k / P(tau = k); here only k = 1 contributes:
    // P(tau=1) = gamma_0 so C = 2 + 1/gamma_0.
    CHECK(bound.constant() == doctest::Approx(2.0 + 1.0 / gamma[0]).epsilon(1e-12));
}

TEST_CASE("direct bound: non-summable variations are rejected") {
    CHECK_THROWS_AS(NormalizedBound(VariationSequence::polynomial(1.0, 0.9), 10),
                    std::domain_error);
}

TEST_CASE("bounds are monotone in the variation data") {
    const VariationSequence small = VariationSequence::geometric(0.4, 0.5);
    const VariationSequence large = VariationSequence::geometric(0.5, 0.6);
    NormalizedBound bs(small, 40), bl(large, 40);
    for (std::size_t n = 0; n <= 40; ++n) {
        CHECK(bs.sum_bound(1.0, 1.0, n) <= bl.sum_bound(1.0, 1.0, n) + 1e-12);
        CHECK(bs.profile().gamma_star[n] <= bl.profile().gamma_star[n] + 1e-12);
    }
}

TEST_CASE("two-state chain: exact correlation is dominated") {
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const CylinderFunction f = CylinderFunction::indicator_last(k.alphabet(), 0);
    const std::size_t n_max = 60;
    NormalizedBound bound(k.potential(), n_max);
    const double f1 = l1_norm(k, f);
    const double gn = g_seminorm(f, k.potential().variations());
    CHECK(f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(gn == doctest::Approx(1.0 / std::log(9.0)).epsilon(1e-12));
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double corr = std::abs(exact_correlation(k, f, f, n));
        CHECK(corr <= bound.sum_bound(f1, gn, n) + 1e-10);
        CHECK(corr <= bound.c_bound(f1, gn, n) + 1e-10);
    }
}

TEST_CASE("holder bound") {
    const GammaSequence zero = GammaSequence::zero();
    const RenewalProfile pz = renewal_profile(zero, 30);
    // gamma = 0: only the k = 0 term survives
    for (std::size_t n : {0u, 3u, 12u})
        CHECK(holder_bound(pz, 2.0, 3.0, 0.8, n) ==
              doctest::Approx(6.0 * std::pow(0.8, static_cast<double>(n))).epsilon(1e-13));

    // n = 0: ||f|| ||g|| regardless of gamma
    const RenewalProfile pc = renewal_profile(GammaSequence::constant(0.1), 30);
    CHECK(holder_bound(pc, 2.0, 3.0, 0.9, 0) == doctest::Approx(6.0));

    // direct-sum cross-check
    const double theta = 0.9;
    const std::size_t n = 10;
    double direct = 0.0;
    for (std::size_t kk = 0; kk <= n; ++kk)
        direct += std::pow(theta, static_cast<double>(n) - static_cast<double>(kk)) *
                  pc.gamma_star[kk];
    CHECK(holder_bound(pc, 1.0, 1.0, theta, n) == doctest::Approx(direct).epsilon(1e-13));

    CHECK_THROWS_AS(holder_bound(pc, 1.0, 1.0, 1.5, 3), std::invalid_argument);
}

TEST_CASE("single coordinate bound") {
    const RenewalProfile pc = renewal_profile(GammaSequence::constant(0.3), 10);
    CHECK(single_coordinate_bound(pc, 2.0, 0.0, 4) == 0.0);
    CHECK(single_coordinate_bound(pc, 2.0, 1.5, 0) == doctest::Approx(3.0));
    CHECK(single_coordinate_bound(pc, 2.0, 1.5, 5) == doctest::Approx(3.0 * 0.3).epsilon(1e-12));
}

TEST_CASE("auto schedule") {
    CHECK(auto_schedule(VariationSequence::geometric(1.0, 0.5)).is_linear());
    CHECK(auto_schedule(VariationSequence::polynomial(1.0, 3.0)).is_linear());
    CHECK(auto_schedule(VariationSequence::from_table({1.0, 0.2})).is_linear());
    CHECK_THROWS_AS(auto_schedule(VariationSequence::polynomial(1.0, 1.5)), std::domain_error);
    CHECK_THROWS_AS(auto_schedule(VariationSequence::polynomial(1.0, 2.0)), std::domain_error);
}

TEST_CASE("block bound: polynomial tails with exponent 4 stay finite") {
    const VariationSequence vars({0.5, 0.3}, {VariationSequence::TailKind::Polynomial, 0.3, 4.0});
    BlockBound bound(vars, BlockSchedule::linear(1), 50);
    CHECK(bound.constant() < kInf);
    double prev = kInf;
    for (std::size_t m = 0; m <= 50; ++m) {
        const double b = bound.sum_bound(1.0, 1.0, m);
        CHECK(b < kInf);
        CHECK(b >= 0.0);
        prev = b;
    }
    (void)prev;
}

TEST_CASE("block bound dominates the direct bound at unit blocks") {
    // Same variation data, gbar_k = 1 - exp(-3 tail_k) >= gamma_k pointwise,
    // and gamma* is monotone in gamma.
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const std::size_t n_max = 40;
    NormalizedBound direct(k.potential(), n_max);
    BlockBound block(k.potential(), BlockSchedule::linear(1), n_max);
    for (std::size_t n = 0; n <= n_max; ++n) {
        CHECK(block.profile().gamma_star[n] >= direct.profile().gamma_star[n] - 1e-12);
        CHECK(block.sum_bound(1.0, 1.0, n) >= direct.sum_bound(1.0, 1.0, n) - 1e-12);
    }
}

TEST_CASE("verify_bounds: exact two-state run is clean") {
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const CylinderFunction f = CylinderFunction::indicator_last(k.alphabet(), 0);
    const BoundReport rep =
        verify_bounds(k.potential(), f, f, 0, 50, MeasureMethod::Exact, 0);
    CHECK_FALSE(rep.any_violation);
    CHECK(rep.rows.size() == 51);
    CHECK(rep.constant_c < kInf);
    CHECK(rep.block_constant < kInf);
    for (const auto& row : rep.rows) {
        CHECK(row.measured <= row.sum_bound + 1e-10);
        CHECK(row.measured <= row.c_bound + 1e-10);
        CHECK(row.measured <= row.block_sum_bound + 1e-10);
        CHECK(row.measured <= row.holder + 1e-10);
        CHECK(row.measured <= row.single_coord + 1e-10);
    }
}

TEST_CASE("verify_bounds: constant f measures zero") {
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const CylinderFunction c = CylinderFunction::constant(k.alphabet(), 2.0);
    const CylinderFunction g = CylinderFunction::indicator_last(k.alphabet(), 0);
    const BoundReport rep = verify_bounds(k.potential(), c, g, 0, 10, MeasureMethod::Exact, 0);
    for (const auto& row : rep.rows) CHECK(std::abs(row.measured) < 1e-14);
    CHECK_FALSE(rep.any_violation);
}

TEST_CASE("verify_bounds: memoryless kernel measures zero everywhere") {
    TransitionKernel u = TransitionKernel::from_stochastic_table(Alphabet("01"), 0, {0.3, 0.7});
    const CylinderFunction f = CylinderFunction::indicator_last(u.alphabet(), 0);
    const BoundReport rep = verify_bounds(u.potential(), f, f, 1, 10, MeasureMethod::Exact, 0);
    for (const auto& row : rep.rows) CHECK(std::abs(row.measured) < 1e-14);
    CHECK_FALSE(rep.any_violation);
}

TEST_CASE("verify_bounds: corrupted modulus is detected") {
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const CylinderFunction f = CylinderFunction::indicator_last(k.alphabet(), 0);
    const BoundReport rep = verify_bounds(k.potential(), f, f, 0, 80, MeasureMethod::Exact, 0,
                                          100000, 0.5, std::nullopt, /*gamma_scale=*/0.2);
    CHECK(rep.any_violation);
}

TEST_CASE("verify_bounds: non-normalized input goes through its normalization") {
    // order-1 weights W = ((1,2),(3,4)): not normalized; the report still
    // produces finite bounds and clean dominance.
    Alphabet a("01");
    Potential phi = Potential::table(
        a, 1, {std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0)});
    const CylinderFunction f = CylinderFunction::indicator_last(a, 0);
    const BoundReport rep = verify_bounds(phi, f, f, 0, 40, MeasureMethod::Exact, 0);
    CHECK_FALSE(rep.any_violation);
    CHECK(rep.constant_c < kInf);
    CHECK(rep.block_constant < kInf);
}

TEST_CASE("verify_bounds: Monte-Carlo measurement stays inside the bounds") {
    TransitionKernel k = markov_kernel(0.9, 0.8);
    const CylinderFunction f = CylinderFunction::indicator_last(k.alphabet(), 0);
    const BoundReport rep = verify_bounds(k.potential(), f, f, 0, 12, MeasureMethod::MonteCarlo,
                                          777, 20000);
    CHECK_FALSE(rep.any_violation);
    // Monte-Carlo means agree with the exact correlation within the interval
    for (const auto& row : rep.rows) {
        const double exact = std::abs(exact_correlation(k, f, f, row.n));
        CHECK(std::abs(row.measured - exact) <= row.ci + 1e-9);
    }
    // deterministic across thread counts
    const BoundReport rep2 = verify_bounds(k.potential(), f, f, 0, 12, MeasureMethod::MonteCarlo,
                                           777, 20000, 0.5, std::nullopt, 1.0, 4);
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        CHECK(rep.rows[i].measured == rep2.rows[i].measured);
}
