#include "nsqmc/errors.hpp"
#include "nsqmc/lattice.hpp"
#include "nsqmc/normal.hpp"
#include "nsqmc/rng.hpp"
#include "nsqmc/weights.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

using namespace nsqmc;

namespace {

/// Exhaustive subset-sum evaluation of (e^sh)^2 for small s.
double brute_force_error_sq(const LatticeRule& rule, const PODWeights& weights,
                            int s, const std::vector<double>& table) {
    const int N = rule.N;
    double total = 0.0;
    for (int mask = 1; mask < (1 << s); ++mask) {
        std::vector<int> subset;
        for (int j = 0; j < s; ++j)
            if (mask & (1 << j)) subset.push_back(j + 1);
        double gamma_u = weights.gamma_order(static_cast<int>(subset.size()));
        for (int j : subset) gamma_u *= weights.gamma_j[j - 1];
        double point_sum = 0.0;
        for (int i = 1; i <= N; ++i) {
            double prod = 1.0;
            for (int j : subset)
                prod *= table[static_cast<long>(i) * rule.z[j - 1] % N];
            point_sum += prod;
        }
        total += gamma_u / N * point_sum;
    }
    return total;
}

/// Composite-Simpson evaluation of the three weight-space integrals with a
/// shared truncation, independent of the production quadrature.
double theta_composite_oracle(double f, double a, long panels) {
    const double tstar = 14.0;
    auto simpson = [&](auto&& fn, double lo, double hi) {
        const double h = (hi - lo) / panels;
        double acc = fn(lo) + fn(hi);
        for (long k = 1; k < panels; ++k)
            acc += fn(lo + k * h) * (k % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    };
    const double c = inv_norm_cdf(f);
    const double d = inv_norm_cdf(1.0 - f);
    const double i1 = simpson(
        [&](double t) { return (norm_cdf(t) - f) * std::exp(2 * a * std::abs(t)); },
        c, tstar);
    const double i2 = simpson(
        [&](double t) {
            return (norm_cdf(t) - 1.0 + f) * std::exp(2 * a * std::abs(t));
        },
        d, tstar);
    const double i3 = simpson(
        [&](double t) {
            const double phi = norm_cdf(t);
            return phi * phi * std::exp(2 * a * std::abs(t));
        },
        -tstar, tstar);
    return i1 + i2 - i3;
}

PODWeights random_weights(int s, Xoshiro256& rng) {
    std::vector<double> gamma(s), a(s);
    for (int j = 0; j < s; ++j) {
        gamma[j] = 0.05 + rng.uniform01();
        a[j] = 0.35;
    }
    return PODWeights::explicit_weights(0.5 + 0.5 * (0.1 + 0.9 * rng.uniform01()),
                                        std::move(gamma), std::move(a));
}

} // namespace

TEST_CASE("inv_norm_cdf: symmetry, accuracy and round trip") {
    CHECK(inv_norm_cdf(0.5) == 0.0);
    CHECK(inv_norm_cdf(0.975) == doctest::Approx(1.959963985).epsilon(1e-9));
    CHECK_THROWS_AS(inv_norm_cdf(0.0), std::invalid_argument);
    CHECK_THROWS_AS(inv_norm_cdf(1.0), std::invalid_argument);
    CHECK_THROWS_AS(inv_norm_cdf(-0.5), std::invalid_argument);

    Xoshiro256 rng(101);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform01();
        if (v == 0.0) continue;
        CHECK(inv_norm_cdf(1.0 - v) ==
              doctest::Approx(-inv_norm_cdf(v)).epsilon(1e-12));
    }

    // round trip over a uniform 10^6 grid spanning [1e-15, 1-1e-15]
    double worst = 0.0;
    const long n = 1000000;
    for (long i = 0; i <= n; ++i) {
        const double v = 1e-15 + (1.0 - 2e-15) * static_cast<double>(i) / n;
        worst = std::max(worst, std::abs(norm_cdf(inv_norm_cdf(v)) - v));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("euler_totient") {
    CHECK(euler_totient(1) == 0); // empty candidate range
    CHECK(euler_totient(1009) == 1008);
    CHECK(euler_totient(12) == 4);
    CHECK(coprime_candidates(12) == std::vector<int>{1, 5, 7, 11});
    CHECK(coprime_candidates(7).size() == 6);
}

TEST_CASE("riemann_zeta and rho_factor") {
    CHECK(riemann_zeta(2.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
    CHECK(riemann_zeta(1.5) == doctest::Approx(2.6123753486854883).epsilon(1e-12));
    CHECK(riemann_zeta(4.0) ==
          doctest::Approx(std::pow(M_PI, 4) / 90.0).epsilon(1e-12));
    CHECK_THROWS_AS(riemann_zeta(1.0), std::invalid_argument);
    CHECK_THROWS_AS(rho_factor(0.5, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(rho_factor(0.7, 0.0), std::invalid_argument);

    // lambda = 1: eta = 1/4, rho = 2 (sqrt(2 pi) e^{4a^2} / (pi^{3/2} 3/16)) zeta(3/2)
    const double a = 0.21;
    const double inner =
        std::sqrt(2.0 * M_PI) * std::exp(4.0 * a * a) /
        (std::pow(M_PI, 1.5) * 0.75 * 0.25);
    CHECK(rho_factor(1.0, a) ==
          doctest::Approx(2.0 * inner * riemann_zeta(1.5)).epsilon(1e-12));

    // step-by-step oracle at (0.55, 0.1507)
    const double lambda = 0.55, a2 = 0.1507;
    const double eta = (2 * lambda - 1) / (4 * lambda);
    double value = std::sqrt(2.0 * M_PI);
    value *= std::exp(a2 * a2 / eta);
    value /= std::pow(M_PI, 2.0 - 2.0 * eta);
    value /= (1.0 - eta);
    value /= eta;
    value = std::pow(value, lambda);
    value *= 2.0 * riemann_zeta(lambda + 0.5);
    CHECK(rho_factor(lambda, a2) == doctest::Approx(value).epsilon(1e-10));
}

TEST_CASE("choose_lambda branches and choose_a") {
    CHECK(choose_lambda(0.7198, 0.05) ==
          doctest::Approx(0.7198 / (2.0 - 0.7198)).epsilon(1e-15));
    CHECK(choose_lambda(0.5, 0.05) ==
          doctest::Approx(1.0 / 1.9).epsilon(1e-15));
    CHECK(choose_lambda(1.0, 0.05) == 1.0);
    CHECK(choose_lambda(2.0 / 3.0, 0.25) == doctest::Approx(1.0 / 1.5));
    CHECK_THROWS_AS(choose_lambda(0.0, 0.05), ConfigError);
    CHECK_THROWS_AS(choose_lambda(0.5, 0.6), ConfigError);

    CHECK(choose_a(1.0) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-15));
    CHECK(choose_a(0.55) ==
          doctest::Approx(std::sqrt(0.1 / 4.4)).epsilon(1e-15));
    CHECK_THROWS_AS(choose_a(0.5), ConfigError);
}

TEST_CASE("theta kernel: symmetry, oracle and table") {
    const double a = choose_a(1.0); // 0.35355...
    CHECK_THROWS_AS(theta_kernel(0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(theta_kernel(1.0, a), std::invalid_argument);

    Xoshiro256 rng(303);
    for (int i = 0; i < 20; ++i) {
        const double f = rng.uniform01();
        if (f == 0.0) continue;
        CHECK(std::abs(theta_kernel(f, a) - theta_kernel(1.0 - f, a)) <= 1e-10);
    }

    // independent composite-Simpson evaluation of the three-integral form
    CHECK(std::abs(theta_kernel(0.5, 0.3536) -
                   theta_composite_oracle(0.5, 0.3536, 1000000)) <= 1e-8);
    CHECK(std::abs(theta_kernel(0.25, 0.1507) -
                   theta_composite_oracle(0.25, 0.1507, 1000000)) <= 1e-8);
    CHECK(std::abs(theta_kernel(0.0, 0.1507) -
                   theta_composite_oracle(1e-14, 0.1507, 1000000)) <= 1e-7);

    const std::vector<double> table = theta_table(16, a);
    for (int k = 1; k < 16; ++k)
        CHECK(table[k] == doctest::Approx(table[16 - k]).epsilon(1e-14));
    // grid symmetry holds for values computed independently too
    for (int k = 1; k < 8; ++k)
        CHECK(std::abs(theta_kernel(k / 16.0, a) -
                       theta_kernel((16.0 - k) / 16.0, a)) <= 1e-10);
}

TEST_CASE("POD weights: reconstruction matches the closed form") {
    Eigen::VectorXd b(10);
    for (int j = 0; j < 10; ++j) b[j] = 0.8 * std::pow(j + 1.0, -1.4);
    const PODWeights weights = PODWeights::from_b(b, 0.75, 0.05);
    CHECK(weights.lambda_star == doctest::Approx(0.75 / 1.25).epsilon(1e-15));
    for (double aj : weights.a)
        CHECK(aj == doctest::Approx(choose_a(weights.lambda_star)).epsilon(1e-15));

    CHECK(weights.gamma_order(0) == 1.0); // gamma_emptyset = 1

    Xoshiro256 rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> subset;
        for (int j = 1; j <= 10 && subset.size() < 6; ++j)
            if (rng.uniform01() < 0.4) subset.push_back(j);
        if (subset.empty()) subset.push_back(1 + (trial % 10));
        const double rec = weights.gamma_subset(subset);
        const double direct = weights.gamma_subset_direct(subset);
        CHECK(rec == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("shift-averaged error: single dimension and degenerate weights") {
    const int N = 13;
    LatticeRule rule{N, {5}};
    const double a = 0.3;
    const std::vector<double> table = theta_table(N, a);
    const PODWeights weights =
        PODWeights::explicit_weights(0.8, {0.37}, {a});

    double expected = 0.0;
    for (int i = 1; i <= N; ++i)
        expected += table[static_cast<long>(i) * 5 % N];
    expected *= weights.gamma_order(1) * 0.37 / N;
    CHECK(shift_avg_error_sq(rule, weights, 1, table) ==
          doctest::Approx(expected).epsilon(1e-13));

    const PODWeights zero = PODWeights::explicit_weights(0.8, {0.0}, {a});
    CHECK(shift_avg_error_sq(rule, zero, 1, table) == 0.0);
}

TEST_CASE("shift-averaged error equals the exhaustive subset sum") {
    const int N = 7;
    Xoshiro256 rng(505);
    const std::vector<double> table = theta_table(N, 0.35);
    for (int trial = 0; trial < 50; ++trial) {
        const int s = 1 + static_cast<int>(rng.next() % 4);
        std::vector<int> z;
        const auto candidates = coprime_candidates(N);
        for (int j = 0; j < s; ++j)
            z.push_back(candidates[rng.next() % candidates.size()]);
        const LatticeRule rule{N, z};
        const PODWeights weights = random_weights(s, rng);
        const double dp = shift_avg_error_sq(rule, weights, s, table);
        const double brute = brute_force_error_sq(rule, weights, s, table);
        CHECK(dp == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("CBC: first dimension is the argmin of the theta sum") {
    // In one dimension every coprime z generates the same uniform grid, so
    // all candidates tie exactly and the smallest one must win.
    const int N = 16;
    Eigen::VectorXd b(1);
    b << 0.7;
    const PODWeights weights = PODWeights::from_b(b, 0.9, 0.05);
    const std::vector<double> table = theta_table(N, weights.a[0]);
    const LatticeRule rule = cbc_construct(N, 1, weights, table);
    CHECK(rule.z[0] == 1);

    // value-level argmin: the chosen sum is minimal up to roundoff
    auto theta_sum = [&](int z) {
        double acc = 0.0;
        for (int i = 1; i <= N; ++i) acc += table[static_cast<long>(i) * z % N];
        return acc;
    };
    for (int z : coprime_candidates(N))
        CHECK(theta_sum(rule.z[0]) <= theta_sum(z) + 1e-12);
}

TEST_CASE("CBC matches an exhaustive per-component scan at s=3, N=7") {
    const int N = 7;
    Xoshiro256 rng(606);
    const PODWeights weights = random_weights(3, rng);
    const std::vector<double> table = theta_table(N, weights.a[0]);
    const LatticeRule rule = cbc_construct(N, 3, weights, table);

    std::vector<int> chosen;
    for (int d = 1; d <= 3; ++d) {
        // exhaustive scan with the same tie rule: z and N-z tie exactly,
        // candidates within roundoff of the minimum collapse to the smallest
        std::vector<double> errs;
        for (int z : coprime_candidates(N)) {
            std::vector<int> zs = chosen;
            zs.push_back(z);
            errs.push_back(
                brute_force_error_sq(LatticeRule{N, zs}, weights, d, table));
        }
        const double best = *std::min_element(errs.begin(), errs.end());
        const double tie_eps = 1e-10 * std::abs(best);
        int best_z = 0;
        for (size_t ci = 0; ci < errs.size(); ++ci)
            if (errs[ci] <= best + tie_eps) {
                best_z = coprime_candidates(N)[ci];
                break;
            }
        chosen.push_back(best_z);
        CHECK(rule.z[d - 1] == best_z);

        // argmin contract: the chosen error is minimal over all candidates
        const double chosen_err =
            brute_force_error_sq(LatticeRule{N, chosen}, weights, d, table);
        for (double err : errs) CHECK(chosen_err <= err * (1.0 + 1e-12));
    }

    // determinism
    const LatticeRule again = cbc_construct(N, 3, weights, table);
    CHECK(again.z == rule.z);
}

TEST_CASE("shift-averaged error is nonincreasing as any gamma_j shrinks") {
    const int N = 7;
    Xoshiro256 rng(707);
    const std::vector<double> table = theta_table(N, 0.35);
    const PODWeights weights = random_weights(3, rng);
    const LatticeRule rule{N, {1, 2, 3}};
    const double base = brute_force_error_sq(rule, weights, 3, table);
    for (int j = 0; j < 3; ++j) {
        for (double f : {0.5, 0.1, 0.0}) {
            PODWeights smaller = weights;
            smaller.gamma_j[j] *= f;
            CHECK(brute_force_error_sq(rule, smaller, 3, table) <=
                  base * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("generate_points: wrap-around and hand-computed rows") {
    LatticeRule rule{4, {1, 3}};
    Eigen::VectorXd shift(2);
    shift << 0.5, 0.25;
    const Eigen::MatrixXd pts = generate_points(rule, shift, 2);
    CHECK(pts(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(pts(0, 1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pts(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pts(1, 1) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(pts(2, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pts(2, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pts(3, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pts(3, 1) == doctest::Approx(0.25).epsilon(1e-15));

    // zero shift: the i = N row wraps to the origin
    const Eigen::MatrixXd unshifted =
        generate_points(rule, Eigen::VectorXd::Zero(2), 2);
    CHECK(unshifted(3, 0) == 0.0);
    CHECK(unshifted(3, 1) == 0.0);
    CHECK((unshifted.array() >= 0.0).all());
    CHECK((unshifted.array() < 1.0).all());

    // the zero coordinate is nudged, not rejected
    const Eigen::MatrixXd mapped = map_to_gaussian(unshifted);
    CHECK(std::isfinite(mapped(3, 0)));
    CHECK(mapped(3, 0) == inv_norm_cdf(0x1.0p-53));
}

TEST_CASE("qmc_quadrature: constants, marginals and a CLT-scale bound") {
    LatticeRule rule{127, {1, 35}};
    const Eigen::VectorXd shift = make_shift(2, 42);

    CHECK(qmc_quadrature([](const Eigen::VectorXd&) { return 3.25; }, rule,
                         shift) == doctest::Approx(3.25).epsilon(1e-15));

    // evaluator y1: exact Gaussian mean 0; loose shift-variance bound
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Eigen::VectorXd sh = make_shift(2, 1000 + seed);
        const double q = qmc_quadrature(
            [](const Eigen::VectorXd& y) { return y[0]; }, rule, sh);
        CHECK(std::abs(q) <= 0.15);
    }

    // evaluator Phi(y1) is uniform under the map: mean 1/2 within 1/N
    const double q = qmc_quadrature(
        [](const Eigen::VectorXd& y) { return norm_cdf(y[0]); }, rule, shift);
    CHECK(std::abs(q - 0.5) <= 1.0 / rule.N);

    // failures carry the point index
    try {
        qmc_quadrature([](const Eigen::VectorXd&) -> double {
            throw std::runtime_error("boom");
        }, rule, shift);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("point 1") != std::string::npos);
    }
}

TEST_CASE("shift sets: range, determinism and per-shift seeding") {
    const ShiftSet set = make_shifts(5, 12, 999);
    CHECK(set.R == 5);
    CHECK(set.deltas.rows() == 5);
    CHECK((set.deltas.array() >= 0.0).all());
    CHECK((set.deltas.array() < 1.0).all());
    // row r comes from seed base ^ r
    for (int r = 0; r < 5; ++r)
        CHECK((set.deltas.row(r).transpose() - make_shift(12, 999 ^ r))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    const ShiftSet again = make_shifts(5, 12, 999);
    CHECK((set.deltas - again.deltas).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lattice and theta-table files round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string zpath = (dir / "nsqmc_z_test.txt").string();
    LatticeRule rule{17, {1, 5, 3}};
    save_lattice(rule, zpath);
    const LatticeRule loaded = load_lattice(zpath);
    CHECK(loaded.N == 17);
    CHECK(loaded.z == rule.z);
    std::filesystem::remove(zpath);

    CHECK_THROWS_AS(save_lattice(LatticeRule{10, {5}}, zpath), ConfigError);

    const std::string tpath = (dir / "nsqmc_theta_test.txt").string();
    const std::vector<double> table = theta_table(9, 0.35);
    save_theta_table(table, 9, 0.35, 1e-12, tpath);
    const std::vector<double> reloaded = load_theta_table(9, 0.35, 1e-12, tpath);
    REQUIRE(reloaded.size() == table.size());
    for (size_t k = 0; k < table.size(); ++k) CHECK(reloaded[k] == table[k]);
    CHECK(load_theta_table(9, 0.40, 1e-12, tpath).empty()); // key mismatch
    std::filesystem::remove(tpath);
}
