#include "nsqmc/lattice.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/normal.hpp"
#include "nsqmc/parallel.hpp"
#include "nsqmc/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nsqmc {

void LatticeRule::validate() const {
    if (N < 2) throw ConfigError("LatticeRule: N must be >= 2");
    if (z.empty()) throw ConfigError("LatticeRule: empty generating vector");
    for (int zj : z) {
        if (zj < 1 || zj > N - 1)
            throw ConfigError("LatticeRule: component outside [1, N-1]");
        if (std::gcd(zj, N) != 1)
            throw ConfigError("LatticeRule: component not coprime with N");
    }
}

std::uint64_t euler_totient(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t result = n;
    std::uint64_t m = n;
    for (std::uint64_t p = 2; p * p <= m; ++p) {
        if (m % p == 0) {
            while (m % p == 0) m /= p;
            result -= result / p;
        }
    }
    if (m > 1) result -= result / m;
    // |{1 <= z <= n-1 : gcd(z, n) = 1}|: the classical function counts z = n
    // for n = 1, which the candidate set excludes.
    return n == 1 ? 0 : result;
}

std::vector<int> coprime_candidates(int N) {
    std::vector<int> out;
    for (int z = 1; z < N; ++z)
        if (std::gcd(z, N) == 1) out.push_back(z);
    return out;
}

namespace {

// Gauss-Kronrod 7-15 nodes/weights (positive half, QUADPACK dqk15).
constexpr double kGK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr double kGK15WeightsK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kGK15WeightsG[4] = {0.129484966168870, 0.279705391489277,
                                     0.381830050505119, 0.417959183673469};

template <class F>
void gk15(const F& f, double lo, double hi, double& value, double& error) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double acc_k = 0.0, acc_g = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double dx = half * kGK15Nodes[i];
        const double f1 = f(mid - dx);
        const double f2 = f(mid + dx);
        const double fsum = (i == 7) ? f1 : f1 + f2;
        acc_k += kGK15WeightsK[i] * fsum;
        if (i % 2 == 1) acc_g += kGK15WeightsG[i / 2] * fsum;
    }
    value = acc_k * half;
    error = std::abs((acc_k - acc_g) * half);
}

template <class F>
double adaptive_gk(const F& f, double lo, double hi, double tol, int depth = 0) {
    double value, error;
    gk15(f, lo, hi, value, error);
    if (error <= tol || depth >= 48) return value;
    const double mid = 0.5 * (lo + hi);
    return adaptive_gk(f, lo, mid, 0.5 * tol, depth + 1) +
           adaptive_gk(f, mid, hi, 0.5 * tol, depth + 1);
}

} // namespace

double theta_kernel(double f, double a, double tol) {
    if (!(a > 0.0)) throw std::invalid_argument("theta_kernel: a must be positive");
    if (!(f >= 0.0 && f < 1.0))
        throw std::invalid_argument("theta_kernel: f must lie in [0,1)");

    const double m = std::min(f, 1.0 - f);
    const double hi = std::max(f, 1.0 - f);

    const auto mid_integrand = [&](double t) {
        const double phi = norm_cdf(t);
        return (phi * (1.0 - phi) - m) * std::exp(2.0 * a * t);
    };
    const auto tail_integrand = [&](double t) {
        const double q = 1.0 - norm_cdf(t);
        return q * q * std::exp(2.0 * a * t);
    };
    // Tail bound valid for both integrands (uses (1-Phi) <= e^{-t^2/2}):
    // integrand <= e^{2a^2} e^{-(t-2a)^2/2}, so the tail past T > 2a is
    // below e^{2a^2 - (T-2a)^2/2} / (T - 2a).
    const auto tail_bound = [&](double T) {
        return std::exp(2.0 * a * a - 0.5 * (T - 2.0 * a) * (T - 2.0 * a)) /
               (T - 2.0 * a);
    };

    double acc = 0.0;
    if (hi >= 1.0) {
        // f = 0: the split point is at +infinity; the mid integrand alone
        // (with m = 0) covers the whole line after folding.
        double T = a + 6.0;
        acc = adaptive_gk(mid_integrand, 0.0, T, 0.5 * tol);
        while (tail_bound(T) > 1e-16 * (std::abs(acc) + 1e-300) && T < a + 42.0) {
            acc += adaptive_gk(mid_integrand, T, T + 2.0, 0.25 * tol);
            T += 2.0;
        }
        return 2.0 * acc;
    }

    const double A = inv_norm_cdf(hi);
    if (A > 0.0) acc += adaptive_gk(mid_integrand, 0.0, A, 0.5 * tol);

    double T = std::max(A, a) + 6.0;
    double tail = adaptive_gk(tail_integrand, A, T, 0.5 * tol);
    while (tail_bound(T) > 1e-16 * (std::abs(acc) + std::abs(tail) + 1e-300) &&
           T < a + 42.0) {
        tail += adaptive_gk(tail_integrand, T, T + 2.0, 0.25 * tol);
        T += 2.0;
    }
    return 2.0 * (acc - tail);
}

std::vector<double> theta_table(int N, double a, double tol) {
    if (N < 1) throw ConfigError("theta_table: N must be >= 1");
    std::vector<double> table(N);
    parallel_for(N / 2 + 1, [&](long k) {
        table[k] = theta_kernel(static_cast<double>(k) / N, a, tol);
    });
    for (int k = N / 2 + 1; k < N; ++k) table[k] = table[N - k];
    return table;
}

void save_theta_table(const std::vector<double>& table, int N, double a,
                      double tol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_theta_table: cannot open " + path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", N, a, tol);
    out << buf;
    for (double v : table) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    if (!out) throw ConfigError("save_theta_table: write failed for " + path);
}

std::vector<double> load_theta_table(int N, double a, double tol,
                                     const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};
    int file_n = 0;
    double file_a = 0.0, file_tol = 0.0;
    in >> file_n >> file_a >> file_tol;
    if (!in || file_n != N || file_a != a || file_tol != tol) return {};
    std::vector<double> table(N);
    for (double& v : table)
        if (!(in >> v)) return {};
    return table;
}

double shift_avg_error_sq(const LatticeRule& rule, const PODWeights& weights,
                          int s, const std::vector<double>& theta_tab,
                          int order_cap) {
    rule.validate();
    if (s < 1 || s > static_cast<int>(rule.z.size()))
        throw ConfigError("shift_avg_error_sq: s outside the rule's dimensions");
    if (weights.dims() < s)
        throw ConfigError("shift_avg_error_sq: weights shorter than s");
    if (static_cast<int>(theta_tab.size()) != rule.N)
        throw ConfigError("shift_avg_error_sq: theta table size != N");

    const int N = rule.N;
    int L = std::min(s, order_cap);
    for (;;) {
        std::vector<double> Gamma(L + 1);
        for (int l = 0; l <= L; ++l) Gamma[l] = weights.gamma_order(l);

        double total = 0.0;
        double top_order = 0.0;
        std::vector<double> q(L + 1);
        for (int i = 1; i <= N; ++i) {
            std::fill(q.begin(), q.end(), 0.0);
            q[0] = 1.0;
            for (int j = 0; j < s; ++j) {
                const double x =
                    weights.gamma_j[j] *
                    theta_tab[static_cast<long>(i) * rule.z[j] % N];
                for (int l = std::min(j + 1, L); l >= 1; --l) q[l] += x * q[l - 1];
            }
            double contrib = 0.0;
            for (int l = 1; l <= L; ++l) {
                const double term = Gamma[l] * q[l];
                if (std::abs(term) > 1e300 || !std::isfinite(term))
                    throw NumericalError(
                        "shift_avg_error_sq: order accumulator overflow");
                contrib += term;
            }
            top_order += std::abs(Gamma[L] * q[L]);
            total += contrib;
        }
        if (L >= s || top_order <= 1e-14 * std::abs(total)) return total / N;
        L = std::min(s, L + 10);
    }
}

void save_lattice(const LatticeRule& rule, const std::string& path) {
    rule.validate();
    std::ofstream out(path);
    if (!out) throw ConfigError("save_lattice: cannot open " + path);
    out << rule.N << ' ' << rule.z.size() << '\n';
    for (int zj : rule.z) out << zj << '\n';
    if (!out) throw ConfigError("save_lattice: write failed for " + path);
}

LatticeRule load_lattice(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_lattice: cannot open " + path);
    LatticeRule rule;
    size_t s = 0;
    in >> rule.N >> s;
    if (!in) throw ConfigError("load_lattice: bad header in " + path);
    rule.z.resize(s);
    for (auto& zj : rule.z)
        if (!(in >> zj)) throw ConfigError("load_lattice: truncated file " + path);
    rule.validate();
    return rule;
}

Eigen::MatrixXd generate_points(const LatticeRule& rule,
                                const Eigen::VectorXd& shift, int s) {
    rule.validate();
    if (s > static_cast<int>(rule.z.size()))
        throw ConfigError("generate_points: s exceeds the rule's dimensions");
    if (shift.size() < s)
        throw ConfigError("generate_points: shift shorter than s");
    for (int j = 0; j < s; ++j)
        if (!(shift[j] >= 0.0 && shift[j] < 1.0))
            throw ConfigError("generate_points: shift coordinate outside [0,1)");

    const int N = rule.N;
    Eigen::MatrixXd pts(N, s);
    for (int j = 0; j < s; ++j) {
        long k = 0;
        for (int i = 1; i <= N; ++i) {
            k += rule.z[j];
            if (k >= N) k -= N;
            double v = static_cast<double>(k) / N + shift[j];
            if (v >= 1.0) v -= 1.0;
            pts(i - 1, j) = v;
        }
    }
    return pts;
}

Eigen::MatrixXd map_to_gaussian(const Eigen::MatrixXd& points) {
    Eigen::MatrixXd out(points.rows(), points.cols());
    for (long i = 0; i < points.rows(); ++i)
        for (long j = 0; j < points.cols(); ++j) {
            double v = points(i, j);
            if (v == 0.0) v = 0x1.0p-53;
            out(i, j) = inv_norm_cdf(v);
        }
    return out;
}

Eigen::VectorXd make_shift(int s, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    Eigen::VectorXd shift(s);
    for (int j = 0; j < s; ++j) shift[j] = rng.uniform01();
    return shift;
}

ShiftSet make_shifts(int R, int s, std::uint64_t base_seed) {
    if (R < 1) throw ConfigError("make_shifts: R must be >= 1");
    ShiftSet set;
    set.R = R;
    set.base_seed = base_seed;
    set.deltas.resize(R, s);
    for (int r = 0; r < R; ++r)
        set.deltas.row(r) = make_shift(s, base_seed ^ static_cast<std::uint64_t>(r))
                                .transpose();
    return set;
}

double qmc_quadrature(
    const std::function<double(const Eigen::VectorXd&)>& evaluator,
    const LatticeRule& rule, const Eigen::VectorXd& shift) {
    const int s = static_cast<int>(shift.size());
    const Eigen::MatrixXd y = map_to_gaussian(generate_points(rule, shift, s));
    std::vector<double> values(rule.N);
    for (int i = 0; i < rule.N; ++i) {
        try {
            values[i] = evaluator(y.row(i).transpose());
        } catch (const std::exception& e) {
            throw NumericalError("qmc_quadrature: evaluator failed at point " +
                                 std::to_string(i + 1) + ": " + e.what());
        }
    }
    return pairwise_sum(values) / rule.N;
}

} // namespace nsqmc
