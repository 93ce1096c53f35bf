#include "nsqmc/lattice.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/parallel.hpp"

#include <cmath>
#include <vector>

namespace nsqmc {

namespace {

/// One CBC pass with a fixed order cap. Returns false (via *ok) when the top
/// tracked order still matters and the cap must grow.
bool cbc_pass(int N, int s, const PODWeights& weights,
              const std::vector<double>& theta_tab, int L, int n_workers,
              LatticeRule& out) {
    const std::vector<int> candidates = coprime_candidates(N);
    std::vector<double> Gamma(L + 1);
    for (int l = 0; l <= L; ++l) Gamma[l] = weights.gamma_order(l);

    // q[i-1][l]: order-l accumulator of lattice point i over chosen dims.
    std::vector<std::vector<double>> q(N, std::vector<double>(L + 1, 0.0));
    for (int i = 0; i < N; ++i) q[i][0] = 1.0;

    out.N = N;
    out.z.clear();
    out.z.reserve(s);

    std::vector<double> w(N);
    std::vector<double> vals(candidates.size());

    for (int d = 0; d < s; ++d) {
        const double gamma_d = weights.gamma_j[d];
        for (int i = 0; i < N; ++i) {
            double acc = 0.0;
            for (int l = 0; l < std::min(d + 1, L); ++l)
                acc += Gamma[l + 1] * q[i][l];
            w[i] = gamma_d * acc;
        }
        // The candidate criterion drops the part shared by all candidates:
        // e^2(z) = const + (1/N) sum_i theta(frac(i z / N)) w_i.
        parallel_for(static_cast<long>(candidates.size()), [&](long ci) {
            const int z = candidates[ci];
            long k = 0;
            double acc = 0.0;
            for (int i = 1; i <= N; ++i) {
                k += z;
                if (k >= N) k -= N;
                acc += theta_tab[k] * w[i - 1];
            }
            vals[ci] = acc;
        }, n_workers);

        // z and N - z produce identical errors (the point sets mirror), so
        // exact ties are systematic; candidates within roundoff of the
        // minimum count as tied and the smallest wins.
        double vmin = vals[0];
        for (double v : vals) vmin = std::min(vmin, v);
        double abs_scale = 0.0;
        for (int i = 0; i < N; ++i)
            abs_scale += std::abs(theta_tab[i]) * std::abs(w[i]);
        const double tie_eps = 1e-12 * abs_scale;
        size_t best = 0;
        while (vals[best] > vmin + tie_eps) ++best;
        const int z_d = candidates[best];
        out.z.push_back(z_d);

        long k = 0;
        for (int i = 1; i <= N; ++i) {
            k += z_d;
            if (k >= N) k -= N;
            const double x = gamma_d * theta_tab[k];
            auto& qi = q[i - 1];
            for (int l = std::min(d + 1, L); l >= 1; --l)
                qi[l] += x * qi[l - 1];
        }
    }

    if (L >= s) return true;
    double total = 0.0, top = 0.0;
    for (int i = 0; i < N; ++i) {
        for (int l = 1; l <= L; ++l) {
            const double term = Gamma[l] * q[i][l];
            if (!std::isfinite(term) || std::abs(term) > 1e300)
                throw NumericalError("cbc_construct: order accumulator overflow");
            total += term;
        }
        top += std::abs(Gamma[L] * q[i][L]);
    }
    return top <= 1e-14 * std::abs(total);
}

} // namespace

LatticeRule cbc_construct(int N, int s, const PODWeights& weights,
                          const std::vector<double>& theta_tab, int order_cap,
                          int n_workers) {
    if (N < 2) throw ConfigError("cbc_construct: N must be >= 2");
    if (s < 1) throw ConfigError("cbc_construct: s must be >= 1");
    if (weights.dims() < s)
        throw ConfigError("cbc_construct: weights shorter than s");
    if (static_cast<int>(theta_tab.size()) != N)
        throw ConfigError("cbc_construct: theta table size != N");

    LatticeRule rule;
    int L = std::min(s, order_cap);
    while (!cbc_pass(N, s, weights, theta_tab, L, n_workers, rule))
        L = std::min(s, L + 10);
    rule.validate();
    return rule;
}

} // namespace nsqmc
