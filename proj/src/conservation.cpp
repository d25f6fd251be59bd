#include "kdvlab/conservation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "kdvlab/collocation.hpp"
#include "kdvlab/kdv.hpp"

namespace kdvlab {

namespace {

// c * prod_j (d^j u)^{e_j}, j = 0..4
struct Monomial {
    double c;
    std::array<int, 5> e;

    int degree() const { return e[0] + e[1] + e[2] + e[3] + e[4]; }
};

const std::vector<Monomial>& remainder_terms(int n) {
    static const std::array<std::vector<Monomial>, 5> table{{
        {},
        {{1.0, {3, 0, 0, 0, 0}}},
        {{5.0, {1, 2, 0, 0, 0}}, {2.5, {4, 0, 0, 0, 0}}},
        {{7.0, {1, 0, 2, 0, 0}}, {35.0, {2, 2, 0, 0, 0}}, {7.0, {5, 0, 0, 0, 0}}},
        {{9.0, {1, 0, 0, 2, 0}},
         {63.0, {2, 0, 2, 0, 0}},
         {-10.0, {0, 0, 3, 0, 0}},
         {210.0, {3, 2, 0, 0, 0}},
         {-17.5, {0, 4, 0, 0, 0}},
         {21.0, {6, 0, 0, 0, 0}}},
    }};
    if (n < 0 || n > kMaxConservationOrder) {
        throw UnsupportedOrder("conservation law order " + std::to_string(n) + " not supported (0.." +
                               std::to_string(kMaxConservationOrder) + ")");
    }
    return table[static_cast<std::size_t>(n)];
}

int max_degree(int n) {
    int d = 2;
    for (const auto& t : remainder_terms(n)) d = std::max(d, t.degree());
    return d;
}

// Derivatives d^j u on a grid of size grid.size(), j = 0..n.
std::vector<std::vector<double>> derivative_values(Collocation& grid, const Field& u, int n) {
    std::vector<std::vector<double>> out;
    for (int j = 0; j <= n; ++j) out.push_back(grid.to_grid(derivative(u, j)));
    return out;
}

double power(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

template <typename F>
double grid_mean(const std::vector<std::vector<double>>& d, F term) {
    const std::size_t n = d[0].size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += term(i);
    return sum / static_cast<double>(n);
}

}  // namespace

double conservation_remainder(const Field& u, int n) {
    const auto& terms = remainder_terms(n);
    if (terms.empty() || u.m_max() == 0) return 0.0;
    // Integrals of degree-d products are exact once N > d m.
    Collocation grid(pow2_above(static_cast<std::size_t>(max_degree(n)) * u.m_max()));
    const auto d = derivative_values(grid, u, n);
    double total = 0.0;
    for (const auto& t : terms) {
        total += t.c * grid_mean(d, [&](std::size_t i) {
            double v = 1.0;
            for (int j = 0; j <= 4; ++j) {
                if (t.e[j]) v *= power(d[j][i], t.e[j]);
            }
            return v;
        });
    }
    return total;
}

double remainder_bound(const Field& u, int n) {
    const auto& terms = remainder_terms(n);
    if (terms.empty() || u.m_max() == 0) return 0.0;
    Collocation grid(pow2_above(4 * static_cast<std::size_t>(max_degree(n)) * u.m_max()));
    const auto d = derivative_values(grid, u, n);
    double total = 0.0;
    for (const auto& t : terms) {
        total += std::abs(t.c) * grid_mean(d, [&](std::size_t i) {
            double v = 1.0;
            for (int j = 0; j <= 4; ++j) {
                if (t.e[j]) v *= power(std::abs(d[j][i]), t.e[j]);
            }
            return v;
        });
    }
    return total;
}

double conservation_functional(const Field& u, int n) {
    const double s = sobolev_norm(u, n);
    return 0.5 * s * s + conservation_remainder(u, n);
}

Field conservation_gradient(const Field& u, int n, std::size_t m_out) {
    const auto& terms = remainder_terms(n);
    // Quadratic part: (-d^2)^n u.
    std::vector<ModePair> out(m_out);
    for (std::size_t k = 1; k <= std::min(m_out, u.m_max()); ++k) {
        const double w = std::pow(wavenumber(k), 2 * n);
        out[k - 1] = {w * u.mode(k).plus, w * u.mode(k).minus};
    }
    if (terms.empty() || u.m_max() == 0) return Field(std::move(out));

    // Euler operator: sum_j (-d)^j d rho / d u_j. Products of degree d - 1 reach
    // (d - 1) m; modes <= m_out are alias-free once N > (d - 1) m + m_out.
    const std::size_t m = u.m_max();
    Collocation grid(pow2_above(static_cast<std::size_t>(max_degree(n) - 1) * m + m_out));
    const auto d = derivative_values(grid, u, n);
    std::vector<double> partial(grid.size());
    std::vector<ModePair> modes(m_out);
    for (int j = 0; j <= n; ++j) {
        bool any = false;
        std::fill(partial.begin(), partial.end(), 0.0);
        for (const auto& t : terms) {
            if (t.e[j] == 0) continue;
            any = true;
            for (std::size_t i = 0; i < partial.size(); ++i) {
                double v = t.c * t.e[j] * power(d[j][i], t.e[j] - 1);
                for (int l = 0; l <= 4; ++l) {
                    if (l != j && t.e[l]) v *= power(d[l][i], t.e[l]);
                }
                partial[i] += v;
            }
        }
        if (!any) continue;
        grid.from_grid(partial, modes);
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t k = 1; k <= m_out; ++k) {
            const auto c = derivative_pair(modes[k - 1], k, j);
            out[k - 1].plus += sign * c.plus;
            out[k - 1].minus += sign * c.minus;
        }
    }
    return Field(std::move(out));
}

GalerkinDrift galerkin_drift(const Field& u_m, std::size_t m, int n, const PerturbationSpec& spec) {
    remainder_terms(n);
    if (m < 1) throw std::invalid_argument("galerkin_drift: m must be >= 1");
    const Field u = project(u_m.resized(std::max(m, u_m.m_max())), m).resized(m);
    const Field grad = conservation_gradient(u, n, 2 * m);
    const Field q = quadratic_term(u, 2 * m);  // 6 u u_x, exact through mode 2m
    GalerkinDrift out;
    double e = 0.0;
    for (std::size_t k = 2 * m; k > m; --k) {
        e += grad.mode(k).plus * q.mode(k).plus + grad.mode(k).minus * q.mode(k).minus;
    }
    out.e_n = -e;
    if (spec.kind != PerturbationKind::none) {
        out.e_n_f = inner(grad.resized(m), apply_perturbation(spec, u));
    }
    return out;
}

}  // namespace kdvlab
