#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "kdvlab/averaging.hpp"
#include "kdvlab/hill.hpp"

using namespace kdvlab;
using doctest::Approx;

namespace {

Field random_field(std::uint64_t seed, std::size_t m, std::size_t active, double norm3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<ModePair> c(m);
    for (std::size_t k = 1; k <= active; ++k) {
        const double s = std::pow(static_cast<double>(k), -3.0);
        c[k - 1] = {s * n(rng), s * n(rng)};
    }
    Field u(std::move(c));
    return u * (norm3 / sobolev_norm(u, 3.0));
}

std::vector<double> to_vec(const ActionVector& a) { return {a.entries().begin(), a.entries().end()}; }

// A Field whose mode-k angle is phi_k(t) for the given amplitudes.
Field rotating(const std::vector<double>& amp, const std::vector<double>& phi, std::size_t m) {
    std::vector<ModePair> c(m);
    for (std::size_t k = 0; k < amp.size(); ++k) c[k] = {amp[k] * std::cos(phi[k]), amp[k] * std::sin(phi[k])};
    return Field(std::move(c));
}

}  // namespace

TEST_CASE("action rate examples") {
    const auto d2 = PerturbationSpec::make(PerturbationKind::double_antiderivative);
    CHECK(action_rate(Field(8), 1, d2) == 0.0);
    CHECK(action_rate(Field(8), 2, PerturbationSpec::make(PerturbationKind::derivative)) == 0.0);

    const double a = 1e-3;
    const Field u = a * Field::basis(1, 8);
    const double i1 = actions(u, 1)[1];
    CHECK(action_rate(u, 1, d2) == Approx(-2.0 * std::pow(kTwoPi, -2.0) * i1).epsilon(1e-3));
    CHECK(action_rate(u, 2, d2) == 0.0);  // closed gap
    CHECK(action_rate(u, 1, {}) == 0.0);

    const auto rates = action_rates(random_field(2, 12, 3, 0.1), 3, d2);
    for (double r : rates) CHECK(r < 0.0);
}

TEST_CASE("action rates are translation invariant") {
    const Field u = random_field(4, 12, 3, 0.5);
    for (auto kind : {PerturbationKind::derivative, PerturbationKind::double_antiderivative}) {
        const auto spec = PerturbationSpec::make(kind);
        const auto r0 = action_rates(u, 3, spec);
        const auto r1 = action_rates(translate(u, 0.3), 3, spec);
        const double scale = std::abs(action_rates(u, 3, PerturbationSpec::make(PerturbationKind::double_antiderivative))[0]);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(r1[k] - r0[k]) <= 1e-8 * scale);
    }
}

TEST_CASE("linear rates") {
    const auto r = linear_rates(PerturbationSpec::make(PerturbationKind::double_antiderivative, 2.0), 2);
    CHECK(r[0] == Approx(-4.0 / (kTwoPi * kTwoPi)));
    CHECK(r[1] == Approx(-4.0 / (4.0 * kTwoPi * kTwoPi)));
    CHECK(linear_rates(PerturbationSpec::make(PerturbationKind::antiderivative), 3) == std::vector<double>(3, 0.0));
    CHECK_THROWS(linear_rates(PerturbationSpec::make(PerturbationKind::smoothing_quadratic), 1));
}

TEST_CASE("averaged dissipative rate matches the linear-order value") {
    const Field u = random_field(1, 16, 3, 0.1);
    const auto d2 = PerturbationSpec::make(PerturbationKind::double_antiderivative);
    const auto est = estimate_averaged_field(u, 3, d2);
    const auto i = actions(u, 3);
    const auto lin = linear_rates(d2, 3);
    for (int k = 1; k <= 3; ++k) {
        CHECK(est.mean[k - 1] == Approx(lin[k - 1] * i[k]).epsilon(1e-3));
        CHECK(est.error[k - 1] >= 0.0);
    }
}

TEST_CASE("Hamiltonian perturbations average to zero") {
    const Field u = random_field(4, 16, 3, 0.25);
    for (auto kind : {PerturbationKind::derivative, PerturbationKind::antiderivative}) {
        const auto spec = PerturbationSpec::make(kind);
        const auto est = estimate_averaged_field(u, 3, spec);
        const auto scale = actions(u, 3);
        for (int k = 1; k <= 3; ++k) {
            // Round-off floor relative to the dissipative scale (2 pi k)^{-1} I_k.
            const double floor = 1e-12 * scale[k] / wavenumber(k);
            CHECK(std::abs(est.mean[k - 1]) <= 2.0 * est.error[k - 1] + floor);
        }
    }
}

TEST_CASE("longer averaging shrinks the jackknife error") {
    const Field u = random_field(4, 16, 3, 0.25);
    const auto spec = PerturbationSpec::make(PerturbationKind::antiderivative);
    AveragingParams shortp, longp;
    shortp.t_avg = 0.5;
    shortp.samples = 64;
    longp.t_avg = 2.0;
    longp.samples = 256;
    const auto a = estimate_averaged_field(u, 2, spec, shortp);
    const auto b = estimate_averaged_field(u, 2, spec, longp);
    for (int k = 0; k < 2; ++k) CHECK(b.error[k] < a.error[k]);
}

TEST_CASE("averaged field is invariant under a time shift of the representative") {
    const Field u = random_field(6, 16, 3, 0.1);
    const auto d2 = PerturbationSpec::make(PerturbationKind::double_antiderivative);
    EvolveParams p;
    p.t_end = 0.37;
    p.dt = 1e-4;
    const Field shifted = evolve(u, p, {}, 0.37).samples.back().u;
    const auto a = estimate_averaged_field(u, 3, d2);
    const auto b = estimate_averaged_field(shifted, 3, d2);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(a.mean[k] - b.mean[k]) <= 3.0 * std::hypot(a.error[k], b.error[k]) + 1e-9 * std::abs(a.mean[k]));
    }
}

TEST_CASE("resonant representatives are rejected") {
    AveragingParams p;
    p.resonance_gap = 1e9;
    CHECK_THROWS_AS(estimate_averaged_field(random_field(1, 16, 3, 0.1), 2,
                                            PerturbationSpec::make(PerturbationKind::antiderivative), p),
                    ResonantRepresentative);
    p = {};
    p.blocks = 7;
    CHECK_THROWS_AS(estimate_averaged_field(random_field(1, 16, 3, 0.1), 2, {}, p), std::invalid_argument);
}

TEST_CASE("field with prescribed actions") {
    const Field rep = random_field(3, 16, 3, 0.2);
    const auto i0 = to_vec(actions(rep, 3));
    std::vector<double> target{1.3 * i0[0], 0.7 * i0[1], 0.0};
    const Field u = field_with_actions(rep, target);
    const auto got = actions(u, 3);
    CHECK(got[1] == Approx(target[0]).epsilon(1e-6));
    CHECK(got[2] == Approx(target[1]).epsilon(1e-6));
    CHECK(got[3] == 0.0);
    // A closed mode is reopened from its linearized amplitude.
    const Field v = field_with_actions(u, {target[0], target[1], 1e-10});
    CHECK(actions(v, 3)[3] == Approx(1e-10).epsilon(1e-6));
    CHECK_THROWS(field_with_actions(rep, {-1.0}));
}

TEST_CASE("solve_averaged examples") {
    const std::vector<double> j0{2e-3, 1e-4, 3e-6};
    SUBCASE("zero field keeps J constant") {
        const auto s = solve_averaged(j0, 1.0, AveragedField::zero(3), 1.0, 1e9);
        CHECK(s.stop_time == 1.0);
        CHECK(s.tau.back() == 1.0);
        for (const auto& j : s.j) CHECK(j == j0);
    }
    SUBCASE("linear field gives exponentials") {
        const auto rates = linear_rates(PerturbationSpec::make(PerturbationKind::double_antiderivative), 3);
        const auto s = solve_averaged(j0, 1.0, AveragedField::linear(rates), 0.0, 1e9);
        for (std::size_t i = 0; i < s.tau.size(); ++i) {
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(std::abs(s.j[i][k] - j0[k] * std::exp(rates[k] * s.tau[i])) <= 1e-8 * j0[k]);
            }
        }
    }
    SUBCASE("ball radius below the initial norm stops at once") {
        const auto s = solve_averaged(j0, 1.0, AveragedField::zero(3), 0.0, 0.5 * action_norm(std::span<const double>(j0), 0.0));
        CHECK(s.stop_time == 0.0);
        CHECK(s.tau.size() == 1);
    }
    SUBCASE("exit time of a growing solution") {
        // J_1' = J_1: |J|~_0 = 4 pi J_1(0) e^tau reaches R at log(R / (4 pi J_1(0))).
        const std::vector<double> one{1e-3};
        const double radius = 2.0 * 4.0 * std::numbers::pi * 1e-3;
        const auto s = solve_averaged(one, 1.0, AveragedField::linear({1.0}), 0.0, radius, {1e-16, 1e-12, 1000});
        CHECK(s.stop_time == Approx(std::log(2.0)).epsilon(1e-5));
        for (const auto& j : s.j) CHECK(action_norm(std::span<const double>(j), 0.0) <= radius);
    }
    SUBCASE("octant is preserved") {
        const AveragedField drain(2, [](const std::vector<double>&) { return std::vector<double>{-1.0, -0.5}; });
        const auto s = solve_averaged({0.1, 0.2}, 1.0, drain, 0.0, 1e9);
        for (const auto& j : s.j) {
            for (double v : j) CHECK(v >= 0.0);
        }
        CHECK(s.j.back()[0] == 0.0);
        CHECK(s.j.back()[1] == 0.0);
    }
    CHECK_THROWS(solve_averaged({-1.0}, 1.0, AveragedField::zero(1), 0.0, 1.0));
}

TEST_CASE("estimated averaged field is Lipschitz on a small action ball") {
    const Field rep = random_field(9, 16, 2, 0.1);
    const auto d2 = PerturbationSpec::make(PerturbationKind::double_antiderivative);
    const auto field = AveragedField::estimated(rep, 2, d2);
    const auto i0 = to_vec(actions(rep, 2));
    const auto f0 = field(i0);
    double worst = 0.0;
    for (double s : {0.9, 1.1}) {
        const std::vector<double> j{s * i0[0], i0[1] / s};
        const auto f = field(j);
        const std::vector<double> dj{j[0] - i0[0], j[1] - i0[1]};
        const std::vector<double> df{f[0] - f0[0], f[1] - f0[1]};
        worst = std::max(worst, action_norm(std::span<const double>(df), 0.0) / action_norm(std::span<const double>(dj), 0.0));
    }
    // Linear-order constant is max_k 2 (2 pi k)^{-2}.
    CHECK(worst < 2.0 * 2.0 / (kTwoPi * kTwoPi));
}

TEST_CASE("compare examples") {
    const Field u0 = random_field(5, 16, 3, 0.2);
    EvolveParams p;
    p.t_end = 1.0;
    p.dt = 2e-4;
    const auto traj = evolve(u0, p, {}, 0.1);
    const auto i0 = to_vec(actions(u0, 3));
    const auto flat = solve_averaged(i0, 1.0, AveragedField::zero(3), 0.0, 1e9);
    const auto r = compare(traj, flat, 0.0, 3, 1e-6);
    CHECK(r.rho_observed <= 1e-3 * action_norm(std::span<const double>(i0), 0.0));
    CHECK(r.tau.size() == traj.samples.size());
    CHECK(r.residuals.empty());

    const AveragedField zero = AveragedField::zero(3);
    const auto same = compare_actions(flat.tau, flat.j, flat, 1.0, 0.0, &zero);
    CHECK(same.rho_observed == 0.0);
    CHECK(same.pass);
    for (const auto& xi : same.residuals) {
        for (double v : xi) CHECK(v == 0.0);
    }

    const auto j = to_json(r);
    CHECK(j.at("rho_observed").get<double>() == r.rho_observed);
    std::ostringstream os;
    write_comparison_csv(os, r);
    CHECK(os.str().rfind("tau,k,I,J,Xi\n", 0) == 0);
}

TEST_CASE("comparison stops at the averaged stop time") {
    AveragedSolution s;
    s.tau = {0.0, 0.5};
    s.j = {{1.0}, {1.0}};
    s.stop_time = 0.5;
    const auto r = compare_actions({0.0, 0.25, 0.5, 0.75}, {{1.0}, {1.0}, {1.0}, {5.0}}, s, 0.0, 1e-3);
    CHECK(r.tau.size() == 3);
    CHECK(r.rho_observed == 0.0);
    CHECK(r.pass);
}

TEST_CASE("Weyl statistics of a synthetic rotation") {
    const std::size_t m = 3;
    const std::vector<double> amp{1e-4, 2e-5, 1e-5};
    const std::vector<double> phi0{0.3, 1.1, 2.0};
    const std::vector<double> shift{3.0, -5.0, 7.0};  // angle rate is -(2 pi k)^3 - shift_k
    const double horizon = 2.0;
    Trajectory traj;
    for (int i = 0; i <= 4000; ++i) {
        const double t = horizon * i / 4000.0;
        std::vector<double> phi(m);
        for (std::size_t k = 0; k < m; ++k) phi[k] = phi0[k] - (std::pow(wavenumber(k + 1), 3) + shift[k]) * t;
        Sample s;
        s.t = t;
        s.u = rotating(amp, phi, m);
        traj.samples.push_back(s);
    }
    const auto rep = weyl_report({traj}, 3, 2);
    CHECK(rep.statistics.at({0, 0, 0}) == std::complex<double>(1.0, 0.0));
    for (const auto& [s, v] : rep.statistics) {
        WeylIndex neg = s;
        for (int& x : neg) x = -x;
        CHECK(rep.statistics.at(neg) == std::conj(v));
        double rate = 0.0;
        for (std::size_t k = 0; k < m; ++k) rate += s[k] * (std::pow(wavenumber(k + 1), 3) + shift[k]);
        if (rate == 0.0) continue;
        CHECK(std::abs(v) <= 2.0 / (horizon * std::abs(rate)) * (1.0 + 1e-9));
    }
    // Nonzero s with |s|_1 <= 2 over 3 angles: 6 of norm 1, 6 + 12 of norm 2; plus s = 0.
    CHECK(rep.statistics.size() == 25);
    CHECK(to_json(rep).at("statistics").size() == 25);
}

TEST_CASE("Weyl statistics integrate the phase exactly") {
    // One angle at constant rate: time average of exp(i phi) over [0, T] in closed form.
    const double w = std::pow(kTwoPi, 3) + 2.0;
    const double horizon = 0.5;
    Trajectory traj;
    for (int i = 0; i <= 50; ++i) {
        const double t = horizon * i / 50.0;
        Sample s;
        s.t = t;
        s.u = rotating({1e-4}, {-w * t}, 1);
        traj.samples.push_back(s);
    }
    const auto rep = weyl_report({traj}, 1, 1);
    const auto exact = (std::polar(1.0, -w * horizon) - 1.0) / std::complex<double>(0.0, -w * horizon);
    CHECK(std::abs(rep.statistics.at({1}) - exact) < 1e-10);
}

TEST_CASE("resonance occupation examples") {
    Trajectory zero;
    for (int i = 0; i <= 4; ++i) {
        Sample s;
        s.t = 0.25 * i;
        s.u = Field(8);
        zero.samples.push_back(s);
    }
    CHECK(resonance_occupation(zero, 2, 2, 0.2, 1e-3) == 1.0);
    CHECK_THROWS(resonance_occupation(zero, 2, 2, 0.25, 1e-3));

    // I_1 identically 0: small-action zone at every sample.
    Trajectory no_first = zero;
    for (auto& s : no_first.samples) s.u = 0.05 * Field::basis(2, 8);
    CHECK(resonance_occupation(no_first, 2, 2, 0.2, 1e-3, {1e-30, 1.0, 0.05}) == 1.0);

    Trajectory generic = zero;
    const Field u = random_field(3, 16, 3, 0.2);
    for (auto& s : generic.samples) s.u = u;
    const auto a = actions(u, 2);
    const double small = 0.5 * std::min(a[1], a[2]) / std::pow(1e-3, 0.2);
    CHECK(resonance_occupation(generic, 2, 2, 0.2, 1e-3, {small, 1.0, 0.05}) == 0.0);
}

TEST_CASE("quasi-invariance rate components") {
    Trajectory zero;
    zero.params.eps = 0.1;
    zero.params.tau_end = 1.0;
    for (int i = 0; i <= 2; ++i) {
        Sample s;
        s.tau = 0.5 * i;
        s.t = s.tau / 0.1;
        s.u = Field(8);
        zero.samples.push_back(s);
    }
    for (auto kind : {PerturbationKind::none, PerturbationKind::derivative, PerturbationKind::antiderivative}) {
        const auto q = quasi_invariance_rate(zero, 8, 1, 0.1, PerturbationSpec::make(kind));
        for (double r : q.rate) CHECK(r == 0.0);
    }
    // The divergence of d^{-2} is state independent: -2 sum (2 pi i)^{-2}.
    const auto d2 = quasi_invariance_rate(zero, 8, 1, 0.1, PerturbationSpec::make(PerturbationKind::double_antiderivative));
    double div = 0.0;
    for (int i = 1; i <= 8; ++i) div -= 2.0 / std::pow(wavenumber(i), 2);
    for (double r : d2.rate) CHECK(r == Approx(div).epsilon(1e-14));

    EvolveParams p;
    p.eps = 0.1;
    p.tau_end = 0.2;
    p.dt = 2e-4;
    const auto traj = galerkin_evolve(random_field(2, 8, 3, 0.2), 8, p, PerturbationSpec::make(PerturbationKind::derivative), 0.05);
    const auto q = quasi_invariance_rate(traj, 8, 1, 0.1, PerturbationSpec::make(PerturbationKind::derivative));
    for (std::size_t i = 0; i < q.tau.size(); ++i) {
        CHECK(q.divergence[i] == 0.0);
        CHECK(q.rate[i] == q.divergence[i] - q.drift[i] - q.forcing[i]);
    }
    CHECK(q.sup_abs_rate() >= 0.0);
    CHECK_THROWS(quasi_invariance_rate(traj, 16, 1, 0.1, {}));
    std::ostringstream os;
    write_quasi_invariance_csv(os, q);
    CHECK(os.str().rfind("tau,drift,forcing,divergence,rate\n", 0) == 0);
}
