#include "kdvlab/kdv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kdvlab/collocation.hpp"

namespace kdvlab {

double EvolveParams::fast_horizon() const {
    if (tau_end > 0.0) return tau_end / eps;
    return t_end;
}

void EvolveParams::validate() const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("evolve: eps must lie in [0, 1]");
    if (dt < 0.0 || !std::isfinite(dt)) throw std::invalid_argument("evolve: dt must be > 0 (or 0 for automatic)");
    if (tau_end > 0.0 && eps == 0.0) throw std::invalid_argument("evolve: tau_end needs eps > 0");
    if (!(fast_horizon() > 0.0)) throw std::invalid_argument("evolve: horizon must be > 0");
    if (m && *m < 1) throw std::invalid_argument("evolve: Galerkin dimension must be >= 1");
    if (!(growth_factor > 1.0)) throw std::invalid_argument("evolve: growth_factor must exceed 1");
    if (!(cfl > 0.0) || !(dt_cap > 0.0)) throw std::invalid_argument("evolve: cfl and dt_cap must be > 0");
}

namespace {

// Rotation by th stored as q quarter turns (exact) times a residual rotation by
// phi in [-pi/4, pi/4], applied as x + (cos phi - 1, sin phi) x. The pair is
// nudged by a few ulps so that (1 + c1)^2 + s^2 = 1 to extended precision: it is
// applied at every step, and a modulus off by 1e-16 would grow amplitudes
// coherently over long runs.
struct Turn {
    int quarters = 0;
    double c1 = 0.0;  // cos phi - 1
    double s = 0.0;   // sin phi
};

Turn unit_turn(double th) {
    const double q = std::nearbyint(th / (0.5 * std::numbers::pi));
    const double phi = th - q * (0.5 * std::numbers::pi);
    const double sh = std::sin(0.5 * phi);
    const double c0 = -2.0 * sh * sh, s0 = std::sin(phi);
    auto defect = [](double c1, double s) {
        const long double cl = c1, sl = s;
        return std::abs(2.0L * cl + cl * cl + sl * sl);
    };
    Turn best{static_cast<int>(std::fmod(q, 4.0) + 4.0) % 4, c0, s0};
    long double best_defect = defect(c0, s0);
    double c = c0;
    for (int i = 0; i < 8; ++i) c = std::nextafter(c, -4.0);
    for (int i = -8; i <= 8; ++i, c = std::nextafter(c, 4.0)) {
        double sv = s0;
        for (int j = 0; j < 8; ++j) sv = std::nextafter(sv, -2.0);
        for (int j = -8; j <= 8; ++j, sv = std::nextafter(sv, 2.0)) {
            const long double d = defect(c, sv);
            if (d < best_defect) {
                best_defect = d;
                best.c1 = c;
                best.s = sv;
            }
        }
    }
    return best;
}

double l2_squared(std::span<const ModePair> c) {
    double s = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) s += c[i].plus * c[i].plus + c[i].minus * c[i].minus;
    return s;
}

// Integrating-factor RK4 (Lawson) for the m-mode Galerkin system.
class LawsonStepper {
public:
    LawsonStepper(std::size_t m, bool dealias, double eps, const PerturbationSpec& spec)
        : m_(m),
          eps_(eps),
          spec_(spec),
          grid_(dealias ? dealiased_grid_size(m) : pow2_above(2 * m + 1)),
          u_grid_(grid_.size()),
          ux_grid_(grid_.size()),
          ux_(m),
          f_(m),
          k1_(m), k2_(m), k3_(m), k4_(m), tmp_(m), eu_(m) {}

    std::size_t size() const { return m_; }

    // out = 6 P_m(u u_x) + eps P_m f(u)
    void nonlinear(std::span<const ModePair> u, std::span<ModePair> out) {
        for (std::size_t k = 1; k <= m_; ++k) ux_[k - 1] = derivative_pair(u[k - 1], k, 1);
        grid_.to_grid(u, u_grid_);
        grid_.to_grid(ux_, ux_grid_);
        for (std::size_t j = 0; j < u_grid_.size(); ++j) u_grid_[j] *= 6.0 * ux_grid_[j];
        grid_.from_grid(u_grid_, out);
        if (eps_ != 0.0 && spec_.kind != PerturbationKind::none) {
            apply_perturbation(spec_, u, f_);
            for (std::size_t i = 0; i < m_; ++i) {
                out[i].plus += eps_ * f_[i].plus;
                out[i].minus += eps_ * f_[i].minus;
            }
        }
    }

    void set_step(double h) {
        if (h == h_) return;
        h_ = h;
        full_.resize(m_);
        half_.resize(m_);
        for (std::size_t k = 1; k <= m_; ++k) {
            const double w = std::pow(wavenumber(k), 3);
            full_[k - 1] = unit_turn(w * h);
            half_[k - 1] = unit_turn(0.5 * w * h);
        }
    }

    // One step of size h_ in place.
    void step(std::vector<ModePair>& u) {
        const double h = h_;
        nonlinear(u, k1_);
        for (std::size_t i = 0; i < m_; ++i) tmp_[i] = rotate(half_[i], axpy(u[i], 0.5 * h, k1_[i]));
        nonlinear(tmp_, k2_);
        for (std::size_t i = 0; i < m_; ++i) {
            eu_[i] = rotate(half_[i], u[i]);
            tmp_[i] = axpy(eu_[i], 0.5 * h, k2_[i]);
        }
        nonlinear(tmp_, k3_);
        for (std::size_t i = 0; i < m_; ++i) tmp_[i] = axpy(rotate(half_[i], eu_[i]), h, rotate(half_[i], k3_[i]));
        nonlinear(tmp_, k4_);
        for (std::size_t i = 0; i < m_; ++i) {
            const ModePair mid = rotate(half_[i], {k2_[i].plus + k3_[i].plus, k2_[i].minus + k3_[i].minus});
            const ModePair e1 = rotate(full_[i], k1_[i]);
            const ModePair base = rotate(full_[i], u[i]);
            u[i] = {base.plus + h / 6.0 * (e1.plus + 2.0 * mid.plus + k4_[i].plus),
                    base.minus + h / 6.0 * (e1.minus + 2.0 * mid.minus + k4_[i].minus)};
        }
    }

private:
    // Airy flow on one pair: (a, b)' = w (b, -a).
    static ModePair rotate(const Turn& t, const ModePair& c) {
        ModePair r{c.plus + (t.c1 * c.plus + t.s * c.minus), c.minus + (t.c1 * c.minus - t.s * c.plus)};
        for (int i = 0; i < t.quarters; ++i) r = {r.minus, -r.plus};
        return r;
    }
    static ModePair axpy(const ModePair& x, double a, const ModePair& y) {
        return {x.plus + a * y.plus, x.minus + a * y.minus};
    }

    std::size_t m_;
    double eps_;
    PerturbationSpec spec_;
    Collocation grid_;
    std::vector<double> u_grid_, ux_grid_;
    std::vector<ModePair> ux_, f_, k1_, k2_, k3_, k4_, tmp_, eu_;
    std::vector<Turn> full_, half_;  // Airy rotation over h and h / 2
    double h_ = -1.0;
};

double automatic_dt(const EvolveParams& params, const Field& u0, std::size_t m) {
    if (params.dt > 0.0) return params.dt;
    double umax = 0.0;
    if (active_modes(u0) > 0) {
        Collocation grid(dealiased_grid_size(std::max<std::size_t>(m, 1)));
        const auto values = grid.to_grid(u0.resized(m));
        for (double v : values) umax = std::max(umax, std::abs(v));
    }
    const double rate = 6.0 * umax * wavenumber(m);
    return rate > 0.0 ? std::min(params.dt_cap, params.cfl / rate) : params.dt_cap;
}

Trajectory run(const Field& u0_full, std::size_t m, const EvolveParams& params, const PerturbationSpec& spec,
               double stride, const SampleObserver& observer) {
    params.validate();
    spec.validate();
    if (!(stride > 0.0)) throw std::invalid_argument("evolve: sample stride must be > 0");
    if (m < 1) throw std::invalid_argument("evolve: need at least one mode");

    const bool slow = params.slow_clock();
    const double clock_horizon = slow ? params.tau_end : params.fast_horizon();
    const double to_fast = slow ? 1.0 / params.eps : 1.0;
    const Field u0 = u0_full.resized(m);

    Trajectory traj;
    traj.params = params;
    traj.params.m = m;
    traj.spec = spec;
    const double dt = automatic_dt(params, u0, m);
    traj.dt_used = dt;

    auto emit = [&](double clock, const std::vector<ModePair>& state) {
        const double t = clock * to_fast;
        Sample s{t, params.eps * t, Field(state)};
        if (slow) s.tau = clock;
        traj.samples.push_back(s);
        if (tail_fraction(traj.samples.back().u) > params.tail_tolerance) {
            std::ostringstream msg;
            msg << "evolve: tail energy " << tail_fraction(traj.samples.back().u) << " exceeds tolerance at clock "
                << clock;
            throw EvolveError(EvolveError::Kind::unresolved, msg.str(), traj);
        }
        return observer ? observer(traj.samples.back()) : true;
    };

    std::vector<ModePair> state(u0.coeffs().begin(), u0.coeffs().end());
    if (!emit(0.0, state)) return traj;

    LawsonStepper stepper(m, params.dealias, params.eps, spec);
    int halvings = 0;
    const auto n_samples = static_cast<std::size_t>(std::ceil(clock_horizon / stride - 1e-9));
    for (std::size_t i = 1; i <= n_samples; ++i) {
        const double c0 = static_cast<double>(i - 1) * stride;
        const double c1 = std::min(static_cast<double>(i) * stride, clock_horizon);
        const double span_fast = (c1 - c0) * to_fast;
        const std::vector<ModePair> saved = state;
        for (;;) {
            const double base_dt = dt / std::ldexp(1.0, halvings);
            const auto n_sub = static_cast<std::size_t>(std::ceil(span_fast / base_dt - 1e-9));
            stepper.set_step(span_fast / static_cast<double>(n_sub));
            bool unstable = false;
            for (std::size_t s = 0; s < n_sub && !unstable; ++s) {
                const double before = l2_squared(state);
                stepper.step(state);
                const double after = l2_squared(state);
                const double g = params.growth_factor;
                if (!std::isfinite(after) || (before > 0.0 && after > g * g * before)) unstable = true;
            }
            if (!unstable) break;
            if (++halvings > params.max_halvings) {
                std::ostringstream msg;
                msg << "evolve: step unstable after " << params.max_halvings << " halvings near clock " << c0;
                throw EvolveError(EvolveError::Kind::step_unstable, msg.str(), traj);
            }
            state = saved;
        }
        if (!emit(c1, state)) break;
    }
    return traj;
}

}  // namespace

Field quadratic_term(const Field& u, std::size_t m_out) {
    const std::size_t m = std::max<std::size_t>(u.m_max(), 1);
    // Product content reaches 2m; modes <= m_out are alias-free once N > 2m + m_out.
    Collocation grid(pow2_above(2 * m + m_out));
    auto a = grid.to_grid(u);
    const auto b = grid.to_grid(derivative(u, 1));
    for (std::size_t j = 0; j < a.size(); ++j) a[j] *= 6.0 * b[j];
    return grid.from_grid(a, m_out);
}

Field kdv_rhs(const Field& u) {
    Field out = quadratic_term(u, u.m_max());
    out -= derivative(u, 3);
    return out;
}

double tail_fraction(const Field& u) {
    const std::size_t m = u.m_max();
    const std::size_t cut = (3 * m + 3) / 4;
    double tail = 0.0;
    double total = 0.0;
    for (std::size_t k = m; k >= 1; --k) {
        const auto& c = u.mode(k);
        const double e = c.plus * c.plus + c.minus * c.minus;
        total += e;
        if (k > cut) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

Trajectory evolve(const Field& u0, const EvolveParams& params, const PerturbationSpec& spec, double sample_stride,
                  const SampleObserver& observer) {
    return run(u0, u0.m_max(), params, spec, sample_stride, observer);
}

Trajectory galerkin_evolve(const Field& u0, std::size_t m, const EvolveParams& params, const PerturbationSpec& spec,
                           double sample_stride, const SampleObserver& observer) {
    return run(u0, m, params, spec, sample_stride, observer);
}

Field airy_propagate(const Field& u, double t) {
    std::vector<ModePair> out(u.m_max());
    for (std::size_t k = 1; k <= u.m_max(); ++k) {
        const double th = std::pow(wavenumber(k), 3) * t;
        const double c = std::cos(th), s = std::sin(th);
        const auto& p = u.mode(k);
        out[k - 1] = {c * p.plus + s * p.minus, -s * p.plus + c * p.minus};
    }
    return Field(std::move(out));
}

}  // namespace kdvlab
