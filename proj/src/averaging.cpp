#include "kdvlab/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "kdvlab/conservation.hpp"
#include "kdvlab/hill.hpp"

namespace kdvlab {

namespace {

bool all_zero(const Field& u) {
    for (const auto& c : u.coeffs()) {
        if (c.plus != 0.0 || c.minus != 0.0) return false;
    }
    return true;
}

// All L in Z^dim with 0 < |L|_1 <= order whose first nonzero entry is positive.
std::vector<std::vector<int>> half_lattice(int dim, int order) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(dim), 0);
    std::function<void(int, int)> rec = [&](int pos, int budget) {
        if (pos == dim) {
            auto first = std::find_if(cur.begin(), cur.end(), [](int v) { return v != 0; });
            if (first != cur.end() && *first > 0) out.push_back(cur);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            rec(pos + 1, budget - std::abs(v));
        }
        cur[static_cast<std::size_t>(pos)] = 0;
    };
    rec(0, order);
    return out;
}

double min_combination(const std::vector<double>& w, int order) {
    double best = INFINITY;
    for (const auto& l : half_lattice(static_cast<int>(w.size()), order)) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += l[i] * w[i];
        best = std::min(best, std::abs(s));
    }
    return best;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
    if (x.size() == 1 || at <= x.front()) return y.front();
    if (at >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return (1.0 - w) * y[i - 1] + w * y[i];
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t k) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
}

}  // namespace

double action_rate(const Field& u, int k, const PerturbationSpec& spec) {
    if (k < 1) throw std::invalid_argument("action_rate: k must be >= 1");
    return action_rates(u, k, spec)[static_cast<std::size_t>(k - 1)];
}

std::vector<double> action_rates(const Field& u, int k_max, const PerturbationSpec& spec) {
    std::vector<double> out(static_cast<std::size_t>(k_max), 0.0);
    if (spec.kind == PerturbationKind::none) return out;
    const Field f = apply_perturbation(spec, u);
    if (all_zero(f)) return out;
    const auto grads = action_gradients(u, k_max);
    for (int k = 1; k <= k_max; ++k) {
        const auto& g = grads[static_cast<std::size_t>(k - 1)];
        if (g) out[static_cast<std::size_t>(k - 1)] = inner(*g, f);
    }
    return out;
}

RateEstimate estimate_averaged_field(const Field& u_rep, int k_max, const PerturbationSpec& spec,
                                     const AveragingParams& params) {
    if (k_max < 1 || static_cast<std::size_t>(k_max) > u_rep.m_max()) {
        throw std::invalid_argument("estimate_averaged_field: need 1 <= k_max <= m_max");
    }
    if (params.blocks < 2 || params.samples % params.blocks != 0) {
        throw std::invalid_argument("estimate_averaged_field: blocks must be >= 2 and divide samples");
    }
    if (!(params.t_avg > 0.0)) throw std::invalid_argument("estimate_averaged_field: t_avg must be > 0");

    if (params.check_resonance && !all_zero(u_rep)) {
        const auto w = estimate_frequencies(u_rep, k_max, params.frequency_horizon);
        const double gap = min_combination(w, params.resonance_order);
        if (gap < params.resonance_gap) {
            throw ResonantRepresentative("representative is resonant: min |W.L| = " + std::to_string(gap));
        }
    }

    EvolveParams ep;
    ep.t_end = params.t_avg;
    ep.dt = params.dt;
    ep.tail_tolerance = 1.0;
    const double stride = params.t_avg / params.samples;
    std::vector<std::vector<double>> rates;
    evolve(u_rep, ep, {}, stride, [&](const Sample& s) {
        rates.push_back(action_rates(s.u, k_max, spec));
        return true;
    });
    if (rates.size() != static_cast<std::size_t>(params.samples) + 1) {
        throw EvaluatorFailure("estimate_averaged_field: unexpected sample count");
    }

    const std::size_t per = static_cast<std::size_t>(params.samples / params.blocks);
    const double nb = params.blocks;
    RateEstimate out;
    for (int k = 0; k < k_max; ++k) {
        std::vector<double> block(static_cast<std::size_t>(params.blocks));
        for (std::size_t b = 0; b < block.size(); ++b) {
            double acc = 0.0;
            for (std::size_t i = b * per; i < (b + 1) * per; ++i) acc += 0.5 * (rates[i][k] + rates[i + 1][k]);
            block[b] = acc / static_cast<double>(per);
        }
        double mean = 0.0;
        for (double v : block) mean += v;
        mean /= nb;
        double var = 0.0;
        for (double v : block) {
            const double loo = (nb * mean - v) / (nb - 1.0);
            var += (loo - mean) * (loo - mean);
        }
        out.mean.push_back(mean);
        out.error.push_back(std::sqrt((nb - 1.0) / nb * var));
    }
    return out;
}

Field field_with_actions(const Field& rep, const std::vector<double>& target, double tol) {
    const int n = static_cast<int>(target.size());
    if (static_cast<std::size_t>(n) > rep.m_max()) throw std::invalid_argument("field_with_actions: too many targets");
    for (double t : target) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("field_with_actions: targets must be >= 0");
    }
    Field u = rep;
    for (int k = 1; k <= n; ++k) {
        const double t = target[static_cast<std::size_t>(k - 1)];
        const auto c = u.mode(static_cast<std::size_t>(k));
        if (t == 0.0) {
            u = u.with_mode(static_cast<std::size_t>(k), {0.0, 0.0});
        } else if (c.plus == 0.0 && c.minus == 0.0) {
            // Linearized guess: I_k = |u_k|^2 / (2 (2 pi k)).
            u = u.with_mode(static_cast<std::size_t>(k), {std::sqrt(2.0 * wavenumber(k) * t), 0.0});
        }
    }
    constexpr int kMaxIterations = 60;
    for (int it = 0; it < kMaxIterations; ++it) {
        const auto a = actions(u, n);
        double worst = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double t = target[static_cast<std::size_t>(k - 1)];
            if (t == 0.0) continue;
            worst = std::max(worst, std::abs(a[k] - t) / t);
        }
        if (worst <= tol) return u;
        for (int k = 1; k <= n; ++k) {
            const double t = target[static_cast<std::size_t>(k - 1)];
            if (t == 0.0) continue;
            const auto c = u.mode(static_cast<std::size_t>(k));
            const double ratio = a[k] > 0.0 ? std::sqrt(t / a[k]) : 2.0;
            u = u.with_mode(static_cast<std::size_t>(k), {c.plus * ratio, c.minus * ratio});
        }
    }
    throw EvaluatorFailure("field_with_actions: no convergence to the target actions");
}

AveragedField AveragedField::zero(int k_max) {
    return AveragedField(k_max, [k_max](const std::vector<double>&) {
        return std::vector<double>(static_cast<std::size_t>(k_max), 0.0);
    });
}

AveragedField AveragedField::linear(std::vector<double> rates) {
    const int k_max = static_cast<int>(rates.size());
    return AveragedField(k_max, [rates = std::move(rates)](const std::vector<double>& j) {
        std::vector<double> out(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) out[k] = rates[k] * j[k];
        return out;
    });
}

AveragedField AveragedField::estimated(const Field& representative, int k_max, const PerturbationSpec& spec,
                                       const AveragingParams& params) {
    auto rep = std::make_shared<Field>(representative);
    return AveragedField(k_max, [rep, k_max, spec, params](const std::vector<double>& j) {
        std::vector<double> target(j.begin(), j.begin() + k_max);
        for (double& t : target) t = std::max(t, 0.0);
        *rep = field_with_actions(*rep, target, params.fit_tolerance);
        return estimate_averaged_field(*rep, k_max, spec, params).mean;
    });
}

std::vector<double> AveragedField::operator()(const std::vector<double>& j) const {
    if (static_cast<int>(j.size()) != k_max_) throw std::invalid_argument("AveragedField: wrong action count");
    auto out = evaluator_(j);
    if (static_cast<int>(out.size()) != k_max_) throw EvaluatorFailure("AveragedField: evaluator returned wrong size");
    for (double v : out) {
        if (!std::isfinite(v)) throw EvaluatorFailure("AveragedField: non-finite rate");
    }
    return out;
}

std::vector<double> linear_rates(const PerturbationSpec& spec, int k_max) {
    std::vector<double> out(static_cast<std::size_t>(k_max), 0.0);
    if (spec.kind == PerturbationKind::double_antiderivative) {
        for (int k = 1; k <= k_max; ++k) out[static_cast<std::size_t>(k - 1)] = -2.0 * spec.scale() / std::pow(wavenumber(k), 2);
    } else if (spec.kind == PerturbationKind::antiderivative || spec.kind == PerturbationKind::derivative ||
               spec.kind == PerturbationKind::none) {
        return out;
    } else {
        throw std::invalid_argument("linear_rates: perturbation is not linear");
    }
    return out;
}

AveragedSolution solve_averaged(const std::vector<double>& j0, double tau_end, const AveragedField& field,
                                double p, double ball_radius, const AveragedSolveOptions& options) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    if (static_cast<int>(j0.size()) != field.k_max()) throw std::invalid_argument("solve_averaged: J0 size mismatch");
    for (double v : j0) {
        if (!(v >= 0.0)) throw std::invalid_argument("solve_averaged: J0 entries must be >= 0");
    }
    if (!(tau_end > 0.0) || options.n_out < 1) throw std::invalid_argument("solve_averaged: need tau_end > 0, n_out >= 1");

    AveragedSolution out;
    auto record = [&](double tau, State j) {
        for (double& v : j) v = std::max(v, 0.0);
        out.tau.push_back(tau);
        out.j.push_back(std::move(j));
    };
    auto norm = [&](const State& j) { return action_norm(std::span<const double>(j), p); };
    if (norm(j0) > ball_radius) {
        record(0.0, j0);
        out.stop_time = 0.0;
        return out;
    }

    auto rhs = [&](const State& j, State& dj, double) {
        State clamped = j;
        for (double& v : clamped) v = std::max(v, 0.0);
        dj = field(clamped);
        ++out.evaluations;
    };
    auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());
    stepper.initialize(j0, 0.0, tau_end / options.n_out);
    record(0.0, j0);
    int next = 1;
    const double dtau = tau_end / options.n_out;
    State prev = j0;
    double prev_tau = 0.0;
    out.stop_time = tau_end;
    while (next <= options.n_out) {
        if (stepper.current_time() >= next * dtau - 1e-15 * tau_end) {
            State j(j0.size());
            const double at = std::min(next * dtau, stepper.current_time());
            stepper.calc_state(at, j);
            for (double& v : j) v = std::max(v, 0.0);
            if (norm(j) > ball_radius) {
                // First exit inside (prev_tau, at]: linear interpolation of the norm.
                const double n0 = norm(prev), n1 = norm(j);
                out.stop_time = prev_tau + (at - prev_tau) * (ball_radius - n0) / (n1 - n0);
                break;
            }
            record(next == options.n_out ? tau_end : at, j);
            prev = j;
            prev_tau = at;
            ++next;
            continue;
        }
        // Do not step past tau_end.
        const double remaining = tau_end - stepper.current_time();
        if (stepper.current_time_step() > remaining && remaining > 0.0) {
            stepper.initialize(stepper.current_state(), stepper.current_time(), remaining);
        }
        stepper.do_step(rhs);
        State cur = stepper.current_state();
        bool negative = false;
        for (double& v : cur) {
            if (v < 0.0) {
                v = 0.0;
                negative = true;
            }
        }
        if (negative) {
            // Octant boundary: restart from the clamped state after emitting covered outputs.
            while (next <= options.n_out && stepper.current_time() >= next * dtau - 1e-15 * tau_end) {
                State j(j0.size());
                stepper.calc_state(next * dtau, j);
                for (double& v : j) v = std::max(v, 0.0);
                record(next * dtau, j);
                prev = j;
                prev_tau = next * dtau;
                ++next;
            }
            stepper.initialize(cur, stepper.current_time(), stepper.current_time_step());
        }
    }
    return out;
}

ComparisonReport compare_actions(const std::vector<double>& tau, const std::vector<std::vector<double>>& actions,
                                 const AveragedSolution& averaged, double q, std::optional<double> threshold,
                                 const AveragedField* evaluator) {
    if (tau.size() != actions.size() || tau.empty()) throw std::invalid_argument("compare: empty or mismatched series");
    if (averaged.tau.empty()) throw std::invalid_argument("compare: empty averaged solution");
    ComparisonReport r;
    r.k_max = static_cast<int>(averaged.j.front().size());
    r.q = q;
    r.stop_time = averaged.stop_time;
    r.threshold = threshold;
    const std::size_t k_max = static_cast<std::size_t>(r.k_max);
    std::vector<std::vector<double>> jcols;
    for (std::size_t k = 0; k < k_max; ++k) jcols.push_back(column(averaged.j, k));

    std::vector<double> prev_rate;
    std::vector<double> integral(k_max, 0.0);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (tau[i] > averaged.stop_time * (1.0 + 1e-12) + 1e-300) break;
        if (actions[i].size() < k_max) throw std::invalid_argument("compare: too few measured actions");
        std::vector<double> ii(actions[i].begin(), actions[i].begin() + static_cast<long>(k_max));
        std::vector<double> jj(k_max), diff(k_max);
        for (std::size_t k = 0; k < k_max; ++k) {
            jj[k] = interpolate(averaged.tau, jcols[k], tau[i]);
            diff[k] = ii[k] - jj[k];
        }
        r.rho_observed = std::max(r.rho_observed, action_norm(std::span<const double>(diff), q));
        if (evaluator) {
            auto rate = (*evaluator)(ii);
            if (i > 0) {
                for (std::size_t k = 0; k < k_max; ++k) integral[k] += 0.5 * (tau[i] - tau[i - 1]) * (rate[k] + prev_rate[k]);
            }
            std::vector<double> xi(k_max);
            for (std::size_t k = 0; k < k_max; ++k) xi[k] = ii[k] - actions[0][k] - integral[k];
            r.residuals.push_back(std::move(xi));
            prev_rate = std::move(rate);
        }
        r.tau.push_back(tau[i]);
        r.actions.push_back(std::move(ii));
        r.averaged.push_back(std::move(jj));
    }
    r.pass = !threshold || r.rho_observed <= *threshold;
    return r;
}

ComparisonReport compare(const Trajectory& traj, const AveragedSolution& averaged, double q, int k_max,
                         std::optional<double> threshold, const AveragedField* evaluator) {
    std::vector<double> tau;
    std::vector<std::vector<double>> acts;
    const bool slow = traj.slow_clock();
    for (const auto& s : traj.samples) {
        tau.push_back(s.clock(slow));
        const auto a = actions(s.u, k_max);
        acts.emplace_back(a.entries().begin(), a.entries().end());
    }
    auto r = compare_actions(tau, acts, averaged, q, threshold, evaluator);
    r.eps = traj.params.eps;
    return r;
}

double WeylReport::max_modulus() const {
    double out = 0.0;
    for (const auto& [s, v] : statistics) {
        if (std::any_of(s.begin(), s.end(), [](int x) { return x != 0; })) out = std::max(out, std::abs(v));
    }
    return out;
}

WeylAccumulator::WeylAccumulator(int m, int n) : m_(m), n_(n) {
    if (m < 1 || n < 1) throw std::invalid_argument("WeylAccumulator: m, n must be >= 1");
    indices_ = half_lattice(m, n);
    ensemble_.assign(indices_.size() + 1, {0.0, 0.0});
}

void WeylAccumulator::begin_trajectory() {
    current_.assign(indices_.size() + 1, {0.0, 0.0});
    phase_.assign(static_cast<std::size_t>(m_), 0.0);
    prev_angle_.assign(static_cast<std::size_t>(m_), 0.0);
    span_ = 0.0;
    started_ = false;
}

void WeylAccumulator::add(double clock, double t, const Field& u) {
    if (u.m_max() < static_cast<std::size_t>(m_)) throw std::invalid_argument("WeylAccumulator: field has too few modes");
    std::vector<double> next = phase_;
    for (int k = 1; k <= m_; ++k) {
        const double cur = pair_angle(u.mode(static_cast<std::size_t>(k)));
        const std::size_t i = static_cast<std::size_t>(k - 1);
        if (!started_) {
            next[i] = cur;
        } else {
            const double predicted = -std::pow(wavenumber(k), 3) * (t - prev_t_);
            next[i] = phase_[i] + predicted + std::remainder(cur - prev_angle_[i] - predicted, kTwoPi);
        }
        prev_angle_[i] = cur;
    }
    if (started_) {
        const double dc = clock - prev_clock_;
        // s = 0 carries the normalization.
        current_[0] += dc;
        for (std::size_t idx = 0; idx < indices_.size(); ++idx) {
            double th0 = 0.0, th1 = 0.0;
            for (std::size_t i = 0; i < indices_[idx].size(); ++i) {
                th0 += indices_[idx][i] * phase_[i];
                th1 += indices_[idx][i] * next[i];
            }
            const double d = th1 - th0;
            const std::complex<double> base = std::polar(1.0, th0);
            // int_0^1 exp(i (th0 + d x)) dx
            const std::complex<double> avg =
                std::abs(d) < 1e-8 ? base * std::complex<double>(1.0, 0.5 * d)
                                   : base * (std::polar(1.0, d) - 1.0) / std::complex<double>(0.0, d);
            current_[idx + 1] += dc * avg;
        }
        span_ += dc;
    }
    phase_ = std::move(next);
    prev_clock_ = clock;
    prev_t_ = t;
    started_ = true;
    ++samples_;
}

void WeylAccumulator::end_trajectory() {
    if (!(span_ > 0.0)) throw std::invalid_argument("WeylAccumulator: trajectory needs two samples with increasing clock");
    for (std::size_t i = 0; i < current_.size(); ++i) ensemble_[i] += current_[i] / span_;
    ++trajectories_;
}

void WeylAccumulator::merge(const WeylAccumulator& other) {
    if (other.m_ != m_ || other.n_ != n_) throw std::invalid_argument("WeylAccumulator: merge needs equal m, n");
    for (std::size_t i = 0; i < ensemble_.size(); ++i) ensemble_[i] += other.ensemble_[i];
    trajectories_ += other.trajectories_;
    samples_ += other.samples_;
}

WeylReport WeylAccumulator::report(double eps) const {
    WeylReport r;
    r.m = m_;
    r.n = n_;
    r.eps = eps;
    r.trajectories = trajectories_;
    r.samples = samples_;
    if (trajectories_ == 0) return r;
    const double count = static_cast<double>(trajectories_);
    r.statistics[WeylIndex(static_cast<std::size_t>(m_), 0)] = ensemble_[0] / count;
    for (std::size_t idx = 0; idx < indices_.size(); ++idx) {
        const auto v = ensemble_[idx + 1] / count;
        WeylIndex neg = indices_[idx];
        for (int& x : neg) x = -x;
        r.statistics[indices_[idx]] = v;
        r.statistics[neg] = std::conj(v);
    }
    return r;
}

WeylReport weyl_report(const std::vector<Trajectory>& ensemble, int m, int n) {
    WeylAccumulator acc(m, n);
    double eps = 0.0;
    for (const auto& traj : ensemble) {
        const bool slow = traj.slow_clock();
        eps = traj.params.eps;
        acc.begin_trajectory();
        for (const auto& s : traj.samples) acc.add(s.clock(slow), s.t, s.u);
        acc.end_trajectory();
    }
    return acc.report(eps);
}

double resonance_occupation(const Trajectory& traj, int m, int n, double alpha, double eps,
                            const ResonanceScales& scales) {
    if (!(alpha < 0.25)) throw std::invalid_argument("resonance_occupation: alpha must satisfy alpha < 1/4");
    if (!(alpha > 0.0) || !(eps > 0.0)) throw std::invalid_argument("resonance_occupation: need alpha > 0, eps > 0");
    if (m < 1 || n < 1) throw std::invalid_argument("resonance_occupation: m, n must be >= 1");
    const double level = std::pow(eps, alpha);
    const bool slow = traj.slow_clock();
    std::size_t total = 0, inside = 0;
    for (const auto& s : traj.samples) {
        const double c = s.clock(slow);
        if (c < 0.0 || c > 1.0) continue;
        ++total;
        const auto a = actions(s.u, m);
        const double smallest = *std::min_element(a.entries().begin(), a.entries().end());
        if (smallest < scales.action_scale * level) {
            ++inside;
            continue;
        }
        const auto w = estimate_frequencies(s.u, m, scales.frequency_horizon);
        if (min_combination(w, n) < scales.frequency_scale * level) ++inside;
    }
    if (total == 0) throw std::invalid_argument("resonance_occupation: no samples with clock in [0, 1]");
    return static_cast<double>(inside) / static_cast<double>(total);
}

double QuasiInvarianceSeries::sup_abs_rate() const {
    double out = 0.0;
    for (double r : rate) out = std::max(out, std::abs(r));
    return out;
}

void append_quasi_invariance(QuasiInvarianceSeries& series, double tau, const Field& u_m, std::size_t m, int p,
                             double eps, const PerturbationSpec& spec) {
    const auto gd = galerkin_drift(u_m, m, p + 1, spec);
    const Field um = project(u_m.resized(std::max(m, u_m.m_max())), m).resized(m);
    const double div = divergence(spec, um, m);
    series.tau.push_back(tau);
    series.drift.push_back(gd.e_n / eps);
    series.forcing.push_back(gd.e_n_f);
    series.divergence.push_back(div);
    series.rate.push_back(div - gd.e_n / eps - gd.e_n_f);
}

QuasiInvarianceSeries quasi_invariance_rate(const Trajectory& traj, std::size_t m, int p, double eps,
                                            const PerturbationSpec& spec) {
    if (!(eps > 0.0)) throw std::invalid_argument("quasi_invariance_rate: eps must be > 0");
    if (traj.m_max() != 0 && traj.m_max() != m) {
        throw std::invalid_argument("quasi_invariance_rate: trajectory was not produced with m modes");
    }
    QuasiInvarianceSeries out;
    const bool slow = traj.slow_clock();
    for (const auto& s : traj.samples) append_quasi_invariance(out, s.clock(slow), s.u, m, p, eps, spec);
    return out;
}

nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json j{{"k_max", r.k_max},
                     {"q", r.q},
                     {"eps", r.eps},
                     {"rho_observed", r.rho_observed},
                     {"stop_time", r.stop_time},
                     {"tau", r.tau},
                     {"actions", r.actions},
                     {"averaged", r.averaged},
                     {"residuals", r.residuals},
                     {"pass", r.pass}};
    j["threshold"] = r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const WeylReport& r) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& [s, v] : r.statistics) {
        stats.push_back({{"s", s}, {"re", v.real()}, {"im", v.imag()}, {"modulus", std::abs(v)}});
    }
    return {{"m", r.m},
            {"n", r.n},
            {"eps", r.eps},
            {"trajectories", r.trajectories},
            {"samples", r.samples},
            {"max_modulus", r.max_modulus()},
            {"statistics", stats}};
}

nlohmann::json to_json(const QuasiInvarianceSeries& s) {
    return {{"tau", s.tau},           {"drift", s.drift}, {"forcing", s.forcing},
            {"divergence", s.divergence}, {"rate", s.rate},   {"sup_abs_rate", s.sup_abs_rate()}};
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& r) {
    os << "tau,k,I,J,Xi\n" << std::setprecision(17);
    for (std::size_t i = 0; i < r.tau.size(); ++i) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(r.k_max); ++k) {
            os << r.tau[i] << ',' << k + 1 << ',' << r.actions[i][k] << ',' << r.averaged[i][k] << ',';
            if (!r.residuals.empty()) os << r.residuals[i][k];
            os << '\n';
        }
    }
}

void write_quasi_invariance_csv(std::ostream& os, const QuasiInvarianceSeries& s) {
    os << "tau,drift,forcing,divergence,rate\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.tau.size(); ++i) {
        os << s.tau[i] << ',' << s.drift[i] << ',' << s.forcing[i] << ',' << s.divergence[i] << ',' << s.rate[i] << '\n';
    }
}

}  // namespace kdvlab
