#include "kdvlab/hill.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "kdvlab/collocation.hpp"
#include "kdvlab/kdv.hpp"

namespace kdvlab {

namespace {

constexpr double kPi = std::numbers::pi;
// Gauss points 1/2 -+ sqrt(3)/6 and the commutator weight sqrt(3)/12.
constexpr double kGauss1 = 0.5 - std::numbers::sqrt3 / 6.0;
constexpr double kGauss2 = 0.5 + std::numbers::sqrt3 / 6.0;
constexpr double kCommutator = std::numbers::sqrt3 / 12.0;

constexpr int kActionNodes = 24;
constexpr int kGradientNodes = 24;

// exp of the traceless step matrix [[a, h], [h qb, -a]] = C I + S Omega, Omega^2 = z I.
inline void step_exponential(double z, double& c, double& s) {
    if (z > 1e-4) {
        const double r = std::sqrt(z);
        c = std::cosh(r);
        s = std::sinh(r) / r;
    } else if (z < -1e-4) {
        const double r = std::sqrt(-z);
        c = std::cos(r);
        s = std::sin(r) / r;
    } else {
        c = 1.0 + z * (1.0 / 2 + z * (1.0 / 24 + z * (1.0 / 720 + z / 40320)));
        s = 1.0 + z * (1.0 / 6 + z * (1.0 / 120 + z * (1.0 / 5040 + z / 362880)));
    }
}

double sup_bound(const Field& u) {
    double s = 0.0;
    for (const auto& c : u.coeffs()) s += std::hypot(c.plus, c.minus);
    return std::numbers::sqrt2 * s;
}

}  // namespace

HillOperator::HillOperator(const Field& u, double step_factor)
    : u_(u), step_factor_(step_factor), sup_bound_(sup_bound(u)) {}

int HillOperator::steps_for(double lambda) const {
    const double scale = std::max({1.0, std::abs(lambda), sup_bound_});
    const int base = std::max(32 * static_cast<int>(std::ceil(std::sqrt(scale))), 8 * static_cast<int>(u_.m_max()));
    return 2 * static_cast<int>(std::ceil(0.5 * step_factor_ * base));
}

const std::vector<double>& HillOperator::nodes(int steps) const {
    auto it = node_cache_.find(steps);
    if (it != node_cache_.end()) return it->second;
    std::vector<double> values(2 * static_cast<std::size_t>(steps));
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        values[2 * i] = evaluate(u_, (i + kGauss1) * h);
        values[2 * i + 1] = evaluate(u_, (i + kGauss2) * h);
    }
    return node_cache_.emplace(steps, std::move(values)).first->second;
}

DiscriminantSample HillOperator::discriminant(double lambda) const {
    return discriminant(lambda, steps_for(lambda), nullptr, nullptr);
}

DiscriminantSample HillOperator::discriminant(double lambda, int steps, std::vector<double>* y1_path,
                                              std::vector<double>* y2_path) const {
    const auto& q = nodes(steps);
    const double h = 1.0 / steps;
    double y1 = 1.0, dy1 = 0.0, y2 = 0.0, dy2 = 1.0;
    if (y1_path) y1_path->resize(steps);
    if (y2_path) y2_path->resize(steps);
    for (int i = 0; i < steps; ++i) {
        if (y1_path) (*y1_path)[i] = y1;
        if (y2_path) (*y2_path)[i] = y2;
        const double q1 = q[2 * i] - lambda;
        const double q2 = q[2 * i + 1] - lambda;
        const double qb = 0.5 * (q1 + q2);
        const double a = kCommutator * h * h * (q1 - q2);
        double c, s;
        step_exponential(a * a + h * h * qb, c, s);
        const double e11 = c + s * a, e12 = s * h, e21 = s * h * qb, e22 = c - s * a;
        const double n1 = e11 * y1 + e12 * dy1, n1d = e21 * y1 + e22 * dy1;
        const double n2 = e11 * y2 + e12 * dy2, n2d = e21 * y2 + e22 * dy2;
        y1 = n1, dy1 = n1d, y2 = n2, dy2 = n2d;
    }
    if (!std::isfinite(y1) || !std::isfinite(y2) || !std::isfinite(dy1) || !std::isfinite(dy2)) {
        throw IntegrationFailure("discriminant: transfer matrix overflow at lambda = " + std::to_string(lambda));
    }
    return {lambda, y1 + dy2, y1, y2, dy1, dy2};
}

Field HillOperator::discriminant_gradient(double lambda, DiscriminantSample* sample) const {
    const int steps = steps_for(lambda);
    std::vector<double> p1, p2;
    const auto d = discriminant(lambda, steps, &p1, &p2);
    if (sample) *sample = d;
    // d Delta / d u(x) = m12 y1^2 + (m22 - m11) y1 y2 - m21 y2^2 with M the monodromy.
    std::vector<double> g(steps);
    for (int i = 0; i < steps; ++i) {
        g[i] = d.y2 * p1[i] * p1[i] + (d.dy2 - d.y1) * p1[i] * p2[i] - d.dy1 * p2[i] * p2[i];
    }
    // Periodic trapezoid rule against e_{+-k}.
    const std::size_t m = u_.m_max();
    std::vector<double> cos_table(steps), sin_table(steps);
    for (int i = 0; i < steps; ++i) {
        cos_table[i] = std::cos(kTwoPi * i / steps);
        sin_table[i] = std::sin(kTwoPi * i / steps);
    }
    std::vector<ModePair> out(m);
    const double w = std::numbers::sqrt2 / steps;
    for (std::size_t k = 1; k <= m; ++k) {
        double a = 0.0, b = 0.0;
        std::size_t idx = 0;
        for (int i = 0; i < steps; ++i) {
            a += g[i] * cos_table[idx];
            b += g[i] * sin_table[idx];
            idx += k;
            if (idx >= static_cast<std::size_t>(steps)) idx %= static_cast<std::size_t>(steps);
        }
        out[k - 1] = {w * a, w * b};
    }
    return Field(std::move(out));
}

DiscriminantSample discriminant(const Field& u, double lambda) { return HillOperator(u).discriminant(lambda); }

std::vector<double> HillSpectrum::lambda_sorted() const {
    std::vector<double> out{lambda0};
    for (const auto& g : gaps) {
        out.push_back(g.lo);
        out.push_back(g.hi);
    }
    return out;
}

double closed_gap_threshold(double lambda) { return 1e-9 * std::max(1.0, std::abs(lambda)); }

namespace {

double excess_at(const HillOperator& op, double lambda) { return op.discriminant(lambda).excess(); }

double find_root(const HillOperator& op, double lo, double hi) {
    auto f = [&](double l) { return excess_at(op, l); };
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

double ground_state(const HillOperator& op) {
    const double hi = 0.25 * kPi * kPi;
    if (excess_at(op, hi) >= 0.0) throw RootBracketFailure("lambda_0: no sign change below (pi/2)^2");
    double lo = -1.0;
    for (int i = 0; i < 60; ++i) {
        const auto d = op.discriminant(lo);
        if (d.excess() > 0.0 && d.delta > 0.0) return find_root(op, lo, hi);
        lo = 2.0 * lo - 1.0;
    }
    throw RootBracketFailure("lambda_0: failed to bracket the ground state");
}

SpectralGap locate_gap(const HillOperator& op, int n) {
    const double left = std::pow((n - 0.5) * kPi, 2);
    const double right = std::pow((n + 0.5) * kPi, 2);
    constexpr int kScan = 17;
    std::array<double, kScan> xs{}, ds{};
    int best = 0;
    for (int i = 0; i < kScan; ++i) {
        xs[i] = left + (right - left) * i / (kScan - 1);
        ds[i] = excess_at(op, xs[i]);
        if (ds[i] > ds[best]) best = i;
    }
    const double a = xs[std::max(best - 1, 0)];
    const double b = xs[std::min(best + 1, kScan - 1)];
    auto neg = [&](double l) { return -excess_at(op, l); };
    double center = boost::math::tools::brent_find_minima(neg, a, b, 40).first;

    // The maximum of Delta^2 - 4 is a smooth bump; fit a parabola through three
    // close points so the peak value is resolved far below sqrt(eps) in lambda.
    double peak = excess_at(op, center);
    double curvature = 0.0;
    for (double rel : {1e-6, 1e-7}) {
        const double s = rel * std::max(1.0, center);
        const double fm = excess_at(op, center - s), f0 = excess_at(op, center), fp = excess_at(op, center + s);
        const double c2 = (fp + fm - 2.0 * f0) / (2.0 * s * s);
        const double c1 = (fp - fm) / (2.0 * s);
        if (!(c2 < 0.0)) {
            peak = std::max({fm, f0, fp});
            break;
        }
        const double shift = std::clamp(-c1 / (2.0 * c2), -s, s);
        center += shift;
        peak = f0 - c1 * c1 / (4.0 * c2);
        curvature = -c2;
    }

    SpectralGap gap{center, center, false};
    if (peak <= 0.0) return gap;
    const double gamma_estimate = curvature > 0.0 ? 2.0 * std::sqrt(peak / curvature) : 0.0;
    const double direct = excess_at(op, center);
    if (direct <= 0.0) {
        if (gamma_estimate < closed_gap_threshold(center)) return gap;
        throw RootBracketFailure("gap " + std::to_string(n) + ": peak of Delta^2 - 4 not reproducible");
    }
    int li = -1, ri = -1;
    for (int i = 0; i < kScan; ++i) {
        if (ds[i] < 0.0 && xs[i] < center) li = i;
        if (ds[i] < 0.0 && xs[i] > center && ri < 0) ri = i;
    }
    if (li < 0 || ri < 0) {
        throw RootBracketFailure("gap " + std::to_string(n) + ": no sign change of Delta^2 - 4 around the gap");
    }
    gap.lo = find_root(op, xs[li], center);
    gap.hi = find_root(op, center, xs[ri]);
    gap.open = gap.hi - gap.lo >= closed_gap_threshold(gap.hi);
    if (!gap.open) gap.lo = gap.hi = 0.5 * (gap.lo + gap.hi);
    return gap;
}

HillSpectrum spectrum_of(const HillOperator& op, int n_gaps) {
    if (n_gaps < 1) throw std::invalid_argument("periodic_spectrum: n_gaps must be >= 1");
    HillSpectrum s;
    s.lambda0 = ground_state(op);
    double prev = s.lambda0;
    for (int n = 1; n <= n_gaps; ++n) {
        const auto g = locate_gap(op, n);
        if (!(g.lo > prev) || g.hi < g.lo) {
            throw RootBracketFailure("periodic_spectrum: interlacing violated at gap " + std::to_string(n) +
                                     " (raise resolution)");
        }
        prev = g.hi;
        s.gaps.push_back(g);
    }
    return s;
}

}  // namespace

HillSpectrum periodic_spectrum(const Field& u, int n_gaps) { return spectrum_of(HillOperator(u), n_gaps); }

HillSpectrum periodic_spectrum(const HillOperator& op, int n_gaps) { return spectrum_of(op, n_gaps); }

double gap_action(const HillOperator& op, const SpectralGap& gap) {
    if (!gap.open) return 0.0;
    // I = (2/pi) int arccosh(|Delta|/2) = (2/pi) int asinh(sqrt(Delta^2 - 4)/2); the integrand
    // vanishes like sqrt((l - lo)(hi - l)), so second-kind Gauss-Chebyshev absorbs it.
    const double c = 0.5 * (gap.lo + gap.hi);
    const double r = 0.5 * (gap.hi - gap.lo);
    double sum = 0.0;
    for (int i = kActionNodes; i >= 1; --i) {
        const double theta = i * kPi / (kActionNodes + 1);
        const double st = std::sin(theta);
        const double d = std::max(0.0, excess_at(op, c + r * std::cos(theta)));
        // weight pi/(N+1) sin^2 times integrand / (r sin)
        sum += st * std::asinh(0.5 * std::sqrt(d));
    }
    return (2.0 / kPi) * r * (kPi / (kActionNodes + 1)) * sum;
}

ActionVector actions(const Field& u, int n) {
    const HillOperator op(u);
    const auto spec = spectrum_of(op, n);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (const auto& g : spec.gaps) out.push_back(gap_action(op, g));
    return ActionVector(std::move(out));
}

namespace {

Field gap_gradient(const HillOperator& op, const SpectralGap& gap, int j) {
    if (!gap.open) throw ClosedGap("action_gradient: gap " + std::to_string(j) + " is closed");
    // grad I = (2/pi) int sgn(Delta) grad Delta / sqrt(Delta^2 - 4): first-kind Gauss-Chebyshev.
    const double c = 0.5 * (gap.lo + gap.hi);
    const double r = 0.5 * (gap.hi - gap.lo);
    Field acc(op.field().m_max());
    for (int i = 1; i <= kGradientNodes; ++i) {
        const double theta = (2 * i - 1) * kPi / (2 * kGradientNodes);
        DiscriminantSample d;
        const Field g = op.discriminant_gradient(c + r * std::cos(theta), &d);
        const double ex = d.excess();
        if (!(ex > 0.0)) throw ClosedGap("action_gradient: gap " + std::to_string(j) + " below resolution");
        const double weight = (d.delta > 0.0 ? 1.0 : -1.0) * r * std::sin(theta) / std::sqrt(ex);
        acc += g * weight;
    }
    return acc * ((2.0 / kPi) * (kPi / kGradientNodes));
}

Field formula_gradient(const Field& u, int j) {
    const HillOperator op(u);
    const auto spec = spectrum_of(op, j);
    return gap_gradient(op, spec.gaps.back(), j);
}

Field fd_gradient(const Field& u, int j) {
    double amp = 0.0;
    for (const auto& c : u.coeffs()) amp = std::max({amp, std::abs(c.plus), std::abs(c.minus)});
    if (amp == 0.0) throw ClosedGap("action_gradient: zero field has no open gaps");
    const double h = 1e-3 * amp;
    auto action_j = [&](const Field& w) {
        const HillOperator op(w);
        const auto spec = spectrum_of(op, j);
        return gap_action(op, spec.gaps.back());
    };
    {
        const auto spec = periodic_spectrum(u, j);
        if (!spec.gaps.back().open) throw ClosedGap("action_gradient: gap " + std::to_string(j) + " is closed");
    }
    std::vector<ModePair> out(u.m_max());
    for (std::size_t k = 1; k <= u.m_max(); ++k) {
        const auto c = u.mode(k);
        const double ap = action_j(u.with_mode(k, {c.plus + h, c.minus}));
        const double am = action_j(u.with_mode(k, {c.plus - h, c.minus}));
        const double bp = action_j(u.with_mode(k, {c.plus, c.minus + h}));
        const double bm = action_j(u.with_mode(k, {c.plus, c.minus - h}));
        out[k - 1] = {(ap - am) / (2.0 * h), (bp - bm) / (2.0 * h)};
    }
    return Field(std::move(out));
}

}  // namespace

Field action_gradient(const Field& u, int j, GradientMethod method) {
    if (j < 1) throw std::invalid_argument("action_gradient: j must be >= 1");
    return method == GradientMethod::formula ? formula_gradient(u, j) : fd_gradient(u, j);
}

std::vector<std::optional<Field>> action_gradients(const Field& u, int n) {
    if (n < 1) throw std::invalid_argument("action_gradients: n must be >= 1");
    const HillOperator op(u);
    const auto spec = spectrum_of(op, n);
    std::vector<std::optional<Field>> out;
    for (int j = 1; j <= n; ++j) {
        const auto& gap = spec.gaps[j - 1];
        if (!gap.open) {
            out.emplace_back();
            continue;
        }
        try {
            out.emplace_back(gap_gradient(op, gap, j));
        } catch (const ClosedGap&) {
            out.emplace_back();
        }
    }
    return out;
}

std::vector<double> estimate_frequencies(const Field& u, int n, double horizon) {
    if (n < 1 || static_cast<std::size_t>(n) > u.m_max()) {
        throw std::invalid_argument("estimate_frequencies: need 1 <= n <= m_max");
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("estimate_frequencies: horizon must be > 0");
    constexpr int kSamples = 256;
    EvolveParams params;
    params.t_end = horizon;
    params.tail_tolerance = 1.0;
    const double stride = horizon / kSamples;
    const auto traj = evolve(u, params, {}, stride);

    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        const double omega = std::pow(wavenumber(k), 3);
        // Unwrap against the linear prediction -omega dt, then least-squares slope.
        std::vector<double> phase;
        double prev = pair_angle(traj.samples.front().u.mode(k));
        double acc = prev;
        phase.push_back(acc);
        for (std::size_t i = 1; i < traj.samples.size(); ++i) {
            const double dt = traj.samples[i].t - traj.samples[i - 1].t;
            const double cur = pair_angle(traj.samples[i].u.mode(k));
            const double predicted = -omega * dt;
            const double d = std::remainder(cur - prev - predicted, kTwoPi);
            acc += predicted + d;
            phase.push_back(acc);
            prev = cur;
        }
        const auto& mk = u.mode(k);
        if (mk.plus == 0.0 && mk.minus == 0.0) {
            out[k - 1] = omega;
            continue;
        }
        double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
        const double cnt = static_cast<double>(phase.size());
        for (std::size_t i = 0; i < phase.size(); ++i) {
            const double t = traj.samples[i].t;
            st += t;
            sp += phase[i];
            stt += t * t;
            stp += t * phase[i];
        }
        const double slope = (cnt * stp - st * sp) / (cnt * stt - st * st);
        out[k - 1] = -slope;
    }
    return out;
}

void write_spectrum_csv(std::ostream& os, const HillSpectrum& spectrum, const ActionVector& actions) {
    os << "j,lambda_lo,lambda_hi,gamma,action\n";
    os << std::setprecision(17);
    for (int j = 1; j <= spectrum.n_gaps(); ++j) {
        const auto& g = spectrum.gaps[j - 1];
        const double a = static_cast<std::size_t>(j) <= actions.size() ? actions[j] : 0.0;
        os << j << ',' << g.lo << ',' << g.hi << ',' << g.gamma() << ',' << a << '\n';
    }
}

}  // namespace kdvlab
