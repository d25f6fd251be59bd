#pragma once

// Action rates F_k, the averaged field <F>, the averaged equation, and the
// diagnostics comparing them with perturbed trajectories: deviation reports,
// Weyl sums over angles, resonance occupation and the Liouville rate.

#include <complex>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "kdvlab/field.hpp"
#include "kdvlab/kdv.hpp"
#include "kdvlab/perturbation.hpp"

namespace kdvlab {

class ResonantRepresentative : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class EvaluatorFailure : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// F_k(u) = <grad I_k, f(u)>; 0 when gap k is closed.
double action_rate(const Field& u, int k, const PerturbationSpec& spec);
std::vector<double> action_rates(const Field& u, int k_max, const PerturbationSpec& spec);

struct AveragingParams {
    double t_avg = 1.0;         // fast-time averaging horizon
    int samples = 64;           // quadrature intervals over [0, t_avg]
    int blocks = 8;             // jackknife sub-intervals; must divide samples
    double dt = 0.0;            // integrator step (0: automatic)
    bool check_resonance = true;
    int resonance_order = 2;    // |L|_1 bound of the screened combinations
    double resonance_gap = 1.0; // |W . L| below this counts as resonant
    double frequency_horizon = 0.2;
    double fit_tolerance = 1e-6;  // relative action tolerance of the re-fitted representative
};

struct RateEstimate {
    std::vector<double> mean;   // k = 1..k_max
    std::vector<double> error;  // jackknife standard error
};

// Time average of F_k along the eps = 0 flow from u_rep. Throws ResonantRepresentative
// when some |W . L| with 0 < |L|_1 <= resonance_order falls below resonance_gap.
RateEstimate estimate_averaged_field(const Field& u_rep, int k_max, const PerturbationSpec& spec,
                                     const AveragingParams& params = {});

// Rescales modes 1..target.size() of rep until their gap actions match target to
// relative tolerance tol. Throws EvaluatorFailure when the iteration stalls.
Field field_with_actions(const Field& rep, const std::vector<double>& target, double tol = 1e-6);

// <F>(J) for k = 1..k_max.
class AveragedField {
public:
    using Evaluator = std::function<std::vector<double>(const std::vector<double>&)>;

    AveragedField(int k_max, Evaluator evaluator) : k_max_(k_max), evaluator_(std::move(evaluator)) {}

    static AveragedField zero(int k_max);
    // <F_k> = rates[k-1] J_k.
    static AveragedField linear(std::vector<double> rates);
    // Estimated by time averaging at a representative re-fitted to each J.
    static AveragedField estimated(const Field& representative, int k_max, const PerturbationSpec& spec,
                                   const AveragingParams& params = {});

    int k_max() const { return k_max_; }
    std::vector<double> operator()(const std::vector<double>& j) const;

private:
    int k_max_;
    Evaluator evaluator_;
};

// Linear-order rates of a linear perturbation: <F_k> = c_k J_k with
// c_k = -2 scale (2 pi k)^{-2} for double_antiderivative, 0 for the Hamiltonian kinds.
std::vector<double> linear_rates(const PerturbationSpec& spec, int k_max);

struct AveragedSolution {
    std::vector<double> tau;
    std::vector<std::vector<double>> j;  // j[i][k-1]
    double stop_time = 0.0;
    int evaluations = 0;
};

struct AveragedSolveOptions {
    double abs_tol = 1e-14;
    double rel_tol = 1e-10;
    int n_out = 100;  // output intervals on [0, tau_end]
};

// Dense-output Dormand-Prince on dJ/dtau = <F>(J); entries clamped at 0. Stops at the
// first tau with |J|~_p > ball_radius.
AveragedSolution solve_averaged(const std::vector<double>& j0, double tau_end, const AveragedField& field,
                                double p, double ball_radius, const AveragedSolveOptions& options = {});

struct ComparisonReport {
    int k_max = 0;
    double q = 0.0;
    double eps = 0.0;
    std::vector<double> tau;
    std::vector<std::vector<double>> actions;    // measured I(tau)
    std::vector<std::vector<double>> averaged;   // J(tau), interpolated
    std::vector<std::vector<double>> residuals;  // Xi_k(tau); empty without an evaluator
    double rho_observed = 0.0;
    double stop_time = 0.0;
    std::optional<double> threshold;
    bool pass = true;
};

// Deviation sup_{tau <= stop} |I(tau) - J(tau)|~_q over k <= k_max. With an evaluator the
// residuals Xi_k = I_k(tau) - I_k(0) - int_0^tau <F_k>(I(s)) ds are added.
ComparisonReport compare(const Trajectory& traj, const AveragedSolution& averaged, double q, int k_max,
                         std::optional<double> threshold = std::nullopt,
                         const AveragedField* evaluator = nullptr);

// Same, with the measured actions supplied (tau grid and I per sample).
ComparisonReport compare_actions(const std::vector<double>& tau, const std::vector<std::vector<double>>& actions,
                                 const AveragedSolution& averaged, double q,
                                 std::optional<double> threshold = std::nullopt,
                                 const AveragedField* evaluator = nullptr);

using WeylIndex = std::vector<int>;

struct WeylReport {
    int m = 0;
    int n = 0;
    double eps = 0.0;
    std::size_t trajectories = 0;
    std::size_t samples = 0;
    std::map<WeylIndex, std::complex<double>> statistics;

    double max_modulus() const;  // over s != 0
};

// Streaming Weyl sums: time averages of exp(i s . phi) over each trajectory, then the
// ensemble mean. Phases are unwrapped against the linear advance -(2 pi k)^3 dt and
// integrated exactly as piecewise-linear functions of the clock.
class WeylAccumulator {
public:
    WeylAccumulator(int m, int n);

    void begin_trajectory();
    void add(double clock, double t, const Field& u);
    void end_trajectory();
    WeylReport report(double eps) const;
    // Adds another accumulator's finished trajectories (same m, n).
    void merge(const WeylAccumulator& other);

    const std::vector<WeylIndex>& indices() const { return indices_; }

private:
    int m_, n_;
    std::vector<WeylIndex> indices_;  // canonical half: first nonzero entry positive
    std::vector<std::complex<double>> ensemble_;
    std::vector<std::complex<double>> current_;
    std::vector<double> phase_;
    std::vector<double> prev_angle_;
    double prev_clock_ = 0.0, prev_t_ = 0.0, span_ = 0.0;
    bool started_ = false;
    std::size_t trajectories_ = 0, samples_ = 0;
};

WeylReport weyl_report(const std::vector<Trajectory>& ensemble, int m, int n);

struct ResonanceScales {
    double action_scale = 1.0;     // small-action zone: inf_k I_k < action_scale eps^alpha
    double frequency_scale = 1.0;  // resonance zone: |W . L| < frequency_scale eps^alpha
    double frequency_horizon = 0.05;
};

// Fraction of samples with clock in [0, 1] lying in the resonance set. Requires alpha < 1/4.
double resonance_occupation(const Trajectory& traj, int m, int n, double alpha, double eps,
                            const ResonanceScales& scales = {});

struct QuasiInvarianceSeries {
    std::vector<double> tau;
    std::vector<double> drift;       // eps^-1 E_{p+1}
    std::vector<double> forcing;     // E^f_{p+1}
    std::vector<double> divergence;  // sum_i d f_i / d u_i over the m modes
    std::vector<double> rate;        // divergence - drift - forcing = d/dtau log density

    double sup_abs_rate() const;
};

QuasiInvarianceSeries quasi_invariance_rate(const Trajectory& traj, std::size_t m, int p, double eps,
                                            const PerturbationSpec& spec);
// Rate at one state (for streaming use).
void append_quasi_invariance(QuasiInvarianceSeries& series, double tau, const Field& u_m, std::size_t m, int p,
                             double eps, const PerturbationSpec& spec);

nlohmann::json to_json(const ComparisonReport& report);
nlohmann::json to_json(const WeylReport& report);
nlohmann::json to_json(const QuasiInvarianceSeries& series);

// Long-form CSV: tau,k,I,J,Xi.
void write_comparison_csv(std::ostream& os, const ComparisonReport& report);
// tau,drift,forcing,divergence,rate.
void write_quasi_invariance_csv(std::ostream& os, const QuasiInvarianceSeries& series);

}  // namespace kdvlab
