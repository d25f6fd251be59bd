#pragma once

// Time integration of u_t = -u_xxx + 6 u u_x + eps f(u) in fast time t.
// Slow time is tau = eps t; with eps = 0 the run clock is t itself.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdvlab/field.hpp"
#include "kdvlab/perturbation.hpp"

namespace kdvlab {

struct EvolveParams {
    double eps = 0.0;
    double dt = 0.0;              // fast-time step; 0 selects the nonlinear CFL default
    double dt_cap = 1e-3;         // upper bound for the automatic step
    double cfl = 0.5;             // 6 max|u| (2 pi m) dt <= cfl
    double t_end = 0.0;           // fast-time horizon, used when tau_end == 0
    double tau_end = 0.0;         // slow-time horizon (requires eps > 0)
    std::optional<std::size_t> m; // Galerkin dimension
    bool dealias = true;
    double growth_factor = 2.0;   // StepUnstable: ||u||_0 grows by more than this in one step
    int max_halvings = 8;
    double tail_tolerance = 1e-6; // Unresolved: relative L2 energy above 3/4 of the modes

    // True when samples are stamped in slow time.
    bool slow_clock() const { return eps > 0.0 && tau_end > 0.0; }
    double fast_horizon() const;
    void validate() const;
};

struct Sample {
    double t = 0.0;    // fast time
    double tau = 0.0;  // slow time eps t
    Field u;

    // Run clock: tau for slow-clock runs, t otherwise.
    double clock(bool slow) const { return slow ? tau : t; }
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_digest;
};

struct Trajectory {
    std::vector<Sample> samples;
    EvolveParams params;
    PerturbationSpec spec;
    Provenance provenance;
    double dt_used = 0.0;

    bool slow_clock() const { return params.slow_clock(); }
    std::size_t m_max() const { return samples.empty() ? 0 : samples.front().u.m_max(); }
};

class EvolveError : public std::runtime_error {
public:
    enum class Kind { step_unstable, unresolved };

    EvolveError(Kind kind, const std::string& what, Trajectory partial)
        : std::runtime_error(what), kind_(kind), partial_(std::move(partial)) {}

    Kind kind() const { return kind_; }
    const Trajectory& partial() const { return partial_; }

private:
    Kind kind_;
    Trajectory partial_;
};

// V(u) = -u_xxx + 6 u u_x, product dealiased and truncated to u's modes.
Field kdv_rhs(const Field& u);

// 6 u u_x with modes 1..m_out computed exactly (no aliasing).
Field quadratic_term(const Field& u, std::size_t m_out);

// Relative L2 energy in modes k > ceil(3 m_max / 4).
double tail_fraction(const Field& u);

// Observer called at every sample; returning false stops the run early.
using SampleObserver = std::function<bool(const Sample&)>;

// Full-resolution flow at u0.m_max() modes, sampled every `sample_stride` of the run clock.
Trajectory evolve(const Field& u0, const EvolveParams& params, const PerturbationSpec& spec,
                  double sample_stride, const SampleObserver& observer = {});

// Galerkin truncation: state, quadratic term, and perturbation projected onto m modes.
Trajectory galerkin_evolve(const Field& u0, std::size_t m, const EvolveParams& params,
                           const PerturbationSpec& spec, double sample_stride,
                           const SampleObserver& observer = {});

// Exact Airy propagator e^{-t d^3/dx^3}: pair k rotated by angle (2 pi k)^3 t.
Field airy_propagate(const Field& u, double t);

}  // namespace kdvlab
