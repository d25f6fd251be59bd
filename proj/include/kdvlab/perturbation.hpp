#pragma once

#include <map>
#include <string>
#include <string_view>

#include "kdvlab/field.hpp"

namespace kdvlab {

enum class PerturbationKind {
    none,
    derivative,             // f(u) = d/dx u
    antiderivative,         // f(u) = d^{-1}/dx u
    double_antiderivative,  // f(u) = d^{-2}/dx u
    smoothing_quadratic,    // f(u) = d^{-ceil(zeta0)}/dx (u^2 - int u^2)
};

std::string_view to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(std::string_view name);

// Declarative description of f. `params` recognizes "scale" (multiplies f, default 1).
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    double zeta0 = 0.0;
    std::map<std::string, double> params;

    // Spec with the natural smoothing order for the kind.
    static PerturbationSpec make(PerturbationKind kind, double scale = 1.0);

    double scale() const;
    bool is_linear() const;
    // Throws std::invalid_argument when zeta0 disagrees with the kind.
    void validate() const;
};

// f(u), truncated to u's modes.
Field apply_perturbation(const PerturbationSpec& spec, const Field& u);

// In-place variant on raw coefficient pairs (the integrator's inner loop).
void apply_perturbation(const PerturbationSpec& spec, std::span<const ModePair> u,
                        std::span<ModePair> out);

// Trace of the Jacobian of P_m f restricted to span{e_{+-1..m}}:
// sum_{i=-m, i != 0}^{m} d f_i / d u_i.
double divergence(const PerturbationSpec& spec, const Field& u, std::size_t m);

// Sobolev orders gained by f: -1 (derivative), 1, 2, ceil(zeta0) (smoothing_quadratic).
int smoothing_gain(const PerturbationSpec& spec);

// Explicit C with ||f(u)||_{q + gain} <= C, for q >= 0. Linear kinds: |scale| ||u||_q
// (an equality). smoothing_quadratic: |scale| 2^{q+1} ||u||_q ||c||_{l1}.
double perturbation_bound(const PerturbationSpec& spec, const Field& u, double q);

}  // namespace kdvlab
