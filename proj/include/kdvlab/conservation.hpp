#pragma once

// KdV conservation laws J_n(u) = 1/2 ||u||_n^2 + int Q_n(u, u_x, ..., u_{n-1}).
// Densities (highest derivative squared; d J_n / dt = 0 under u_t = -u_xxx + 6 u u_x):
//   J_0 = 1/2 u^2
//   J_1 = 1/2 u_1^2 + u^3
//   J_2 = 1/2 u_2^2 + 5 u u_1^2 + 5/2 u^4
//   J_3 = 1/2 u_3^2 + 7 u u_2^2 + 35 u^2 u_1^2 + 7 u^5
//   J_4 = 1/2 u_4^2 + 9 u u_3^2 + 63 u^2 u_2^2 - 10 u_2^3 + 210 u^3 u_1^2 - 35/2 u_1^4 + 21 u^6

#include <stdexcept>

#include "kdvlab/field.hpp"
#include "kdvlab/perturbation.hpp"

namespace kdvlab {

class UnsupportedOrder : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxConservationOrder = 4;

double conservation_functional(const Field& u, int n);

// Non-quadratic part int Q_n (the paper's J_{n-1} in J_n = 1/2 ||u||_n^2 + J_{n-1}).
double conservation_remainder(const Field& u, int n);

// L2 gradient of J_n, modes 1..m_out (m_out may exceed u.m_max(); content is exact).
Field conservation_gradient(const Field& u, int n, std::size_t m_out);

// Sum over monomials of |coefficient| int |monomial|: bounds |int Q_n|.
double remainder_bound(const Field& u, int n);

struct GalerkinDrift {
    double e_n = 0.0;    // -6 <grad J_n(u_m), P_m^perp(u_m u_m,x)>
    double e_n_f = 0.0;  // <grad J_n(u_m), P_m f(u_m)>
};

// Along the Galerkin system in slow time, dJ_n/dtau = eps^-1 e_n + e_n_f.
GalerkinDrift galerkin_drift(const Field& u_m, std::size_t m, int n, const PerturbationSpec& spec);

}  // namespace kdvlab
