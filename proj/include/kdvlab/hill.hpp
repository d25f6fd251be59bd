#pragma once

// Floquet data of L = -d^2/dx^2 + u on [0, 1]: discriminant, periodic spectrum,
// gap actions and their gradients.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kdvlab/field.hpp"

namespace kdvlab {

class IntegrationFailure : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class RootBracketFailure : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class ClosedGap : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiscriminantSample {
    double lambda = 0.0;
    double delta = 0.0;  // y1(1) + y2'(1)
    double y1 = 1.0, y2 = 0.0, dy1 = 0.0, dy2 = 1.0;

    double wronskian() const { return y1 * dy2 - dy1 * y2; }
    // Delta^2 - 4 without cancellation: (y1 - y2')^2 + 4 y1' y2.
    double excess() const { return (y1 - dy2) * (y1 - dy2) + 4.0 * dy1 * y2; }
};

// Transfer-matrix integrator bound to one potential. Caches u at the quadrature
// nodes per step count, so an instance is not meant to be shared between threads.
class HillOperator {
public:
    explicit HillOperator(const Field& u, double step_factor = 1.0);

    const Field& field() const { return u_; }
    int steps_for(double lambda) const;

    DiscriminantSample discriminant(double lambda) const;
    // Also records (y1, y2) at x_i = i / steps, i = 0..steps-1.
    DiscriminantSample discriminant(double lambda, int steps, std::vector<double>* y1_path,
                                    std::vector<double>* y2_path) const;

    // Fourier coefficients of d Delta / d u(x) at lambda, modes 1..m_max.
    Field discriminant_gradient(double lambda, DiscriminantSample* sample = nullptr) const;

private:
    const std::vector<double>& nodes(int steps) const;

    Field u_;
    double step_factor_;
    double sup_bound_;
    mutable std::map<int, std::vector<double>> node_cache_;
};

DiscriminantSample discriminant(const Field& u, double lambda);

struct SpectralGap {
    double lo = 0.0;  // lambda_{2j-1}
    double hi = 0.0;  // lambda_{2j}
    bool open = false;

    double gamma() const { return hi - lo; }
};

struct HillSpectrum {
    double lambda0 = 0.0;
    std::vector<SpectralGap> gaps;  // gaps[j-1] is gap j

    int n_gaps() const { return static_cast<int>(gaps.size()); }
    // lambda_0 < lambda_1 <= lambda_2 < lambda_3 <= ...
    std::vector<double> lambda_sorted() const;
};

// Closed-gap threshold: gamma_j < 1e-9 max(1, |lambda_2j|).
double closed_gap_threshold(double lambda);

HillSpectrum periodic_spectrum(const Field& u, int n_gaps);
HillSpectrum periodic_spectrum(const HillOperator& op, int n_gaps);

ActionVector actions(const Field& u, int n);
// Action of gap j given the located gap (0 for a closed gap).
double gap_action(const HillOperator& op, const SpectralGap& gap);

enum class GradientMethod { formula, finite_difference };

// Gradient of I_j as a Field with u's modes. Throws ClosedGap when gap j is closed.
Field action_gradient(const Field& u, int j, GradientMethod method = GradientMethod::formula);
// Formula gradients of I_1..I_n from one spectrum; nullopt where the gap is closed.
std::vector<std::optional<Field>> action_gradients(const Field& u, int n);

// W_k = -(d phi_k / dt) for k = 1..n from the eps = 0 flow over `horizon`, phi_k the
// linearized Birkhoff phases; W_k -> (2 pi k)^3 as u -> 0.
std::vector<double> estimate_frequencies(const Field& u, int n, double horizon);

// CSV with header j,lambda_lo,lambda_hi,gamma,action.
void write_spectrum_csv(std::ostream& os, const HillSpectrum& spectrum, const ActionVector& actions);

}  // namespace kdvlab
