#pragma once

// Grid view of Fields: values at x_j = j / N, N a power of two, via FFTW.
// Each Collocation owns its own buffers; only the FFTW plans are shared.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "kdvlab/field.hpp"

namespace kdvlab {

// Smallest power of two strictly greater than `bound`.
std::size_t pow2_above(std::size_t bound);

// Grid that multiplies two m_max-limited fields without aliasing into modes <= m_max
// (N > 3 m_max, the 3/2 padding of the 2/3 rule).
inline std::size_t dealiased_grid_size(std::size_t m_max) { return pow2_above(3 * m_max); }

class Collocation {
public:
    explicit Collocation(std::size_t n);

    std::size_t size() const { return n_; }
    // Highest mode the grid represents unambiguously.
    std::size_t max_mode() const { return n_ / 2 - 1; }

    // Modes 1..coeffs.size() onto the grid; coeffs.size() <= max_mode().
    void to_grid(std::span<const ModePair> coeffs, std::span<double> values);
    // Grid back to modes 1..coeffs.size(); the mean is dropped.
    void from_grid(std::span<const double> values, std::span<ModePair> coeffs);

    std::vector<double> to_grid(const Field& u);
    Field from_grid(std::span<const double> values, std::size_t m);

private:
    std::size_t n_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
};

// Spectral derivative in coefficient space: d/dx maps (a, b) -> 2 pi k (b, -a).
ModePair derivative_pair(const ModePair& c, std::size_t k, int order);
Field derivative(const Field& u, int order);

// Point evaluation by direct summation.
double evaluate(const Field& u, double x);
std::vector<double> evaluate(const Field& u, std::span<const double> xs);

}  // namespace kdvlab
