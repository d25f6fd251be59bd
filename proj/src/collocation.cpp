#include "kdvlab/collocation.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace kdvlab {

namespace {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

// The FFTW planner is not thread safe; execution with new-array calls is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

PlanPair plans_for(std::size_t n) {
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard lock(planner_mutex());
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> real(n);
    std::vector<std::complex<double>> spec(n / 2 + 1);
    auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
    PlanPair p;
    const int ni = static_cast<int>(n);
    p.forward = fftw_plan_dft_r2c_1d(ni, real.data(), cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.backward = fftw_plan_dft_c2r_1d(ni, cplx, real.data(),
                                      FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
    if (!p.forward || !p.backward) throw std::runtime_error("fftw: planning failed");
    cache.emplace(n, p);
    return p;
}

}  // namespace

std::size_t pow2_above(std::size_t bound) {
    std::size_t n = 2;
    while (n <= bound) n *= 2;
    return n;
}

Collocation::Collocation(std::size_t n) : n_(n), real_(n), spec_(n / 2 + 1) {
    if (n < 4 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("Collocation: grid size must be a power of two >= 4");
    }
    plans_for(n);
}

void Collocation::to_grid(std::span<const ModePair> coeffs, std::span<double> values) {
    if (coeffs.size() > max_mode()) throw std::invalid_argument("Collocation::to_grid: too many modes");
    if (values.size() != n_) throw std::invalid_argument("Collocation::to_grid: size mismatch");
    // u = sum sqrt2 (a cos + b sin) => complex coefficient c_k = (a - i b) / sqrt2.
    constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    std::fill(spec_.begin(), spec_.end(), std::complex<double>{});
    for (std::size_t k = 1; k <= coeffs.size(); ++k) {
        spec_[k] = {coeffs[k - 1].plus * inv_sqrt2, -coeffs[k - 1].minus * inv_sqrt2};
    }
    fftw_execute_dft_c2r(plans_for(n_).backward, reinterpret_cast<fftw_complex*>(spec_.data()),
                         values.data());
}

void Collocation::from_grid(std::span<const double> values, std::span<ModePair> coeffs) {
    if (coeffs.size() > max_mode()) throw std::invalid_argument("Collocation::from_grid: too many modes");
    if (values.size() != n_) throw std::invalid_argument("Collocation::from_grid: size mismatch");
    std::copy(values.begin(), values.end(), real_.begin());
    fftw_execute_dft_r2c(plans_for(n_).forward, real_.data(),
                         reinterpret_cast<fftw_complex*>(spec_.data()));
    const double scale = std::numbers::sqrt2 / static_cast<double>(n_);
    for (std::size_t k = 1; k <= coeffs.size(); ++k) {
        coeffs[k - 1] = {scale * spec_[k].real(), -scale * spec_[k].imag()};
    }
}

std::vector<double> Collocation::to_grid(const Field& u) {
    std::vector<double> values(n_);
    to_grid(u.coeffs(), values);
    return values;
}

Field Collocation::from_grid(std::span<const double> values, std::size_t m) {
    std::vector<ModePair> coeffs(m);
    from_grid(values, coeffs);
    return Field(std::move(coeffs));
}

ModePair derivative_pair(const ModePair& c, std::size_t k, int order) {
    if (order < 0) throw std::invalid_argument("derivative_pair: negative order");
    const double w = wavenumber(k);
    ModePair out = c;
    for (int i = 0; i < order; ++i) out = {w * out.minus, -w * out.plus};
    return out;
}

Field derivative(const Field& u, int order) {
    std::vector<ModePair> out(u.m_max());
    for (std::size_t k = 1; k <= u.m_max(); ++k) out[k - 1] = derivative_pair(u.mode(k), k, order);
    return Field(std::move(out));
}

double evaluate(const Field& u, double x) {
    // Rotate (cos, sin)(2 pi k x) by repeated multiplication with the k = 1 phase.
    const std::complex<double> step = std::polar(1.0, kTwoPi * x);
    std::complex<double> phase = step;
    double sum = 0.0;
    for (std::size_t k = 1; k <= u.m_max(); ++k) {
        const auto& c = u.mode(k);
        sum += c.plus * phase.real() + c.minus * phase.imag();
        // Renormalize from the exact value every 16 modes to bound drift.
        phase = (k % 16 == 0) ? std::polar(1.0, kTwoPi * x * static_cast<double>(k + 1)) : phase * step;
    }
    return std::numbers::sqrt2 * sum;
}

std::vector<double> evaluate(const Field& u, std::span<const double> xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = evaluate(u, xs[i]);
    return out;
}

}  // namespace kdvlab
