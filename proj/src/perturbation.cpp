#include "kdvlab/perturbation.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kdvlab/collocation.hpp"

namespace kdvlab {

namespace {

// d^{-1}/dx on one pair: inverse of (a, b) -> 2 pi k (b, -a).
ModePair antiderivative_pair(const ModePair& c, std::size_t k) {
    const double w = wavenumber(k);
    return {-c.minus / w, c.plus / w};
}

int smoothing_power(const PerturbationSpec& spec) {
    return static_cast<int>(std::ceil(spec.zeta0));
}

}  // namespace

std::string_view to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::none: return "none";
        case PerturbationKind::derivative: return "derivative";
        case PerturbationKind::antiderivative: return "antiderivative";
        case PerturbationKind::double_antiderivative: return "double_antiderivative";
        case PerturbationKind::smoothing_quadratic: return "smoothing_quadratic";
    }
    return "unknown";
}

PerturbationKind perturbation_kind_from_string(std::string_view name) {
    for (auto k : {PerturbationKind::none, PerturbationKind::derivative, PerturbationKind::antiderivative,
                   PerturbationKind::double_antiderivative, PerturbationKind::smoothing_quadratic}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown perturbation kind '" + std::string(name) + "'");
}

PerturbationSpec PerturbationSpec::make(PerturbationKind kind, double scale) {
    PerturbationSpec spec;
    spec.kind = kind;
    switch (kind) {
        case PerturbationKind::none:
        case PerturbationKind::derivative: spec.zeta0 = 0.0; break;
        case PerturbationKind::antiderivative: spec.zeta0 = 1.0; break;
        case PerturbationKind::double_antiderivative:
        case PerturbationKind::smoothing_quadratic: spec.zeta0 = 2.0; break;
    }
    if (scale != 1.0) spec.params["scale"] = scale;
    return spec;
}

double PerturbationSpec::scale() const {
    auto it = params.find("scale");
    return it == params.end() ? 1.0 : it->second;
}

bool PerturbationSpec::is_linear() const { return kind != PerturbationKind::smoothing_quadratic; }

void PerturbationSpec::validate() const {
    if (!std::isfinite(zeta0) || zeta0 < 0.0) throw std::invalid_argument("perturbation: zeta0 must be >= 0");
    for (const auto& [key, value] : params) {
        if (key != "scale") throw std::invalid_argument("perturbation: unknown parameter '" + key + "'");
        if (!std::isfinite(value)) throw std::invalid_argument("perturbation: scale must be finite");
    }
    switch (kind) {
        case PerturbationKind::none: break;
        case PerturbationKind::derivative:
            if (zeta0 != 0.0) throw std::invalid_argument("perturbation: derivative is not smoothing (zeta0 = 0)");
            break;
        case PerturbationKind::antiderivative:
            if (zeta0 != 1.0) throw std::invalid_argument("perturbation: antiderivative requires zeta0 = 1");
            break;
        case PerturbationKind::double_antiderivative:
            if (zeta0 != 2.0) throw std::invalid_argument("perturbation: double_antiderivative requires zeta0 = 2");
            break;
        case PerturbationKind::smoothing_quadratic:
            if (zeta0 < 2.0) throw std::invalid_argument("perturbation: smoothing_quadratic requires zeta0 >= 2");
            break;
    }
}

void apply_perturbation(const PerturbationSpec& spec, std::span<const ModePair> u, std::span<ModePair> out) {
    if (out.size() != u.size()) throw std::invalid_argument("apply_perturbation: size mismatch");
    const double s = spec.scale();
    switch (spec.kind) {
        case PerturbationKind::none:
            std::fill(out.begin(), out.end(), ModePair{});
            return;
        case PerturbationKind::derivative:
            for (std::size_t k = 1; k <= u.size(); ++k) {
                const double w = s * wavenumber(k);
                out[k - 1] = {w * u[k - 1].minus, -w * u[k - 1].plus};
            }
            return;
        case PerturbationKind::antiderivative:
            for (std::size_t k = 1; k <= u.size(); ++k) {
                const auto c = antiderivative_pair(u[k - 1], k);
                out[k - 1] = {s * c.plus, s * c.minus};
            }
            return;
        case PerturbationKind::double_antiderivative:
            for (std::size_t k = 1; k <= u.size(); ++k) {
                const double w = wavenumber(k);
                const double g = -s / (w * w);
                out[k - 1] = {g * u[k - 1].plus, g * u[k - 1].minus};
            }
            return;
        case PerturbationKind::smoothing_quadratic: {
            // The collocation transform drops the k = 0 mode, which is exactly
            // subtracting int u^2 before antidifferentiating.
            Collocation grid(dealiased_grid_size(u.size()));
            std::vector<double> values(grid.size());
            grid.to_grid(u, values);
            for (double& v : values) v *= v;
            grid.from_grid(values, out);
            const int r = smoothing_power(spec);
            for (std::size_t k = 1; k <= out.size(); ++k) {
                ModePair c = out[k - 1];
                for (int i = 0; i < r; ++i) c = antiderivative_pair(c, k);
                out[k - 1] = {s * c.plus, s * c.minus};
            }
            return;
        }
    }
}

Field apply_perturbation(const PerturbationSpec& spec, const Field& u) {
    std::vector<ModePair> out(u.m_max());
    apply_perturbation(spec, u.coeffs(), out);
    return Field(std::move(out));
}

double divergence(const PerturbationSpec& spec, const Field& u, std::size_t m) {
    const double s = spec.scale();
    switch (spec.kind) {
        case PerturbationKind::none:
        case PerturbationKind::derivative:
        case PerturbationKind::antiderivative:
            // Antisymmetric 2x2 blocks: zero diagonal.
            return 0.0;
        case PerturbationKind::double_antiderivative: {
            double sum = 0.0;
            for (std::size_t i = m; i >= 1; --i) {
                const double w = wavenumber(i);
                sum += 2.0 * (-s / (w * w));
            }
            return sum;
        }
        case PerturbationKind::smoothing_quadratic: {
            const Field um = project(u.resized(std::max(m, u.m_max())), m).resized(m);
            const double h = 1e-6 * std::max(1.0, sobolev_norm(um, 0.0));
            double sum = 0.0;
            for (std::size_t i = m; i >= 1; --i) {
                const auto c = um.mode(i);
                const Field fp = apply_perturbation(spec, um.with_mode(i, {c.plus + h, c.minus}));
                const Field fm = apply_perturbation(spec, um.with_mode(i, {c.plus - h, c.minus}));
                const Field gp = apply_perturbation(spec, um.with_mode(i, {c.plus, c.minus + h}));
                const Field gm = apply_perturbation(spec, um.with_mode(i, {c.plus, c.minus - h}));
                sum += (fp.mode(i).plus - fm.mode(i).plus) / (2.0 * h);
                sum += (gp.mode(i).minus - gm.mode(i).minus) / (2.0 * h);
            }
            return sum;
        }
    }
    return 0.0;
}

int smoothing_gain(const PerturbationSpec& spec) {
    switch (spec.kind) {
        case PerturbationKind::none: return 0;
        case PerturbationKind::derivative: return -1;
        case PerturbationKind::antiderivative: return 1;
        case PerturbationKind::double_antiderivative: return 2;
        case PerturbationKind::smoothing_quadratic: return smoothing_power(spec);
    }
    return 0;
}

double perturbation_bound(const PerturbationSpec& spec, const Field& u, double q) {
    const double s = std::abs(spec.scale());
    if (spec.is_linear()) return spec.kind == PerturbationKind::none ? 0.0 : s * sobolev_norm(u, q);
    // ||u^2 - mean||_q <= 2^{q+1} ||u||_q ||c||_{l1}, c the complex Fourier coefficients.
    double l1 = 0.0;
    for (std::size_t k = u.m_max(); k >= 1; --k) {
        const auto& c = u.mode(k);
        l1 += std::hypot(c.plus, c.minus);
    }
    l1 *= std::sqrt(2.0);
    return s * std::pow(2.0, std::max(q, 0.0) + 1.0) * sobolev_norm(u, q) * l1;
}

}  // namespace kdvlab
