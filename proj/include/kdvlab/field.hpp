#pragma once

// Trigonometric-basis representation of zero-mean 1-periodic fields and the
// linearized Birkhoff coordinates built on it.
//
// Basis: e_k = sqrt(2) cos(2 pi k x), e_{-k} = sqrt(2) sin(2 pi k x), k >= 1.
// A Field stores the pairs (u_k, u_{-k}) for k = 1..m_max. There is no k = 0
// slot, so zero mean holds by construction.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Coefficient pair of mode k: `plus` multiplies e_k, `minus` multiplies e_{-k}.
struct ModePair {
    double plus = 0.0;
    double minus = 0.0;

    friend bool operator==(const ModePair&, const ModePair&) = default;
};

// Wave number weight 2 pi k.
inline double wavenumber(std::size_t k) { return kTwoPi * static_cast<double>(k); }

class Field {
public:
    Field() = default;
    explicit Field(std::size_t m_max);
    explicit Field(std::vector<ModePair> coeffs);

    // Unit basis vector e_k (k > 0) or e_{-|k|} (k < 0).
    static Field basis(int k, std::size_t m_max);

    std::size_t m_max() const { return coeffs_.size(); }
    bool empty() const { return coeffs_.empty(); }

    // 1-based mode access.
    const ModePair& mode(std::size_t k) const { return coeffs_.at(k - 1); }
    std::span<const ModePair> coeffs() const { return coeffs_; }

    // Copy with mode k replaced. Grows the field when k > m_max.
    Field with_mode(std::size_t k, ModePair pair) const;
    // Copy truncated or zero-padded to m modes (no projection semantics beyond that).
    Field resized(std::size_t m) const;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s);

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    std::vector<ModePair> coeffs_;
};

// L^2 inner product; fields of different length are zero-padded.
double inner(const Field& a, const Field& b);

// ||u||_p = (sum_k (2 pi k)^{2p} (u_k^2 + u_{-k}^2))^{1/2}
double sobolev_norm(const Field& u, double p);

// Orthogonal projection onto span{e_{+-1}, ..., e_{+-m}}; result keeps m_max.
Field project(const Field& u, std::size_t m);

// x -> u(x + s).
Field translate(const Field& u, double s);

// Largest mode k with a nonzero coefficient, 0 for the zero field.
std::size_t active_modes(const Field& u);

// Birkhoff coordinates v = (v_1, v_2, ...), v_j = (v_j, v_{-j}).
class BirkhoffPoint {
public:
    BirkhoffPoint() = default;
    explicit BirkhoffPoint(std::vector<ModePair> modes);

    std::size_t size() const { return modes_.size(); }
    const ModePair& mode(std::size_t j) const { return modes_.at(j - 1); }
    std::span<const ModePair> modes() const { return modes_; }

private:
    std::vector<ModePair> modes_;
};

// Nonnegative action sequence (I_1, I_2, ...).
class ActionVector {
public:
    ActionVector() = default;
    // Throws std::invalid_argument on a negative or non-finite entry.
    explicit ActionVector(std::vector<double> entries);

    std::size_t size() const { return entries_.size(); }
    double operator[](std::size_t j) const { return entries_.at(j - 1); }  // 1-based
    std::span<const double> entries() const { return entries_; }

private:
    std::vector<double> entries_;
};

// |v|_p = (sum_j (2 pi j)^{2p+1} |v_j|^2)^{1/2}
double h_norm(const BirkhoffPoint& v, double p);

// |I|~_p = 2 sum_j (2 pi j)^{2p+1} |I_j|
double action_norm(const ActionVector& actions, double p);
// Same weighting on an arbitrary real sequence, used for action differences.
double action_norm(std::span<const double> values, double p);

// d Psi(0): v_k = (2 pi k)^{-1/2} (u_k, u_{-k}).
BirkhoffPoint linear_birkhoff(const Field& u);
Field inverse_linear_birkhoff(const BirkhoffPoint& v);

struct ActionsAngles {
    ActionVector actions;
    std::vector<double> angles;  // in [0, 2 pi), 0 where v_j = 0
};

ActionsAngles actions_angles(const BirkhoffPoint& v);

// Polar angle of a coefficient pair in [0, 2 pi), 0 for the zero pair.
double pair_angle(const ModePair& pair);

// --- serialization -------------------------------------------------------

// JSON text {"m_max": int, "coeffs": [[u_k, u_minus_k], ...]}.
std::string field_to_json(const Field& u);
Field field_from_json(const std::string& text);

// Packed little-endian frame: "KDVF", u32 version, u32 m_max, 2 m_max float64.
inline constexpr std::uint32_t kFieldFrameVersion = 1;
std::vector<std::uint8_t> encode_field_frame(const Field& u);
// Decodes one frame starting at `bytes`; `consumed` receives the frame length.
Field decode_field_frame(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

void write_field_frame(std::ostream& os, const Field& u);
Field read_field_frame(std::istream& is);

}  // namespace kdvlab
