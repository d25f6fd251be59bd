#include "kdvlab/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace kdvlab {

namespace {

void require_finite(const std::vector<ModePair>& coeffs, const char* what) {
    for (const auto& c : coeffs) {
        if (!std::isfinite(c.plus) || !std::isfinite(c.minus)) {
            throw std::invalid_argument(std::string(what) + ": non-finite coefficient");
        }
    }
}

// Little-endian helpers; the frame layout is fixed regardless of host order.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(raw, raw + sizeof(T));
    }
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(raw, raw + sizeof(T));
    }
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
}

constexpr char kMagic[4] = {'K', 'D', 'V', 'F'};
constexpr std::size_t kHeaderBytes = 12;

}  // namespace

Field::Field(std::size_t m_max) : coeffs_(m_max) {}

Field::Field(std::vector<ModePair> coeffs) : coeffs_(std::move(coeffs)) {
    require_finite(coeffs_, "Field");
}

Field Field::basis(int k, std::size_t m_max) {
    if (k == 0) throw std::invalid_argument("Field::basis: k = 0 is not a zero-mean mode");
    const auto kk = static_cast<std::size_t>(std::abs(k));
    if (kk > m_max) throw std::invalid_argument("Field::basis: |k| exceeds m_max");
    Field f(m_max);
    if (k > 0) {
        f.coeffs_[kk - 1].plus = 1.0;
    } else {
        f.coeffs_[kk - 1].minus = 1.0;
    }
    return f;
}

Field Field::with_mode(std::size_t k, ModePair pair) const {
    if (k == 0) throw std::invalid_argument("Field::with_mode: k must be >= 1");
    if (!std::isfinite(pair.plus) || !std::isfinite(pair.minus)) {
        throw std::invalid_argument("Field::with_mode: non-finite coefficient");
    }
    Field f = k > m_max() ? resized(k) : *this;
    f.coeffs_[k - 1] = pair;
    return f;
}

Field Field::resized(std::size_t m) const {
    Field f(m);
    std::copy_n(coeffs_.begin(), std::min(m, coeffs_.size()), f.coeffs_.begin());
    return f;
}

Field& Field::operator+=(const Field& other) {
    if (other.m_max() > m_max()) coeffs_.resize(other.m_max());
    for (std::size_t i = 0; i < other.m_max(); ++i) {
        coeffs_[i].plus += other.coeffs_[i].plus;
        coeffs_[i].minus += other.coeffs_[i].minus;
    }
    return *this;
}

Field& Field::operator-=(const Field& other) {
    if (other.m_max() > m_max()) coeffs_.resize(other.m_max());
    for (std::size_t i = 0; i < other.m_max(); ++i) {
        coeffs_[i].plus -= other.coeffs_[i].plus;
        coeffs_[i].minus -= other.coeffs_[i].minus;
    }
    return *this;
}

Field& Field::operator*=(double s) {
    for (auto& c : coeffs_) {
        c.plus *= s;
        c.minus *= s;
    }
    return *this;
}

double inner(const Field& a, const Field& b) {
    const std::size_t m = std::min(a.m_max(), b.m_max());
    double sum = 0.0;
    for (std::size_t k = m; k >= 1; --k) {
        const auto& x = a.mode(k);
        const auto& y = b.mode(k);
        sum += x.plus * y.plus + x.minus * y.minus;
    }
    return sum;
}

double sobolev_norm(const Field& u, double p) {
    // Descending k: the weights grow with k, so the small tail terms go first.
    double sum = 0.0;
    for (std::size_t k = u.m_max(); k >= 1; --k) {
        const auto& c = u.mode(k);
        sum += std::pow(wavenumber(k), 2.0 * p) * (c.plus * c.plus + c.minus * c.minus);
    }
    return std::sqrt(sum);
}

Field project(const Field& u, std::size_t m) {
    std::vector<ModePair> out(u.coeffs().begin(), u.coeffs().end());
    for (std::size_t k = m + 1; k <= out.size(); ++k) out[k - 1] = {};
    return Field(std::move(out));
}

Field translate(const Field& u, double s) {
    std::vector<ModePair> out(u.coeffs().begin(), u.coeffs().end());
    for (std::size_t k = 1; k <= out.size(); ++k) {
        const double th = wavenumber(k) * s;
        const double c = std::cos(th), sn = std::sin(th);
        const ModePair p = out[k - 1];
        out[k - 1] = {c * p.plus + sn * p.minus, c * p.minus - sn * p.plus};
    }
    return Field(std::move(out));
}

std::size_t active_modes(const Field& u) {
    for (std::size_t k = u.m_max(); k >= 1; --k) {
        const auto& c = u.mode(k);
        if (c.plus != 0.0 || c.minus != 0.0) return k;
    }
    return 0;
}

BirkhoffPoint::BirkhoffPoint(std::vector<ModePair> modes) : modes_(std::move(modes)) {
    require_finite(modes_, "BirkhoffPoint");
}

ActionVector::ActionVector(std::vector<double> entries) : entries_(std::move(entries)) {
    for (double e : entries_) {
        if (!std::isfinite(e) || e < 0.0) {
            throw std::invalid_argument("ActionVector: entries must be finite and >= 0");
        }
    }
}

double h_norm(const BirkhoffPoint& v, double p) {
    double sum = 0.0;
    for (std::size_t j = v.size(); j >= 1; --j) {
        const auto& c = v.mode(j);
        sum += std::pow(wavenumber(j), 2.0 * p + 1.0) * (c.plus * c.plus + c.minus * c.minus);
    }
    return std::sqrt(sum);
}

double action_norm(std::span<const double> values, double p) {
    double sum = 0.0;
    for (std::size_t j = values.size(); j >= 1; --j) {
        sum += std::pow(wavenumber(j), 2.0 * p + 1.0) * std::abs(values[j - 1]);
    }
    return 2.0 * sum;
}

double action_norm(const ActionVector& actions, double p) {
    return action_norm(actions.entries(), p);
}

BirkhoffPoint linear_birkhoff(const Field& u) {
    std::vector<ModePair> v(u.m_max());
    for (std::size_t k = 1; k <= u.m_max(); ++k) {
        const double s = 1.0 / std::sqrt(wavenumber(k));
        v[k - 1] = {s * u.mode(k).plus, s * u.mode(k).minus};
    }
    return BirkhoffPoint(std::move(v));
}

Field inverse_linear_birkhoff(const BirkhoffPoint& v) {
    std::vector<ModePair> u(v.size());
    for (std::size_t k = 1; k <= v.size(); ++k) {
        const double s = std::sqrt(wavenumber(k));
        u[k - 1] = {s * v.mode(k).plus, s * v.mode(k).minus};
    }
    return Field(std::move(u));
}

double pair_angle(const ModePair& pair) {
    if (pair.plus == 0.0 && pair.minus == 0.0) return 0.0;
    double phi = std::atan2(pair.minus, pair.plus);
    if (phi < 0.0) phi += kTwoPi;
    // atan2 of a tiny negative minus part can round up to exactly 2 pi.
    if (phi >= kTwoPi) phi = 0.0;
    return phi;
}

ActionsAngles actions_angles(const BirkhoffPoint& v) {
    std::vector<double> actions(v.size());
    std::vector<double> angles(v.size());
    for (std::size_t j = 1; j <= v.size(); ++j) {
        const auto& c = v.mode(j);
        actions[j - 1] = 0.5 * (c.plus * c.plus + c.minus * c.minus);
        angles[j - 1] = pair_angle(c);
    }
    return {ActionVector(std::move(actions)), std::move(angles)};
}

std::string field_to_json(const Field& u) {
    nlohmann::json j;
    j["m_max"] = u.m_max();
    auto coeffs = nlohmann::json::array();
    for (const auto& c : u.coeffs()) coeffs.push_back({c.plus, c.minus});
    j["coeffs"] = std::move(coeffs);
    return j.dump();
}

Field field_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto m_max = j.at("m_max").get<std::size_t>();
    const auto& coeffs = j.at("coeffs");
    if (!coeffs.is_array() || coeffs.size() != m_max) {
        throw std::invalid_argument("field json: coeffs length does not match m_max");
    }
    std::vector<ModePair> out;
    out.reserve(m_max);
    for (const auto& pair : coeffs) {
        if (!pair.is_array() || pair.size() != 2) {
            throw std::invalid_argument("field json: each coefficient must be a pair");
        }
        out.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    return Field(std::move(out));
}

std::vector<std::uint8_t> encode_field_frame(const Field& u) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + 16 * u.m_max());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_le<std::uint32_t>(out, kFieldFrameVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(u.m_max()));
    for (const auto& c : u.coeffs()) {
        put_le<double>(out, c.plus);
        put_le<double>(out, c.minus);
    }
    return out;
}

Field decode_field_frame(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw std::runtime_error("field frame: bad magic");
    }
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != kFieldFrameVersion) {
        throw std::runtime_error("field frame: unsupported version " + std::to_string(version));
    }
    const auto m_max = get_le<std::uint32_t>(bytes.data() + 8);
    const std::size_t total = kHeaderBytes + 16 * std::size_t{m_max};
    if (bytes.size() < total) throw std::runtime_error("field frame: truncated");
    std::vector<ModePair> coeffs(m_max);
    const std::uint8_t* p = bytes.data() + kHeaderBytes;
    for (auto& c : coeffs) {
        c.plus = get_le<double>(p);
        c.minus = get_le<double>(p + 8);
        p += 16;
    }
    if (consumed) *consumed = total;
    return Field(std::move(coeffs));
}

void write_field_frame(std::ostream& os, const Field& u) {
    const auto bytes = encode_field_frame(u);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("field frame: write failed");
}

Field read_field_frame(std::istream& is) {
    std::vector<std::uint8_t> header(kHeaderBytes);
    if (!is.read(reinterpret_cast<char*>(header.data()), kHeaderBytes)) {
        throw std::runtime_error("field frame: truncated header");
    }
    const auto m_max = get_le<std::uint32_t>(header.data() + 8);
    header.resize(kHeaderBytes + 16 * std::size_t{m_max});
    if (!is.read(reinterpret_cast<char*>(header.data() + kHeaderBytes),
                 static_cast<std::streamsize>(16 * std::size_t{m_max}))) {
        throw std::runtime_error("field frame: truncated payload");
    }
    return decode_field_frame(header);
}

}  // namespace kdvlab
