// bath.hpp - spectral densities, thermal occupation and the four secular Lindblad rates

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsync/errors.hpp"
#include "qsync/spin_model.hpp"

namespace qsync {

// J(w) = 2 gamma0 w^s wc^2 / (wc^2 + w^(2s)); an absent cutoff means the bare power law 2 gamma0 w^s.
struct PowerLawCutoff {
    double gamma0{0.01};
    double s{1.0};
    std::optional<double> omega_c{20.0};

    void validate() const {
        if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) throw DomainError("gamma0 must be >= 0");
        if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("s must be > 0");
        if (omega_c && !(*omega_c > 0.0)) throw DomainError("omega_c must be > 0");
    }

    double operator()(double w) const {
        if (w == 0.0 || gamma0 == 0.0) return 0.0;
        const double ws = std::pow(w, s);
        if (!omega_c) return 2 * gamma0 * ws;
        const double wc2 = *omega_c * *omega_c;
        return 2 * gamma0 * ws * wc2 / (wc2 + ws * ws);
    }

    bool operator==(const PowerLawCutoff&) const = default;
};

// Sorted (w, J) samples; log J is interpolated linearly in log w, which is exact for power laws.
struct Tabulated {
    std::vector<std::pair<double, double>> points;

    void validate() const {
        if (points.size() < 2) throw DomainError("tabulated spectral density needs >= 2 points");
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto [w, j] = points[i];
            if (!(w > 0.0)) throw DomainError("tabulated frequencies must be > 0");
            if (!(j >= 0.0) || !std::isfinite(j)) throw DomainError("tabulated J must be >= 0");
            if (i > 0 && !(w > points[i - 1].first))
                throw DomainError("tabulated frequencies must be strictly increasing");
        }
    }

    double operator()(double w) const {
        const double lo = points.front().first;
        const double hi = points.back().first;
        if (!(w >= lo && w <= hi))
            throw DomainError("omega " + std::to_string(w) + " outside tabulated range [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
        auto it = std::lower_bound(points.begin(), points.end(), w,
                                   [](const auto& p, double x) { return p.first < x; });
        if (it->first == w) return it->second;
        const auto& [w1, j1] = *it;
        const auto& [w0, j0] = *(it - 1);
        if (j0 == 0.0 || j1 == 0.0) {
            const double t = (w - w0) / (w1 - w0);
            return j0 + t * (j1 - j0);
        }
        const double t = std::log(w / w0) / std::log(w1 / w0);
        return std::exp(std::log(j0) + t * std::log(j1 / j0));
    }

    bool operator==(const Tabulated&) const = default;
};

using SpectralDensityModel = std::variant<PowerLawCutoff, Tabulated>;

inline void validate(const SpectralDensityModel& model) {
    std::visit([](const auto& m) { m.validate(); }, model);
}

inline double evaluate_J(const SpectralDensityModel& model, double omega) {
    if (!(omega >= 0.0)) throw DomainError("J(omega) requires omega >= 0");
    return std::visit([omega](const auto& m) { return m(omega); }, model);
}

inline double bose_occupation(double omega, double temperature) {
    if (!(omega > 0.0)) throw DomainError("bose_occupation requires omega > 0");
    if (!(temperature >= 0.0)) throw DomainError("temperature must be >= 0");
    if (temperature == 0.0) return 0.0;
    return 1.0 / std::expm1(omega / temperature);
}

// Field names follow the emission (down) / absorption (up) direction of each mode.
struct LindbladRates {
    double g1_down{0.0};
    double g1_up{0.0};
    double g2_down{0.0};
    double g2_up{0.0};

    double total1() const { return g1_down + g1_up; }
    double total2() const { return g2_down + g2_up; }

    LindbladRates scaled(double factor) const {
        return {g1_down * factor, g1_up * factor, g2_down * factor, g2_up * factor};
    }

    bool operator==(const LindbladRates&) const = default;
};

inline constexpr double kDefaultRatePrefactor = 2 * std::numbers::pi;

inline LindbladRates lindblad_rates(const EigenStructure& eig, const SpectralDensityModel& model,
                                    double temperature,
                                    double rate_prefactor = kDefaultRatePrefactor) {
    if (!(eig.E2 > 0.0)) throw DegenerateSpectrumError("lindblad_rates requires E2 > 0");
    const double n1 = bose_occupation(eig.E1, temperature);
    const double n2 = bose_occupation(eig.E2, temperature);
    const double a1 = rate_prefactor * eig.weight1() * evaluate_J(model, eig.E1);
    const double a2 = rate_prefactor * eig.weight2() * evaluate_J(model, eig.E2);
    return {a1 * (1 + n1), a1 * n1, a2 * (1 + n2), a2 * n2};
}

} // namespace qsync
