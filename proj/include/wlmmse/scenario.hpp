#pragma once

// Source, channel and noise objects for a link: improper second-order
// stationary symbol sequences, root-raised-cosine pulses and flat or
// tabulated channels.

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wlmmse/errors.hpp"
#include "wlmmse/numerics.hpp"
#include "wlmmse/spectra.hpp"

namespace wlmmse {

/// Wraps a normalized frequency into [-1/2, 1/2).
inline double wrap_normalized(double nu) { return nu - std::floor(nu + 0.5); }

/// Second-order statistics of a zero-mean symbol sequence b[l], given by its
/// PSD M and complementary PSD Mc over normalized frequency (period 1).
class SosSequenceSpec {
public:
    using Psd = std::function<double(double)>;
    using CompPsd = std::function<cplx(double)>;

    SosSequenceSpec(Psd psd, CompPsd comp_psd)
        : psd_(std::make_shared<Psd>(std::move(psd))),
          comp_(std::make_shared<CompPsd>(std::move(comp_psd))) {
        // m[0] by midpoint rule; exact for the trigonometric polynomials used in practice.
        constexpr int samples = 4096;
        double acc = 0.0;
        for (int i = 0; i < samples; ++i) {
            const double nu = -0.5 + (i + 0.5) / samples;
            const double m = this->psd(nu);
            if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidSpec("source PSD must be finite and >= 0");
            const double bound = m * this->psd(-nu);
            if (std::norm(this->comp_psd(nu)) > bound * (1.0 + 1e-9) + 1e-15)
                throw InvalidSpec("complementary PSD violates |Mc(f)|^2 <= M(f) M(-f) at f = " +
                                  std::to_string(nu));
            acc += m;
        }
        power_ = acc / samples;
    }

    double psd(double nu) const { return (*psd_)(wrap_normalized(nu)); }
    cplx comp_psd(double nu) const { return (*comp_)(wrap_normalized(nu)); }

    /// m[0] = E|b|^2
    double power() const noexcept { return power_; }

    /// Phase of Mc in [0, 2 pi).
    double phase(double nu) const {
        const double p = std::arg(comp_psd(nu));
        return p < 0.0 ? p + 2.0 * std::numbers::pi : p;
    }

    /// From lags m[0..K], mc[0..K]; m[-k] = m[k]^*, mc[-k] = mc[k].
    static SosSequenceSpec from_lags(CVector auto_lags, CVector comp_lags) {
        if (auto_lags.empty()) throw InvalidSpec("need at least m[0]");
        auto m = std::make_shared<const CVector>(std::move(auto_lags));
        auto mc = std::make_shared<const CVector>(std::move(comp_lags));
        return SosSequenceSpec(
            [m](double nu) {
                double acc = (*m)[0].real();
                for (std::size_t k = 1; k < m->size(); ++k)
                    acc += 2.0 * std::real((*m)[k] * std::polar(1.0, -2.0 * std::numbers::pi * nu * k));
                return acc;
            },
            [mc](double nu) {
                if (mc->empty()) return cplx{};
                cplx acc = (*mc)[0];
                for (std::size_t k = 1; k < mc->size(); ++k)
                    acc += 2.0 * (*mc)[k] * std::cos(2.0 * std::numbers::pi * nu * k);
                return acc;
            });
    }

private:
    std::shared_ptr<const Psd> psd_;
    std::shared_ptr<const CompPsd> comp_;
    double power_ = 0.0;
};

/// k(f) = |Mc(f)| / sqrt(M(f) M(-f)), or 0 where M(f) M(-f) = 0.
inline double impropriety_function(const SosSequenceSpec& spec, double nu) {
    const double prod = spec.psd(nu) * spec.psd(-nu);
    if (prod <= 0.0) return 0.0;
    return std::min(1.0, std::abs(spec.comp_psd(nu)) / std::sqrt(prod));
}

/// Uncorrelated symbols with independent in-phase / quadrature parts.
struct QamVariances {
    double in_phase = 0.5;
    double quadrature = 0.5;

    double total() const { return in_phase + quadrature; }
    /// Variances with the given total power and impropriety k = |vi - vq| / (vi + vq).
    static QamVariances from_impropriety(double k, double power = 1.0) {
        if (!(k >= 0.0 && k <= 1.0)) throw InvalidSpec("impropriety k must lie in [0, 1]");
        if (!(power > 0.0)) throw InvalidSpec("source power must be positive");
        return {0.5 * (1.0 + k) * power, 0.5 * (1.0 - k) * power};
    }
};

inline SosSequenceSpec unbalanced_qam(double var_i, double var_q) {
    if (!(var_i >= 0.0) || !(var_q >= 0.0) || !(var_i + var_q > 0.0))
        throw InvalidSpec("QAM variances must be >= 0 with a positive sum");
    const double m = var_i + var_q;
    const double mc = var_i - var_q;
    return SosSequenceSpec([m](double) { return m; }, [mc](double) { return cplx(mc, 0.0); });
}

/// Unit-energy root-raised-cosine spectrum for symbol period T.
inline CtftFunction srrc_ctft(double rolloff, double T) {
    if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw InvalidSpec("roll-off must lie in [0, 1]");
    if (!(T > 0.0)) throw InvalidSpec("symbol period must be positive");
    const double edge = (1.0 + rolloff) / (2.0 * T);
    const double flat_edge = (1.0 - rolloff) / (2.0 * T);
    return CtftFunction(
        [=](double xi) -> cplx {
            const double a = std::abs(xi);
            if (a <= flat_edge) return std::sqrt(T);
            if (a > edge) return 0.0;
            const double rc = 0.5 * T * (1.0 + std::cos(std::numbers::pi * T / rolloff * (a - flat_edge)));
            return std::sqrt(rc);
        },
        -edge, edge);
}

/// Channel frequency response; only its values on [-B, B] are ever used.
struct ChannelSpec {
    CtftFunction response;

    static ChannelSpec flat(cplx gain, double bandwidth) {
        return {CtftFunction::flat(gain, -bandwidth, bandwidth)};
    }

    /// Restricts the response to the band [-B, B].
    ChannelSpec band_limited(double bandwidth) const {
        return {response * CtftFunction::flat(1.0, -bandwidth, bandwidth)};
    }
};

/// Average transmit power P_T.
struct PowerConstraint {
    double total = 1.0;
};

/// Everything needed to optimize and simulate one link.
struct Scenario {
    GridSpec grid;
    SosSequenceSpec source = unbalanced_qam(0.5, 0.5);
    std::optional<QamVariances> qam; ///< set when the source is uncorrelated QAM (required for simulation)
    ChannelSpec channel;
    NoiseSpec noise;
    PowerConstraint power;

    void validate() const {
        grid.validate();
        noise.validate();
        if (!(power.total > 0.0)) throw InvalidSpec("transmit power P_T must be positive");
    }
};

/// Builds an interferer from a root-raised-cosine pulse at rate multiple/T
/// with symbol energy N0 * 10^(EsN0/10), optionally shifted in frequency.
inline InterfererSpec srrc_interferer(double rolloff, double esn0_db, double n0, double T,
                                      double rate_multiple = 1.0, double shift = 0.0) {
    InterfererSpec itf;
    itf.rate_multiple = rate_multiple;
    const int n = itf.checked_rate_multiple();
    itf.pulse = srrc_ctft(rolloff, T / n).shifted(shift);
    itf.symbol_energy = n0 * std::pow(10.0, esn0_db / 10.0);
    return itf;
}

} // namespace wlmmse
