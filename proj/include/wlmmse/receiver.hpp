#pragma once

// Widely linear MMSE receiver for a given transmit waveform, and the MSE it
// achieves in both the augmented-matrix form and the reduced scalar form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wlmmse/errors.hpp"
#include "wlmmse/link_model.hpp"
#include "wlmmse/numerics.hpp"
#include "wlmmse/spectra.hpp"

namespace wlmmse {

/// [s(f); J s(-f)^*]
struct AugmentedVft {
    double f = 0.0;
    CVector s_bar;
    std::size_t upper = 0; ///< N(f), length of the s(f) block
};

inline AugmentedVft augment_tx(const Vft& s_f, const Vft& s_negf) {
    if (std::abs(s_f.f + s_negf.f) > 1e-12 * std::max(1.0, std::abs(s_f.f)))
        throw ShapeMismatch("augment_tx needs VFTs at f and -f");
    AugmentedVft out{s_f.f, s_f.values, s_f.values.size()};
    const CVector lower = conj(reversed(s_negf.values));
    out.s_bar.insert(out.s_bar.end(), lower.begin(), lower.end());
    return out;
}

/// Augmented matrices of one bin: R_bar(f), H_bar(f), M_bar(fT).
struct AugmentedBin {
    CMatrix r_bar;
    CMatrix h_bar;
    CMatrix m_bar;
    AugmentedVft s_bar;
    double tm = 0.0; ///< T M(fT)
};

/// Assembles the augmented system at side `sd` of pair `i` for waveform s.
inline AugmentedBin augmented_bin(const LinkModel& model, std::size_t i, Side sd, const WaveformVft& s) {
    const PairModel& pm = model.pairs.at(i);
    const SideModel& here = pm.side(sd);
    const SideModel& there = pm.side(opposite(sd));
    const Vft& s_here = s.at(i).side(sd);
    const Vft& s_there = s.at(i).side(opposite(sd));
    if (s_here.values.size() != here.layout.length() || s_there.values.size() != there.layout.length())
        throw ShapeMismatch("waveform VFT length does not match the grid at bin " + std::to_string(i));
    const double t = model.T();

    auto product = [](const CVector& h, const CVector& x) {
        CVector p(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) p[k] = h[k] * x[k];
        return p;
    };
    const Vft p_here{here.layout.f, product(here.channel, s_here.values)};
    const Vft p_there{there.layout.f, product(there.channel, s_there.values)};

    const LinearModPsd x_here = matrix_psd_linear_mod(here.psd, here.comp_psd, p_here, p_there, t);
    const LinearModPsd x_there = matrix_psd_linear_mod(there.psd, there.comp_psd, p_there, p_here, t);
    const MatrixPsd r_here{here.layout.f, here.noise + x_here.auto_psd.matrix};
    const MatrixPsd r_there{there.layout.f, there.noise + x_there.auto_psd.matrix};

    AugmentedBin out;
    out.r_bar = augment(r_here, r_there, x_here.comp_psd);
    out.h_bar = block_diag(CMatrix::diagonal(here.channel),
                           flip_both(CMatrix::diagonal(there.channel).conj()));
    const std::size_t n_here = here.layout.length();
    const std::size_t n_there = there.layout.length();
    out.m_bar = block_diag(CMatrix::identity(n_here) * cplx(here.psd),
                           CMatrix::identity(n_there) * std::conj(here.comp_psd));
    out.s_bar = augment_tx(s_here, s_there);
    out.tm = t * here.psd;
    return out;
}

/// w_bar = R_bar^{-1} H_bar M_bar s_bar
inline CVector receiver_bin(const AugmentedBin& bin) {
    const CVector q = bin.h_bar * (bin.m_bar * bin.s_bar.s_bar);
    return hermitian_solve(bin.r_bar, q);
}

struct ReceiverBin {
    Vft w1; ///< filters Z(t)
    Vft w2; ///< filters Z(t)^*
};

struct PairReceiver {
    ReceiverBin pos;
    ReceiverBin neg;

    const ReceiverBin& side(Side s) const { return s == Side::pos ? pos : neg; }
    ReceiverBin& side(Side s) { return s == Side::pos ? pos : neg; }
};

using ReceiverSolution = std::vector<PairReceiver>;

inline ReceiverBin split_receiver(const CVector& w_bar, const SideModel& here, const SideModel& there) {
    const std::size_t n = here.layout.length();
    ReceiverBin rb;
    rb.w1 = {here.layout.f, CVector(w_bar.begin(), w_bar.begin() + static_cast<std::ptrdiff_t>(n))};
    rb.w2 = {here.layout.f, CVector(w_bar.begin() + static_cast<std::ptrdiff_t>(n), w_bar.end())};
    if (rb.w2.values.size() != there.layout.length()) throw ShapeMismatch("receiver split");
    return rb;
}

inline ReceiverSolution optimal_receiver(const LinkModel& model, const WaveformVft& s) {
    ReceiverSolution rx(model.pairs.size());
    for (std::size_t i = 0; i < model.pairs.size(); ++i)
        for (Side sd : {Side::pos, Side::neg}) {
            const AugmentedBin bin = augmented_bin(model, i, sd, s);
            rx[i].side(sd) = split_receiver(receiver_bin(bin), model.pairs[i].side(sd),
                                            model.pairs[i].side(opposite(sd)));
        }
    return rx;
}

inline CVector join_receiver(const ReceiverBin& rb) {
    CVector w = rb.w1.values;
    w.insert(w.end(), rb.w2.values.begin(), rb.w2.values.end());
    return w;
}

enum class MseMethod { matrix, scalar };

struct MseReport {
    double total = 0.0;
    std::vector<std::pair<double, double>> per_bin; ///< (eps(+xi), eps(-xi))
    MseMethod method = MseMethod::scalar;
};

namespace detail {

inline void check_integrand(double value, double scale, std::size_t i) {
    if (value < -1e-10 * std::max(1.0, scale))
        throw NegativeIntegrand("MSE integrand " + std::to_string(value) + " at bin " + std::to_string(i));
}

inline double paired_total(const std::vector<std::pair<double, double>>& per_bin, double df) {
    double acc = 0.0;
    for (const auto& [e_pos, e_neg] : per_bin) acc += e_pos + e_neg;
    return acc * df;
}

} // namespace detail

/// Integrand T M(fT) - s_bar^H M_bar^H H_bar^H R_bar^{-1} H_bar M_bar s_bar, paired midpoint rule.
inline MseReport mse_matrix(const LinkModel& model, const WaveformVft& s) {
    MseReport rep;
    rep.method = MseMethod::matrix;
    rep.per_bin.resize(model.pairs.size());
    for (std::size_t i = 0; i < model.pairs.size(); ++i) {
        for (Side sd : {Side::pos, Side::neg}) {
            double eps = 0.0;
            if (model.pairs[i].side(sd).psd > 0.0) {
                const AugmentedBin bin = augmented_bin(model, i, sd, s);
                const CVector q = bin.h_bar * (bin.m_bar * bin.s_bar.s_bar);
                eps = bin.tm - inner(q, hermitian_solve(bin.r_bar, q)).real();
                detail::check_integrand(eps, bin.tm, i);
            }
            (sd == Side::pos ? rep.per_bin[i].first : rep.per_bin[i].second) = eps;
        }
    }
    rep.total = detail::paired_total(rep.per_bin, model.df());
    return rep;
}

/// c(f) = (1/T) M(fT) s^H H^H R_N^{-1} H s at both sides of every pair.
struct PairC {
    double pos = 0.0;
    double neg = 0.0;
    double side(Side s) const { return s == Side::pos ? pos : neg; }
};

inline std::vector<PairC> signal_to_noise_density(const LinkModel& model, const WaveformVft& s) {
    std::vector<PairC> c(model.pairs.size());
    for (std::size_t i = 0; i < model.pairs.size(); ++i)
        for (Side sd : {Side::pos, Side::neg}) {
            const SideModel& sm = model.pairs[i].side(sd);
            const CVector& x = s.at(i).side(sd).values;
            CVector p(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) p[k] = sm.channel[k] * x[k];
            const double v = sm.psd / model.T() * inner(p, hermitian_solve(sm.noise, p)).real();
            (sd == Side::pos ? c[i].pos : c[i].neg) = std::max(0.0, v);
        }
    return c;
}

/// eps(f) = T M(fT) / (1 + c(f) + k^2 c(-f) / (1 + c(-f) (1 - k^2)))
inline double scalar_integrand(double tm, double c_here, double c_there, double k) {
    if (tm <= 0.0) return 0.0;
    const double kbar = 1.0 - k * k;
    return tm / (1.0 + c_here + k * k * c_there / (1.0 + c_there * kbar));
}

inline MseReport mse_scalar(const LinkModel& model, const std::vector<PairC>& c) {
    if (c.size() != model.pairs.size()) throw ShapeMismatch("c(f) has wrong number of bins");
    MseReport rep;
    rep.method = MseMethod::scalar;
    rep.per_bin.resize(model.pairs.size());
    const double t = model.T();
    for (std::size_t i = 0; i < model.pairs.size(); ++i) {
        const PairModel& pm = model.pairs[i];
        if (c[i].pos < 0.0 || c[i].neg < 0.0) throw InvalidSpec("c(f) must be >= 0");
        rep.per_bin[i] = {scalar_integrand(t * pm.pos.psd, c[i].pos, c[i].neg, pm.impropriety),
                          scalar_integrand(t * pm.neg.psd, c[i].neg, c[i].pos, pm.impropriety)};
    }
    rep.total = detail::paired_total(rep.per_bin, model.df());
    return rep;
}

inline MseReport mse_scalar(const LinkModel& model, const WaveformVft& s) {
    return mse_scalar(model, signal_to_noise_density(model, s));
}

/// MSE of an arbitrary receiver: int T M + w_bar^H R_bar w_bar - 2 Re(w_bar^H H_bar M_bar s_bar).
inline double receiver_objective(const LinkModel& model, const WaveformVft& s, const ReceiverSolution& rx) {
    double acc = 0.0;
    for (std::size_t i = 0; i < model.pairs.size(); ++i)
        for (Side sd : {Side::pos, Side::neg}) {
            const AugmentedBin bin = augmented_bin(model, i, sd, s);
            const CVector q = bin.h_bar * (bin.m_bar * bin.s_bar.s_bar);
            const CVector w = join_receiver(rx.at(i).side(sd));
            acc += bin.tm + inner(w, bin.r_bar * w).real() - 2.0 * inner(w, q).real();
        }
    return acc * model.df();
}

} // namespace wlmmse
