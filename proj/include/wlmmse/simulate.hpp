#pragma once

// Time-domain Monte Carlo check of an optimized link. Each batch is one
// circular block of symbols sampled at Q/T; all filtering is done exactly in
// the DFT domain, so the only approximation left is the piecewise-constant
// spectral reconstruction between optimizer bins.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wlmmse/errors.hpp"
#include "wlmmse/link_model.hpp"
#include "wlmmse/optimize.hpp"
#include "wlmmse/receiver.hpp"
#include "wlmmse/scenario.hpp"

namespace wlmmse {

struct SimConfig {
    int oversampling = 8;           ///< Q, samples per symbol
    std::size_t num_symbols = 100000;
    std::size_t burn_in = 0;        ///< symbols dropped at each block edge; blocks are circular so 0 is exact
    std::uint64_t seed = 1;
    int filter_span = 32;           ///< symbols spanned by exported FIR taps
    std::size_t batches = 20;       ///< independent blocks; the standard error comes from their spread
    bool zero_w2 = false;           ///< drop the conjugate branch (linear receiver)

    void validate(double bandwidth, double T) const {
        if (oversampling < 2) throw InvalidSpec("oversampling Q must be >= 2");
        if (oversampling / T < 2.0 * bandwidth * (1.0 - 1e-12))
            throw InvalidSpec("oversampling Q = " + std::to_string(oversampling) + " aliases the band (need Q >= 2BT)");
        if (batches < 2) throw InvalidSpec("need at least 2 batches for a standard error");
        if (num_symbols < batches * 8) throw InvalidSpec("num_symbols too small for the batch count");
        if (num_symbols < 10 * burn_in) throw InvalidSpec("num_symbols must be >= 10 * burn_in");
        if (2 * burn_in >= num_symbols / batches) throw InvalidSpec("burn_in leaves no symbols per batch");
        if (filter_span < 1) throw InvalidSpec("filter_span must be >= 1");
    }
};

/// Spectrum at a CTFT frequency rebuilt from per-bin VFT values, constant
/// across each bin and zero on shifts outside the bin's layout. Bins whose
/// midpoint lies inside the band keep their full width, so the support can
/// overrun B by less than one bin; this is the signal the per-bin MSE
/// describes. `get(i, side)` returns the values.
template <class Get>
cplx piecewise_spectrum(const LinkModel& model, double xi, Get&& get) {
    const double t = model.T();
    const double s = std::round(xi * t);
    const double f = xi - s / t;
    const Side sd = f >= 0.0 ? Side::pos : Side::neg;
    const auto n = model.pairs.size();
    const auto i = std::min(n - 1, static_cast<std::size_t>(std::abs(f) / model.df()));
    const BinLayout& lay = model.pairs[i].side(sd).layout;
    const int shift = static_cast<int>(s);
    if (lay.length() == 0 || shift < lay.first_shift || shift > lay.last_shift) return 0.0;
    const CVector& v = get(i, sd);
    return v.at(static_cast<std::size_t>(shift - lay.first_shift));
}

inline cplx waveform_spectrum(const LinkModel& model, const WaveformVft& w, double xi) {
    return piecewise_spectrum(model, xi,
                              [&](std::size_t i, Side sd) -> const CVector& { return w[i].side(sd).values; });
}

/// Channel response as the model samples it, one value per bin and shift.
inline cplx channel_spectrum(const LinkModel& model, double xi) {
    return piecewise_spectrum(model, xi,
                              [&](std::size_t i, Side sd) -> const CVector& { return model.pairs[i].side(sd).channel; });
}

namespace detail {

/// RAII wrapper for an in-place complex FFTW plan. Planning is serialized
/// because the FFTW planner is not thread safe.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), buf_(fftw_alloc_complex(n)) {
        if (!buf_) throw std::bad_alloc();
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(buf_);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    /// X_k = sum_n x_n e^{-j 2 pi k n / N}
    void forward(std::vector<cplx>& x) { run(fwd_, x, 1.0); }
    /// x_n = (1/N) sum_k X_k e^{+j 2 pi k n / N}
    void inverse(std::vector<cplx>& x) { run(inv_, x, 1.0 / static_cast<double>(n_)); }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }
    void run(fftw_plan p, std::vector<cplx>& x, double scale) {
        std::copy(x.begin(), x.end(), reinterpret_cast<cplx*>(buf_));
        fftw_execute(p);
        const cplx* out = reinterpret_cast<const cplx*>(buf_);
        for (std::size_t k = 0; k < n_; ++k) x[k] = out[k] * scale;
    }

    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

/// Frequency of DFT bin k for an n-point transform at sample rate fs, in [-fs/2, fs/2).
inline double dft_frequency(std::size_t k, std::size_t n, double fs) {
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return (k < (n + 1) / 2 ? kk : kk - nn) * fs / nn;
}

} // namespace detail

/// FIR taps of one waveform at rate Q/T, centred on index `delay`.
struct FilterTaps {
    std::vector<cplx> taps;  ///< taps[n] = p((n - delay) T/Q)
    std::size_t delay = 0;
    double tail_fraction = 0.0; ///< energy outside the kept span / total
    double sample_period = 0.0;

    /// sum |p|^2 Ts, the energy of the continuous-time pulse.
    double energy() const {
        double e = 0.0;
        for (const cplx& c : taps) e += std::norm(c);
        return e * sample_period;
    }
};

/// Taps for every waveform of a solution, plus the channel.
struct TapSet {
    FilterTaps s;
    FilterTaps w1;
    FilterTaps w2;
    FilterTaps h;
};

/// Inverse-transforms a dense spectrum (sampled at detail::dft_frequency) to
/// taps spanning `span` symbols, reporting the energy left outside.
template <class Spectrum>
FilterTaps spectrum_to_taps(Spectrum&& spectrum, double T, const SimConfig& cfg, double max_tail = 1e-6) {
    const int q = cfg.oversampling;
    const double fs = q / T;
    // Long transform so that circular wrap-around of the response is negligible.
    const std::size_t span = static_cast<std::size_t>(cfg.filter_span) * static_cast<std::size_t>(q);
    std::size_t n = 1;
    while (n < 16 * span) n <<= 1;
    std::vector<cplx> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = spectrum(detail::dft_frequency(k, n, fs));
    detail::Fft fft(n);
    fft.inverse(x);
    // p(n Ts) = int P e^{j2pi xi n Ts} dxi ~ fs * idft
    for (cplx& v : x) v *= fs;

    FilterTaps out;
    out.sample_period = 1.0 / fs;
    out.delay = span / 2;
    out.taps.resize(span + 1);
    double total = 0.0;
    for (const cplx& v : x) total += std::norm(v);
    double kept = 0.0;
    for (std::size_t j = 0; j <= span; ++j) {
        const long idx = static_cast<long>(j) - static_cast<long>(out.delay);
        const std::size_t src = idx >= 0 ? static_cast<std::size_t>(idx) : n - static_cast<std::size_t>(-idx);
        out.taps[j] = x[src];
        kept += std::norm(x[src]);
    }
    out.tail_fraction = total > 0.0 ? std::max(0.0, 1.0 - kept / total) : 0.0;
    if (out.tail_fraction > max_tail)
        throw TailEnergyExceeded("tail energy fraction " + std::to_string(out.tail_fraction) +
                                 " exceeds " + std::to_string(max_tail) + "; increase filter_span");
    return out;
}

/// FIR taps of a per-bin waveform with piecewise-constant reconstruction.
inline FilterTaps waveform_to_taps(const LinkModel& model, const WaveformVft& w, const SimConfig& cfg,
                                   double max_tail = 1e-6) {
    return spectrum_to_taps([&](double xi) { return waveform_spectrum(model, w, xi); }, model.T(), cfg, max_tail);
}

inline WaveformVft receiver_branch(const ReceiverSolution& rx, bool conjugate_branch) {
    WaveformVft w;
    w.reserve(rx.size());
    for (const PairReceiver& p : rx)
        w.push_back(conjugate_branch ? PairVft{p.pos.w2, p.neg.w2} : PairVft{p.pos.w1, p.neg.w1});
    return w;
}

inline TapSet build_taps(const Solution& sol, const SimConfig& cfg, double max_tail = 1e-6) {
    TapSet ts;
    ts.s = waveform_to_taps(sol.model, sol.tx.waveform, cfg, max_tail);
    ts.w1 = waveform_to_taps(sol.model, receiver_branch(sol.rx, false), cfg, max_tail);
    ts.w2 = waveform_to_taps(sol.model, receiver_branch(sol.rx, true), cfg, max_tail);
    ts.h = spectrum_to_taps([&](double xi) { return channel_spectrum(sol.model, xi); }, sol.model.T(), cfg, max_tail);
    return ts;
}

struct SimReport {
    double empirical_mse = 0.0;
    double std_err = 0.0;
    double analytic_mse = 0.0;
    double empirical_power = 0.0;
    std::size_t num_symbols = 0; ///< symbols actually scored
    std::uint64_t seed = 0;
};

/// Simulates the link of a solved scenario. The source must be uncorrelated
/// QAM with Gaussian I/Q parts; interferers send proper QPSK symbols.
inline SimReport run_link(const Scenario& sc, const Solution& sol, const SimConfig& cfg) {
    if (!sc.qam) throw InvalidSpec("simulation needs a QAM source given by var_i / var_q or k");
    const LinkModel& model = sol.model;
    const double t = model.T();
    cfg.validate(model.grid.B(), t);
    const int q = cfg.oversampling;
    const double fs = q / t;
    std::vector<int> itf_up;
    for (const InterfererSpec& itf : sc.noise.interferers) {
        const int n = itf.checked_rate_multiple();
        if (q % n != 0)
            throw InvalidSpec("oversampling Q = " + std::to_string(q) + " is not a multiple of interferer rate " +
                              std::to_string(n));
        itf_up.push_back(q / n);
    }

    const std::size_t block = cfg.num_symbols / cfg.batches;
    const std::size_t ns = block * static_cast<std::size_t>(q);
    const WaveformVft w1v = receiver_branch(sol.rx, false);
    const WaveformVft w2v = receiver_branch(sol.rx, true);

    // Per-DFT-bin responses, shared by all batches; receiver branches are stored conjugated.
    std::vector<cplx> tx(ns), chan(ns), w1(ns), w2(ns);
    std::vector<std::vector<cplx>> itf_resp(sc.noise.interferers.size(), std::vector<cplx>(ns));
    for (std::size_t k = 0; k < ns; ++k) {
        const double xi = detail::dft_frequency(k, ns, fs);
        tx[k] = fs * waveform_spectrum(model, sol.tx.waveform, xi);
        chan[k] = channel_spectrum(model, xi);
        w1[k] = std::conj(waveform_spectrum(model, w1v, xi));
        w2[k] = cfg.zero_w2 ? cplx{} : std::conj(waveform_spectrum(model, w2v, xi));
        for (std::size_t j = 0; j < itf_resp.size(); ++j)
            itf_resp[j][k] = fs * sc.noise.interferers[j].pulse(xi);
    }

    const double sd_i = std::sqrt(sc.qam->in_phase);
    const double sd_q = std::sqrt(sc.qam->quadrature);
    const double noise_sd = std::sqrt(sc.noise.n0 * fs / 2.0);

    std::vector<double> batch_mse(cfg.batches), batch_power(cfg.batches);
    detail::Fft fft(ns);
    std::vector<cplx> sym(block), x(ns), z(ns), z1(ns), z2(ns);
    for (std::size_t b = 0; b < cfg.batches; ++b) {
        std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(b), std::uint64_t{0x57a7e}};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::bernoulli_distribution coin(0.5);

        for (cplx& s : sym) s = cplx(sd_i * gauss(rng), sd_q * gauss(rng));
        std::fill(x.begin(), x.end(), cplx{});
        for (std::size_t l = 0; l < block; ++l) x[l * static_cast<std::size_t>(q)] = sym[l];
        fft.forward(x);
        for (std::size_t k = 0; k < ns; ++k) x[k] *= tx[k];
        // Received spectrum: channel output plus interference plus white noise.
        for (std::size_t k = 0; k < ns; ++k) z[k] = chan[k] * x[k];

        for (std::size_t j = 0; j < itf_resp.size(); ++j) {
            const double amp = std::sqrt(sc.noise.interferers[j].symbol_energy / 2.0);
            std::vector<cplx> u(ns);
            const auto up = static_cast<std::size_t>(itf_up[j]);
            for (std::size_t n = 0; n < ns; n += up)
                u[n] = cplx(coin(rng) ? amp : -amp, coin(rng) ? amp : -amp);
            fft.forward(u);
            for (std::size_t k = 0; k < ns; ++k) z[k] += itf_resp[j][k] * u[k];
        }
        {
            std::vector<cplx> w(ns);
            for (cplx& v : w) v = cplx(noise_sd * gauss(rng), noise_sd * gauss(rng));
            fft.forward(w);
            for (std::size_t k = 0; k < ns; ++k) z[k] += w[k];
        }

        // Transmit power: mean |x(nTs)|^2.
        {
            std::vector<cplx> xt = x;
            fft.inverse(xt);
            double p = 0.0;
            for (const cplx& v : xt) p += std::norm(v);
            batch_power[b] = p / static_cast<double>(ns);
        }

        for (std::size_t k = 0; k < ns; ++k) {
            z1[k] = w1[k] * z[k];
            const std::size_t mk = k == 0 ? 0 : ns - k;
            z2[k] = w2[k] * std::conj(z[mk]);
        }
        fft.inverse(z1);
        fft.inverse(z2);
        double err = 0.0;
        std::size_t scored = 0;
        for (std::size_t l = cfg.burn_in; l + cfg.burn_in < block; ++l) {
            const std::size_t n = l * static_cast<std::size_t>(q);
            err += std::norm(z1[n] + z2[n] - sym[l]);
            ++scored;
        }
        batch_mse[b] = err / static_cast<double>(scored);
    }

    SimReport rep;
    rep.seed = cfg.seed;
    rep.num_symbols = cfg.batches * (block - 2 * cfg.burn_in);
    rep.analytic_mse = sol.mse.total;
    const double nb = static_cast<double>(cfg.batches);
    rep.empirical_mse = std::accumulate(batch_mse.begin(), batch_mse.end(), 0.0) / nb;
    rep.empirical_power = std::accumulate(batch_power.begin(), batch_power.end(), 0.0) / nb;
    double var = 0.0;
    for (double v : batch_mse) var += (v - rep.empirical_mse) * (v - rep.empirical_mse);
    rep.std_err = std::sqrt(var / (nb - 1.0) / nb);
    return rep;
}

} // namespace wlmmse
