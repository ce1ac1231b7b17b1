#pragma once

// Frequency grids over the Nyquist interval, vectorized Fourier transforms
// (stacks of a spectrum's values at shifts spaced 1/T apart) and the
// matrix-valued PSDs built from them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wlmmse/errors.hpp"
#include "wlmmse/numerics.hpp"

namespace wlmmse {

/// Band, symbol period and discretization of the half Nyquist interval.
struct GridSpec {
    double bandwidth = 0.0;     ///< one-sided band B [Hz]
    double symbol_period = 1.0; ///< T [s]
    std::size_t bins = 0;       ///< N, bins in [0, 1/(2T))

    double excess_bandwidth() const { return 2.0 * bandwidth * symbol_period - 1.0; }

    /// L = ceil(beta / 2); beta is snapped to the nearest integer when it is
    /// within round-off of one so that e.g. B*T = 1.5 gives L = 1.
    int max_shift() const {
        const double beta = excess_bandwidth();
        const double half = beta / 2.0;
        const double nearest = std::round(half);
        if (std::abs(half - nearest) <= 1e-12 * std::max(1.0, std::abs(half)))
            return static_cast<int>(nearest);
        return static_cast<int>(std::ceil(half));
    }

    void validate() const {
        if (!(bandwidth > 0.0)) throw InvalidSpec("bandwidth B must be positive");
        if (!(symbol_period > 0.0)) throw InvalidSpec("symbol period T must be positive");
        if (bins < 2) throw InvalidSpec("need at least N = 2 bins per half interval");
        if (excess_bandwidth() < -1e-12)
            throw InvalidSpec("excess bandwidth 2BT - 1 = " + std::to_string(excess_bandwidth()) +
                              " is negative; the band must cover the Nyquist rate");
    }
};

/// Retained spectral shifts at one frequency f of the Nyquist interval:
/// entry j of an effective VFT at f is the spectrum at f + (first_shift + j)/T.
struct BinLayout {
    double f = 0.0;
    int first_shift = 0;
    int last_shift = -1;

    std::size_t length() const {
        return last_shift >= first_shift ? static_cast<std::size_t>(last_shift - first_shift + 1) : 0;
    }
};

/// One +xi / -xi pair of midpoint bins.
struct BinPair {
    std::size_t index = 0; ///< zero-based i; xi = (i + 1)/(2NT) - 1/(4NT)
    double xi = 0.0;
    BinLayout pos;
    BinLayout neg;
};

/// Effective layout at frequency f using the edge-removal rule: the lowest
/// shift is dropped for f <= L/T - B, the highest for f >= B - L/T.
inline BinLayout effective_layout(double f, const GridSpec& spec) {
    const int l = spec.max_shift();
    const double t = spec.symbol_period;
    const double b = spec.bandwidth;
    BinLayout lay{f, -l, l};
    if (f <= l / t - b) ++lay.first_shift;
    if (f >= b - l / t) --lay.last_shift;
    return lay;
}

class FrequencyGrid {
public:
    FrequencyGrid() = default;

    explicit FrequencyGrid(const GridSpec& spec) : spec_(spec) {
        spec_.validate();
        const double t = spec_.symbol_period;
        const auto n = static_cast<double>(spec_.bins);
        bins_.reserve(spec_.bins);
        for (std::size_t i = 0; i < spec_.bins; ++i) {
            const double xi = static_cast<double>(i + 1) / (2.0 * n * t) - 1.0 / (4.0 * n * t);
            bins_.push_back({i, xi, effective_layout(xi, spec_), effective_layout(-xi, spec_)});
        }
    }

    const GridSpec& spec() const noexcept { return spec_; }
    double T() const noexcept { return spec_.symbol_period; }
    double B() const noexcept { return spec_.bandwidth; }
    double beta() const { return spec_.excess_bandwidth(); }
    int L() const { return spec_.max_shift(); }
    std::size_t size() const noexcept { return bins_.size(); }
    /// Width of one bin, 1/(2NT).
    double df() const { return 1.0 / (2.0 * static_cast<double>(spec_.bins) * spec_.symbol_period); }

    const std::vector<BinPair>& bins() const noexcept { return bins_; }
    const BinPair& operator[](std::size_t i) const { return bins_.at(i); }

    /// CTFT frequencies sampled by the effective VFT at this layout.
    std::vector<double> shift_frequencies(const BinLayout& lay) const {
        std::vector<double> out;
        out.reserve(lay.length());
        for (int s = lay.first_shift; s <= lay.last_shift; ++s) out.push_back(lay.f + s / T());
        return out;
    }

private:
    GridSpec spec_;
    std::vector<BinPair> bins_;
};

inline FrequencyGrid build_grid(const GridSpec& spec) { return FrequencyGrid(spec); }

/// Continuous-time Fourier transform evaluator with a declared support; it
/// evaluates to exactly zero outside [lo, hi].
class CtftFunction {
public:
    using Fn = std::function<cplx(double)>;

    CtftFunction() : CtftFunction([](double) { return cplx{}; }, 0.0, 0.0) {}
    CtftFunction(Fn fn, double lo, double hi) : fn_(std::make_shared<Fn>(std::move(fn))), lo_(lo), hi_(hi) {
        if (hi < lo) throw InvalidSpec("CTFT support has hi < lo");
    }

    cplx operator()(double xi) const {
        if (xi < lo_ || xi > hi_) return {};
        return (*fn_)(xi);
    }

    double support_lo() const noexcept { return lo_; }
    double support_hi() const noexcept { return hi_; }

    static CtftFunction flat(cplx gain, double lo, double hi) {
        return CtftFunction([gain](double) { return gain; }, lo, hi);
    }

    /// Linear interpolation through (freq, value) samples; zero outside the table.
    static CtftFunction tabulated(std::vector<double> freqs, CVector values) {
        if (freqs.size() != values.size() || freqs.size() < 2)
            throw InvalidSpec("tabulated CTFT needs >= 2 matching frequency/value samples");
        for (std::size_t i = 1; i < freqs.size(); ++i)
            if (!(freqs[i] > freqs[i - 1]))
                throw InvalidSpec("tabulated CTFT frequencies must be strictly increasing");
        const double lo = freqs.front();
        const double hi = freqs.back();
        auto f = std::make_shared<const std::vector<double>>(std::move(freqs));
        auto v = std::make_shared<const CVector>(std::move(values));
        return CtftFunction(
            [f, v](double xi) -> cplx {
                auto it = std::upper_bound(f->begin(), f->end(), xi);
                if (it == f->begin()) return v->front();
                if (it == f->end()) return v->back();
                const auto hi_idx = static_cast<std::size_t>(it - f->begin());
                const std::size_t lo_idx = hi_idx - 1;
                const double w = (xi - (*f)[lo_idx]) / ((*f)[hi_idx] - (*f)[lo_idx]);
                return (1.0 - w) * (*v)[lo_idx] + w * (*v)[hi_idx];
            },
            lo, hi);
    }

    /// Two-column CSV: frequency, complex value written as "re,im" (quotes optional).
    /// Lines starting with '#' and a non-numeric header line are skipped.
    static CtftFunction from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InvalidSpec("cannot open tabulated CTFT file '" + path + "'");
        std::vector<double> freqs;
        CVector values;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            std::string cleaned;
            for (char ch : line)
                if (ch != '"' && ch != '\r') cleaned.push_back(ch);
            std::stringstream ss(cleaned);
            std::string field;
            std::vector<double> nums;
            bool numeric = true;
            while (std::getline(ss, field, ',')) {
                try {
                    std::size_t used = 0;
                    nums.push_back(std::stod(field, &used));
                } catch (const std::exception&) {
                    numeric = false;
                    break;
                }
            }
            if (!numeric) {
                if (freqs.empty()) continue; // header
                throw InvalidSpec(path + ":" + std::to_string(line_no) + ": non-numeric field");
            }
            if (nums.size() != 3)
                throw InvalidSpec(path + ":" + std::to_string(line_no) +
                                  ": expected frequency,re,im");
            freqs.push_back(nums[0]);
            values.emplace_back(nums[1], nums[2]);
        }
        return tabulated(std::move(freqs), std::move(values));
    }

    /// Spectrum of p(t) e^{j 2 pi shift t}: P(xi - shift).
    CtftFunction shifted(double shift) const {
        auto fn = fn_;
        return CtftFunction([fn, shift](double xi) { return (*fn)(xi - shift); }, lo_ + shift, hi_ + shift);
    }

    /// Spectrum of p(t)^*: P(-xi)^*.
    CtftFunction conj_reversed() const {
        auto fn = fn_;
        return CtftFunction([fn](double xi) { return std::conj((*fn)(-xi)); }, -hi_, -lo_);
    }

    CtftFunction scaled(cplx gain) const {
        auto fn = fn_;
        return CtftFunction([fn, gain](double xi) { return gain * (*fn)(xi); }, lo_, hi_);
    }

    /// Pointwise product; support is the intersection.
    friend CtftFunction operator*(const CtftFunction& a, const CtftFunction& b) {
        const double lo = std::max(a.lo_, b.lo_);
        const double hi = std::max(lo, std::min(a.hi_, b.hi_));
        return CtftFunction([a, b](double xi) { return a(xi) * b(xi); }, lo, hi);
    }

private:
    std::shared_ptr<const Fn> fn_;
    double lo_;
    double hi_;
};

/// Effective VFT at one frequency.
struct Vft {
    double f = 0.0;
    CVector values;
};

inline Vft vft(const CtftFunction& fn, const FrequencyGrid& grid, const BinLayout& lay) {
    Vft out{lay.f, {}};
    out.values.reserve(lay.length());
    for (double xi : grid.shift_frequencies(lay)) out.values.push_back(fn(xi));
    return out;
}

/// Matrix-valued PSD at one frequency: N(f) x N(f) for the auto form,
/// N(f) x N(-f) for the complementary form.
struct MatrixPsd {
    double f = 0.0;
    CMatrix matrix;
};

struct LinearModPsd {
    MatrixPsd auto_psd;
    MatrixPsd comp_psd;
};

/// Matrix PSDs of sum_l b[l] p(t - lT) at f given the symbol PSD M(fT) and
/// complementary PSD Mc(fT):
///   auto = M p(f) p(f)^H / T,   comp = Mc p(f) (J p(-f)^*)^H / T.
inline LinearModPsd matrix_psd_linear_mod(double psd, cplx comp_psd, const Vft& pulse_f,
                                          const Vft& pulse_negf, double T) {
    LinearModPsd out;
    out.auto_psd.f = pulse_f.f;
    out.auto_psd.matrix = CMatrix::outer(pulse_f.values, pulse_f.values) * cplx(psd / T);
    const CVector conj_rev = conj(reversed(pulse_negf.values));
    out.comp_psd.f = pulse_f.f;
    out.comp_psd.matrix = CMatrix::outer(pulse_f.values, conj_rev) * (comp_psd / T);
    return out;
}

/// Linearly modulated interferer with uncorrelated proper symbols.
struct InterfererSpec {
    CtftFunction pulse;           ///< unit-energy transmit pulse spectrum, including any carrier shift
    double symbol_energy = 0.0;   ///< E_s, the flat symbol PSD level
    double rate_multiple = 1.0;   ///< symbol rate in units of 1/T; must be a positive integer
    cplx comp_symbol_psd{};       ///< must be zero: only proper interferers are modelled

    int checked_rate_multiple() const {
        const double r = std::round(rate_multiple);
        if (!(rate_multiple > 0.0) || std::abs(rate_multiple - r) > 1e-9 || r < 1.0)
            throw NonCommensurateRates("interferer symbol rate " + std::to_string(rate_multiple) +
                                       "/T is not an integer multiple of 1/T");
        return static_cast<int>(r);
    }
};

struct NoiseSpec {
    double n0 = 1.0; ///< white noise PSD level
    std::vector<InterfererSpec> interferers;

    void validate() const {
        if (!(n0 > 0.0)) throw InvalidSpec("white noise level N0 must be positive");
        for (const auto& i : interferers) {
            if (i.comp_symbol_psd != cplx{})
                throw NotProper("interferer declares a nonzero complementary symbol PSD");
            if (!(i.symbol_energy >= 0.0)) throw InvalidSpec("interferer symbol energy must be >= 0");
            i.checked_rate_multiple();
        }
    }
};

/// Matrix PSD of white noise plus interferers at one layout. An interferer at
/// rate n/T correlates spectral shifts whose indices differ by a multiple of n.
inline MatrixPsd noise_matrix_psd(const NoiseSpec& noise, const FrequencyGrid& grid,
                                  const BinLayout& lay) {
    noise.validate();
    const std::size_t n = lay.length();
    MatrixPsd out{lay.f, CMatrix::identity(n) * cplx(noise.n0)};
    for (const auto& itf : noise.interferers) {
        const int rate = itf.checked_rate_multiple();
        const Vft g = vft(itf.pulse, grid, lay);
        const double level = itf.symbol_energy * rate / grid.T();
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) {
                const auto gap = static_cast<long>(k) - static_cast<long>(l);
                if (gap % rate != 0) continue;
                out.matrix(k, l) += level * g.values[k] * std::conj(g.values[l]);
            }
    }
    return out;
}

/// Time-averaged PSD of the interference-plus-noise process at a CTFT frequency.
inline double noise_psd(const NoiseSpec& noise, double xi, double T) {
    double p = noise.n0;
    for (const auto& itf : noise.interferers)
        p += itf.symbol_energy * itf.checked_rate_multiple() / T * std::norm(itf.pulse(xi));
    return p;
}

/// [[R(f), Rc(f)], [Rc(f)^H, J R(-f)^* J]]
inline CMatrix augment(const MatrixPsd& auto_f, const MatrixPsd& auto_negf, const MatrixPsd& comp_f) {
    const CMatrix& r = auto_f.matrix;
    const CMatrix& rn = auto_negf.matrix;
    const CMatrix& rc = comp_f.matrix;
    if (!r.square() || !rn.square() || rc.rows() != r.rows() || rc.cols() != rn.rows())
        throw ShapeMismatch("augment with blocks " + r.shape() + ", " + rn.shape() + ", " + rc.shape());
    return block2x2(r, rc, rc.adjoint(), flip_both(rn.conj()));
}

} // namespace wlmmse
