#pragma once

// Randomized valid scenarios for property checks: L in {0, 1, 2}, multipath
// channels, 1 to 3 cyclostationary interferers and smooth random source
// spectra with random impropriety and phase profiles.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "wlmmse/scenario.hpp"
#include "wlmmse/spectra.hpp"

namespace wlmmse {

struct RandomScenarioOptions {
    std::size_t min_bins = 8;
    std::size_t max_bins = 24;
    int max_interferers = 3;
    bool qam_only = false; ///< flat QAM source instead of a shaped spectrum
};

namespace detail {

/// 1 + sum of a few random cosines, scaled to stay in [lo, hi].
struct SmoothProfile {
    std::vector<double> amp;
    std::vector<double> phase;
    double lo = 0.0;
    double hi = 1.0;
    bool even = false;

    double operator()(double nu) const {
        double acc = 0.0;
        double norm = 0.0;
        for (std::size_t k = 0; k < amp.size(); ++k) {
            const double arg = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * nu;
            acc += amp[k] * (even ? std::cos(arg) : std::cos(arg + phase[k]));
            norm += std::abs(amp[k]);
        }
        const double unit = norm > 0.0 ? 0.5 * (1.0 + acc / norm) : 0.5; // in [0, 1]
        return lo + (hi - lo) * unit;
    }
};

inline SmoothProfile random_profile(std::mt19937_64& rng, double lo, double hi, bool even) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> terms(1, 3);
    SmoothProfile p;
    p.lo = lo;
    p.hi = hi;
    p.even = even;
    const int n = terms(rng);
    for (int k = 0; k < n; ++k) {
        p.amp.push_back(u(rng));
        p.phase.push_back(std::numbers::pi * u(rng));
    }
    return p;
}

} // namespace detail

inline Scenario random_scenario(std::mt19937_64& rng, const RandomScenarioOptions& opt = {}) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> pick_l(0, 2);
    std::uniform_int_distribution<std::size_t> pick_n(opt.min_bins, opt.max_bins);
    std::uniform_int_distribution<int> pick_itf(1, opt.max_interferers);
    std::uniform_int_distribution<int> pick_paths(1, 3);

    Scenario sc;
    const double t = 1.0;
    const int l = pick_l(rng);
    double bt = 0.5;
    if (l == 1) bt = 0.5 + 0.05 + 0.95 * u01(rng); // beta in (0.1, 2]
    if (l == 2) bt = 1.5 + 0.05 + 0.95 * u01(rng); // beta in (2.1, 4]
    sc.grid = {bt / t, t, pick_n(rng)};

    if (opt.qam_only || u01(rng) < 0.3) {
        const double k = u01(rng) < 0.15 ? (u01(rng) < 0.5 ? 0.0 : 1.0) : u01(rng);
        sc.qam = QamVariances::from_impropriety(k, 0.5 + u01(rng));
        sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);
    } else {
        const auto m = std::make_shared<detail::SmoothProfile>(detail::random_profile(rng, 0.1 + 0.4 * u01(rng), 1.5, false));
        const double kmax = u01(rng) < 0.2 ? 1.0 : u01(rng);
        const auto k = std::make_shared<detail::SmoothProfile>(detail::random_profile(rng, 0.0, kmax, true));
        const auto phi = std::make_shared<detail::SmoothProfile>(detail::random_profile(rng, 0.0, 2.0 * std::numbers::pi, true));
        sc.source = SosSequenceSpec([m](double nu) { return (*m)(nu); },
                                    [m, k, phi](double nu) {
                                        const double mag = (*k)(nu) * std::sqrt((*m)(nu) * (*m)(-nu));
                                        return std::polar(mag, (*phi)(nu));
                                    });
    }

    // Multipath channel: a few complex taps with delays up to 2T.
    std::vector<std::pair<double, cplx>> paths;
    const int np = pick_paths(rng);
    for (int i = 0; i < np; ++i) {
        const double gain = i == 0 ? 1.0 : 0.6 * u01(rng);
        paths.emplace_back(i == 0 ? 0.0 : 2.0 * t * u01(rng), std::polar(gain, 2.0 * std::numbers::pi * u01(rng)));
    }
    const double b = sc.grid.bandwidth;
    sc.channel = {CtftFunction(
        [paths](double xi) {
            cplx acc{};
            for (const auto& [d, g] : paths) acc += g * std::polar(1.0, -2.0 * std::numbers::pi * xi * d);
            return acc;
        },
        -b, b)};

    sc.noise.n0 = 0.05 + 0.45 * u01(rng);
    const int ni = pick_itf(rng);
    for (int i = 0; i < ni; ++i) {
        const double rate = u01(rng) < 0.3 ? 2.0 : 1.0;
        sc.noise.interferers.push_back(srrc_interferer(u01(rng), -5.0 + 20.0 * u01(rng), sc.noise.n0, t, rate,
                                                       (u01(rng) - 0.5) * 0.6 / t));
    }
    sc.power.total = sc.noise.n0 * std::pow(10.0, 15.0 * u01(rng) / 10.0) / t;
    return sc;
}

} // namespace wlmmse
