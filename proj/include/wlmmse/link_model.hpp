#pragma once

// Per-bin evaluation of a scenario on its frequency grid: channel VFTs, noise
// matrix PSDs and source spectra at every +xi / -xi bin.

#include <cstddef>
#include <vector>

#include "wlmmse/numerics.hpp"
#include "wlmmse/scenario.hpp"
#include "wlmmse/spectra.hpp"

namespace wlmmse {

enum class Side { pos, neg };

inline Side opposite(Side s) { return s == Side::pos ? Side::neg : Side::pos; }

/// Quantities at one frequency f = +xi or -xi.
struct SideModel {
    BinLayout layout;
    CVector channel;  ///< h(f)
    CMatrix noise;    ///< R_N(f)
    double psd = 0.0; ///< M(fT)
    cplx comp_psd{};  ///< Mc(fT)
};

struct PairModel {
    std::size_t index = 0;
    double xi = 0.0;
    SideModel pos;
    SideModel neg;
    double impropriety = 0.0; ///< k(xi T), equal on both sides

    const SideModel& side(Side s) const { return s == Side::pos ? pos : neg; }
};

struct LinkModel {
    FrequencyGrid grid;
    std::vector<PairModel> pairs;
    double source_power = 0.0; ///< m[0]

    double T() const { return grid.T(); }
    double df() const { return grid.df(); }
};

inline LinkModel build_link_model(const Scenario& sc) {
    sc.validate();
    LinkModel model;
    model.grid = build_grid(sc.grid);
    model.source_power = sc.source.power();
    const double t = model.grid.T();
    const ChannelSpec channel = sc.channel.band_limited(model.grid.B());
    model.pairs.reserve(model.grid.size());
    for (const BinPair& bp : model.grid.bins()) {
        PairModel pm;
        pm.index = bp.index;
        pm.xi = bp.xi;
        auto fill = [&](const BinLayout& lay) {
            SideModel s;
            s.layout = lay;
            s.channel = vft(channel.response, model.grid, lay).values;
            s.noise = noise_matrix_psd(sc.noise, model.grid, lay).matrix;
            s.psd = sc.source.psd(lay.f * t);
            s.comp_psd = sc.source.comp_psd(lay.f * t);
            return s;
        };
        pm.pos = fill(bp.pos);
        pm.neg = fill(bp.neg);
        pm.impropriety = impropriety_function(sc.source, bp.xi * t);
        model.pairs.push_back(std::move(pm));
    }
    return model;
}

/// Transmit (or receive) waveform as effective VFTs at every +xi / -xi bin.
struct PairVft {
    Vft pos;
    Vft neg;

    const Vft& side(Side s) const { return s == Side::pos ? pos : neg; }
    Vft& side(Side s) { return s == Side::pos ? pos : neg; }
};

using WaveformVft = std::vector<PairVft>;

/// All-zero waveform shaped to the model's layouts.
inline WaveformVft zero_waveform(const LinkModel& model) {
    WaveformVft w;
    w.reserve(model.pairs.size());
    for (const auto& p : model.pairs)
        w.push_back({{p.pos.layout.f, CVector(p.pos.layout.length())},
                     {p.neg.layout.f, CVector(p.neg.layout.length())}});
    return w;
}

/// Samples a CTFT on the model's grid.
inline WaveformVft sample_waveform(const LinkModel& model, const CtftFunction& fn) {
    WaveformVft w;
    w.reserve(model.pairs.size());
    for (const auto& p : model.pairs)
        w.push_back({vft(fn, model.grid, p.pos.layout), vft(fn, model.grid, p.neg.layout)});
    return w;
}

/// (1/T) int_F M(fT) ||s(f)||^2 df by the midpoint rule.
inline double transmit_power(const LinkModel& model, const WaveformVft& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < model.pairs.size(); ++i) {
        acc += model.pairs[i].pos.psd * norm_sq(s[i].pos.values);
        acc += model.pairs[i].neg.psd * norm_sq(s[i].neg.values);
    }
    return acc * model.df() / model.T();
}

} // namespace wlmmse
