#pragma once

// Scenario files. Every parse error names the offending field by its JSON path.
//
// {
//   "grid":    {"B_times_T": 0.625, "N": 256, "T": 1.0},
//   "source":  {"var_i": 0.9, "var_q": 0.1}
//            | {"k": 0.8, "power": 1.0}
//            | {"tabulated": {"M": [[nu, M], ...], "Mc": [[nu, re, im], ...]}},
//   "channel": {"type": "flat", "gain": 1.0 | [re, im]}
//            | {"type": "tabulated", "file": "h.csv"}
//            | {"type": "multipath", "taps": [{"delay_T": 0, "gain": [re, im]}, ...]},
//   "noise":   {"N0": 0.1, "interferers": [{"rolloff": 0.25, "EsN0_dB": 10,
//                                           "rate_divisor": 1, "shift_T": 0.0}]},
//   "power":   {"P_T": 1.0} | {"EsN0_dB": 10}
// }
//
// rate_divisor n puts the interferer symbol period at T/n; shift_T moves its
// spectrum by shift_T/T. EsN0_dB under power sets P_T = N0 10^(EsN0/10) / T,
// i.e. the transmitted energy per symbol over N0.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wlmmse/errors.hpp"
#include "wlmmse/scenario.hpp"

namespace wlmmse {

namespace detail {

using json = nlohmann::json;

inline const json& field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) throw InvalidSpec("field '" + path + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw InvalidSpec("missing field '" + path + "." + key + "'");
    return *it;
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw InvalidSpec("field '" + path + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidSpec("field '" + path + "' must be finite");
    return d;
}

inline double number(const json& obj, const std::string& path, const char* key) {
    return number(field(obj, path, key), path + "." + key);
}

inline double number_or(const json& obj, const std::string& path, const char* key, double dflt) {
    return obj.contains(key) ? number(obj, path, key) : dflt;
}

inline cplx complex_value(const json& v, const std::string& path) {
    if (v.is_number()) return number(v, path);
    if (v.is_array() && v.size() == 2) return {number(v[0], path + "[0]"), number(v[1], path + "[1]")};
    throw InvalidSpec("field '" + path + "' must be a number or [re, im]");
}

inline SosSequenceSpec parse_tabulated_source(const json& tab, const std::string& path) {
    auto table = [&](const char* key, std::size_t width) {
        const std::string p = path + "." + key;
        const json& rows = field(tab, path, key);
        if (!rows.is_array() || rows.size() < 2) throw InvalidSpec("field '" + p + "' needs at least two rows");
        std::vector<double> nu;
        CVector val;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::string pr = p + "[" + std::to_string(r) + "]";
            if (!rows[r].is_array() || rows[r].size() != width)
                throw InvalidSpec("field '" + pr + "' must have " + std::to_string(width) + " entries");
            nu.push_back(number(rows[r][0], pr + "[0]"));
            val.emplace_back(number(rows[r][1], pr + "[1]"), width == 3 ? number(rows[r][2], pr + "[2]") : 0.0);
            if (r > 0 && !(nu[r] > nu[r - 1])) throw InvalidSpec("field '" + pr + "' frequencies must increase");
        }
        if (nu.front() > -0.5 || nu.back() < 0.5)
            throw InvalidSpec("field '" + p + "' must cover normalized frequencies [-0.5, 0.5]");
        return CtftFunction::tabulated(std::move(nu), std::move(val));
    };
    const CtftFunction m = table("M", 2);
    const CtftFunction mc = tab.contains("Mc") ? table("Mc", 3) : CtftFunction::flat(0.0, -1.0, 1.0);
    try {
        return SosSequenceSpec([m](double nu) { return m(nu).real(); }, [mc](double nu) { return mc(nu); });
    } catch (const InvalidSpec& e) {
        throw InvalidSpec("field '" + path + "': " + e.what());
    }
}

inline CtftFunction parse_multipath(const json& taps, const std::string& path, double bandwidth) {
    if (!taps.is_array() || taps.empty()) throw InvalidSpec("field '" + path + "' must be a non-empty array");
    std::vector<std::pair<double, cplx>> paths;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        paths.emplace_back(number(taps[i], p, "delay_T"), complex_value(field(taps[i], p, "gain"), p + ".gain"));
    }
    return CtftFunction(
        [paths](double xi) {
            cplx acc{};
            for (const auto& [d, g] : paths) acc += g * std::polar(1.0, -2.0 * std::numbers::pi * xi * d);
            return acc;
        },
        -bandwidth, bandwidth);
}

} // namespace detail

/// Parses a scenario; relative file names resolve against `base_dir`.
inline Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    using detail::field;
    using detail::number;
    using detail::number_or;
    if (!j.is_object()) throw InvalidSpec("scenario must be a JSON object");
    Scenario sc;

    const auto& g = field(j, "scenario", "grid");
    const double t = number_or(g, "grid", "T", 1.0);
    if (!(t > 0.0)) throw InvalidSpec("field 'grid.T' must be positive");
    const double bt = number(g, "grid", "B_times_T");
    if (!(bt >= 0.5)) throw InvalidSpec("field 'grid.B_times_T' must be >= 0.5");
    const double n = number(g, "grid", "N");
    if (!(n >= 2.0) || n != std::floor(n) || n > 1e7) throw InvalidSpec("field 'grid.N' must be an integer >= 2");
    sc.grid = {bt / t, t, static_cast<std::size_t>(n)};
    const double b = sc.grid.bandwidth;

    const auto& src = field(j, "scenario", "source");
    if (src.contains("tabulated")) {
        sc.source = detail::parse_tabulated_source(src["tabulated"], "source.tabulated");
    } else if (src.contains("k")) {
        const double k = number(src, "source", "k");
        if (!(k >= 0.0 && k <= 1.0)) throw InvalidSpec("field 'source.k' must lie in [0, 1]");
        const double p = number_or(src, "source", "power", 1.0);
        if (!(p > 0.0)) throw InvalidSpec("field 'source.power' must be positive");
        sc.qam = QamVariances::from_impropriety(k, p);
    } else if (src.contains("var_i") || src.contains("var_q")) {
        const double vi = number(src, "source", "var_i");
        const double vq = number(src, "source", "var_q");
        if (!(vi >= 0.0)) throw InvalidSpec("field 'source.var_i' must be >= 0");
        if (!(vq >= 0.0)) throw InvalidSpec("field 'source.var_q' must be >= 0");
        if (!(vi + vq > 0.0)) throw InvalidSpec("fields 'source.var_i' + 'source.var_q' must be positive");
        sc.qam = QamVariances{vi, vq};
    } else {
        throw InvalidSpec("field 'source' needs var_i/var_q, k or tabulated");
    }
    if (sc.qam) sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);

    const auto& ch = field(j, "scenario", "channel");
    const auto& type = field(ch, "channel", "type");
    if (!type.is_string()) throw InvalidSpec("field 'channel.type' must be a string");
    const std::string kind = type.get<std::string>();
    if (kind == "flat") {
        const cplx gain = ch.contains("gain") ? detail::complex_value(ch["gain"], "channel.gain") : cplx(1.0);
        sc.channel = ChannelSpec::flat(gain, b);
    } else if (kind == "tabulated") {
        const auto& f = field(ch, "channel", "file");
        if (!f.is_string()) throw InvalidSpec("field 'channel.file' must be a string");
        std::filesystem::path p = f.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        try {
            sc.channel = {CtftFunction::from_csv(p.string())};
        } catch (const Error& e) {
            throw InvalidSpec(std::string("field 'channel.file': ") + e.what());
        }
    } else if (kind == "multipath") {
        sc.channel = {detail::parse_multipath(field(ch, "channel", "taps"), "channel.taps", b)};
    } else {
        throw InvalidSpec("field 'channel.type' must be flat, tabulated or multipath (got '" + kind + "')");
    }

    const auto& nz = field(j, "scenario", "noise");
    sc.noise.n0 = number(nz, "noise", "N0");
    if (!(sc.noise.n0 > 0.0)) throw InvalidSpec("field 'noise.N0' must be positive");
    if (nz.contains("interferers")) {
        const auto& list = nz["interferers"];
        if (!list.is_array()) throw InvalidSpec("field 'noise.interferers' must be an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string p = "noise.interferers[" + std::to_string(i) + "]";
            const double roll = number(list[i], p, "rolloff");
            if (!(roll >= 0.0 && roll <= 1.0)) throw InvalidSpec("field '" + p + ".rolloff' must lie in [0, 1]");
            const double esn0 = number(list[i], p, "EsN0_dB");
            const double rate = number_or(list[i], p, "rate_divisor", 1.0);
            const double shift = number_or(list[i], p, "shift_T", 0.0);
            try {
                sc.noise.interferers.push_back(srrc_interferer(roll, esn0, sc.noise.n0, t, rate, shift / t));
            } catch (const Error& e) {
                throw InvalidSpec("field '" + p + ".rate_divisor': " + e.what());
            }
        }
    }

    const auto& pw = field(j, "scenario", "power");
    if (pw.contains("P_T")) {
        sc.power.total = number(pw, "power", "P_T");
        if (!(sc.power.total > 0.0)) throw InvalidSpec("field 'power.P_T' must be positive");
    } else if (pw.contains("EsN0_dB")) {
        sc.power.total = sc.noise.n0 * std::pow(10.0, number(pw, "power", "EsN0_dB") / 10.0) / t;
    } else {
        throw InvalidSpec("field 'power' needs P_T or EsN0_dB");
    }
    sc.validate();
    return sc;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidSpec("cannot open scenario file '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidSpec("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON text.
inline std::uint64_t scenario_hash(const nlohmann::json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace wlmmse
