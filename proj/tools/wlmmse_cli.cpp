// Batch front end: optimize / sweep / simulate / check on scenario JSON files.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wlmmse/wlmmse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wlmmse;

namespace {

struct CommonFlags {
    std::string scenario;
    std::string out_dir = ".";
    int grid_n = 0;
    double tol_power = OuterOptions{}.tol_power;
    double tol_kkt = SolveOptions{}.tol_kkt;
    std::uint64_t seed = 1;
    bool matrix_mse = false;
    bool simulate = false;
    std::size_t symbols = SimConfig{}.num_symbols;
    int span = SimConfig{}.filter_span;
    std::size_t dense = 4096;
};

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SolveOptions solve_options(const CommonFlags& f) {
    SolveOptions opt;
    opt.outer.tol_power = f.tol_power;
    opt.tol_kkt = f.tol_kkt;
    opt.matrix_cross_check = f.matrix_mse;
    return opt;
}

SimConfig sim_config(const CommonFlags& f) {
    SimConfig cfg;
    cfg.seed = f.seed;
    cfg.num_symbols = f.symbols;
    cfg.filter_span = f.span;
    return cfg;
}

/// Scenario JSON with command-line overrides applied; the hash covers the result.
struct LoadedScenario {
    json doc;
    Scenario sc;
    fs::path base_dir;
};

LoadedScenario load(const CommonFlags& f) {
    LoadedScenario ls;
    const fs::path path(f.scenario);
    ls.doc = read_json_file(path);
    if (f.grid_n > 0) {
        if (!ls.doc.is_object() || !ls.doc.contains("grid") || !ls.doc["grid"].is_object())
            throw InvalidSpec("missing field 'grid'");
        ls.doc["grid"]["N"] = f.grid_n;
    }
    ls.base_dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    ls.sc = parse_scenario(ls.doc, ls.base_dir);
    return ls;
}

class Writer {
public:
    explicit Writer(const fs::path& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw InvalidSpec("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    void write(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw InvalidSpec("cannot write '" + p.string() + "'");
        out << text;
        outputs_.push_back(p.string());
    }

    const std::vector<std::string>& outputs() const { return outputs_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> outputs_;
};

void write_manifest(Writer& w, const std::string& sub, const CommonFlags& f, const json* doc, const Scenario* sc,
                    double seconds) {
    json m;
    m["subcommand"] = sub;
    m["version"] = version;
    if (doc) m["scenario_hash"] = hex64(scenario_hash(*doc));
    if (!f.scenario.empty()) m["scenario"] = f.scenario;
    if (sc)
        m["grid"] = {{"B_times_T", sc->grid.bandwidth * sc->grid.symbol_period},
                     {"T", sc->grid.symbol_period},
                     {"N", sc->grid.bins}};
    m["tolerances"] = {{"tol_power", f.tol_power}, {"tol_kkt", f.tol_kkt}};
    m["seed"] = f.seed;
    std::vector<std::string> outs = w.outputs();
    outs.push_back((w.dir() / "manifest.json").string());
    m["outputs"] = outs;
    m["wall_clock_s"] = seconds;
    w.write("manifest.json", m.dump(2) + "\n");
}

json kkt_json(const KktState& k) {
    return {{"stationarity", k.stationarity},
            {"dual_feasibility", k.dual_feasibility},
            {"complementary_slackness", k.complementary_slackness},
            {"power_residual", k.power_residual},
            {"bisection_steps", k.bisection_steps},
            {"max_pair_iterations", k.max_pair_iterations},
            {"unconverged_pairs", k.unconverged_pairs},
            {"used_golden_section", k.used_golden_section}};
}

Solution solve_checked(const Scenario& sc, const SolveOptions& opt) {
    Solution sol = optimize(sc, opt);
    const SolutionCheck c = verify_solution(sol, opt);
    if (!c.ok()) {
        std::ostringstream os;
        os << "solution failed its checks (kkt " << c.kkt_ok << ", power " << c.power_ok << ", mse gap " << c.mse_gap
           << ", matrix gap " << c.matrix_gap << ")";
        throw InvariantViolation(os.str());
    }
    return sol;
}

std::string spectra_csv(const Scenario& sc, const Solution& sol, std::size_t dense) {
    const LinkModel& model = sol.model;
    const double b = model.grid.B();
    const double t = model.T();
    auto branch = [&](bool conj, double xi) {
        return piecewise_spectrum(model, xi, [&](std::size_t i, Side sd) -> const CVector& {
            return conj ? sol.rx[i].side(sd).w2.values : sol.rx[i].side(sd).w1.values;
        });
    };
    std::string out = "xi_hz,S_sq,W1_sq,W2_sq,interference_psd\n";
    for (std::size_t j = 0; j < dense; ++j) {
        // Cell midpoints avoid landing on bin edges.
        const double xi = -b + (static_cast<double>(j) + 0.5) * 2.0 * b / static_cast<double>(dense);
        out += fmt17(xi) + "," + fmt17(std::norm(waveform_spectrum(model, sol.tx.waveform, xi))) + "," +
               fmt17(std::norm(branch(false, xi))) + "," + fmt17(std::norm(branch(true, xi))) + "," +
               fmt17(noise_psd(sc.noise, xi, t)) + "\n";
    }
    return out;
}

int cmd_optimize(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const LoadedScenario ls = load(f);
    const SolveOptions opt = solve_options(f);
    const Solution sol = solve_checked(ls.sc, opt);
    Writer w(f.out_dir);
    json s;
    s["nu"] = sol.tx.nu;
    s["mse"] = sol.mse.total;
    s["mse_transmitter"] = sol.tx.mse;
    if (sol.mse_matrix) s["mse_matrix"] = sol.mse_matrix->total;
    s["power"] = ls.sc.power.total;
    s["power_residual"] = sol.tx.power_residual;
    s["kkt"] = kkt_json(sol.kkt);
    w.write("solution.json", s.dump(2) + "\n");
    w.write("spectra.csv", spectra_csv(ls.sc, sol, f.dense));
    write_manifest(w, "optimize", f, &ls.doc, &ls.sc,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "mse " << fmt17(sol.mse.total) << "\n";
    return 0;
}

Scenario at_axis(Scenario sc, const std::string& axis, double x) {
    if (axis == "esn0") {
        sc.power.total = sc.noise.n0 * std::pow(10.0, x / 10.0) / sc.grid.symbol_period;
    } else {
        if (!sc.qam) throw InvalidSpec("k sweep needs a QAM source given by var_i / var_q or k");
        if (!(x >= 0.0 && x <= 1.0)) throw InvalidSpec("k sweep value " + fmt17(x) + " outside [0, 1]");
        sc.qam = QamVariances::from_impropriety(x, sc.qam->in_phase + sc.qam->quadrature);
        sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);
    }
    return sc;
}

int cmd_sweep(const CommonFlags& f, const std::string& axis, const std::vector<double>& values) {
    const auto t0 = std::chrono::steady_clock::now();
    if (axis != "esn0" && axis != "k") throw InvalidSpec("sweep axis must be 'esn0' or 'k'");
    if (values.empty()) throw InvalidSpec("sweep needs at least one value");
    const LoadedScenario ls = load(f);
    const SolveOptions opt = solve_options(f);
    const SimConfig cfg = sim_config(f);

    struct Row {
        double mse = 0.0;
        SimReport sim;
    };
    std::vector<std::future<Row>> jobs;
    for (double x : values)
        jobs.push_back(std::async(std::launch::async, [&, x] {
            const Scenario sc = at_axis(ls.sc, axis, x);
            const Solution sol = solve_checked(sc, opt);
            Row r{sol.mse.total, {}};
            if (f.simulate) r.sim = run_link(sc, sol, cfg);
            return r;
        }));
    std::string csv = f.simulate ? "axis_value,analytic_mse,empirical_mse,std_err\n" : "axis_value,analytic_mse\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Row r = jobs[i].get();
        csv += fmt17(values[i]) + "," + fmt17(r.mse);
        if (f.simulate) csv += "," + fmt17(r.sim.empirical_mse) + "," + fmt17(r.sim.std_err);
        csv += "\n";
    }
    Writer w(f.out_dir);
    w.write("mse_curve.csv", csv);
    write_manifest(w, "sweep", f, &ls.doc, &ls.sc,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

int cmd_simulate(const CommonFlags& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const LoadedScenario ls = load(f);
    const SolveOptions opt = solve_options(f);
    const Solution sol = solve_checked(ls.sc, opt);
    const SimReport r = run_link(ls.sc, sol, sim_config(f));
    json s{{"analytic_mse", r.analytic_mse},     {"empirical_mse", r.empirical_mse},
           {"std_err", r.std_err},               {"z_score", (r.empirical_mse - r.analytic_mse) / r.std_err},
           {"power", ls.sc.power.total},         {"empirical_power", r.empirical_power},
           {"num_symbols", r.num_symbols},       {"seed", r.seed}};
    Writer w(f.out_dir);
    w.write("simulation.json", s.dump(2) + "\n");
    write_manifest(w, "simulate", f, &ls.doc, &ls.sc,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << s.dump(2) << "\n";
    return 0;
}

WaveformVft random_waveform(const LinkModel& model, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    WaveformVft w = zero_waveform(model);
    for (auto& p : w)
        for (Vft* v : {&p.pos, &p.neg})
            for (auto& x : v->values) x = cplx(g(rng), g(rng));
    return w;
}

/// Runs the invariant checks on one scenario; a numerical failure is reported, not thrown.
json check_one(const Scenario& sc, const SolveOptions& base, std::mt19937_64& rng) {
    json r;
    bool pass = true;
    try {
        SolveOptions opt = base;
        opt.matrix_cross_check = true;
        const Solution sol = optimize(sc, opt);
        const SolutionCheck c = verify_solution(sol, opt);
        const WaveformVft w = random_waveform(sol.model, rng);
        const double a = mse_matrix(sol.model, w).total;
        const double equiv = std::abs(a - mse_scalar(sol.model, w).total) / (1.0 + a);
        r["mse"] = sol.mse.total;
        r["kkt"] = kkt_json(sol.kkt);
        r["equivalence_residual_optimal"] = c.matrix_gap;
        r["equivalence_residual_random"] = equiv;
        r["transmitter_mse_gap"] = c.mse_gap;
        r["checks"] = {{"kkt", c.kkt_ok},
                       {"power", c.power_ok},
                       {"mse_consistent", c.mse_consistent},
                       {"equivalence", c.matrix_consistent && equiv <= 1e-10}};
        pass = c.ok() && equiv <= 1e-10;
    } catch (const Error& e) {
        r["error"] = e.what();
        pass = false;
    }
    r["pass"] = pass;
    return r;
}

int cmd_check(const CommonFlags& f, const std::vector<std::string>& files, int random_n) {
    const auto t0 = std::chrono::steady_clock::now();
    if (random_n < 0) throw InvalidSpec("--random must be >= 0");
    const SolveOptions opt = solve_options(f);
    std::mt19937_64 rng(f.seed);
    json cases = json::array();
    bool pass = true;
    for (const std::string& file : files) {
        CommonFlags g = f;
        g.scenario = file;
        const LoadedScenario ls = load(g);
        json r = check_one(ls.sc, opt, rng);
        r["scenario"] = file;
        r["scenario_hash"] = hex64(scenario_hash(ls.doc));
        pass = pass && r["pass"].get<bool>();
        cases.push_back(std::move(r));
    }
    for (int i = 0; i < random_n; ++i) {
        const Scenario sc = random_scenario(rng);
        json r = check_one(sc, opt, rng);
        r["scenario"] = "random#" + std::to_string(i);
        pass = pass && r["pass"].get<bool>();
        cases.push_back(std::move(r));
    }
    const json report{{"pass", pass}, {"count", cases.size()}, {"cases", cases}};
    Writer w(f.out_dir);
    w.write("check.json", report.dump(2) + "\n");
    write_manifest(w, "check", f, nullptr, nullptr,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << (pass ? "PASS" : "FAIL") << " " << cases.size() << " case(s)\n";
    return pass ? 0 : 3;
}

int exit_code(ErrorClass c) {
    switch (c) {
    case ErrorClass::input: return 1;
    case ErrorClass::numerical: return 2;
    case ErrorClass::invariant: return 3;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint widely linear transmitter/receiver waveform optimizer"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    CommonFlags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", f.out_dir, "directory for output files")->capture_default_str();
        sub->add_option("--grid-n", f.grid_n, "override grid.N")->check(CLI::PositiveNumber);
        sub->add_option("--tol-power", f.tol_power, "relative power tolerance of the outer solve")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--tol-kkt", f.tol_kkt, "accepted KKT stationarity residual")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_flag("--matrix-mse", f.matrix_mse, "cross-check the MSE with the matrix form");
        sub->add_option("--seed", f.seed, "simulation / random scenario seed")->capture_default_str();
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--symbols", f.symbols, "simulated symbols")->capture_default_str();
        sub->add_option("--span", f.span, "FIR span in symbols")->capture_default_str();
    };

    CLI::App* opt = app.add_subcommand("optimize", "solve one scenario; writes solution.json and spectra.csv");
    opt->add_option("scenario", f.scenario, "scenario JSON")->required();
    opt->add_option("--dense", f.dense, "points on the spectra axis")->check(CLI::PositiveNumber)->capture_default_str();
    add_common(opt);

    std::string axis;
    std::vector<double> values;
    CLI::App* sw = app.add_subcommand("sweep", "MSE versus Es/N0 (dB) or impropriety k; writes mse_curve.csv");
    sw->add_option("scenario", f.scenario, "scenario JSON")->required();
    sw->add_option("--axis", axis, "esn0 or k")->required()->check(CLI::IsMember({"esn0", "k"}));
    sw->add_option("--values", values, "axis values")->required()->delimiter(',');
    sw->add_flag("--simulate", f.simulate, "add Monte Carlo columns");
    add_common(sw);
    add_sim(sw);

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo check of one scenario; writes simulation.json");
    sim->add_option("scenario", f.scenario, "scenario JSON")->required();
    add_common(sim);
    add_sim(sim);

    std::vector<std::string> files;
    int random_n = 0;
    CLI::App* chk = app.add_subcommand("check", "invariant report over scenarios; writes check.json");
    chk->add_option("scenarios", files, "scenario JSON files");
    chk->add_option("--random", random_n, "number of random scenarios")->capture_default_str();
    add_common(chk);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*opt) return cmd_optimize(f);
        if (*sw) return cmd_sweep(f, axis, values);
        if (*sim) return cmd_simulate(f);
        if (*chk) return cmd_check(f, files, random_n);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.error_class());
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
