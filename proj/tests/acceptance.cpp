// Acceptance run: one PASS/FAIL line per criterion with the measured figure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wlmmse/wlmmse.hpp"

using namespace wlmmse;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

WaveformVft random_waveform(const LinkModel& model, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    WaveformVft w = zero_waveform(model);
    for (auto& p : w)
        for (Vft* v : {&p.pos, &p.neg})
            for (auto& x : v->values) x = cplx(g(rng), g(rng));
    return w;
}

Scenario qam_scenario(double bt, std::size_t bins, double k, double n0, double esn0_db) {
    Scenario sc;
    sc.grid = {bt, 1.0, bins};
    sc.qam = QamVariances::from_impropriety(k, 1.0);
    sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);
    sc.channel = ChannelSpec::flat(1.0, bt);
    sc.noise.n0 = n0;
    sc.power.total = n0 * std::pow(10.0, esn0_db / 10.0);
    return sc;
}

/// SRRC 0.25 source band, two 10 dB SRRC interferers offset by +-0.2/T.
Scenario two_interferers(double k, double esn0_db, std::size_t bins = 256) {
    Scenario sc = qam_scenario(0.625, bins, k, 0.1, esn0_db);
    for (double shift : {0.2, -0.2}) sc.noise.interferers.push_back(srrc_interferer(0.25, 10.0, 0.1, 1.0, 1, shift));
    return sc;
}

// 1. Matrix and scalar MSE forms agree.
Outcome mse_equivalence() {
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Scenario sc = random_scenario(rng);
        const LinkModel model = build_link_model(sc);
        const Solution sol = optimize(sc);
        for (const WaveformVft& w : {sol.tx.waveform, random_waveform(model, rng)}) {
            const double a = mse_matrix(model, w).total;
            worst = std::max(worst, std::abs(a - mse_scalar(model, w).total) / (1.0 + a));
        }
    }
    return {worst <= 1e-10, fmt("max |matrix - scalar|/(1 + matrix) = %.3g over 100 scenarios", worst)};
}

// 2. No perturbation of the joint receiver improves on it.
Outcome receiver_optimality() {
    std::mt19937_64 rng(1002);
    std::normal_distribution<double> g;
    double worst = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 20; ++rep) {
        const Scenario sc = random_scenario(rng);
        const Solution sol = optimize(sc);
        const double base = receiver_objective(sol.model, sol.tx.waveform, sol.rx);
        double norm = 0.0;
        for (const auto& p : sol.rx)
            for (const ReceiverBin* rb : {&p.pos, &p.neg}) norm += norm_sq(join_receiver(*rb));
        norm = std::sqrt(norm);
        for (int k = 0; k < 200; ++k) {
            ReceiverSolution pert = sol.rx;
            double dn = 0.0;
            std::vector<cplx*> slots;
            for (auto& p : pert)
                for (ReceiverBin* rb : {&p.pos, &p.neg})
                    for (Vft* v : {&rb->w1, &rb->w2})
                        for (auto& x : v->values) slots.push_back(&x);
            std::vector<cplx> d(slots.size());
            for (auto& x : d) {
                x = cplx(g(rng), g(rng));
                dn += std::norm(x);
            }
            const double scale = 1e-3 * norm / std::sqrt(dn);
            for (std::size_t j = 0; j < slots.size(); ++j) *slots[j] += scale * d[j];
            worst = std::min(worst, receiver_objective(sol.model, sol.tx.waveform, pert) - base);
        }
    }
    return {worst >= -1e-12, fmt("min objective increase = %.3g over 20 x 200 perturbations", worst)};
}

// 3. Proper sources: no conjugate branch, and water-filling per sign.
Outcome proper_degeneration() {
    std::mt19937_64 rng(1003);
    double w2 = 0.0, wf = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Scenario sc = random_scenario(rng);
        if (rep % 2 == 0) {
            sc.qam = QamVariances{0.5, 0.5};
            sc.source = unbalanced_qam(0.5, 0.5);
        } else {
            // Shaped proper source: keep M, drop Mc.
            const SosSequenceSpec src = sc.source;
            sc.qam.reset();
            sc.source = SosSequenceSpec([src](double nu) { return src.psd(nu); }, [](double) { return cplx{}; });
        }
        const Solution sol = optimize(sc);
        for (const auto& p : sol.rx)
            for (const ReceiverBin* rb : {&p.pos, &p.neg})
                for (const cplx& x : rb->w2.values) w2 = std::max(w2, std::abs(x));
        std::vector<double> m, lam;
        for (const PairChannel& pc : sol.data) {
            m.insert(m.end(), {pc.m, pc.m_hat});
            lam.insert(lam.end(), {pc.lambda, pc.lambda_hat});
        }
        const auto u = oracle::water_fill(m, lam, sc.power.total / sol.model.df());
        double umax = 0.0;
        for (double v : u) umax = std::max(umax, v);
        for (std::size_t i = 0; i < sol.data.size(); ++i) {
            wf = std::max(wf, std::abs(sol.data[i].m * sol.tx.density.a[i] - u[2 * i]) / umax);
            wf = std::max(wf, std::abs(sol.data[i].m_hat * sol.tx.density.a_hat[i] - u[2 * i + 1]) / umax);
        }
    }
    return {w2 <= 1e-12 && wf <= 1e-8,
            fmt("max |w2| = %.3g, max water-filling deviation / max allocation = %.3g", w2, wf)};
}

// 4. Flat link: closed-form MSE, flat density.
Outcome flat_closed_form() {
    double mse_err = 0.0, flat_err = 0.0;
    for (double n0 : {0.05, 0.2, 1.0})
        for (double p_t : {0.1, 1.0, 10.0})
            for (std::size_t bins : {8u, 64u}) {
                Scenario sc = qam_scenario(0.5, bins, 0.0, n0, 0.0);
                sc.power.total = p_t;
                const Solution sol = optimize(sc);
                const double lambda = 1.0 / n0; // |H|^2 / N0
                const double exact = 1.0 / (1.0 + lambda * p_t * sc.grid.symbol_period);
                mse_err = std::max(mse_err, std::abs(sol.mse.total - exact) / exact);
                const double a0 = sol.tx.density.a[0];
                for (std::size_t i = 0; i < bins; ++i)
                    flat_err = std::max({flat_err, std::abs(sol.tx.density.a[i] - a0) / a0,
                                         std::abs(sol.tx.density.a_hat[i] - a0) / a0});
            }
    return {mse_err <= 1e-8 && flat_err <= 1e-9,
            fmt("max relative MSE error = %.3g, max density spread = %.3g", mse_err, flat_err)};
}

// 5. KKT certificate on random scenarios.
Outcome kkt() {
    std::mt19937_64 rng(1005);
    double st = 0.0, dual = std::numeric_limits<double>::infinity(), cs = 0.0, pw = 0.0;
    std::size_t unconverged = 0;
    for (int rep = 0; rep < 30; ++rep) {
        const Solution sol = optimize(random_scenario(rng));
        st = std::max(st, sol.kkt.stationarity);
        dual = std::min(dual, sol.kkt.dual_feasibility);
        cs = std::max(cs, sol.kkt.complementary_slackness);
        pw = std::max(pw, sol.kkt.power_residual);
        unconverged += sol.kkt.unconverged_pairs;
    }
    const bool ok = st <= 1e-8 && dual >= -1e-12 && cs <= 1e-10 && pw <= 1e-9 && unconverged == 0;
    char buf[256];
    std::snprintf(buf, sizeof buf, "stationarity %.3g, dual %.3g, slackness %.3g, power %.3g, unconverged %zu", st,
                  dual, cs, pw, unconverged);
    return {ok, buf};
}

// 6. Tiny instances against exhaustive search.
Outcome small_instances() {
    std::mt19937_64 rng(1006);
    RandomScenarioOptions opt;
    opt.min_bins = 2;
    opt.max_bins = 3;
    double below = 0.0, gap = 0.0, worst_ratio = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const Scenario sc = random_scenario(rng, opt);
        const Solution sol = optimize(sc);
        const auto grid = oracle::exhaustive_grid(sol.data, sc.power.total, sol.model.df(), sol.model.T(), 1000);
        // Moving one lattice step changes the objective by at most nu_max * step per coordinate.
        const double slack = 2.0 * static_cast<double>(sol.data.size()) * nu_max(sol.data) * grid.step *
                             sol.model.T() * sol.model.T() * sol.model.df();
        below = std::max(below, sol.tx.mse - grid.mse);
        gap = std::max(gap, grid.mse - sol.tx.mse);
        worst_ratio = std::max(worst_ratio, (grid.mse - sol.tx.mse) / slack);
    }
    return {below <= 1e-12 && worst_ratio <= 1.0,
            fmt("optimizer - grid <= %.3g; grid - optimizer <= %.3g (%.3g of lattice resolution)", below, gap,
                worst_ratio)};
}

// 7. MSE nonincreasing in impropriety.
Outcome impropriety_monotone() {
    double worst_rise = -std::numeric_limits<double>::infinity(), drop5 = 0.0;
    for (double esn0 : {0.0, 5.0, 10.0, 15.0}) {
        double prev = std::numeric_limits<double>::infinity(), first = 0.0, last = 0.0;
        for (int j = 0; j <= 5; ++j) {
            const double mse = optimize(two_interferers(0.2 * j, esn0)).mse.total;
            if (j == 0) first = mse;
            last = mse;
            worst_rise = std::max(worst_rise, mse - prev);
            prev = mse;
        }
        if (esn0 == 5.0) drop5 = (first - last) / first;
    }
    return {worst_rise <= 0.0 && drop5 >= 1e-3,
            fmt("largest step change %.3g; total decrease at 5 dB = %.3g%%", worst_rise, 100.0 * drop5)};
}

// 8. Monte Carlo agreement.
Outcome monte_carlo() {
    std::vector<std::pair<std::string, Scenario>> cases;
    cases.emplace_back("two interferers k=0 5 dB", two_interferers(0.0, 5.0));
    cases.emplace_back("two interferers k=0.8 5 dB", two_interferers(0.8, 5.0));
    cases.emplace_back("two interferers k=1 10 dB", two_interferers(1.0, 10.0));
    cases.emplace_back("flat k=0.6 10 dB", qam_scenario(0.5, 32, 0.6, 0.1, 10.0));
    {
        Scenario sc = qam_scenario(0.55, 128, 0.6, 0.05, 7.0);
        sc.grid.bandwidth = 1.1;
        sc.channel = ChannelSpec{CtftFunction(
            [](double xi) { return 1.0 + cplx(0.3, -0.2) * std::polar(1.0, -2.0 * std::numbers::pi * xi * 0.7); },
            -1.1, 1.1)};
        sc.noise.interferers.push_back(srrc_interferer(0.5, 6.0, 0.05, 1.0, 2, 0.1));
        cases.emplace_back("multipath k=0.6 rate-2 interferer", sc);
    }
    {
        std::mt19937_64 rng(1008);
        RandomScenarioOptions opt;
        opt.qam_only = true;
        cases.emplace_back("random QAM scenario", random_scenario(rng, opt));
    }
    bool ok = true;
    std::string detail;
    std::uint64_t seed = 81;
    for (const auto& [name, sc] : cases) {
        const Solution sol = optimize(sc);
        SimConfig cfg;
        cfg.seed = seed++;
        const SimReport r = run_link(sc, sol, cfg);
        const double z = (r.empirical_mse - r.analytic_mse) / r.std_err;
        const double perr = std::abs(r.empirical_power - sc.power.total) / sc.power.total;
        ok = ok && std::abs(z) <= 3.0 && perr <= 0.02;
        detail += fmt(" [z %.2f, power %.2g%%]", z, 100.0 * perr);
    }
    return {ok, "6 cases at 1e5 symbols:" + detail};
}

// 9. Per-pair alternating updates.
Outcome pair_convergence() {
    std::mt19937_64 rng(1009);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](double k) {
        PairChannel pc;
        pc.m = std::exp(6.0 * (u(rng) - 0.5));
        pc.m_hat = std::exp(6.0 * (u(rng) - 0.5));
        pc.lambda = std::exp(10.0 * (u(rng) - 0.5));
        pc.lambda_hat = std::exp(10.0 * (u(rng) - 0.5));
        pc.k = k;
        return pc;
    };
    int worst_it = 0;
    double worst_fix = 0.0;
    std::size_t failures = 0;
    for (int rep = 0; rep < 10000; ++rep) {
        // Include k within 1e-6 of one, where the plain sweeps crawl.
        const double k = rep % 20 == 0 ? 1.0 - 1e-6 * u(rng) : u(rng) * (1.0 - 1e-12);
        const PairChannel pc = draw(k);
        const double top = std::max(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        const double nu = top * std::pow(10.0, -4.0 * u(rng) + 0.2);
        try {
            const PairAllocation pa = solve_pair(pc, nu);
            if (!pa.converged || pa.iterations > 200) ++failures;
            worst_it = std::max(worst_it, pa.iterations);
            // Independent fixed-point check: one more sweep moves nothing beyond tolerance.
            const double a1 = update_pos(pc, nu, pa.a_hat);
            const double ah1 = update_neg(pc, nu, pa.a);
            worst_fix = std::max({worst_fix, std::abs(a1 - pa.a) / (1.0 + std::abs(pa.a)),
                                  std::abs(ah1 - pa.a_hat) / (1.0 + std::abs(pa.a_hat))});
        } catch (const NoConvergence&) {
            ++failures;
        }
    }
    double seg = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        PairChannel pc = draw(1.0);
        pc.lambda_hat = pc.lambda;
        const double nu = pair_nu(pc, 0, 0) * std::pow(10.0, -4.0 * u(rng) + 0.2);
        const PairAllocation pa = solve_pair(pc, nu);
        const double rhs = std::max(0.0, std::sqrt((pc.m + pc.m_hat) / (pc.lambda * nu)) - 1.0 / pc.lambda);
        seg = std::max(seg, std::abs(pc.m * pa.a + pc.m_hat * pa.a_hat - rhs) / (1.0 + rhs));
    }
    const bool ok = failures == 0 && worst_fix <= 1e-12 && seg <= 1e-10;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "1e4 draws: %zu failures, max iterations %d, max fixed-point residual %.3g; k=1 segment residual "
                  "%.3g",
                  failures, worst_it, worst_fix, seg);
    return {ok, buf};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"matrix/scalar MSE equivalence", mse_equivalence},
        {"receiver optimality under perturbation", receiver_optimality},
        {"proper-source degeneration", proper_degeneration},
        {"flat closed form", flat_closed_form},
        {"KKT certificate", kkt},
        {"small-instance global optimality", small_instances},
        {"impropriety monotonicity", impropriety_monotone},
        {"Monte Carlo agreement", monte_carlo},
        {"alternating-update convergence", pair_convergence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), s);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
