#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wlmmse/optimize.hpp"
#include "wlmmse/random_scenario.hpp"
#include "wlmmse/transmitter.hpp"

using namespace wlmmse;

namespace {

Scenario flat_scenario(double k, double n0, double p_t, double gain = 1.0, std::size_t bins = 32) {
    Scenario sc;
    sc.grid = {0.5, 1.0, bins};
    sc.qam = QamVariances::from_impropriety(k, 1.0);
    sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);
    sc.channel = ChannelSpec::flat(gain, 0.5);
    sc.noise.n0 = n0;
    sc.power.total = p_t;
    return sc;
}

Scenario interference_scenario(double k, double esn0_db, std::size_t bins = 64) {
    Scenario sc;
    sc.grid = {0.625, 1.0, bins};
    sc.qam = QamVariances::from_impropriety(k, 1.0);
    sc.source = unbalanced_qam(sc.qam->in_phase, sc.qam->quadrature);
    sc.channel = ChannelSpec::flat(1.0, 0.625);
    sc.noise.n0 = 0.1;
    sc.noise.interferers.push_back(srrc_interferer(0.25, 10.0, 0.1, 1.0, 1, 0.2));
    sc.noise.interferers.push_back(srrc_interferer(0.25, 10.0, 0.1, 1.0, 1, -0.2));
    sc.power.total = 0.1 * std::pow(10.0, esn0_db / 10.0);
    return sc;
}

PairChannel random_pair(std::mt19937_64& rng, double k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PairChannel pc;
    pc.m = std::exp(4.0 * (u(rng) - 0.5));
    pc.m_hat = std::exp(4.0 * (u(rng) - 0.5));
    pc.lambda = std::exp(8.0 * (u(rng) - 0.5));
    pc.lambda_hat = std::exp(8.0 * (u(rng) - 0.5));
    pc.k = k;
    return pc;
}

} // namespace

TEST(BinChannelData, WhiteNoiseFlatChannel) {
    const Scenario sc = flat_scenario(0.0, 0.25, 1.0);
    const LinkModel model = build_link_model(sc);
    for (const PairChannel& pc : bin_channel_data(model)) {
        EXPECT_NEAR(pc.lambda, 4.0, 1e-12);
        EXPECT_NEAR(pc.lambda_hat, 4.0, 1e-12);
        EXPECT_NEAR(pc.m, 1.0, 1e-15);
        ASSERT_EQ(pc.v.size(), 1u);
        EXPECT_EQ(pc.v[0], cplx(1.0));
    }
}

TEST(BinChannelData, ScalarWithInterference) {
    Scenario sc = flat_scenario(0.0, 0.2, 1.0, cplx(0.6, 0.8).real());
    sc.channel = ChannelSpec::flat(cplx(0.6, 0.8), 0.5);
    sc.noise.interferers.push_back(srrc_interferer(0.5, 5.0, 0.2, 1.0));
    const LinkModel model = build_link_model(sc);
    const BinChannelData data = bin_channel_data(model);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double rn = noise_psd(sc.noise, model.pairs[i].xi, 1.0);
        EXPECT_NEAR(data[i].lambda, 1.0 / rn, 1e-12);
    }
}

// Two shifts, white noise plus one rank-one interferer: the top eigenvalue
// of H^H (N0 I + g g^H)^{-1} H from Sherman-Morrison and the 2x2 closed form.
TEST(BinChannelData, RankOneInterferenceShermanMorrison) {
    Scenario sc;
    sc.grid = {0.8, 1.0, 16};
    sc.channel = {CtftFunction([](double xi) { return cplx(1.0 + 0.3 * xi, 0.5 * xi); }, -0.8, 0.8)};
    sc.noise.n0 = 0.3;
    sc.noise.interferers.push_back(srrc_interferer(0.7, 8.0, 0.3, 1.0, 1, 0.05));
    const LinkModel model = build_link_model(sc);
    const BinChannelData data = bin_channel_data(model);
    const InterfererSpec& itf = sc.noise.interferers[0];
    for (std::size_t i = 0; i < data.size(); ++i) {
        const SideModel& sm = model.pairs[i].pos;
        if (sm.layout.length() != 2) continue;
        const auto freqs = model.grid.shift_frequencies(sm.layout);
        const double n0 = sc.noise.n0;
        const double lvl = itf.symbol_energy / sc.grid.symbol_period;
        const cplx g0 = std::sqrt(lvl) * itf.pulse(freqs[0]);
        const cplx g1 = std::sqrt(lvl) * itf.pulse(freqs[1]);
        const double gg = std::norm(g0) + std::norm(g1);
        // R^{-1} = (I - g g^H / (n0 + g^H g)) / n0
        auto rinv = [&](int r, int c) {
            const cplx gr = r == 0 ? g0 : g1;
            const cplx gc = c == 0 ? g0 : g1;
            return ((r == c ? 1.0 : 0.0) - gr * std::conj(gc) / (n0 + gg)) / n0;
        };
        const cplx h0 = sm.channel[0], h1 = sm.channel[1];
        const cplx a00 = std::conj(h0) * rinv(0, 0) * h0;
        const cplx a01 = std::conj(h0) * rinv(0, 1) * h1;
        const cplx a11 = std::conj(h1) * rinv(1, 1) * h1;
        const double tr = (a00 + a11).real();
        const double top = 0.5 * tr + std::sqrt(0.25 * std::pow((a00 - a11).real(), 2) + std::norm(a01));
        EXPECT_NEAR(data[i].lambda, top, 1e-10 * top);
    }
}

TEST(SolvePair, ZeroAboveNuMax) {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 200; ++rep) {
        const PairChannel pc = random_pair(rng, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
        const double nu0 = std::max(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        const PairAllocation pa = solve_pair(pc, nu0 * 1.0001);
        EXPECT_EQ(pa.a, 0.0);
        EXPECT_EQ(pa.a_hat, 0.0);
    }
}

TEST(SolvePair, ProperDecouplesToWaterFilling) {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 500; ++rep) {
        const PairChannel pc = random_pair(rng, 0.0);
        const double nu = 0.3 * std::min(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        const PairAllocation pa = solve_pair(pc, nu);
        const double a = std::max(0.0, std::sqrt(pc.m / (pc.lambda * nu)) - 1.0 / pc.lambda) / pc.m;
        const double ah = std::max(0.0, std::sqrt(pc.m_hat / (pc.lambda_hat * nu)) - 1.0 / pc.lambda_hat) / pc.m_hat;
        EXPECT_NEAR(pa.a, a, 1e-12 * (1.0 + a));
        EXPECT_NEAR(pa.a_hat, ah, 1e-12 * (1.0 + ah));
    }
}

TEST(SolvePair, AlternatingIteratesAreMonotone) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 0.99);
    for (int rep = 0; rep < 200; ++rep) {
        const PairChannel pc = random_pair(rng, u(rng));
        const double nu = 0.1 * std::max(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        double a_hat = 0.0, prev_a = std::numeric_limits<double>::infinity(), prev_ah = -1.0;
        for (int it = 0; it < 50; ++it) {
            const double a = update_pos(pc, nu, a_hat);
            a_hat = update_neg(pc, nu, a);
            EXPECT_LE(a, prev_a * (1.0 + 1e-14) + 1e-300);
            EXPECT_GE(a_hat, prev_ah * (1.0 - 1e-14));
            prev_a = a;
            prev_ah = a_hat;
        }
        // Bounded by the single-step values.
        EXPECT_LE(prev_a, update_pos(pc, nu, 0.0) * (1.0 + 1e-14));
        EXPECT_LE(prev_ah, update_neg(pc, nu, 0.0) * (1.0 + 1e-14));
    }
}

TEST(SolvePair, FixedPointIsStationary) {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 2000; ++rep) {
        const double k = rep % 10 == 0 ? 0.999999 : u(rng);
        const PairChannel pc = random_pair(rng, k);
        const double nu = std::pow(10.0, -3.0 * u(rng)) * std::max(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        const PairAllocation pa = solve_pair(pc, nu);
        ASSERT_TRUE(pa.converged);
        EXPECT_LE(pa.iterations, 200);
        if (pa.a > 0.0) EXPECT_NEAR(pair_nu(pc, pa.a, pa.a_hat), nu, 1e-9 * nu);
        else EXPECT_LE(pair_nu(pc, pa.a, pa.a_hat), nu * (1.0 + 1e-9));
        if (pa.a_hat > 0.0) EXPECT_NEAR(pair_nu_hat(pc, pa.a, pa.a_hat), nu, 1e-9 * nu);
        else EXPECT_LE(pair_nu_hat(pc, pa.a, pa.a_hat), nu * (1.0 + 1e-9));
    }
}

TEST(SolvePair, FullImproprietyEqualGainsSegment) {
    std::mt19937_64 rng(45);
    for (int rep = 0; rep < 200; ++rep) {
        PairChannel pc = random_pair(rng, 1.0);
        pc.lambda_hat = pc.lambda;
        const double nu = 0.2 * pair_nu(pc, 0, 0);
        const PairAllocation pa = solve_pair(pc, nu);
        const double rhs = std::max(0.0, std::sqrt((pc.m + pc.m_hat) / (pc.lambda * nu)) - 1.0 / pc.lambda);
        EXPECT_NEAR(pc.m * pa.a + pc.m_hat * pa.a_hat, rhs, 1e-10 * (1.0 + rhs));
        EXPECT_EQ(pa.a_hat, 0.0); // deterministic tie-break onto +xi
    }
}

TEST(SolvePair, FullImproprietyUnequalGainsUsesStrongerSide) {
    std::mt19937_64 rng(46);
    for (int rep = 0; rep < 200; ++rep) {
        const PairChannel pc = random_pair(rng, 1.0);
        const double nu = 0.2 * std::max(pair_nu(pc, 0, 0), pair_nu_hat(pc, 0, 0));
        const PairAllocation pa = solve_pair(pc, nu);
        const double lam = std::max(pc.lambda, pc.lambda_hat);
        const double rhs = std::max(0.0, std::sqrt((pc.m + pc.m_hat) / (lam * nu)) - 1.0 / lam);
        EXPECT_NEAR(pc.m * pa.a + pc.m_hat * pa.a_hat, rhs, 1e-10 * (1.0 + rhs));
        if (pc.lambda > pc.lambda_hat) EXPECT_EQ(pa.a_hat, 0.0);
        else EXPECT_EQ(pa.a, 0.0);
    }
}

TEST(NuMax, DominatesFeasibleDensities) {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const Scenario sc = random_scenario(rng);
        const BinChannelData data = bin_channel_data(build_link_model(sc));
        const double top = nu_max(data);
        for (const PairChannel& pc : data) {
            for (int s = 0; s < 20; ++s) {
                const double a = 10.0 * u(rng), ah = 10.0 * u(rng);
                if (pc.live()) {
                    EXPECT_LE(pair_nu(pc, a, ah), top * (1.0 + 1e-12));
                }
                if (pc.live_hat()) {
                    EXPECT_LE(pair_nu_hat(pc, a, ah), top * (1.0 + 1e-12));
                }
            }
        }
    }
}

TEST(NuMax, DegenerateWhenNothingCarries) {
    Scenario sc = flat_scenario(0.0, 0.1, 1.0);
    sc.channel = ChannelSpec::flat(0.0, 0.5);
    EXPECT_THROW(nu_max(bin_channel_data(build_link_model(sc))), DegenerateProblem);
    EXPECT_THROW(optimize(sc), DegenerateProblem);
}

TEST(CandidateDensity, PowerNonincreasingInNu) {
    std::mt19937_64 rng(48);
    for (int rep = 0; rep < 5; ++rep) {
        const Scenario sc = random_scenario(rng);
        const LinkModel model = build_link_model(sc);
        const BinChannelData data = bin_channel_data(model);
        const double top = nu_max(data);
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i) {
            const double nu = top * std::pow(10.0, -6.0 + 6.0 * i / 99.0);
            const double p = density_power(data, candidate_density(nu, data).density, model.df());
            EXPECT_LE(p, prev * (1.0 + 1e-12));
            prev = p;
        }
        EXPECT_EQ(prev, 0.0);
    }
}

TEST(OuterSolve, FlatClosedForm) {
    for (double p_t : {0.1, 1.0, 7.0}) {
        const double n0 = 0.2;
        const Scenario sc = flat_scenario(0.0, n0, p_t, 1.0, 16);
        const Solution sol = optimize(sc);
        const double lambda = 1.0 / n0;
        EXPECT_NEAR(sol.mse.total, 1.0 / (1.0 + lambda * p_t), 1e-8 / (1.0 + lambda * p_t));
        for (std::size_t i = 0; i < sol.tx.density.a.size(); ++i) {
            EXPECT_NEAR(sol.tx.density.a[i], p_t, 1e-9 * p_t);
            EXPECT_NEAR(sol.tx.density.a_hat[i], p_t, 1e-9 * p_t);
        }
    }
}

TEST(OuterSolve, ProperMatchesWaterFillingOracle) {
    std::mt19937_64 rng(49);
    for (int rep = 0; rep < 10; ++rep) {
        Scenario sc = random_scenario(rng);
        sc.qam = QamVariances{0.5, 0.5};
        sc.source = unbalanced_qam(0.5, 0.5);
        const LinkModel model = build_link_model(sc);
        const BinChannelData data = bin_channel_data(model);
        const OuterSolution out = outer_solve(data, sc.power.total, model.grid);
        std::vector<double> m, lam;
        for (const PairChannel& pc : data) {
            m.push_back(pc.m);
            lam.push_back(pc.lambda);
            m.push_back(pc.m_hat);
            lam.push_back(pc.lambda_hat);
        }
        const auto u = oracle::water_fill(m, lam, sc.power.total / model.df());
        for (std::size_t i = 0; i < data.size(); ++i) {
            EXPECT_NEAR(data[i].m * out.density.a[i], u[2 * i], 1e-8 * (1e-300 + u[2 * i]) + 1e-14);
            EXPECT_NEAR(data[i].m_hat * out.density.a_hat[i], u[2 * i + 1], 1e-8 * u[2 * i + 1] + 1e-14);
        }
    }
}

TEST(OuterSolve, KktCertificateOnRandomScenarios) {
    std::mt19937_64 rng(50);
    for (int rep = 0; rep < 20; ++rep) {
        const Scenario sc = random_scenario(rng);
        const Solution sol = optimize(sc);
        EXPECT_LE(sol.kkt.stationarity, 1e-8);
        EXPECT_GE(sol.kkt.dual_feasibility, -1e-12);
        EXPECT_LE(sol.kkt.complementary_slackness, 1e-10);
        EXPECT_LE(sol.kkt.power_residual, 1e-9);
        EXPECT_EQ(sol.kkt.unconverged_pairs, 0u);
        EXPECT_TRUE(verify_solution(sol).ok());
    }
}

TEST(OuterSolve, MatchesExhaustiveGridOnTinyInstances) {
    std::mt19937_64 rng(51);
    RandomScenarioOptions opt;
    opt.min_bins = 2;
    opt.max_bins = 3;
    for (int rep = 0; rep < 3; ++rep) {
        const Scenario sc = random_scenario(rng, opt);
        const Solution sol = optimize(sc);
        const auto grid = oracle::exhaustive_grid(sol.data, sc.power.total, sol.model.df(), sol.model.T(), 400);
        const double slack = 2.0 * static_cast<double>(sol.data.size()) * nu_max(sol.data) * grid.step *
                             sol.model.T() * sol.model.T() * sol.model.df();
        EXPECT_LE(sol.tx.mse, grid.mse + 1e-12);
        EXPECT_LE(grid.mse - sol.tx.mse, slack);
    }
}

TEST(OuterSolve, MseNonincreasingInPower) {
    std::mt19937_64 rng(52);
    const Scenario base = random_scenario(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0}) {
        Scenario sc = base;
        sc.power.total = base.power.total * scale;
        const double mse = optimize(sc).mse.total;
        EXPECT_LE(mse, prev);
        prev = mse;
    }
}

TEST(OuterSolve, MseNonincreasingInImpropriety) {
    for (double esn0 : {0.0, 10.0}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double k : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double mse = optimize(interference_scenario(k, esn0, 32)).mse.total;
            EXPECT_LE(mse, prev * (1.0 + 1e-12));
            prev = mse;
        }
    }
}

TEST(OuterSolve, TinyPowerApproachesSourcePower) {
    const Solution sol = optimize(flat_scenario(0.5, 0.1, 1e-9));
    EXPECT_NEAR(sol.mse.total, 1.0, 1e-6);
}

TEST(AssembleTx, ConsistentWithDensity) {
    std::mt19937_64 rng(53);
    for (int rep = 0; rep < 10; ++rep) {
        const Scenario sc = random_scenario(rng);
        const Solution sol = optimize(sc);
        EXPECT_LE(sol.tx.power_residual, 1e-9);
        const auto c_density = density_to_c(sol.data, sol.tx.density);
        const auto c_wave = signal_to_noise_density(sol.model, sol.tx.waveform);
        for (std::size_t i = 0; i < c_wave.size(); ++i) {
            EXPECT_NEAR(c_density[i].pos, c_wave[i].pos, 1e-10 * (1.0 + c_wave[i].pos));
            EXPECT_NEAR(c_density[i].neg, c_wave[i].neg, 1e-10 * (1.0 + c_wave[i].neg));
        }
        EXPECT_NEAR(sol.tx.mse, mse_scalar(sol.model, c_density).total, 1e-12);
    }
}

TEST(AssembleTx, ZeroDensityGivesZeroWaveform) {
    const Scenario sc = flat_scenario(0.3, 0.1, 1.0);
    const LinkModel model = build_link_model(sc);
    const BinChannelData data = bin_channel_data(model);
    EnergyDensity d{std::vector<double>(data.size()), std::vector<double>(data.size())};
    const TxSolution tx = assemble_tx(d, data, model, 1.0, 1.0);
    for (const auto& p : tx.waveform) EXPECT_EQ(norm_sq(p.pos.values) + norm_sq(p.neg.values), 0.0);
    EXPECT_NEAR(tx.mse, 1.0, 1e-14);
}

TEST(AssembleTx, FlatScalarSpectrumEqualsDensity) {
    const Solution sol = optimize(flat_scenario(0.6, 0.1, 2.0, 1.0, 8));
    for (std::size_t i = 0; i < sol.tx.waveform.size(); ++i)
        EXPECT_NEAR(std::norm(sol.tx.waveform[i].pos.values[0]), sol.tx.density.a[i], 1e-12);
}
