#pragma once

// Transmit waveform optimization. For a fixed energy density the best VFT at
// each frequency is the top eigenvector of H^H R_N^{-1} H; the density itself
// solves a strictly convex allocation problem over +xi / -xi bin pairs, found
// by a line search on the power multiplier nu with per-pair KKT updates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "wlmmse/errors.hpp"
#include "wlmmse/link_model.hpp"
#include "wlmmse/numerics.hpp"
#include "wlmmse/receiver.hpp"

namespace wlmmse {

/// Channel quality and source statistics of one +xi / -xi pair.
/// Fields ending in _hat refer to -xi.
struct PairChannel {
    double lambda = 0.0;
    double lambda_hat = 0.0;
    CVector v;
    CVector v_hat;
    double m = 0.0;     ///< M(xi T) / T
    double m_hat = 0.0; ///< M(-xi T) / T
    double k = 0.0;     ///< k(xi T)

    double kbar() const { return 1.0 - k * k; }
    bool live() const { return m > 0.0 && lambda > 0.0; }
    bool live_hat() const { return m_hat > 0.0 && lambda_hat > 0.0; }
};

using BinChannelData = std::vector<PairChannel>;

inline BinChannelData bin_channel_data(const LinkModel& model) {
    BinChannelData data;
    data.reserve(model.pairs.size());
    const double t = model.T();
    for (const PairModel& pm : model.pairs) {
        PairChannel pc;
        auto top = [](const SideModel& sm) {
            const CMatrix h = CMatrix::diagonal(sm.channel);
            const CMatrix a = h.adjoint() * hermitian_solve(sm.noise, h);
            return top_eigenpair(a);
        };
        Eigenpair e = top(pm.pos);
        pc.lambda = e.value;
        pc.v = std::move(e.vector);
        e = top(pm.neg);
        pc.lambda_hat = e.value;
        pc.v_hat = std::move(e.vector);
        pc.m = pm.pos.psd / t;
        pc.m_hat = pm.neg.psd / t;
        pc.k = pm.impropriety;
        data.push_back(std::move(pc));
    }
    return data;
}

/// Energy density a(+xi_i), a(-xi_i) per pair.
struct EnergyDensity {
    std::vector<double> a;
    std::vector<double> a_hat;
};

/// sum_i (m_i a_i + m^_i a^_i) df, i.e. (1/T) int_{F+} M(fT) a(f) + M(-fT) a(-f) df.
inline double density_power(const BinChannelData& data, const EnergyDensity& d, double df) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].m > 0.0) acc += data[i].m * d.a[i];
        if (data[i].m_hat > 0.0) acc += data[i].m_hat * d.a_hat[i];
    }
    return acc * df;
}

/// Per-pair MSE kernel f_i(a, a^); the total MSE is T^2 df sum_i f_i.
inline double pair_objective(const PairChannel& pc, double a, double a_hat) {
    const double x = pc.m * pc.lambda * a;
    const double y = pc.m_hat * pc.lambda_hat * a_hat;
    const double kb = pc.kbar();
    return (pc.m_hat * (1.0 + x * kb) + pc.m * (1.0 + y * kb)) / (1.0 + x + y + x * y * kb);
}

/// Marginal MSE reduction per unit power at +xi: nu_i(a, a^).
inline double pair_nu(const PairChannel& pc, double a, double a_hat) {
    const double x = pc.m * pc.lambda * a;
    const double y = pc.m_hat * pc.lambda_hat * a_hat;
    const double kb = pc.kbar();
    const double g_hat = 1.0 + y * kb;
    const double h = 1.0 + x + y + x * y * kb;
    return pc.lambda * (pc.m_hat * pc.k * pc.k + pc.m * g_hat * g_hat) / (h * h);
}

/// Same at -xi: nu^_i(a, a^).
inline double pair_nu_hat(const PairChannel& pc, double a, double a_hat) {
    const double x = pc.m * pc.lambda * a;
    const double y = pc.m_hat * pc.lambda_hat * a_hat;
    const double kb = pc.kbar();
    const double g = 1.0 + x * kb;
    const double h = 1.0 + x + y + x * y * kb;
    return pc.lambda_hat * (pc.m * pc.k * pc.k + pc.m_hat * g * g) / (h * h);
}

/// a = u1(a^): stationarity at +xi solved for a, clipped at zero.
inline double update_pos(const PairChannel& pc, double nu, double a_hat) {
    if (!pc.live()) return 0.0;
    const double y = pc.m_hat * pc.lambda_hat * a_hat;
    const double g_hat = 1.0 + y * pc.kbar();
    const double root = std::sqrt(pc.lambda * (pc.m_hat * pc.k * pc.k + pc.m * g_hat * g_hat) / nu);
    return std::max(0.0, root - (1.0 + y)) / (pc.lambda * pc.m * g_hat);
}

/// a^ = u2(a)
inline double update_neg(const PairChannel& pc, double nu, double a) {
    if (!pc.live_hat()) return 0.0;
    const double x = pc.m * pc.lambda * a;
    const double g = 1.0 + x * pc.kbar();
    const double root = std::sqrt(pc.lambda_hat * (pc.m * pc.k * pc.k + pc.m_hat * g * g) / nu);
    return std::max(0.0, root - (1.0 + x)) / (pc.lambda_hat * pc.m_hat * g);
}

struct AlternatingOptions {
    double tol = 1e-12;          ///< stop when both iterates move by < tol * (1 + |value|)
    int max_iterations = 200;
    int plain_sweeps = 30;       ///< plain alternating sweeps before switching to the bracketed search
};

struct PairAllocation {
    double a = 0.0;
    double a_hat = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline bool close(double next, double prev, double tol) {
    return std::abs(next - prev) <= tol * (1.0 + std::abs(next));
}

/// k = 1 optimum: only a + a^ matters through the objective, so the whole
/// pair budget goes to the side with the larger eigenvalue (+xi on ties).
inline PairAllocation full_impropriety_allocation(const PairChannel& pc, double nu) {
    PairAllocation out;
    out.converged = true;
    const double msum = pc.m + pc.m_hat;
    const bool use_pos = pc.live() && (!pc.live_hat() || pc.lambda >= pc.lambda_hat);
    if (use_pos) {
        out.a = std::max(0.0, std::sqrt(msum / (pc.lambda * nu)) - 1.0 / pc.lambda) / pc.m;
    } else if (pc.live_hat()) {
        out.a_hat = std::max(0.0, std::sqrt(msum / (pc.lambda_hat * nu)) - 1.0 / pc.lambda_hat) / pc.m_hat;
    }
    return out;
}

} // namespace detail

/// Alternating KKT updates a := u1(a^), a^ := u2(a) from a^ = 0.
///
/// The composed map a^ -> u2(u1(a^)) is increasing, so the plain sequence
/// climbs monotonically to the fixed point; with k close to one it does so
/// slowly. After `plain_sweeps` sweeps the fixed point is bracketed between
/// the current iterate and u2(0) and located with Illinois regula falsi,
/// each evaluation being one more alternating sweep.
inline PairAllocation solve_pair(const PairChannel& pc, double nu, const AlternatingOptions& opt = {}) {
    PairAllocation out;
    if (!pc.live() && !pc.live_hat()) {
        out.converged = true;
        return out;
    }
    if (!pc.live()) {
        out.a_hat = update_neg(pc, nu, 0.0);
        out.converged = true;
        out.iterations = 1;
        return out;
    }
    if (!pc.live_hat()) {
        out.a = update_pos(pc, nu, 0.0);
        out.converged = true;
        out.iterations = 1;
        return out;
    }

    // Segment of optima: take the deterministic +xi end point.
    if (pc.k >= 1.0 && std::abs(pc.lambda - pc.lambda_hat) <= 1e-12 * std::max(pc.lambda, pc.lambda_hat))
        return detail::full_impropriety_allocation(pc, nu);

    double a_hat = 0.0;
    double a = std::numeric_limits<double>::quiet_NaN();
    int it = 0;
    const int plain = std::min(opt.plain_sweeps, opt.max_iterations);
    while (it < plain) {
        ++it;
        const double a_next = update_pos(pc, nu, a_hat);
        const double a_hat_next = update_neg(pc, nu, a_next);
        const bool done = detail::close(a_next, a, opt.tol) && detail::close(a_hat_next, a_hat, opt.tol);
        a = a_next;
        a_hat = a_hat_next;
        if (done) return {a, a_hat, it, true};
    }

    // phi(x) = u2(u1(x)) - x is >= 0 at the current iterate and <= 0 at u2(0).
    auto phi = [&](double x) { return update_neg(pc, nu, update_pos(pc, nu, x)) - x; };
    double lo = a_hat;
    double hi = update_neg(pc, nu, 0.0);
    double f_lo = phi(lo);
    double f_hi = phi(hi);
    it += 2;
    int side = 0;
    while (it < opt.max_iterations) {
        if (f_lo <= 0.0) {
            hi = lo;
            f_hi = f_lo;
        }
        if (f_hi >= 0.0) {
            lo = hi;
            f_lo = f_hi;
        }
        // Bracket well inside tol: the returned a is one u1 step away, and u1 can amplify.
        if (hi - lo <= opt.tol * 1e-3 * (1.0 + std::abs(hi))) break;
        double x = (f_lo - f_hi) > 0.0 ? lo + f_lo * (hi - lo) / (f_lo - f_hi) : 0.5 * (lo + hi);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        if (!(x > lo && x < hi)) break; // adjacent doubles
        const double fx = phi(x);
        ++it;
        if (fx > 0.0) {
            lo = x;
            f_lo = fx;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        } else if (fx < 0.0) {
            hi = x;
            f_hi = fx;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        } else {
            lo = hi = x;
            break;
        }
    }
    a_hat = 0.5 * (lo + hi);
    a = update_pos(pc, nu, a_hat);
    const double a_hat_check = update_neg(pc, nu, a);
    ++it;
    if (detail::close(a_hat_check, a_hat, opt.tol) && detail::close(update_pos(pc, nu, a_hat_check), a, opt.tol))
        return {a, a_hat_check, it, true};

    if (pc.k >= 1.0) {
        PairAllocation fb = detail::full_impropriety_allocation(pc, nu);
        fb.iterations = it;
        return fb;
    }
    throw NoConvergence("alternating updates did not settle within " + std::to_string(opt.max_iterations) +
                        " iterations (k = " + std::to_string(pc.k) + ")");
}

struct CandidateDensity {
    EnergyDensity density;
    int max_iterations = 0;
    std::size_t unconverged = 0;
};

/// Table-1 style candidate density at multiplier nu.
inline CandidateDensity candidate_density(double nu, const BinChannelData& data,
                                          const AlternatingOptions& opt = {}) {
    if (!(nu > 0.0)) throw InvalidSpec("nu must be positive");
    CandidateDensity out;
    out.density.a.resize(data.size());
    out.density.a_hat.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const PairAllocation pa = solve_pair(data[i], nu, opt);
        out.density.a[i] = pa.a;
        out.density.a_hat[i] = pa.a_hat;
        out.max_iterations = std::max(out.max_iterations, pa.iterations);
        if (!pa.converged) ++out.unconverged;
    }
    return out;
}

/// Largest nu_i(0,0) and nu^_i(0,0); only such nu or smaller can carry power.
inline double nu_max(const BinChannelData& data) {
    double v = 0.0;
    for (const PairChannel& pc : data) {
        if (pc.live()) v = std::max(v, pair_nu(pc, 0.0, 0.0));
        if (pc.live_hat()) v = std::max(v, pair_nu_hat(pc, 0.0, 0.0));
    }
    if (!(v > 0.0)) throw DegenerateProblem("no bin can carry signal (nu_max = 0)");
    return v;
}

/// KKT residuals of a density at multiplier nu; all quantities dimensionless.
struct KktState {
    double nu = 0.0;
    std::vector<double> mu;     ///< m_i (nu - nu_i), per +xi bin
    std::vector<double> mu_hat; ///< per -xi bin
    double stationarity = 0.0;  ///< max |nu - nu_i| / nu over bins with a_i > 0
    double dual_feasibility = 0.0;       ///< min (nu - nu_i) / nu over bins with a_i = 0 (>= 0 when feasible)
    double complementary_slackness = 0.0; ///< max |mu_i| a_i / (nu * sum m a)
    double power_residual = 0.0;          ///< |P - P_T| / P_T
    int bisection_steps = 0;
    int max_pair_iterations = 0;
    std::size_t unconverged_pairs = 0;
    std::size_t monotonicity_violations = 0;
    bool used_golden_section = false;
};

inline KktState kkt_certificate(const BinChannelData& data, const EnergyDensity& d, double nu,
                                double target_power, double df) {
    KktState st;
    st.nu = nu;
    st.mu.assign(data.size(), 0.0);
    st.mu_hat.assign(data.size(), 0.0);
    st.dual_feasibility = std::numeric_limits<double>::infinity();
    double weighted = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        weighted += data[i].m * d.a[i] + data[i].m_hat * d.a_hat[i];
    weighted = std::max(weighted, std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const PairChannel& pc = data[i];
        auto visit = [&](double m, double a, double nu_i, double& mu) {
            if (!(m > 0.0)) return; // variable does not enter the problem
            mu = m * (nu - nu_i);
            if (a > 0.0) {
                st.stationarity = std::max(st.stationarity, std::abs(nu - nu_i) / nu);
                st.complementary_slackness =
                    std::max(st.complementary_slackness, std::abs(mu) * a / (nu * weighted));
            } else {
                st.dual_feasibility = std::min(st.dual_feasibility, (nu - nu_i) / nu);
            }
        };
        visit(pc.m, d.a[i], pc.live() ? pair_nu(pc, d.a[i], d.a_hat[i]) : 0.0, st.mu[i]);
        visit(pc.m_hat, d.a_hat[i], pc.live_hat() ? pair_nu_hat(pc, d.a[i], d.a_hat[i]) : 0.0, st.mu_hat[i]);
    }
    if (!std::isfinite(st.dual_feasibility)) st.dual_feasibility = 0.0;
    st.power_residual = std::abs(density_power(data, d, df) - target_power) / target_power;
    return st;
}

struct OuterOptions {
    double tol_power = 1e-11; ///< relative power mismatch accepted by the line search
    double lower_fraction = 1e-12;
    int max_bisection = 200;
    AlternatingOptions pair;
};

struct OuterSolution {
    EnergyDensity density;
    double nu = 0.0;
    KktState kkt;
};

/// Line search on nu in (eps nu_max, nu_max] for the density meeting P_T.
inline OuterSolution outer_solve(const BinChannelData& data, double target_power, const FrequencyGrid& grid,
                                 const OuterOptions& opt = {}) {
    if (!(target_power > 0.0)) throw InvalidSpec("P_T must be positive");
    const double df = grid.df();
    const double top = nu_max(data);

    int steps = 0;
    std::size_t violations = 0;
    int max_pair_it = 0;
    std::size_t unconverged = 0;
    auto power_at = [&](double nu) {
        CandidateDensity c = candidate_density(nu, data, opt.pair);
        max_pair_it = std::max(max_pair_it, c.max_iterations);
        unconverged += c.unconverged;
        return std::make_pair(density_power(data, c.density, df), std::move(c.density));
    };

    double hi = top;
    double lo = top * opt.lower_fraction;
    auto [p_lo, d_lo] = power_at(lo);
    for (int widen = 0; p_lo < target_power; ++widen) {
        if (widen >= 20 || lo < 1e-280)
            throw Infeasible("power " + std::to_string(target_power) + " not reachable for nu > 0");
        lo *= 1e-12;
        std::tie(p_lo, d_lo) = power_at(lo);
    }
    double p_hi = 0.0;

    auto within = [&](double p) { return std::abs(p - target_power) <= opt.tol_power * target_power; };

    OuterSolution best;
    best.nu = lo;
    best.density = d_lo;
    double best_err = std::abs(p_lo - target_power);
    auto consider = [&](double nu, double p, EnergyDensity& d) {
        const double err = std::abs(p - target_power);
        if (err < best_err) {
            best_err = err;
            best.nu = nu;
            best.density = std::move(d);
        }
    };

    bool done = within(p_lo);
    while (!done && steps < opt.max_bisection) {
        ++steps;
        const double mid = std::sqrt(lo * hi);
        auto [p_mid, d_mid] = power_at(mid);
        if (p_mid > p_lo * (1.0 + 1e-12) || p_mid < p_hi * (1.0 - 1e-12)) ++violations;
        consider(mid, p_mid, d_mid);
        if (within(p_mid)) {
            done = true;
        } else if (p_mid > target_power) {
            lo = mid;
            p_lo = p_mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
        if (!(hi > lo)) break;
    }

    bool golden = false;
    if (!within(density_power(data, best.density, df)) && violations > 0) {
        // Non-monotone power map observed: minimize |P - P_T| over log nu instead.
        golden = true;
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = std::log(top * opt.lower_fraction);
        double b = std::log(top);
        auto err = [&](double lnu) {
            auto [p, d] = power_at(std::exp(lnu));
            consider(std::exp(lnu), p, d);
            return std::abs(p - target_power);
        };
        double c = b - phi * (b - a);
        double e = a + phi * (b - a);
        double fc = err(c);
        double fe = err(e);
        for (int k = 0; k < 200 && best_err > opt.tol_power * target_power; ++k) {
            if (fc < fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - phi * (b - a);
                fc = err(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + phi * (b - a);
                fe = err(e);
            }
        }
    }

    best.kkt = kkt_certificate(data, best.density, best.nu, target_power, df);
    best.kkt.bisection_steps = steps;
    best.kkt.max_pair_iterations = max_pair_it;
    best.kkt.unconverged_pairs = unconverged;
    best.kkt.monotonicity_violations = violations;
    best.kkt.used_golden_section = golden;
    return best;
}

struct TxSolution {
    EnergyDensity density;
    WaveformVft waveform;
    double nu = 0.0;
    double mse = 0.0;             ///< T^2 df sum_i f_i(a_i, a^_i)
    double power_residual = 0.0;  ///< relative, from re-integrating the assembled waveform
};

/// s(f) = sqrt(a(f)) v(f) with theta(f) = 0; zero where M(fT) = 0.
inline TxSolution assemble_tx(const EnergyDensity& d, const BinChannelData& data, const LinkModel& model,
                              double nu, double target_power) {
    TxSolution tx;
    tx.density = d;
    tx.nu = nu;
    tx.waveform = zero_waveform(model);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const PairChannel& pc = data[i];
        if (pc.m > 0.0 && d.a[i] > 0.0) {
            const double amp = std::sqrt(d.a[i]);
            for (std::size_t k = 0; k < pc.v.size(); ++k) tx.waveform[i].pos.values[k] = amp * pc.v[k];
        }
        if (pc.m_hat > 0.0 && d.a_hat[i] > 0.0) {
            const double amp = std::sqrt(d.a_hat[i]);
            for (std::size_t k = 0; k < pc.v_hat.size(); ++k) tx.waveform[i].neg.values[k] = amp * pc.v_hat[k];
        }
        acc += pair_objective(pc, d.a[i], d.a_hat[i]);
    }
    const double t = model.T();
    tx.mse = t * t * model.df() * acc;
    tx.power_residual = std::abs(transmit_power(model, tx.waveform) - target_power) / target_power;
    return tx;
}

/// c(f) = M(fT) lambda(f) a(f) / T implied by a density.
inline std::vector<PairC> density_to_c(const BinChannelData& data, const EnergyDensity& d) {
    std::vector<PairC> c(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        c[i].pos = data[i].m * data[i].lambda * d.a[i];
        c[i].neg = data[i].m_hat * data[i].lambda_hat * d.a_hat[i];
    }
    return c;
}

} // namespace wlmmse
