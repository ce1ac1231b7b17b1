#pragma once

// One-call joint optimization: scenario in, transmit waveform, receiver and
// MSE out.

#include <cmath>
#include <optional>

#include "wlmmse/errors.hpp"
#include "wlmmse/link_model.hpp"
#include "wlmmse/receiver.hpp"
#include "wlmmse/scenario.hpp"
#include "wlmmse/transmitter.hpp"

namespace wlmmse {

struct SolveOptions {
    OuterOptions outer;
    double tol_kkt = 1e-8;       ///< stationarity bound checked by verify_solution
    bool matrix_cross_check = false;
};

struct Solution {
    LinkModel model;
    BinChannelData data;
    TxSolution tx;
    ReceiverSolution rx;
    KktState kkt;
    MseReport mse;                      ///< scalar form
    std::optional<MseReport> mse_matrix; ///< filled when cross-checking
};

inline Solution optimize(const Scenario& sc, const SolveOptions& opt = {}) {
    Solution sol;
    sol.model = build_link_model(sc);
    sol.data = bin_channel_data(sol.model);
    const OuterSolution outer = outer_solve(sol.data, sc.power.total, sol.model.grid, opt.outer);
    sol.kkt = outer.kkt;
    sol.tx = assemble_tx(outer.density, sol.data, sol.model, outer.nu, sc.power.total);
    sol.rx = optimal_receiver(sol.model, sol.tx.waveform);
    sol.mse = mse_scalar(sol.model, sol.tx.waveform);
    if (opt.matrix_cross_check) sol.mse_matrix = mse_matrix(sol.model, sol.tx.waveform);
    return sol;
}

/// Invariant checks on an optimizer result.
struct SolutionCheck {
    bool kkt_ok = false;
    bool power_ok = false;
    bool mse_consistent = false;
    bool matrix_consistent = true;
    double mse_gap = 0.0;
    double matrix_gap = 0.0;

    bool ok() const { return kkt_ok && power_ok && mse_consistent && matrix_consistent; }
};

inline SolutionCheck verify_solution(const Solution& sol, const SolveOptions& opt = {}) {
    SolutionCheck c;
    c.kkt_ok = sol.kkt.stationarity <= opt.tol_kkt && sol.kkt.dual_feasibility >= -1e-12 &&
               sol.kkt.complementary_slackness <= 1e-10 && sol.kkt.unconverged_pairs == 0;
    c.power_ok = sol.kkt.power_residual <= std::max(1e-9, 10.0 * opt.outer.tol_power) &&
                 sol.tx.power_residual <= std::max(1e-9, 10.0 * opt.outer.tol_power);
    c.mse_gap = std::abs(sol.tx.mse - sol.mse.total) / (1.0 + sol.mse.total);
    c.mse_consistent = c.mse_gap <= 1e-10;
    if (sol.mse_matrix) {
        c.matrix_gap = std::abs(sol.mse_matrix->total - sol.mse.total) / (1.0 + sol.mse_matrix->total);
        c.matrix_consistent = c.matrix_gap <= 1e-10;
    }
    return c;
}

} // namespace wlmmse
