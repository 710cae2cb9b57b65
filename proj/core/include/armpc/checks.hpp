#pragma once

#include "armpc/estimation.hpp"

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace armpc {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CheckOptions {
    /// Update rule exercised by the BLR batch-equivalence check.
    BlrUpdateFn blr_update_fn = &blr_update;
    int jobs = 1;
};

/// geometry, estimators, mpc, closed_loop.
const std::vector<std::string>& suite_names();
bool is_suite(std::string_view name);

/// Throws std::invalid_argument for an unknown suite.
std::vector<CheckResult> run_suite(std::string_view suite, const CheckOptions& options = {});

/// blr_update with the sign of the innovation flipped, used to confirm that
/// the batch-equivalence check can fail.
BLRState mutant_blr_update(const BLRState& state, const Eigen::VectorXd& phi, const Eigen::VectorXd& y);

void print_checks(std::ostream& os, const std::vector<CheckResult>& results);

} // namespace armpc
