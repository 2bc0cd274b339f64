#pragma once

#include <string>
#include <vector>

namespace nda {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ScoreCheckOptions {
    // Testing hook: adds this much to one computed distance of one fixture
    // case so harness sensitivity itself can be verified.
    double inject_perturbation = 0.0;
    int workers = 0;
};

/// Validation harness over a deterministic 8x8 fixture set: frozen oracle
/// distances, fast-vs-naive agreement at both scales, softmax mass, the
/// analytic score degeneracies and the schedule product.
std::vector<CheckResult> run_score_checks(const ScoreCheckOptions& opts = {});

bool all_passed(const std::vector<CheckResult>& results);

} // namespace nda
