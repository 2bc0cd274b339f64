#pragma once

#include <string>
#include <vector>

namespace nda {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

struct AcceptanceOptions {
    // Binary honoring the "--inner-perf" flag; when set, the performance
    // criterion runs in a fresh child process so earlier criteria cannot
    // inflate its peak-RSS measurement.
    std::string self_exe;
    int workers = 0;
    std::vector<int> only;       // run only these criterion numbers
};

/// Runs every acceptance criterion and returns one result per criterion,
/// in criterion order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

/// Prints "PASS"/"FAIL" lines and returns true when everything passed.
bool report_acceptance(const std::vector<CriterionResult>& results);

/// Entry point for the "--inner-perf" child: runs the performance workload
/// and prints a single JSON line with seconds, peak RSS and the byte bound.
int inner_perf_main();

} // namespace nda
