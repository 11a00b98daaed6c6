#pragma once

#include <string>
#include <vector>

// Embedded verification suites, runnable from the CLI (`selftest`) and reused
// by the acceptance tests. Each suite checks one layer against an oracle that
// is independent of the implementation it scores:
//   - trap-exposure closed form vs exact subset counting
//   - the grading rule vs an enumerate-everything reference on 4-image
//     challenges, plus a live-server cross-check
//   - the statistical kernels vs frozen high-precision reference values

namespace utsim::selfcheck {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;  // failure description or a short success summary
};

SuiteResult check_trap_exposure_closed_form();
SuiteResult check_grading_rule();
SuiteResult check_stats_kernels();

std::vector<SuiteResult> run_all();

}  // namespace utsim::selfcheck
