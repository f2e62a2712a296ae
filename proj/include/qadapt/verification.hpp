#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qadapt {

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

int criterion_count();

// Runs one acceptance criterion (1-based). A thrown exception is converted
// into a failed result carrying the message.
CriterionResult run_criterion(int index);

// Runs every criterion in order; when progress is given, prints one
// PASS/FAIL line per criterion as it completes.
std::vector<CriterionResult> run_all_criteria(std::ostream* progress = nullptr);

} // namespace qadapt
