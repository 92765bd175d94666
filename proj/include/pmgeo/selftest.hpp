#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pmgeo/config.hpp"

namespace pmgeo {

struct SelftestResult {
    int passed = 0;
    int failed = 0;
    std::vector<std::string> failures;
    bool ok() const { return failed == 0; }
};

// Runs the oracle-equivalence and invariant suite at desk scale and prints
// one "PASS <name>" / "FAIL <name>: <detail>" line per check. Output is
// byte-identical across runs for a fixed config.
SelftestResult run_selftest(const RunConfig& cfg, std::ostream& out);

}  // namespace pmgeo
