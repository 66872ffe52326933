#pragma once

#include <string>
#include <vector>

namespace mixnet {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool ok() const { return max_rel_err < threshold; }
};

// Finite-difference checks for every primitive (threshold 1e-4), every block
// (1e-3) and a tiny end-to-end model (1e-3), all in 64-bit mode, step 1e-4.
std::vector<GradCheckEntry> run_gradcheck_suite();

} // namespace mixnet
