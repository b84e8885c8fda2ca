#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "etguard/param_store.hpp"

namespace etguard {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int64_t checked = 0;
};

// Central-difference check of the analytic gradients that `eval(true)`
// deposits in `ps`. eval(true) must zero nothing itself: it records a fresh
// tape against the store's current values, runs backward and returns the
// loss. eval(false) is forward-only. The relative error per coordinate is
// |a-n| / max(1e-8, |a|+|n|). `stride` checks every stride-th coordinate of
// each parameter (1 = all). Throws if any evaluation is non-finite.
GradCheckReport gradient_check(ParamStore& ps, const std::function<double(bool)>& eval,
                               double fd_step = 1e-5, int64_t stride = 1);

} // namespace etguard
