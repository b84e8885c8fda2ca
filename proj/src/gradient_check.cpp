#include "etguard/gradient_check.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace etguard {

GradCheckReport gradient_check(ParamStore& ps, const std::function<double(bool)>& eval,
                               double fd_step, int64_t stride) {
    if (stride < 1) throw std::invalid_argument("gradient_check: stride must be >= 1");
    ps.zero_grads();
    const double base = eval(true);
    if (!std::isfinite(base)) throw std::runtime_error("gradient_check: non-finite base loss");

    std::map<std::string, NdArray> analytic;
    for (const std::string& name : ps.names()) analytic.emplace(name, ps.grad(name));

    GradCheckReport rep;
    for (const std::string& name : ps.names()) {
        NdArray& value = ps.value(name);
        const NdArray& ag = analytic.at(name);
        for (int64_t i = 0; i < value.size(); i += stride) {
            const double saved = value[i];
            value[i] = saved + fd_step;
            const double lp = eval(false);
            value[i] = saved - fd_step;
            const double lm = eval(false);
            value[i] = saved;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw std::runtime_error("gradient_check: non-finite probe at " + name);
            const double numeric = (lp - lm) / (2.0 * fd_step);
            const double a = ag[i];
            const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = name;
                rep.worst_index = i;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    return rep;
}

} // namespace etguard
