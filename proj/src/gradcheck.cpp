#include "prnet/gradcheck.hpp"

#include <cmath>

#include "prnet/error.hpp"

namespace prnet {

GradCheckReport grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                           const Tensor& analytic, double h) {
    if (!analytic.same_shape(x)) throw ShapeMismatch("grad_check analytic gradient shape");
    GradCheckReport report;
    Tensor probe = x;
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFiniteValue("grad_check objective at coordinate " + std::to_string(i));
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(a - numeric) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_coord = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

}  // namespace prnet
