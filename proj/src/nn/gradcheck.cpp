#include "mrf/nn/gradcheck.hpp"
#include "mrf/error.hpp"

#include <algorithm>
#include <cmath>

namespace mrf::nn {

GradCheckReport grad_check(const std::function<double()> &loss, std::span<double> x,
                           std::span<const double> analytic, double h, double tolerance,
                           std::span<const std::size_t> coords, double floor) {
    if (x.size() != analytic.size()) {
        throw DomainError("grad_check: gradient length does not match input length");
    }
    GradCheckReport report;
    auto check_one = [&](std::size_t i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = loss();
        x[i] = saved - h;
        const double down = loss();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        const double err = std::abs(a - numeric) / denom;
        ++report.checked;
        if (report.checked == 1 || err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    };
    if (coords.empty()) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            check_one(i);
        }
    } else {
        for (auto i : coords) {
            if (i >= x.size()) {
                throw DomainError("grad_check: coordinate out of range");
            }
            check_one(i);
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

} // namespace mrf::nn
