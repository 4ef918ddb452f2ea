#pragma once

#include <functional>
#include <vector>

namespace levychaos::quad {

inline constexpr double kRelTol = 1e-9;
inline constexpr double kAbsFloor = 1e-14;

struct Result {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive Gauss-Kronrod on [a, b]; either limit may be infinite. Throws
/// NumericError (carrying the error estimate) when the requested accuracy
/// max(rel_tol * |I|, abs_floor) is not reached.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = kRelTol, double abs_floor = kAbsFloor);

/// Same, but integrates in u = log(x) over [log a, log b] for 0 < a < b.
/// Suited to integrands with 1/x-type behaviour spanning many decades.
Result integrate_log(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = kRelTol, double abs_floor = kAbsFloor);

/// Composite Gauss-Legendre nodes and weights on [a, b] with geometrically
/// growing panels (ratio chosen so `panels` panels cover the range).
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// points must be one of 8, 12, 16, 20, 24.
Rule geometric_panels(double a, double b, int panels, int points);

}  // namespace levychaos::quad
