#include "levychaos/quadrature.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levychaos/errors.hpp"

namespace levychaos::quad {

namespace {

constexpr unsigned kMaxDepth = 25;

template <unsigned N>
void append_panel(Rule& rule, double a, double b) {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] == 0.0) {
            rule.nodes.push_back(mid);
            rule.weights.push_back(half * w[k]);
            continue;
        }
        rule.nodes.push_back(mid - half * x[k]);
        rule.weights.push_back(half * w[k]);
        rule.nodes.push_back(mid + half * x[k]);
        rule.weights.push_back(half * w[k]);
    }
}

}  // namespace

Result integrate(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_floor) {
    if (a == b) return {};
    double err = 0.0;
    double l1 = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, kMaxDepth, rel_tol, &err, &l1);
    if (!std::isfinite(v) || !(err <= std::max(rel_tol * std::abs(v), abs_floor))) {
        std::ostringstream msg;
        msg << std::setprecision(6) << "adaptive quadrature did not converge on [" << a << ", " << b << "], error estimate "
            << err;
        throw NumericError(msg.str(), err);
    }
    return {v, err};
}

Result integrate_log(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_floor) {
    if (!(a > 0.0) || !(b > a)) throw DomainError("log-scale quadrature requires 0 < a < b");
    auto g = [&f](double u) {
        const double x = std::exp(u);
        return f(x) * x;
    };
    return integrate(g, std::log(a), std::log(b), rel_tol, abs_floor);
}

Rule geometric_panels(double a, double b, int panels, int points) {
    if (!(a > 0.0) || !(b > a) || panels < 1) throw DomainError("geometric_panels requires 0 < a < b, panels >= 1");
    Rule rule;
    const double ratio = std::pow(b / a, 1.0 / panels);
    double lo = a;
    for (int k = 0; k < panels; ++k) {
        const double hi = (k + 1 == panels) ? b : lo * ratio;
        switch (points) {
            case 8: append_panel<8>(rule, lo, hi); break;
            case 12: append_panel<12>(rule, lo, hi); break;
            case 16: append_panel<16>(rule, lo, hi); break;
            case 20: append_panel<20>(rule, lo, hi); break;
            case 24: append_panel<24>(rule, lo, hi); break;
            default: throw ParameterError("unsupported Gauss-Legendre order " + std::to_string(points));
        }
        lo = hi;
    }
    return rule;
}

}  // namespace levychaos::quad
