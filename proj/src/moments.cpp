#include "levychaos/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "levychaos/errors.hpp"
#include "levychaos/quadrature.hpp"

namespace levychaos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSeriesTol = 1e-14;

quad::Result half_line(const std::function<double(double)>& f, double a) {
    if (a == 0.0) {
        const auto lo = quad::integrate(f, 0.0, 1.0);
        const auto hi = quad::integrate(f, 1.0, kInf);
        return {lo.value + hi.value, lo.error + hi.error};
    }
    if (a >= 1.0) return quad::integrate(f, a, kInf);
    const auto lo = quad::integrate_log(f, a, 1.0);
    const auto hi = quad::integrate(f, 1.0, kInf);
    return {lo.value + hi.value, lo.error + hi.error};
}

std::vector<MomentEntry> discrete_moments(const LevyModel& model, const DiscreteJumps& d,
                                          const std::vector<MultiIndex>& idx) {
    const auto drift = model.effective_drift();
    std::vector<MomentEntry> out;
    for (const auto& p : idx) {
        double v = 0.0;
        for (const auto& a : d.atoms) v += a.rate * p.monomial(a.x.data());
        if (p.degree() == 1) v += drift[p.unit_coordinate()];
        out.push_back({v, MomentMethod::exact_sum, 0.0, 0});
    }
    return out;
}

// sum_{N > K} N^{d-1} s^N, bounding the shells beyond K for a degree-d moment
double negmult_tail(double s, int d, int K) {
    double tail = 0.0;
    for (int N = K + 1;; ++N) {
        const double term = std::exp((d - 1) * std::log(double(N)) + N * std::log(s));
        tail += term;
        if (N > K + 5 && N * std::log(s) + (d - 1) * std::log(double(N)) < std::log(tail) - 80.0) break;
        if (N > K + 10000000) break;
    }
    return tail;
}

void for_each_shell(int n, int total, std::vector<int>& k, int pos, int remaining,
                    const std::function<void(const std::vector<int>&)>& visit) {
    if (pos == n - 1) {
        k[pos] = remaining;
        visit(k);
        return;
    }
    for (int v = remaining; v >= 0; --v) {
        k[pos] = v;
        for_each_shell(n, total, k, pos + 1, remaining - v, visit);
    }
}

std::vector<MomentEntry> negmult_moments(const LevyModel& model, const NegativeMultinomialJumps& nm,
                                         const std::vector<MultiIndex>& idx) {
    const int n = model.dimension();
    const double s = nm.total_weight();
    int dmax = 1;
    for (const auto& p : idx) dmax = std::max(dmax, p.degree());
    int K = 1;
    while (negmult_tail(s, dmax, K) >= kSeriesTol) {
        ++K;
        if (K > 1000000) throw NumericError("negative multinomial moment series needs too many shells", negmult_tail(s, dmax, K));
    }
    std::vector<double> logc(n);
    for (int i = 0; i < n; ++i) logc[i] = std::log(nm.mu * nm.lambdas[i]);
    std::vector<double> acc(idx.size(), 0.0);
    std::vector<int> k(n);
    std::vector<double> kd(n);
    for (int N = 1; N <= K; ++N) {
        const double lf = std::lgamma(double(N));
        for_each_shell(n, N, k, 0, N, [&](const std::vector<int>& kk) {
            double lv = lf;
            for (int i = 0; i < n; ++i) {
                lv += kk[i] * logc[i] - std::lgamma(kk[i] + 1.0);
                kd[i] = kk[i];
            }
            const double v = std::exp(lv);
            for (std::size_t j = 0; j < idx.size(); ++j) acc[j] += v * idx[j].monomial(kd.data());
        });
    }
    const auto drift = model.effective_drift();
    std::vector<MomentEntry> out;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        double v = acc[j];
        if (idx[j].degree() == 1) v += drift[idx[j].unit_coordinate()];
        out.push_back({v, MomentMethod::series, negmult_tail(s, idx[j].degree(), K), K});
    }
    return out;
}

std::vector<MomentEntry> copula_moments(const LevyModel& model, const CopulaJumps& c, const std::vector<MultiIndex>& idx) {
    const int n = model.dimension();
    const auto drift = model.effective_drift();
    std::vector<MomentEntry> out;
    if (n == 1) {
        const auto& m = c.marginals[0];
        for (const auto& p : idx) {
            const int e = p[0];
            auto f = [&](double y) {
                const double yp = std::pow(y, e);
                return yp * m.density(y) + (e % 2 == 0 ? yp : -yp) * m.density(-y);
            };
            const auto r = half_line(f, c.trunc);
            double v = r.value;
            if (e == 1) v += drift[0];
            out.push_back({v, MomentMethod::quadrature, r.error, 0});
        }
        return out;
    }
    int dmax = 1;
    for (const auto& p : idx) dmax = std::max(dmax, p.degree());
    auto run = [&](int points) {
        std::vector<double> acc(idx.size(), 0.0);
        std::vector<double> pw(static_cast<std::size_t>(n * (dmax + 1)));
        for_each_copula_node(c, dmax, points, 1.0, [&](const double* x, double w) {
            for (int i = 0; i < n; ++i) {
                double* row = &pw[static_cast<std::size_t>(i * (dmax + 1))];
                row[0] = 1.0;
                for (int e = 1; e <= dmax; ++e) row[e] = row[e - 1] * x[i];
            }
            for (std::size_t j = 0; j < idx.size(); ++j) {
                double v = w;
                for (int i = 0; i < n; ++i) v *= pw[static_cast<std::size_t>(i * (dmax + 1) + idx[j][i])];
                acc[j] += v;
            }
        });
        return acc;
    };
    const auto lo = run(n == 2 ? 16 : 8);
    const auto hi = run(n == 2 ? 24 : 12);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        double v = hi[j];
        if (idx[j].degree() == 1) v += drift[idx[j].unit_coordinate()];
        out.push_back({v, MomentMethod::quadrature, std::abs(hi[j] - lo[j]), 0});
    }
    return out;
}

std::vector<MomentEntry> compute(const LevyModel& model, const std::vector<MultiIndex>& idx) {
    for (const auto& p : idx) {
        if (static_cast<int>(p.size()) != model.dimension()) throw DimensionError("moment index length must equal n");
        if (p.degree() < 1) throw DomainError("moments are defined for |p| >= 1");
    }
    return std::visit(
        [&](const auto& jm) -> std::vector<MomentEntry> {
            using T = std::decay_t<decltype(jm)>;
            if constexpr (std::is_same_v<T, DiscreteJumps>) return discrete_moments(model, jm, idx);
            else if constexpr (std::is_same_v<T, NegativeMultinomialJumps>) return negmult_moments(model, jm, idx);
            else return copula_moments(model, jm, idx);
        },
        model.jumps());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(MomentMethod m) {
    switch (m) {
        case MomentMethod::exact_sum: return "exact-sum";
        case MomentMethod::quadrature: return "quadrature";
        case MomentMethod::series: return "series";
        case MomentMethod::synthetic: return "synthetic";
    }
    return "unknown";
}

MomentTable::MomentTable(int n, int max_degree, std::uint64_t model_fingerprint, Map entries)
    : n_(n), max_degree_(max_degree), fingerprint_(model_fingerprint), entries_(std::move(entries)) {}

MomentTable MomentTable::synthetic(int n, int max_degree, const std::function<double(const MultiIndex&)>& value) {
    if (n < 1 || max_degree < 1) throw ParameterError("synthetic table needs n >= 1 and max_degree >= 1");
    Map m;
    for (const auto& p : enumerate_up_to(n, 2 * max_degree)) m[p] = {value(p), MomentMethod::synthetic, 0.0, 0};
    return MomentTable(n, max_degree, 0, std::move(m));
}

bool MomentTable::covers(const MultiIndex& p) const { return entries_.count(p) > 0; }

const MomentEntry& MomentTable::entry(const MultiIndex& p) const {
    if (static_cast<int>(p.size()) != n_) throw DimensionError("moment index length must equal n");
    const auto it = entries_.find(p);
    if (it == entries_.end()) throw CoverageError("moment table does not cover index " + p.to_string());
    return it->second;
}

std::string MomentTable::to_csv() const {
    std::ostringstream os;
    os << "index,value,method,error_bound\n";
    for (const auto& [p, e] : entries_)
        os << '"' << p.to_string() << "\"," << format_double(e.value) << ',' << to_string(e.method) << ','
           << format_double(e.error_bound) << '\n';
    return os.str();
}

nlohmann::json MomentTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [p, e] : entries_) {
        nlohmann::json r = {{"index", p}, {"value", e.value}, {"method", to_string(e.method)}, {"error_bound", e.error_bound}};
        if (e.series_terms > 0) r["series_terms"] = e.series_terms;
        rows.push_back(r);
    }
    return {{"n", n_}, {"max_degree", max_degree_}, {"entries", rows}};
}

MomentEntry moment(const LevyModel& model, const MultiIndex& p) { return compute(model, {p}).front(); }

MomentTable moment_table(const LevyModel& model, int max_degree) {
    if (max_degree < 1) throw ParameterError("moment table needs max_degree >= 1");
    const auto idx = enumerate_up_to(model.dimension(), 2 * max_degree);
    std::vector<MomentEntry> values;
    try {
        values = compute(model, idx);
    } catch (const NumericError& e) {
        throw NumericError(std::string("moment table: ") + e.what(), e.residual());
    }
    MomentTable::Map m;
    for (std::size_t j = 0; j < idx.size(); ++j) m[idx[j]] = values[j];
    return MomentTable(model.dimension(), max_degree, model.fingerprint(), std::move(m));
}

}  // namespace levychaos
