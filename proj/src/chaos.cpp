#include "levychaos/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

#include "levychaos/errors.hpp"

namespace levychaos {

Rational exact_rational(double x) {
    if (!std::isfinite(x)) throw DomainError("cannot convert a non-finite value to a rational");
    if (x == 0.0) return Rational(0);
    int exp = 0;
    const double mant = std::frexp(x, &exp);
    const auto m = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    using boost::multiprecision::cpp_int;
    if (exp >= 0) return Rational(cpp_int(m) << exp);
    return Rational(cpp_int(m), cpp_int(1) << -exp);
}

namespace {

double to_double(const Rational& r) { return r.convert_to<double>(); }
double to_double(double r) { return r; }

template <class Coef>
double evaluate_impl(const BasicPolynomial<Coef>& p, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != p.nvars()) throw DimensionError("polynomial evaluated with the wrong number of variables");
    double acc = 0.0;
    for (const auto& [e, c] : p.terms()) {
        double v = to_double(c);
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i] != 0) v *= std::pow(x[i], e[i]);
        acc += v;
    }
    return acc;
}

nlohmann::json coef_json(const Rational& c) { return c.str(); }
nlohmann::json coef_json(double c) { return c; }

template <class Coef>
nlohmann::json poly_json(const BasicPolynomial<Coef>& p, const std::vector<std::string>& names) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [e, c] : p.terms()) terms.push_back({{"exponents", e}, {"coefficient", coef_json(c)}});
    return {{"variables", names}, {"terms", terms}};
}

struct SeqLess {
    bool operator()(const std::vector<MultiIndex>& a, const std::vector<MultiIndex>& b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto c = compare_grlex(a[i], b[i]);
            if (c != std::strong_ordering::equal) return c == std::strong_ordering::less;
        }
        return false;
    }
};

nlohmann::json seq_json(const std::vector<MultiIndex>& s) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : s) j.push_back(p);
    return j;
}

}  // namespace

double evaluate(const Polynomial& p, const std::vector<double>& x) { return evaluate_impl(p, x); }
double evaluate(const RealPolynomial& p, const std::vector<double>& x) { return evaluate_impl(p, x); }
nlohmann::json to_json(const Polynomial& p, const std::vector<std::string>& names) { return poly_json(p, names); }
nlohmann::json to_json(const RealPolynomial& p, const std::vector<std::string>& names) { return poly_json(p, names); }

std::vector<std::string> integrand_variables(std::size_t m) {
    std::vector<std::string> v{"T"};
    for (std::size_t j = 1; j <= m; ++j) v.push_back("t" + std::to_string(j));
    return v;
}

bool operator==(const ChaosTerm& a, const ChaosTerm& b) { return a.integrators == b.integrators && a.integrand == b.integrand; }

double ChaosExpansion::anchor() const { return to_double(t0); }

nlohmann::json ChaosExpansion::to_json() const {
    nlohmann::json terms_json = nlohmann::json::array();
    for (const auto& t : terms)
        terms_json.push_back({{"integrators", seq_json(t.integrators)},
                              {"integrand", levychaos::to_json(t.integrand, integrand_variables(t.integrators.size()))}});
    return {{"k", k},
            {"t0", t0.str()},
            {"f", levychaos::to_json(f, {"t"})},
            {"constant", levychaos::to_json(constant, {"T"})},
            {"terms", terms_json}};
}

// ---------------------------------------------------------------------------
// Recursion
// ---------------------------------------------------------------------------

namespace {

struct Rep {
    Polynomial constant{1};
    std::map<std::vector<MultiIndex>, Polynomial, SeqLess> terms;

    void add_term(const std::vector<MultiIndex>& seq, const Polynomial& h) {
        if (h.is_zero()) return;
        auto it = terms.find(seq);
        if (it == terms.end()) {
            terms.emplace(seq, h);
            return;
        }
        it->second += h;
        if (it->second.is_zero()) terms.erase(it);
    }
};

// h(T, t1..tm) -> h(t1, t2..t_{m+1}) with a fresh outer variable in front
Polynomial lift(const Polynomial& h) {
    Polynomial out(h.nvars() + 1);
    for (const auto& [e, c] : h.terms()) {
        std::vector<int> ne(1, 0);
        ne.insert(ne.end(), e.begin(), e.end());
        out.add_term(ne, c);
    }
    return out;
}

Rational rpow(const Rational& x, int e) {
    Rational r = 1;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

// int_{t0}^{T} c(s) ds
Polynomial leb_constant(const Polynomial& c, const Rational& t0) {
    Polynomial out(1);
    for (const auto& [e, coef] : c.terms()) {
        const Rational w = coef / (e[0] + 1);
        out.add_term({e[0] + 1}, w);
        out.add_term({0}, -w * rpow(t0, e[0] + 1));
    }
    return out;
}

// int_{t1}^{T} h(s, t1, ...) ds
Polynomial leb_term(const Polynomial& h) {
    Polynomial out(h.nvars());
    for (const auto& [e, coef] : h.terms()) {
        const Rational w = coef / (e[0] + 1);
        auto upper = e;
        upper[0] += 1;
        out.add_term(upper, w);
        auto lower = e;
        lower[1] += e[0] + 1;
        lower[0] = 0;
        out.add_term(lower, -w);
    }
    return out;
}

void add_scaled(Rep& into, const Rep& from, const Rational& s) {
    if (s == 0) return;
    into.constant += from.constant.scaled(s);
    for (const auto& [seq, h] : from.terms) into.add_term(seq, h.scaled(s));
}

Rep stoch(const Rep& e, const MultiIndex& l) {
    Rep out;
    out.add_term({l}, lift(e.constant));
    for (const auto& [seq, h] : e.terms) {
        std::vector<MultiIndex> ns{l};
        ns.insert(ns.end(), seq.begin(), seq.end());
        out.add_term(ns, lift(h));
    }
    return out;
}

Rep leb(const Rep& e, const Rational& t0) {
    Rep out;
    out.constant = leb_constant(e.constant, t0);
    for (const auto& [seq, h] : e.terms) out.add_term(seq, leb_term(h));
    return out;
}

Rational multi_binomial(const MultiIndex& k, const MultiIndex& l) {
    Rational r = 1;
    for (std::size_t i = 0; i < k.size(); ++i) r *= Rational(static_cast<long long>(binomial(k[i], l[i])));
    return r;
}

void for_each_sub_index(const MultiIndex& k, const std::function<void(const MultiIndex&)>& visit) {
    std::vector<int> l(k.size(), 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == k.size()) {
            MultiIndex m(l);
            if (!m.is_zero()) visit(m);
            return;
        }
        for (int v = 0; v <= k[i]; ++v) {
            l[i] = v;
            rec(i + 1);
        }
    };
    rec(0);
}

class Expander {
public:
    Expander(const Eigen::MatrixXd& sigma, const MomentTable& table, const Rational& t0, int n)
        : table_(table), t0_(t0), n_(n) {
        sigma_.assign(static_cast<std::size_t>(n * n), Rational(0));
        if (sigma.size() > 0)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) sigma_[static_cast<std::size_t>(i * n + j)] = exact_rational(sigma(i, j));
    }

    const Rep& get(const MultiIndex& k) {
        auto it = memo_.find(k);
        if (it != memo_.end()) return it->second;
        Rep r;
        if (k.is_zero()) {
            r.constant = Polynomial::constant(1, Rational(1));
        } else {
            for_each_sub_index(k, [&](const MultiIndex& l) {
                const MultiIndex rest = k - l;
                const Rep& inner = get(rest);
                const Rational c = multi_binomial(k, l);
                add_scaled(r, stoch(inner, l), c);
                add_scaled(r, leb(inner, t0_), c * moment(l));
            });
            for (int i = 0; i < n_; ++i) {
                if (k[i] >= 2) {
                    const auto two = MultiIndex::unit(k.size(), i) + MultiIndex::unit(k.size(), i);
                    const Rational c = Rational(k[i] * (k[i] - 1), 2) * sigma(i, i);
                    if (c != 0) add_scaled(r, leb(get(k - two), t0_), c);
                }
                for (int j = i + 1; j < n_; ++j) {
                    if (k[i] >= 1 && k[j] >= 1) {
                        const auto pair = MultiIndex::unit(k.size(), i) + MultiIndex::unit(k.size(), j);
                        const Rational c = Rational(k[i] * k[j]) * sigma(i, j);
                        if (c != 0) add_scaled(r, leb(get(k - pair), t0_), c);
                    }
                }
            }
        }
        return memo_.emplace(k, std::move(r)).first->second;
    }

private:
    Rational moment(const MultiIndex& l) {
        auto it = moments_.find(l);
        if (it != moments_.end()) return it->second;
        return moments_.emplace(l, exact_rational(table_.value(l))).first->second;
    }
    const Rational& sigma(int i, int j) const { return sigma_[static_cast<std::size_t>(i * n_ + j)]; }

    const MomentTable& table_;
    Rational t0_;
    int n_;
    std::vector<Rational> sigma_;
    std::map<MultiIndex, Rational, GrlexLess> moments_;
    std::map<MultiIndex, Rep, GrlexLess> memo_;
};

}  // namespace

ChaosExpansion expand_increment_product(const Eigen::MatrixXd& sigma, const MomentTable& table, const MultiIndex& k,
                                        double t0, int k_max) {
    const int n = table.dimension();
    if (static_cast<int>(k.size()) != n) throw DimensionError("k must have the model dimension");
    if (k.degree() < 1) throw DomainError("increment products need |k| >= 1");
    if (k.degree() > k_max)
        throw CapabilityError("chaos expansions are limited to |k| <= " + std::to_string(k_max));
    if (!(t0 >= 0.0) || !std::isfinite(t0)) throw RangeError("anchor t0 must be >= 0");
    if (sigma.size() > 0 && (sigma.rows() != n || sigma.cols() != n)) throw DimensionError("sigma must be n x n");

    ChaosExpansion out;
    out.k = k;
    out.t0 = exact_rational(t0);
    Expander ex(sigma, table, out.t0, n);
    const Rep& r = ex.get(k);
    out.constant = r.constant;
    for (const auto& [seq, h] : r.terms) out.terms.push_back({seq, h});
    // f(t) = c(t0 + t)
    Polynomial f(1);
    for (const auto& [e, c] : r.constant.terms())
        for (int j = 0; j <= e[0]; ++j)
            f.add_term({j}, c * Rational(static_cast<long long>(binomial(e[0], j))) * rpow(out.t0, e[0] - j));
    out.f = f;
    return out;
}

ChaosExpansion expand_increment_product(const LevyModel& model, const MomentTable& table, const MultiIndex& k, double t0,
                                        int k_max) {
    if (table.model_fingerprint() != 0 && table.model_fingerprint() != model.fingerprint())
        throw ConfigurationError("moment table belongs to a different model");
    return expand_increment_product(model.sigma(), table, k, t0, k_max);
}

double moment_function(const ChaosExpansion& expansion, double t) { return evaluate(expansion.f, {t}); }

// ---------------------------------------------------------------------------
// Pathwise evaluation
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Combo {
    std::vector<std::pair<MultiIndex, double>> parts;
};

struct Mono {
    double coef;
    int t_power;
    std::vector<int> a;
};

struct Compiled {
    std::vector<Combo> ints;
    std::vector<Mono> monos;
};

template <class Coef>
Compiled compile(std::vector<Combo> ints, const BasicPolynomial<Coef>& h) {
    Compiled c;
    c.ints = std::move(ints);
    if (h.nvars() != static_cast<int>(c.ints.size()) + 1) throw DimensionError("integrand variable count mismatch");
    for (const auto& [e, coef] : h.terms()) c.monos.push_back({to_double(coef), e[0], std::vector<int>(e.begin() + 1, e.end())});
    return c;
}

Combo y_combo(const MultiIndex& p) { return {{{p, 1.0}}}; }

Combo h_combo(const MartingaleBasis& basis, const MultiIndex& r) {
    const auto& ret = basis.retained();
    const auto it = std::find(ret.begin(), ret.end(), r);
    if (it == ret.end()) throw CoverageError("basis has no retained index " + r.to_string());
    const auto row = static_cast<Eigen::Index>(it - ret.begin());
    Combo c;
    for (std::size_t q = 0; q < basis.indices().size(); ++q) {
        const double v = basis.coefficients()(row, static_cast<Eigen::Index>(q));
        if (v != 0.0) c.parts.push_back({basis.indices()[q], v});
    }
    return c;
}

struct Timeline {
    std::vector<double> times;
    std::vector<std::size_t> jump, cell;
};

Timeline build_timeline(const SamplePath& path, double t0, double T) {
    Timeline tl;
    std::size_t j = static_cast<std::size_t>(std::upper_bound(path.times.begin(), path.times.end(), t0) - path.times.begin());
    std::size_t k = 0;
    const std::size_t cells = path.cell_count();
    while (k < cells && path.cell_time(k) <= t0) ++k;
    for (;;) {
        const double tj = j < path.times.size() && path.times[j] <= T ? path.times[j] : std::numeric_limits<double>::infinity();
        const double tk = k < cells && path.cell_time(k) <= T ? path.cell_time(k) : std::numeric_limits<double>::infinity();
        if (std::isinf(tj) && std::isinf(tk)) break;
        if (tj < tk) {
            tl.times.push_back(tj);
            tl.jump.push_back(j++);
            tl.cell.push_back(kNone);
        } else if (tk < tj) {
            tl.times.push_back(tk);
            tl.jump.push_back(kNone);
            tl.cell.push_back(k++);
        } else {
            tl.times.push_back(tj);
            tl.jump.push_back(j++);
            tl.cell.push_back(k++);
        }
    }
    return tl;
}

struct IntegratorData {
    double beta = 0.0;
    std::vector<double> inc;
};

IntegratorData integrator_data(const SamplePath& path, const MomentTable& table, const Timeline& tl, const Combo& combo) {
    IntegratorData d;
    d.inc.assign(tl.times.size(), 0.0);
    for (const auto& [q, w] : combo.parts) {
        const int i = q.unit_coordinate();
        d.beta += w * ((i >= 0 ? path.drift[i] : 0.0) - table.value(q));
        for (std::size_t e = 0; e < tl.times.size(); ++e) {
            double v = 0.0;
            if (tl.jump[e] != kNone) v += q.monomial(path.jump(tl.jump[e]));
            if (i >= 0 && tl.cell[e] != kNone) v += path.cell(tl.cell[e])[i];
            d.inc[e] += w * v;
        }
    }
    return d;
}

double horner(const std::vector<double>& p, double s) {
    double v = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) v = v * s + p[i];
    return v;
}

// Nested integral of prod t_j^{a_j} against the integrators, innermost last.
double nested(const Timeline& tl, double t0, double T, const std::vector<const IntegratorData*>& ints, const std::vector<int>& a) {
    const std::size_t E = tl.times.size();
    auto bound = [&](std::size_t k) { return k == 0 ? t0 : tl.times[k - 1]; };
    std::vector<std::vector<double>> P(E + 1, std::vector<double>{1.0});
    std::vector<std::vector<double>> Q(E + 1);
    for (std::size_t j = ints.size(); j-- > 0;) {
        const auto& d = *ints[j];
        double v = 0.0;
        for (std::size_t k = 0; k <= E; ++k) {
            std::vector<double> R(P[k].size() + static_cast<std::size_t>(a[j]), 0.0);
            for (std::size_t i = 0; i < P[k].size(); ++i) R[i + static_cast<std::size_t>(a[j])] = P[k][i];
            std::vector<double> A(R.size() + 1, 0.0);
            for (std::size_t i = 0; i < R.size(); ++i) A[i + 1] = d.beta * R[i] / static_cast<double>(i + 1);
            A[0] = v - horner(A, bound(k));
            Q[k] = std::move(A);
            if (k < E) {
                const double tau = tl.times[k];
                v = horner(Q[k], tau) + std::pow(tau, a[j]) * horner(P[k], tau) * d.inc[k];
            }
        }
        std::swap(P, Q);
    }
    return horner(P[E], T);
}

class PathEvaluator {
public:
    PathEvaluator(const SamplePath& path, const MomentTable& table, double t0, double T)
        : path_(path), table_(table), t0_(t0), T_(T), tl_(build_timeline(path, t0, T)) {}

    double term(const Compiled& c) {
        std::vector<const IntegratorData*> ints;
        for (const auto& combo : c.ints) ints.push_back(&data(combo));
        double acc = 0.0;
        for (const auto& m : c.monos) acc += m.coef * std::pow(T_, m.t_power) * nested(tl_, t0_, T_, ints, m.a);
        return acc;
    }

private:
    const IntegratorData& data(const Combo& combo) {
        std::vector<std::pair<std::vector<int>, double>> key;
        for (const auto& [q, w] : combo.parts) key.push_back({q.components(), w});
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(key, integrator_data(path_, table_, tl_, combo)).first->second;
    }

    const SamplePath& path_;
    const MomentTable& table_;
    double t0_, T_;
    Timeline tl_;
    std::map<std::vector<std::pair<std::vector<int>, double>>, IntegratorData> cache_;
};

void check_window(const SamplePath& path, double t0, double t) {
    if (!(t0 >= 0.0) || !(t >= 0.0) || t0 + t > path.horizon * (1.0 + 1e-15))
        throw RangeError("integration window (t0, t0 + t] must lie within [0, horizon]");
}

Compiled compile_y(const ChaosTerm& term) {
    std::vector<Combo> ints;
    for (const auto& p : term.integrators) ints.push_back(y_combo(p));
    return compile(std::move(ints), term.integrand);
}

Compiled compile_h(const MartingaleBasis& basis, const HChaosTerm& term) {
    std::vector<Combo> ints;
    for (const auto& r : term.integrators) ints.push_back(h_combo(basis, r));
    return compile(std::move(ints), term.integrand);
}

double window_end(const SamplePath& path, double t0, double t) { return std::min(t0 + t, path.horizon); }

}  // namespace

double evaluate_iterated_integral(const SamplePath& path, const MomentTable& table, const ChaosTerm& term, double t0,
                                  double t) {
    check_window(path, t0, t);
    PathEvaluator ev(path, table, t0, window_end(path, t0, t));
    return ev.term(compile_y(term));
}

double evaluate_expansion(const SamplePath& path, const MomentTable& table, const ChaosExpansion& expansion, double t) {
    const double t0 = expansion.anchor();
    check_window(path, t0, t);
    PathEvaluator ev(path, table, t0, window_end(path, t0, t));
    double acc = moment_function(expansion, t);
    for (const auto& term : expansion.terms) acc += ev.term(compile_y(term));
    return acc;
}

double evaluate_iterated_integral(const SamplePath& path, const MomentTable& table, const MartingaleBasis& basis,
                                  const HChaosTerm& term, double t0, double t) {
    check_window(path, t0, t);
    PathEvaluator ev(path, table, t0, window_end(path, t0, t));
    return ev.term(compile_h(basis, term));
}

double evaluate_expansion(const SamplePath& path, const MomentTable& table, const MartingaleBasis& basis,
                          const HChaosExpansion& expansion, double t) {
    check_window(path, expansion.t0, t);
    PathEvaluator ev(path, table, expansion.t0, window_end(path, expansion.t0, t));
    double acc = evaluate(expansion.f, {t});
    for (const auto& term : expansion.terms) acc += ev.term(compile_h(basis, term));
    return acc;
}

double increment_product(const SamplePath& path, const MultiIndex& k, double t0, double t) {
    check_window(path, t0, t);
    const double T = window_end(path, t0, t);
    double v = 1.0;
    for (int i = 0; i < path.n; ++i)
        if (k[i] > 0) v *= std::pow(state(path, i, T) - state(path, i, t0), k[i]);
    return v;
}

double bounded_variation_residual(const SamplePath& path, double t) {
    double worst = 0.0;
    for (int i = 0; i < path.n; ++i) {
        double jumps = 0.0;
        for (std::size_t j = 0; j < path.jump_count() && path.times[j] <= t; ++j) jumps += path.jump(j)[i];
        worst = std::max(worst, std::abs(state(path, i, t) - path.drift[i] * t - jumps));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// H basis
// ---------------------------------------------------------------------------

nlohmann::json HChaosExpansion::to_json() const {
    nlohmann::json terms_json = nlohmann::json::array();
    for (const auto& t : terms)
        terms_json.push_back({{"integrators", seq_json(t.integrators)},
                              {"integrand", levychaos::to_json(t.integrand, integrand_variables(t.integrators.size()))}});
    return {{"k", k}, {"t0", t0}, {"f", levychaos::to_json(f, {"t"})}, {"terms", terms_json}};
}

HChaosExpansion to_h_basis(const ChaosExpansion& expansion, const MartingaleBasis& basis) {
    const auto& idx = basis.indices();
    const auto& pos = basis.retained_positions();
    const auto& T = basis.projections();
    // Y^q = sum over retained p at or before q of T[q][p] H^p
    auto expand_y = [&](const MultiIndex& q) {
        const auto it = std::find(idx.begin(), idx.end(), q);
        if (it == idx.end()) throw CoverageError("basis does not cover integrator " + q.to_string());
        const auto qpos = static_cast<int>(it - idx.begin());
        std::vector<std::pair<MultiIndex, double>> out;
        for (std::size_t p = 0; p < pos.size(); ++p) {
            if (pos[p] > qpos) break;
            const double v = T(qpos, static_cast<Eigen::Index>(p));
            if (v != 0.0) out.push_back({basis.retained()[p], v});
        }
        return out;
    };

    std::map<std::vector<MultiIndex>, RealPolynomial, SeqLess> acc;
    for (const auto& term : expansion.terms) {
        std::vector<std::vector<std::pair<MultiIndex, double>>> choices;
        for (const auto& q : term.integrators) choices.push_back(expand_y(q));
        RealPolynomial h(term.integrand.nvars());
        for (const auto& [e, c] : term.integrand.terms()) h.add_term(e, to_double(c));
        std::vector<MultiIndex> seq(choices.size());
        std::function<void(std::size_t, double)> rec = [&](std::size_t j, double factor) {
            if (j == choices.size()) {
                auto it = acc.find(seq);
                if (it == acc.end()) it = acc.emplace(seq, RealPolynomial(h.nvars())).first;
                it->second += h.scaled(factor);
                return;
            }
            for (const auto& [r, w] : choices[j]) {
                seq[j] = r;
                rec(j + 1, factor * w);
            }
        };
        rec(0, 1.0);
    }
    HChaosExpansion out;
    out.k = expansion.k;
    out.t0 = expansion.anchor();
    for (const auto& [e, c] : expansion.f.terms()) out.f.add_term(e, to_double(c));
    for (auto& [seq, h] : acc)
        if (!h.is_zero()) out.terms.push_back({seq, std::move(h)});
    return out;
}

// ---------------------------------------------------------------------------
// Predictable form
// ---------------------------------------------------------------------------

PredictableForm to_predictable_form(const ChaosExpansion& expansion) {
    PredictableForm form;
    form.k = expansion.k;
    form.t0 = expansion.t0;
    form.f = expansion.f;
    for (const auto& term : expansion.terms) {
        ChaosTerm inner;
        inner.integrators.assign(term.integrators.begin() + 1, term.integrators.end());
        inner.integrand = term.integrand;
        form.phi[term.integrators.front()].push_back(std::move(inner));
    }
    return form;
}

std::vector<ChaosTerm> flatten(const PredictableForm& form) {
    std::vector<ChaosTerm> out;
    for (const auto& [p, inner] : form.phi) {
        for (const auto& term : inner) {
            ChaosTerm t;
            t.integrators.push_back(p);
            t.integrators.insert(t.integrators.end(), term.integrators.begin(), term.integrators.end());
            t.integrand = term.integrand;
            out.push_back(std::move(t));
        }
    }
    return out;
}

nlohmann::json PredictableForm::to_json() const {
    nlohmann::json phi_json = nlohmann::json::array();
    for (const auto& [p, inner] : phi) {
        nlohmann::json parts = nlohmann::json::array();
        for (const auto& t : inner)
            parts.push_back({{"integrators", seq_json(t.integrators)},
                             {"integrand", levychaos::to_json(t.integrand, integrand_variables(t.integrators.size() + 1))}});
        phi_json.push_back({{"outer", p}, {"integrand", parts}});
    }
    return {{"k", k}, {"t0", t0.str()}, {"f", levychaos::to_json(f, {"t"})}, {"phi", phi_json}};
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

nlohmann::json CrpReport::to_json() const {
    nlohmann::json j = {{"k", k}, {"mode", mode == CrpMode::exact ? "exact" : "mc"}, {"paths", paths}, {"seed", seed}};
    if (mode == CrpMode::exact) {
        j["max_residual_y"] = max_residual_y;
        j["max_residual_h"] = max_residual_h;
    }
    j["residual_y"] = residual_y.to_json();
    j["residual_h"] = residual_h.to_json();
    nlohmann::json cov = nlohmann::json::array();
    for (const auto& c : covariances)
        cov.push_back({{"a", seq_json(c.a)}, {"b", seq_json(c.b)}, {"estimate", c.estimate.to_json()},
                       {"z", c.estimate.z_score()}});
    j["covariances"] = cov;
    j["max_abs_z"] = max_abs_z;
    return j;
}

CrpReport verify_crp(const LevyModel& model, const MomentTable& table, const MartingaleBasis& basis, const MultiIndex& k,
                     const CrpOptions& options) {
    const PathSampler sampler(model, options.sim);
    if (options.mode == CrpMode::exact && model.has_brownian())
        throw ConfigurationError("exact CRP verification needs a model without Brownian part");
    const double t0 = options.t0;
    const double t = options.sim.horizon - t0;
    if (!(t > 0.0) || t0 < 0.0) throw RangeError("anchor t0 must lie in [0, horizon)");

    const auto expansion = expand_increment_product(sampler.model(), table, k, t0);
    const auto hexp = to_h_basis(expansion, basis);
    std::vector<Compiled> ycomp, hcomp;
    for (const auto& term : expansion.terms) ycomp.push_back(compile_y(term));
    for (const auto& term : hexp.terms) hcomp.push_back(compile_h(basis, term));
    const double fy = moment_function(expansion, t);
    const double fh = evaluate(hexp.f, {t});
    const std::size_t G = hcomp.size();

    std::vector<double> max_y(options.mc.paths, 0.0), max_h(options.mc.paths, 0.0);
    auto functional = [&](const SamplePath& path) {
        PathEvaluator ev(path, table, t0, t0 + t);
        const double lhs = increment_product(path, k, t0, t);
        double ry = fy;
        for (const auto& c : ycomp) ry += ev.term(c);
        std::vector<double> out;
        out.reserve(2 + (G > 0 ? G * (G - 1) / 2 : 0));
        std::vector<double> v(G);
        double rh = fh;
        for (std::size_t g = 0; g < G; ++g) {
            v[g] = ev.term(hcomp[g]);
            rh += v[g];
        }
        max_y[path.stream] = std::abs(lhs - ry);
        max_h[path.stream] = std::abs(lhs - rh);
        out.push_back(lhs - ry);
        out.push_back(lhs - rh);
        for (std::size_t a = 0; a < G; ++a)
            for (std::size_t b = a + 1; b < G; ++b) out.push_back(v[a] * v[b]);
        return out;
    };
    const auto est = mc_expectation(sampler, functional, options.mc);

    CrpReport r;
    r.k = k;
    r.mode = options.mode;
    r.paths = options.mc.paths;
    r.seed = options.mc.seed;
    r.max_residual_y = *std::max_element(max_y.begin(), max_y.end());
    r.max_residual_h = *std::max_element(max_h.begin(), max_h.end());
    r.residual_y = est[0];
    r.residual_h = est[1];
    std::size_t pos = 2;
    for (std::size_t a = 0; a < G; ++a) {
        for (std::size_t b = a + 1; b < G; ++b) {
            TermCovariance c{hexp.terms[a].integrators, hexp.terms[b].integrators, est[pos++]};
            r.max_abs_z = std::max(r.max_abs_z, c.estimate.z_score());
            r.covariances.push_back(std::move(c));
        }
    }
    return r;
}

}  // namespace levychaos
