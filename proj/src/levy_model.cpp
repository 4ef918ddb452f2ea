#include "levychaos/levy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "levychaos/errors.hpp"
#include "levychaos/quadrature.hpp"

namespace levychaos {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// int_a^inf f(y) dy for a > 0, switching to log scale below 1.
quad::Result half_line(const std::function<double(double)>& f, double a) {
    if (a >= 1.0) return quad::integrate(f, a, kInf);
    const auto lo = quad::integrate_log(f, a, 1.0);
    const auto hi = quad::integrate(f, 1.0, kInf);
    return {lo.value + hi.value, lo.error + hi.error};
}

double log_clayton_core(const std::vector<double>& absu, double theta, double& log_s) {
    // log of (sum |u|^-theta), computed relative to the smallest |u|
    const double umin = *std::min_element(absu.begin(), absu.end());
    double acc = 0.0;
    for (double v : absu) acc += std::pow(v / umin, -theta);
    log_s = -theta * std::log(umin) + std::log(acc);
    return log_s;
}

void check_clayton(double theta, double eta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ParameterError("Clayton theta must be > 0");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("Clayton eta must lie in [0, 1]");
}

double orthant_weight(bool product_nonnegative, double eta) { return product_nonnegative ? eta : 1.0 - eta; }

std::vector<double> read_vector(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw ValidationError(std::string("missing array field '") + key + "'");
    std::vector<double> v;
    for (const auto& e : j.at(key)) {
        if (!e.is_number()) throw ValidationError(std::string("field '") + key + "' must contain numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

double read_number(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ValidationError(std::string("missing numeric field '") + key + "'");
    return j.at(key).get<double>();
}

double read_number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    return read_number(j, key);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

json marginal_to_json(const Marginal& m) {
    if (m.family == MarginalFamily::gamma) return {{"family", "gamma"}, {"shape", m.first}, {"rate", m.second}};
    return {{"family", "meixner"}, {"m", m.first}, {"a", m.second}};
}

Marginal marginal_from_json(const json& j) {
    if (!j.is_object() || !j.contains("family")) throw ValidationError("marginal must be an object with a 'family'");
    const auto fam = j.at("family").get<std::string>();
    if (fam == "gamma") return Marginal::gamma(read_number(j, "shape"), read_number(j, "rate"));
    if (fam == "meixner") return Marginal::meixner(read_number(j, "m"), read_number(j, "a"));
    throw ValidationError("unknown marginal family '" + fam + "'");
}

void validate_copula(const CopulaJumps& c, int n) {
    if (static_cast<int>(c.marginals.size()) != n) throw DimensionError("copula needs one marginal per coordinate");
    if (n > 3) throw CapabilityError("Clayton mixed partials are implemented for n <= 3 only");
    check_clayton(c.clayton.theta, c.clayton.eta);
    if (!(c.trunc >= 0.0) || !std::isfinite(c.trunc)) throw ParameterError("truncation must be >= 0");
    if (n >= 2 && c.trunc == 0.0) throw ConfigurationError("copula models with n >= 2 require a truncation level > 0");
}

// Largest cutoff-to-truncation ratio the tensor grid accepts.
constexpr double kMaxGridRatio = 1e30;

std::string fmt_g(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

// Per-coordinate node data for the tensor grid.
struct SideNodes {
    bool negative = false;
    std::vector<double> x, w, dens, tail;  // tail = |U(x)|
};

std::vector<SideNodes> coordinate_nodes(const Marginal& m, double trunc, int max_power, int points, double upper_scale,
                                        double tilt) {
    std::vector<SideNodes> out;
    for (bool positive : {true, false}) {
        if (!m.supports(positive)) continue;
        const double rate = m.decay_rate(positive) - tilt;
        if (!(rate > 0.0)) throw NumericError("integrand does not decay on the tensor grid");
        const double upper = trunc + upper_scale * (50.0 + 4.0 * max_power) / rate;
        if (!(upper / trunc <= kMaxGridRatio))
            throw NumericError("truncation level " + fmt_g(trunc) + " is too small for the tensor-grid quadrature", trunc);
        const int panels = static_cast<int>(std::ceil(4.0 * std::log10(upper / trunc))) + 4;
        const auto rule = quad::geometric_panels(trunc, upper, panels, points);
        SideNodes s;
        s.negative = !positive;
        const double sign = positive ? 1.0 : -1.0;
        auto f = [&](double y) { return m.density(sign * y); };
        const std::size_t count = rule.nodes.size();
        s.x.resize(count);
        s.w = rule.weights;
        s.dens.resize(count);
        s.tail.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            s.x[k] = sign * rule.nodes[k];
            s.dens[k] = f(rule.nodes[k]);
        }
        s.tail[count - 1] = std::abs(tail_integral(m, s.x[count - 1]));
        for (std::size_t k = count - 1; k-- > 0;) {
            s.tail[k] = s.tail[k + 1] + quad::integrate(f, rule.nodes[k], rule.nodes[k + 1]).value;
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Growth rate of the tilted negative-multinomial series along direction pi.
double negmult_rate(const std::vector<double>& c, const std::vector<double>& pi, double lambda) {
    double norm = 0.0, ent = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        norm += pi[i] * pi[i];
        if (pi[i] > 0.0) ent += pi[i] * std::log(c[i] / pi[i]);
    }
    return lambda * std::sqrt(norm) + ent;
}

double negmult_max_rate(const std::vector<double>& c, double lambda) {
    const std::size_t n = c.size();
    if (n == 1) return lambda + std::log(c[0]);
    std::vector<double> best(n, 1.0 / static_cast<double>(n));
    double best_val = negmult_rate(c, best, lambda);
    // coarse grid over the simplex for n <= 3, then pairwise mass transfers
    if (n <= 3) {
        const int steps = n == 2 ? 400 : 120;
        std::vector<double> pi(n);
        for (int a = 0; a <= steps; ++a) {
            if (n == 2) {
                pi = {a / double(steps), 1.0 - a / double(steps)};
                const double v = negmult_rate(c, pi, lambda);
                if (v > best_val) best_val = v, best = pi;
                continue;
            }
            for (int b = 0; a + b <= steps; ++b) {
                pi = {a / double(steps), b / double(steps), (steps - a - b) / double(steps)};
                const double v = negmult_rate(c, pi, lambda);
                if (v > best_val) best_val = v, best = pi;
            }
        }
    }
    for (double h = 0.05; h > 1e-13; h *= 0.5) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j || best[j] < h) continue;
                    auto trial = best;
                    trial[i] += h;
                    trial[j] -= h;
                    const double v = negmult_rate(c, trial, lambda);
                    if (v > best_val) best_val = v, best = trial, improved = true;
                }
            }
        }
    }
    return best_val;
}

void for_each_shell_index(int n, int total, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> k(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == n - 1) {
            k[pos] = remaining;
            visit(k);
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            k[pos] = v;
            rec(pos + 1, remaining - v);
        }
    };
    rec(0, total);
}

double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

double truncated_first_moment(const CopulaJumps& cop, int coord) {
    const int n = static_cast<int>(cop.marginals.size());
    if (n == 1) {
        const auto& m = cop.marginals[0];
        auto f = [&](double y) { return y * (m.density(y) - m.density(-y)); };
        if (cop.trunc == 0.0) return quad::integrate(f, 0.0, kInf).value;
        return half_line(f, cop.trunc).value;
    }
    double acc = 0.0;
    for_each_copula_node(cop, 1, 16, 1.0, [&](const double* x, double w) { acc += w * x[coord]; });
    return acc;
}

double full_first_moment(const Marginal& m) {
    if (m.family == MarginalFamily::gamma) return m.first / m.second;
    return m.first * std::tan(m.second / 2.0);
}

}  // namespace

// ---------------------------------------------------------------------------

Marginal Marginal::gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) throw ParameterError("gamma marginal requires shape > 0 and rate > 0");
    return {MarginalFamily::gamma, shape, rate};
}

Marginal Marginal::meixner(double m, double a) {
    if (!(m > 0.0) || !(std::abs(a) < kPi)) throw ParameterError("Meixner marginal requires m > 0 and |a| < pi");
    return {MarginalFamily::meixner, m, a};
}

double Marginal::density(double x) const {
    if (x == 0.0) return 0.0;
    if (family == MarginalFamily::gamma) return x > 0.0 ? first * std::exp(-second * x) / x : 0.0;
    // x sinh(pi x) = |x| e^{pi|x|} (1 - e^{-2 pi |x|}) / 2
    const double ax = std::abs(x);
    return 2.0 * first * std::exp(second * x - kPi * ax) / (ax * -std::expm1(-2.0 * kPi * ax));
}

bool Marginal::supports(bool positive_side) const { return family == MarginalFamily::meixner || positive_side; }

double Marginal::decay_rate(bool positive_side) const {
    if (family == MarginalFamily::gamma) return second;
    return positive_side ? kPi - second : kPi + second;
}

double tail_integral(const Marginal& marginal, double x) {
    if (x == 0.0) throw DomainError("tail integral is undefined at 0");
    if (!std::isfinite(x)) return 0.0;
    const bool positive = x > 0.0;
    if (!marginal.supports(positive)) return 0.0;
    const double ax = std::abs(x);
    if (ax < kTailCutoff) throw NumericError("tail integral diverges: |x| below cutoff of an infinite-activity marginal", kInf);
    const double sign = positive ? 1.0 : -1.0;
    auto f = [&](double y) { return marginal.density(sign * y); };
    return sign * half_line(f, ax).value;
}

NegativeMultinomialJumps NegativeMultinomialJumps::make(double lambda, double mu, std::vector<double> lambdas) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("negative multinomial requires 0 < lambda < 1");
    if (!(mu > 0.0)) throw ParameterError("negative multinomial requires mu > 0");
    if (lambdas.empty()) throw DimensionError("negative multinomial needs at least one lambda_i");
    double sum = 0.0;
    for (double l : lambdas) {
        if (!(mu * l > 0.0 && mu * l < 1.0)) throw ParameterError("negative multinomial requires 0 < mu lambda_i < 1");
        sum += l;
    }
    if (std::abs(lambda + mu * sum - 1.0) > 1e-12)
        throw ParameterError("negative multinomial requires lambda + mu * sum(lambda_i) = 1");
    return {lambda, mu, std::move(lambdas)};
}

double NegativeMultinomialJumps::total_weight() const {
    double s = 0.0;
    for (double l : lambdas) s += mu * l;
    return s;
}

// ---------------------------------------------------------------------------

LevyModel::LevyModel(std::vector<double> drift, Eigen::MatrixXd sigma, JumpMeasure jumps, bool compensate_small_jumps)
    : jumps_(std::move(jumps)), compensate_(compensate_small_jumps) {
    n_ = static_cast<int>(drift.size());
    if (n_ < 1) throw DimensionError("model dimension must be >= 1");
    drift_ = Eigen::Map<const Eigen::VectorXd>(drift.data(), n_);
    if (sigma.size() == 0) sigma = Eigen::MatrixXd::Zero(n_, n_);
    if (sigma.rows() != n_ || sigma.cols() != n_) throw DimensionError("sigma must be n x n");
    if (!sigma.allFinite() || !drift_.allFinite()) throw ParameterError("drift and sigma must be finite");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 0.0) throw ParameterError("sigma must be symmetric");
    sigma_ = std::move(sigma);
    if (n_ > 0 && sigma_.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
        const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        if (es.eigenvalues().minCoeff() < -1e-12 * scale) throw ParameterError("sigma must be positive semidefinite");
    }
    std::visit(
        [&](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, DiscreteJumps>) {
                for (const auto& a : j.atoms) {
                    if (static_cast<int>(a.x.size()) != n_) throw DimensionError("atom length must equal n");
                    if (!(a.rate > 0.0) || !std::isfinite(a.rate)) throw ParameterError("atom intensities must be > 0");
                    if (std::all_of(a.x.begin(), a.x.end(), [](double v) { return v == 0.0; }))
                        throw DomainError("atoms must be nonzero vectors");
                }
            } else if constexpr (std::is_same_v<T, CopulaJumps>) {
                validate_copula(j, n_);
            } else {
                if (static_cast<int>(j.lambdas.size()) != n_) throw DimensionError("negative multinomial needs n lambdas");
                NegativeMultinomialJumps::make(j.lambda, j.mu, j.lambdas);
            }
        },
        jumps_);
}

LevyModel LevyModel::brownian(Eigen::MatrixXd sigma) {
    const auto n = static_cast<std::size_t>(sigma.rows());
    return LevyModel(std::vector<double>(n, 0.0), std::move(sigma), DiscreteJumps{});
}

bool LevyModel::has_brownian() const { return sigma_.cwiseAbs().maxCoeff() > 0.0; }

bool LevyModel::finite_activity() const {
    if (const auto* c = std::get_if<CopulaJumps>(&jumps_)) return c->trunc > 0.0;
    return true;
}

std::string LevyModel::activity_class() const {
    if (const auto* d = std::get_if<DiscreteJumps>(&jumps_)) return d->atoms.empty() ? "none" : "finite";
    if (const auto* c = std::get_if<CopulaJumps>(&jumps_)) return c->trunc > 0.0 ? "truncated-infinite" : "infinite";
    return "finite";
}

Eigen::VectorXd LevyModel::effective_drift() const {
    Eigen::VectorXd d = drift_;
    if (!compensate_) return d;
    if (const auto* c = std::get_if<CopulaJumps>(&jumps_)) {
        if (c->trunc == 0.0) return d;
        for (int i = 0; i < n_; ++i) d[i] += full_first_moment(c->marginals[i]) - truncated_first_moment(*c, i);
    }
    return d;
}

LevyModel LevyModel::with_truncation(double trunc) const {
    auto jumps = jumps_;
    if (auto* c = std::get_if<CopulaJumps>(&jumps)) c->trunc = trunc;
    std::vector<double> d(drift_.data(), drift_.data() + n_);
    return LevyModel(std::move(d), sigma_, std::move(jumps), compensate_);
}

json LevyModel::to_json() const {
    json j;
    j["n"] = n_;
    j["drift"] = std::vector<double>(drift_.data(), drift_.data() + n_);
    json sig = json::array();
    for (int r = 0; r < n_; ++r) {
        json row = json::array();
        for (int c = 0; c < n_; ++c) row.push_back(sigma_(r, c));
        sig.push_back(row);
    }
    j["sigma"] = sig;
    if (compensate_) j["compensate_small_jumps"] = true;
    std::visit(
        [&](const auto& jm) {
            using T = std::decay_t<decltype(jm)>;
            if constexpr (std::is_same_v<T, DiscreteJumps>) {
                json atoms = json::array();
                for (const auto& a : jm.atoms) atoms.push_back({{"x", a.x}, {"rate", a.rate}});
                j["jumps"] = {{"kind", "discrete"}, {"atoms", atoms}};
            } else if constexpr (std::is_same_v<T, CopulaJumps>) {
                json out;
                if (jm.kind == CopulaKind::gamma) {
                    out["kind"] = "gamma_copula";
                    std::vector<double> shape, rate;
                    for (const auto& m : jm.marginals) shape.push_back(m.first), rate.push_back(m.second);
                    out["shape"] = shape;
                    out["rate"] = rate;
                } else if (jm.kind == CopulaKind::meixner) {
                    out["kind"] = "meixner_copula";
                    std::vector<double> mm, aa;
                    for (const auto& m : jm.marginals) mm.push_back(m.first), aa.push_back(m.second);
                    out["m"] = mm;
                    out["a"] = aa;
                } else {
                    out["kind"] = "marginal_copula";
                    json ms = json::array();
                    for (const auto& m : jm.marginals) ms.push_back(marginal_to_json(m));
                    out["marginals"] = ms;
                }
                out["theta"] = jm.clayton.theta;
                out["eta"] = jm.clayton.eta;
                out["trunc"] = jm.trunc;
                j["jumps"] = out;
            } else {
                j["jumps"] = {{"kind", "negative_multinomial"}, {"lambda", jm.lambda}, {"mu", jm.mu}, {"lambdas", jm.lambdas}};
            }
        },
        jumps_);
    return j;
}

LevyModel LevyModel::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("model must be a JSON object");
    if (!j.contains("n") || !j.at("n").is_number_integer()) throw ValidationError("missing integer field 'n'");
    const int n = j.at("n").get<int>();
    if (n < 1) throw DimensionError("'n' must be >= 1");
    std::vector<double> drift = j.contains("drift") ? read_vector(j, "drift") : std::vector<double>(n, 0.0);
    if (static_cast<int>(drift.size()) != n) throw DimensionError("'drift' must have n entries");
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
    if (j.contains("sigma")) {
        const auto& s = j.at("sigma");
        if (!s.is_array() || static_cast<int>(s.size()) != n) throw DimensionError("'sigma' must be an n x n array");
        for (int r = 0; r < n; ++r) {
            if (!s[r].is_array() || static_cast<int>(s[r].size()) != n) throw DimensionError("'sigma' must be an n x n array");
            for (int c = 0; c < n; ++c) {
                if (!s[r][c].is_number()) throw ValidationError("'sigma' entries must be numbers");
                sigma(r, c) = s[r][c].get<double>();
            }
        }
    }
    const bool compensate = j.value("compensate_small_jumps", false);
    JumpMeasure jumps = DiscreteJumps{};
    if (j.contains("jumps")) {
        const auto& jj = j.at("jumps");
        if (!jj.is_object() || !jj.contains("kind") || !jj.at("kind").is_string())
            throw ValidationError("'jumps' must be an object with a string 'kind'");
        const auto kind = jj.at("kind").get<std::string>();
        if (kind == "discrete") {
            DiscreteJumps d;
            if (jj.contains("atoms")) {
                if (!jj.at("atoms").is_array()) throw ValidationError("'atoms' must be an array");
                for (const auto& a : jj.at("atoms")) {
                    if (!a.is_object()) throw ValidationError("each atom must be an object {x, rate}");
                    d.atoms.push_back({read_vector(a, "x"), read_number(a, "rate")});
                }
            }
            jumps = d;
        } else if (kind == "gamma_copula" || kind == "meixner_copula" || kind == "marginal_copula") {
            CopulaJumps c;
            c.clayton = {read_number_or(jj, "theta", 1.0), read_number_or(jj, "eta", 1.0)};
            c.trunc = read_number_or(jj, "trunc", 0.0);
            if (kind == "gamma_copula") {
                c.kind = CopulaKind::gamma;
                const auto shape = read_vector(jj, "shape");
                const auto rate = read_vector(jj, "rate");
                if (shape.size() != rate.size()) throw DimensionError("'shape' and 'rate' lengths differ");
                for (std::size_t i = 0; i < shape.size(); ++i) c.marginals.push_back(Marginal::gamma(shape[i], rate[i]));
            } else if (kind == "meixner_copula") {
                c.kind = CopulaKind::meixner;
                const auto mm = read_vector(jj, "m");
                const auto aa = read_vector(jj, "a");
                if (mm.size() != aa.size()) throw DimensionError("'m' and 'a' lengths differ");
                for (std::size_t i = 0; i < mm.size(); ++i) c.marginals.push_back(Marginal::meixner(mm[i], aa[i]));
            } else {
                c.kind = CopulaKind::generic;
                if (!jj.contains("marginals") || !jj.at("marginals").is_array()) throw ValidationError("missing 'marginals'");
                for (const auto& m : jj.at("marginals")) c.marginals.push_back(marginal_from_json(m));
            }
            jumps = c;
        } else if (kind == "negative_multinomial") {
            jumps = NegativeMultinomialJumps::make(read_number(jj, "lambda"), read_number(jj, "mu"), read_vector(jj, "lambdas"));
        } else {
            throw ValidationError("unknown jump kind '" + kind + "'");
        }
    }
    return LevyModel(std::move(drift), std::move(sigma), std::move(jumps), compensate);
}

std::uint64_t LevyModel::fingerprint() const { return fnv1a(to_json().dump()); }

LevyModel make_gamma_copula(std::vector<double> shapes, std::vector<double> rates, Clayton clayton, double trunc,
                            std::vector<double> drift) {
    if (shapes.size() != rates.size()) throw DimensionError("shape and rate lengths differ");
    CopulaJumps c;
    c.kind = CopulaKind::gamma;
    c.clayton = clayton;
    c.trunc = trunc;
    for (std::size_t i = 0; i < shapes.size(); ++i) c.marginals.push_back(Marginal::gamma(shapes[i], rates[i]));
    if (drift.empty()) drift.assign(shapes.size(), 0.0);
    return LevyModel(std::move(drift), Eigen::MatrixXd(), c);
}

LevyModel make_meixner_copula(std::vector<double> m, std::vector<double> a, Clayton clayton, double trunc,
                              std::vector<double> drift) {
    if (m.size() != a.size()) throw DimensionError("m and a lengths differ");
    CopulaJumps c;
    c.kind = CopulaKind::meixner;
    c.clayton = clayton;
    c.trunc = trunc;
    for (std::size_t i = 0; i < m.size(); ++i) c.marginals.push_back(Marginal::meixner(m[i], a[i]));
    if (drift.empty()) drift.assign(m.size(), 0.0);
    return LevyModel(std::move(drift), Eigen::MatrixXd(), c);
}

// ---------------------------------------------------------------------------

double clayton_F(const std::vector<double>& u, double theta, double eta) {
    check_clayton(theta, eta);
    const std::size_t n = u.size();
    if (n < 2) throw DimensionError("the Clayton Levy copula is defined for n >= 2");
    std::vector<double> absu(n);
    bool nonneg = true;
    for (std::size_t j = 0; j < n; ++j) {
        if (u[j] == 0.0) throw DomainError("Clayton copula argument has a zero component");
        absu[j] = std::abs(u[j]);
        if (u[j] < 0.0) nonneg = !nonneg;
    }
    double log_s = 0.0;
    log_clayton_core(absu, theta, log_s);
    const double core = std::exp(-log_s / theta);
    const double scale = std::ldexp(1.0, 2 - static_cast<int>(n));
    return scale * core * (nonneg ? eta : -(1.0 - eta));
}

double clayton_mixed_partial(const std::vector<double>& u, double theta, double eta) {
    check_clayton(theta, eta);
    const std::size_t n = u.size();
    if (n < 2 || n > 3) throw CapabilityError("Clayton mixed partial implemented for n in {2, 3}");
    std::vector<double> absu(n);
    bool nonneg = true;
    for (std::size_t j = 0; j < n; ++j) {
        if (u[j] == 0.0) throw DomainError("Clayton copula argument has a zero component");
        absu[j] = std::abs(u[j]);
        if (u[j] < 0.0) nonneg = !nonneg;
    }
    const double w = orthant_weight(nonneg, eta);
    if (w == 0.0) return 0.0;
    double log_s = 0.0;
    log_clayton_core(absu, theta, log_s);
    double log_prod = 0.0;
    for (double v : absu) log_prod += std::log(v);
    // n = 2: (1 + theta) prod|u|^{-theta-1} S^{-1/theta-2}
    // n = 3: (1 + theta)(1 + 2 theta) prod|u|^{-theta-1} S^{-1/theta-3}
    const double c = n == 2 ? (1.0 + theta) : (1.0 + theta) * (1.0 + 2.0 * theta);
    const double scale = n == 2 ? 1.0 : 0.5;
    return scale * w * c * std::exp(-(theta + 1.0) * log_prod - (1.0 / theta + static_cast<double>(n)) * log_s);
}

double copula_levy_density(const CopulaJumps& cop, const std::vector<double>& x) {
    const std::size_t n = cop.marginals.size();
    if (x.size() != n) throw DimensionError("point length must equal copula dimension");
    if (n > 3) throw CapabilityError("copula Levy density implemented for n <= 3");
    for (double v : x)
        if (v == 0.0) throw DomainError("copula Levy density is undefined on coordinate axes");
    if (n == 1) return cop.marginals[0].density(x[0]);
    double marg = 1.0;
    std::vector<double> xi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = cop.marginals[i].density(x[i]);
        if (d == 0.0) return 0.0;
        marg *= d;
    }
    for (std::size_t i = 0; i < n; ++i) xi[i] = tail_integral(cop.marginals[i], x[i]);
    return clayton_mixed_partial(xi, cop.clayton.theta, cop.clayton.eta) * marg;
}

std::vector<OrthantMass> copula_orthant_masses(const CopulaJumps& cop) {
    const std::size_t n = cop.marginals.size();
    std::vector<OrthantMass> out;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        OrthantMass om;
        om.mask = mask;
        bool supported = true;
        for (std::size_t i = 0; i < n; ++i) {
            const bool neg = (mask >> i) & 1u;
            if (!cop.marginals[i].supports(!neg)) {
                supported = false;
                break;
            }
            om.tail_bounds.push_back(cop.trunc > 0.0 ? std::abs(tail_integral(cop.marginals[i], neg ? -cop.trunc : cop.trunc))
                                                      : kInf);
        }
        if (!supported) continue;
        if (n == 1) {
            om.mass = om.tail_bounds[0];
        } else {
            const bool nonneg = std::popcount(mask) % 2 == 0;
            const double w = orthant_weight(nonneg, cop.clayton.eta);
            if (w == 0.0) continue;
            double log_s = 0.0;
            if (std::isinf(om.tail_bounds[0])) {
                om.mass = kInf;
            } else {
                log_clayton_core(om.tail_bounds, cop.clayton.theta, log_s);
                om.mass = std::ldexp(1.0, 2 - static_cast<int>(n)) * w * std::exp(-log_s / cop.clayton.theta);
            }
        }
        out.push_back(std::move(om));
    }
    return out;
}

void for_each_copula_node(const CopulaJumps& cop, int max_power, int points, double upper_scale,
                          const std::function<void(const double* x, double weight)>& visit) {
    const std::size_t n = cop.marginals.size();
    if (!(cop.trunc > 0.0)) throw ConfigurationError("tensor-grid quadrature needs a truncation level > 0");
    if (n > 3) throw CapabilityError("copula quadrature implemented for n <= 3");
    std::vector<std::vector<SideNodes>> nodes(n);
    for (std::size_t i = 0; i < n; ++i)
        nodes[i] = coordinate_nodes(cop.marginals[i], cop.trunc, max_power, points, upper_scale, 0.0);

    std::vector<double> x(n), xi(n);
    const double theta = cop.clayton.theta;
    const double c = n == 1 ? 1.0 : n == 2 ? (1.0 + theta) : (1.0 + theta) * (1.0 + 2.0 * theta);
    const double scale = n == 3 ? 0.5 : 1.0;
    const double expo = 1.0 / theta + static_cast<double>(n);

    // visit every orthant combination of sides
    std::function<void(std::size_t, double, double, bool)> rec = [&](std::size_t i, double wprod, double logprod, bool nonneg) {
        if (i == n) {
            double dens = 1.0;
            if (n >= 2) {
                const double w = orthant_weight(nonneg, cop.clayton.eta);
                if (w == 0.0) return;
                double log_s = 0.0;
                log_clayton_core(xi, theta, log_s);
                dens = scale * w * c * std::exp(-(theta + 1.0) * logprod - expo * log_s);
            }
            visit(x.data(), wprod * dens);
            return;
        }
        for (const auto& side : nodes[i]) {
            for (std::size_t k = 0; k < side.x.size(); ++k) {
                x[i] = side.x[k];
                xi[i] = side.tail[k];
                rec(i + 1, wprod * side.w[k] * side.dens[k], logprod + std::log(side.tail[k]), side.negative ? !nonneg : nonneg);
            }
        }
    };
    rec(0, 1.0, 0.0, true);
}

double negmult_levy_mass(const NegativeMultinomialJumps& nm, const MultiIndex& k) {
    if (k.size() != nm.lambdas.size()) throw DimensionError("index length must equal dimension");
    if (k.degree() < 1) throw DomainError("negative multinomial mass requires |k| >= 1");
    double log_v = log_factorial(k.degree() - 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
        log_v -= log_factorial(k[i]);
        log_v += k[i] * std::log(nm.mu * nm.lambdas[i]);
    }
    return std::exp(log_v);
}

Hypothesis1Report check_hypothesis1(const LevyModel& model, double lambda, double eps) {
    if (!(lambda > 0.0) || !(eps > 0.0)) throw ParameterError("exponential moment check needs lambda > 0 and eps > 0");
    Hypothesis1Report r;
    const int n = model.dimension();
    std::visit(
        [&](const auto& jm) {
            using T = std::decay_t<decltype(jm)>;
            if constexpr (std::is_same_v<T, DiscreteJumps>) {
                r.method = jm.atoms.empty() ? "none" : "exact-sum";
                for (const auto& a : jm.atoms) {
                    const double norm = std::sqrt(std::inner_product(a.x.begin(), a.x.end(), a.x.begin(), 0.0));
                    if (norm >= eps) r.value += a.rate * std::exp(lambda * norm);
                }
                r.holds = std::isfinite(r.value);
            } else if constexpr (std::is_same_v<T, NegativeMultinomialJumps>) {
                r.method = "series";
                std::vector<double> c;
                for (double l : jm.lambdas) c.push_back(jm.mu * l);
                const double g = negmult_max_rate(c, lambda);
                if (g >= -1e-12) {
                    r.holds = false;
                    r.value = kInf;
                    r.diagnostic = "series diverges: exponential growth rate " + std::to_string(g) + " >= 0";
                    return;
                }
                // shell N is bounded by C(N+n-1, n-1) exp(N g) / N
                auto shell_bound = [&](int N) {
                    return std::exp(std::lgamma(N + n) - std::lgamma(N + 1.0) - std::lgamma(double(n)) + N * g) / N;
                };
                int K = 1;
                for (;; ++K) {
                    double tail = 0.0;
                    for (int N = K + 1; N < K + 100000; ++N) {
                        const double b = shell_bound(N);
                        tail += b;
                        if (b < 1e-30 * tail && N > K + 10) break;
                    }
                    if (tail < 1e-14) {
                        r.error_bound = tail;
                        break;
                    }
                    if (K > 100000) throw NumericError("exponential moment series tail bound did not fall below 1e-14", tail);
                }
                for (int N = 1; N <= K; ++N) {
                    for_each_shell_index(n, N, [&](const std::vector<int>& k) {
                        double norm2 = 0.0;
                        for (int v : k) norm2 += double(v) * v;
                        const double norm = std::sqrt(norm2);
                        if (norm >= eps) r.value += std::exp(lambda * norm) * negmult_levy_mass(jm, MultiIndex(k));
                    });
                }
                r.holds = true;
                r.diagnostic = "summed shells |k| <= " + std::to_string(K);
            } else {
                r.method = "quadrature";
                for (int i = 0; i < n; ++i) {
                    for (bool pos : {true, false}) {
                        if (jm.marginals[i].supports(pos) && lambda >= jm.marginals[i].decay_rate(pos)) {
                            r.holds = false;
                            r.value = kInf;
                            r.diagnostic = "exp(lambda |x|) outgrows the decay rate of marginal " + std::to_string(i);
                            return;
                        }
                    }
                }
                try {
                    if (n == 1) {
                        const auto& m = jm.marginals[0];
                        const double lo = std::max(eps, jm.trunc);
                        auto f = [&](double y) {
                            const double d = m.density(y) + m.density(-y);
                            return d > 0.0 ? std::exp(lambda * y + std::log(d)) : 0.0;
                        };
                        const auto res = half_line(f, lo);
                        r.value = res.value;
                        r.error_bound = res.error;
                    } else {
                        // full tilted integral is smooth on the grid; the ball |x| < eps is removed separately
                        auto run = [&](double scale, int points, bool ball) {
                            double acc = 0.0;
                            for_each_copula_node(jm, 0, points, scale, [&](const double* x, double w) {
                                double norm2 = 0.0;
                                for (int i = 0; i < n; ++i) norm2 += x[i] * x[i];
                                const double norm = std::sqrt(norm2);
                                if (w > 0.0 && (!ball || norm < eps)) acc += std::exp(lambda * norm + std::log(w));
                            });
                            return acc;
                        };
                        // stretch the cutoff by the tilt so the integrand has decayed
                        double min_rate = kInf;
                        for (const auto& m : jm.marginals)
                            for (bool pos : {true, false})
                                if (m.supports(pos)) min_rate = std::min(min_rate, m.decay_rate(pos));
                        const double stretch = min_rate / (min_rate - lambda * std::sqrt(double(n)) > 0.0
                                                               ? min_rate - lambda * std::sqrt(double(n))
                                                               : min_rate - lambda);
                        const int coarse = n == 2 ? 16 : 8;
                        const int fine = n == 2 ? 24 : 12;
                        const double a = run(stretch, coarse, false);
                        const double b = run(2.0 * stretch, coarse, false);
                        if (!(std::abs(b - a) <= 1e-6 * std::abs(b))) {
                            r.holds = false;
                            r.value = b;
                            r.error_bound = std::abs(b - a);
                            r.diagnostic = "quadrature did not converge when the cutoff was doubled";
                            return;
                        }
                        double inner = 0.0, inner_err = 0.0;
                        if (eps > jm.trunc) {
                            const double c1 = run(stretch, coarse, true);
                            inner = run(stretch, fine, true);
                            inner_err = std::abs(inner - c1);
                        }
                        r.value = b - inner;
                        r.error_bound = std::abs(b - a) + inner_err;
                    }
                    r.holds = std::isfinite(r.value);
                } catch (const NumericError& e) {
                    r.holds = false;
                    r.diagnostic = e.what();
                }
            }
        },
        model.jumps());
    return r;
}

json to_json(const Hypothesis1Report& r) {
    json j = {{"holds", r.holds}, {"method", r.method}, {"error_bound", r.error_bound}};
    j["value"] = std::isfinite(r.value) ? json(r.value) : json("inf");
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    return j;
}

}  // namespace levychaos
