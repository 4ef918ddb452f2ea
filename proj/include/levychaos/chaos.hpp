#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include "levychaos/levy_model.hpp"
#include "levychaos/moments.hpp"
#include "levychaos/orthobasis.hpp"
#include "levychaos/simulate.hpp"

namespace levychaos {

using Rational = boost::multiprecision::cpp_rational;

/// Exact rational value of a finite double.
Rational exact_rational(double x);

/// Sparse polynomial with a fixed number of variables.
template <class Coef>
class BasicPolynomial {
public:
    using Exponents = std::vector<int>;
    using Terms = std::map<Exponents, Coef>;

    explicit BasicPolynomial(int nvars = 1) : nvars_(nvars) {}

    static BasicPolynomial constant(int nvars, const Coef& c) {
        BasicPolynomial p(nvars);
        p.add_term(Exponents(static_cast<std::size_t>(nvars), 0), c);
        return p;
    }

    int nvars() const noexcept { return nvars_; }
    const Terms& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }

    void add_term(const Exponents& e, const Coef& c) {
        if (c == Coef(0)) return;
        auto it = terms_.find(e);
        if (it == terms_.end()) {
            terms_.emplace(e, c);
            return;
        }
        it->second += c;
        if (it->second == Coef(0)) terms_.erase(it);
    }

    BasicPolynomial& operator+=(const BasicPolynomial& o) {
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }

    BasicPolynomial scaled(const Coef& s) const {
        BasicPolynomial p(nvars_);
        if (s == Coef(0)) return p;
        for (const auto& [e, c] : terms_) p.terms_.emplace(e, c * s);
        return p;
    }

    int total_degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int v : e) s += v;
            d = std::max(d, s);
        }
        return d;
    }

    friend bool operator==(const BasicPolynomial& a, const BasicPolynomial& b) {
        return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
    }

private:
    int nvars_;
    Terms terms_;
};

using Polynomial = BasicPolynomial<Rational>;
using RealPolynomial = BasicPolynomial<double>;

double evaluate(const Polynomial& p, const std::vector<double>& x);
double evaluate(const RealPolynomial& p, const std::vector<double>& x);
nlohmann::json to_json(const Polynomial& p, const std::vector<std::string>& names);
nlohmann::json to_json(const RealPolynomial& p, const std::vector<std::string>& names);

/// Variable names of an integrand with m integrators: T, t1, ..., tm.
std::vector<std::string> integrand_variables(std::size_t m);

/// int_{t0 < t_m < ... < t_1 <= T} h(T, t_1, ..., t_m) dY^{p_m}(t_m) ... dY^{p_1}(t_1).
/// integrators[0] is the outermost p_1.
struct ChaosTerm {
    std::vector<MultiIndex> integrators;
    Polynomial integrand{1};
};

bool operator==(const ChaosTerm& a, const ChaosTerm& b);

/// prod_i (X_i(t0 + t) - X_i(t0))^{k_i} = f(t) + sum of terms, with T = t0 + t.
struct ChaosExpansion {
    MultiIndex k;
    Rational t0 = 0;
    Polynomial constant{1};  ///< in the absolute time T
    Polynomial f{1};         ///< in the elapsed time t
    std::vector<ChaosTerm> terms;

    double anchor() const;
    nlohmann::json to_json() const;
};

inline constexpr int kDefaultKMax = 3;

ChaosExpansion expand_increment_product(const LevyModel& model, const MomentTable& table, const MultiIndex& k,
                                        double t0 = 0.0, int k_max = kDefaultKMax);

/// Same recursion with an explicit covariance matrix (empty or zero for none).
ChaosExpansion expand_increment_product(const Eigen::MatrixXd& sigma, const MomentTable& table, const MultiIndex& k,
                                        double t0 = 0.0, int k_max = kDefaultKMax);

double moment_function(const ChaosExpansion& expansion, double t);

/// Pathwise value of one iterated integral over (t0, t0 + t]. Brownian
/// increments enter as steps at the right ends of the grid cells.
double evaluate_iterated_integral(const SamplePath& path, const MomentTable& table, const ChaosTerm& term, double t0,
                                  double t);

/// f(t) plus every term, anchored at the expansion's t0.
double evaluate_expansion(const SamplePath& path, const MomentTable& table, const ChaosExpansion& expansion, double t);

/// prod_i (X_i(t0 + t) - X_i(t0))^{k_i} along the path.
double increment_product(const SamplePath& path, const MultiIndex& k, double t0, double t);

/// max_i |X_i(t) - drift_i t - sum of jumps up to t|.
double bounded_variation_residual(const SamplePath& path, double t);

// ---------------------------------------------------------------------------
// Orthogonalized form
// ---------------------------------------------------------------------------

/// Iterated integral against H^{r_1}, ..., H^{r_m}.
struct HChaosTerm {
    std::vector<MultiIndex> integrators;
    RealPolynomial integrand{1};
};

struct HChaosExpansion {
    MultiIndex k;
    double t0 = 0.0;
    RealPolynomial f{1};
    std::vector<HChaosTerm> terms;

    nlohmann::json to_json() const;
};

/// Rewrites every Y integrator through Y^q = sum_p T[q][p] H^p.
HChaosExpansion to_h_basis(const ChaosExpansion& expansion, const MartingaleBasis& basis);

double evaluate_iterated_integral(const SamplePath& path, const MomentTable& table, const MartingaleBasis& basis,
                                  const HChaosTerm& term, double t0, double t);
double evaluate_expansion(const SamplePath& path, const MomentTable& table, const MartingaleBasis& basis,
                          const HChaosExpansion& expansion, double t);

// ---------------------------------------------------------------------------
// Predictable form
// ---------------------------------------------------------------------------

/// Terms grouped by their outermost integrator. Each inner term keeps the
/// remaining integrators; an empty list is the deterministic part of Phi^p.
struct PredictableForm {
    MultiIndex k;
    Rational t0 = 0;
    Polynomial f{1};
    std::map<MultiIndex, std::vector<ChaosTerm>, GrlexLess> phi;

    nlohmann::json to_json() const;
};

PredictableForm to_predictable_form(const ChaosExpansion& expansion);
std::vector<ChaosTerm> flatten(const PredictableForm& form);

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

enum class CrpMode { exact, mc };

struct CrpOptions {
    CrpMode mode = CrpMode::exact;
    SimConfig sim;
    McOptions mc;
    double t0 = 0.0;
};

struct TermCovariance {
    std::vector<MultiIndex> a, b;
    McEstimate estimate;
};

struct CrpReport {
    MultiIndex k;
    CrpMode mode = CrpMode::exact;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    double max_residual_y = 0.0;  ///< exact mode
    double max_residual_h = 0.0;  ///< exact mode
    McEstimate residual_y;        ///< mc mode
    McEstimate residual_h;        ///< mc mode
    std::vector<TermCovariance> covariances;
    double max_abs_z = 0.0;

    nlohmann::json to_json() const;
};

/// Compares prod increments^k with its Y and H expansions on simulated paths
/// and estimates E[V_a V_b] for every pair of distinct H-integrator sequences.
CrpReport verify_crp(const LevyModel& model, const MomentTable& table, const MartingaleBasis& basis, const MultiIndex& k,
                     const CrpOptions& options);

}  // namespace levychaos
