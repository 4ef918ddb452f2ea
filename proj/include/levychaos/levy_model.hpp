#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "levychaos/multiindex.hpp"

namespace levychaos {

// ---------------------------------------------------------------------------
// Jump-measure specifications
// ---------------------------------------------------------------------------

struct Atom {
    std::vector<double> x;  ///< jump vector, nonzero
    double rate = 0.0;      ///< intensity per unit time, > 0
};

/// Finite atomic Levy measure sum_j rate_j * delta_{x_j}.
struct DiscreteJumps {
    std::vector<Atom> atoms;
};

enum class MarginalFamily { gamma, meixner };

/// One-dimensional Levy density used as a copula marginal.
///   gamma:   shape * exp(-rate x) / x on x > 0
///   meixner: m * exp(a x) / (x sinh(pi x)) on x != 0, |a| < pi
struct Marginal {
    MarginalFamily family = MarginalFamily::gamma;
    double first = 1.0;   ///< gamma shape / meixner m
    double second = 1.0;  ///< gamma rate / meixner a

    static Marginal gamma(double shape, double rate);
    static Marginal meixner(double m, double a);

    double density(double x) const;
    bool supports(bool positive_side) const;
    /// Exponential decay rate of the density as |x| -> infinity on a side.
    double decay_rate(bool positive_side) const;
};

/// Tail integral U(x) = nu([x, inf)) for x > 0 and -nu((-inf, x]) for x < 0,
/// by adaptive quadrature (relative tolerance 1e-9). Throws DomainError for
/// x == 0 and NumericError when |x| is below the divergence cutoff of an
/// infinite-activity marginal.
double tail_integral(const Marginal& marginal, double x);

inline constexpr double kTailCutoff = 1e-300;

/// Parameters of the Clayton-type Levy copula
///   F(u) = 2^{2-n} (sum |u_j|^{-theta})^{-1/theta} (eta 1{prod u >= 0} - (1-eta) 1{prod u < 0}).
struct Clayton {
    double theta = 1.0;
    double eta = 1.0;
};

enum class CopulaKind { gamma, meixner, generic };

/// Marginals glued by a Clayton Levy copula, truncated to |x_i| >= trunc for
/// every coordinate (trunc = 0 means untruncated; only allowed for n = 1).
struct CopulaJumps {
    CopulaKind kind = CopulaKind::generic;
    std::vector<Marginal> marginals;
    Clayton clayton;
    double trunc = 0.0;
};

/// Negative multinomial (Pascal) process: discrete Levy measure on N_0^n,
///   v(k) = (|k|-1)! / (k_1! ... k_n!) prod (mu lambda_i)^{k_i}.
struct NegativeMultinomialJumps {
    double lambda = 0.5;
    double mu = 1.0;
    std::vector<double> lambdas;

    /// Validates 0 < lambda < 1, mu > 0, 0 < mu lambda_i < 1 and
    /// lambda + mu sum lambda_i = 1 within 1e-12.
    static NegativeMultinomialJumps make(double lambda, double mu, std::vector<double> lambdas);

    /// s = mu * sum lambda_i = 1 - lambda.
    double total_weight() const;
};

using JumpMeasure = std::variant<DiscreteJumps, CopulaJumps, NegativeMultinomialJumps>;

// ---------------------------------------------------------------------------
// LevyModel
// ---------------------------------------------------------------------------

/// Levy triplet (drift, Sigma, nu). The drift is that of the pure-jump
/// decomposition X(t) = drift t + W(t) + sum of jumps, so that
/// E[X_i(1)] = drift_i + int x_i nu(dx) on the (truncated) measure.
class LevyModel {
public:
    LevyModel(std::vector<double> drift, Eigen::MatrixXd sigma, JumpMeasure jumps,
              bool compensate_small_jumps = false);

    static LevyModel brownian(Eigen::MatrixXd sigma);

    int dimension() const noexcept { return n_; }
    const Eigen::VectorXd& drift() const noexcept { return drift_; }
    const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
    const JumpMeasure& jumps() const noexcept { return jumps_; }
    bool compensate_small_jumps() const noexcept { return compensate_; }

    bool has_brownian() const;
    /// True when the (truncated) jump intensity is finite.
    bool finite_activity() const;
    /// Short description: "none", "finite", "truncated-infinite", "infinite".
    std::string activity_class() const;

    /// Drift used by simulation and first moments: the declared drift plus,
    /// when compensation is enabled, int x nu(dx) over the removed small jumps.
    Eigen::VectorXd effective_drift() const;

    /// Same model with a different copula truncation level.
    LevyModel with_truncation(double trunc) const;

    nlohmann::json to_json() const;
    static LevyModel from_json(const nlohmann::json& j);

    /// FNV-1a hash of the canonical JSON form; tags derived tables and bases.
    std::uint64_t fingerprint() const;

private:
    int n_ = 0;
    Eigen::VectorXd drift_;
    Eigen::MatrixXd sigma_;
    JumpMeasure jumps_;
    bool compensate_ = false;
};

LevyModel make_gamma_copula(std::vector<double> shapes, std::vector<double> rates, Clayton clayton, double trunc,
                            std::vector<double> drift = {});
LevyModel make_meixner_copula(std::vector<double> m, std::vector<double> a, Clayton clayton, double trunc,
                              std::vector<double> drift = {});

// ---------------------------------------------------------------------------
// Copula machinery
// ---------------------------------------------------------------------------

/// Clayton-type Levy copula value F(u).
double clayton_F(const std::vector<double>& u, double theta, double eta);

/// Mixed partial d_1...d_n F(u) in closed form, n in {2, 3}.
double clayton_mixed_partial(const std::vector<double>& u, double theta, double eta);

/// nu(dx)/dx = d_1..d_n F |_{xi_i = U_i(x_i)} prod nu_i(x_i). For n = 1 this
/// is the marginal density. Throws CapabilityError for n > 3 and DomainError
/// when some x_i == 0. Truncation is not applied here.
double copula_levy_density(const CopulaJumps& cop, const std::vector<double>& x);

/// Tail-space mass of the truncated region within each orthant. Orthants are
/// encoded as bit masks (bit i set = coordinate i negative).
struct OrthantMass {
    unsigned mask = 0;
    double mass = 0.0;
    std::vector<double> tail_bounds;  ///< |U_i(+-trunc)| per coordinate
};
std::vector<OrthantMass> copula_orthant_masses(const CopulaJumps& cop);

/// Integrates g against the truncated copula Levy measure on a tensor grid of
/// composite Gauss-Legendre panels. `upper_scale` stretches the outer cutoff.
/// The callback receives the point and (quadrature weight * density).
void for_each_copula_node(const CopulaJumps& cop, int max_power, int points, double upper_scale,
                          const std::function<void(const double* x, double weight)>& visit);

// ---------------------------------------------------------------------------
// Negative multinomial and the exponential moment condition
// ---------------------------------------------------------------------------

/// v(k) for |k| >= 1.
double negmult_levy_mass(const NegativeMultinomialJumps& nm, const MultiIndex& k);

struct Hypothesis1Report {
    bool holds = false;
    double value = 0.0;       ///< int_{|x|>=eps} exp(lambda |x|) nu(dx) when finite
    double error_bound = 0.0;
    std::string method;       ///< "exact-sum", "series", "quadrature", "none"
    std::string diagnostic;
};

/// Evaluates int_{|x| >= eps} exp(lambda ||x||) nu(dx).
Hypothesis1Report check_hypothesis1(const LevyModel& model, double lambda, double eps);

nlohmann::json to_json(const Hypothesis1Report& r);

}  // namespace levychaos
