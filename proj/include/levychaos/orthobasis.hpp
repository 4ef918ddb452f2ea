#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "levychaos/moments.hpp"
#include "levychaos/multiindex.hpp"

namespace levychaos {

/// <Y^p, Y^q> = E[Y^p, Y^q](1) = m_{p+q} + Sigma_ij 1{p = e_i, q = e_j}.
double inner_product(const MomentTable& table, const Eigen::MatrixXd& sigma, const MultiIndex& p, const MultiIndex& q);

struct GramMatrix {
    std::vector<MultiIndex> indices;  ///< graded-lex, degrees 1..d_max
    Eigen::MatrixXd matrix;
    std::uint64_t model_fingerprint = 0;

    std::string to_csv() const;
};

GramMatrix gram_matrix(const MomentTable& table, const Eigen::MatrixXd& sigma, int d_max);

struct OrthogonalizeOptions {
    double drop_tol = 0.0;          ///< <= 0 selects 1e-10 * max diagonal (floor 1e-14)
    bool reorthogonalize = false;   ///< always run a second projection sweep
    bool auto_reorthogonalize = false;  ///< second sweep when the condition estimate exceeds 1e8
};

/// H^p = sum_q C[p][q] Y^q, one row per retained index, unit diagonal,
/// lower-triangular in graded-lex order.
class MartingaleBasis {
public:
    const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
    const std::vector<MultiIndex>& retained() const noexcept { return retained_; }
    /// Position of each retained index within indices().
    const std::vector<int>& retained_positions() const noexcept { return retained_pos_; }
    const std::vector<MultiIndex>& dropped() const noexcept { return dropped_; }
    const std::vector<double>& dropped_residuals() const noexcept { return dropped_residuals_; }
    /// retained x candidates.
    const Eigen::MatrixXd& coefficients() const noexcept { return coefficients_; }
    /// ||H^p||^2 per retained index.
    const std::vector<double>& norms() const noexcept { return norms_; }
    /// candidates x retained: Y^q = sum_p T[q][p] H^p.
    const Eigen::MatrixXd& projections() const noexcept { return projections_; }
    double drop_tol() const noexcept { return drop_tol_; }
    double condition_estimate() const noexcept { return condition_; }
    bool reorthogonalized() const noexcept { return reorthogonalized_; }
    std::uint64_t model_fingerprint() const noexcept { return fingerprint_; }
    int max_degree() const noexcept { return max_degree_; }

    /// Max |off-diagonal| of C G C^T divided by its max diagonal.
    double orthogonality_certificate(const Eigen::MatrixXd& gram) const;

    nlohmann::json to_json() const;
    std::string to_csv() const;

private:
    friend MartingaleBasis orthogonalize(const GramMatrix&, const OrthogonalizeOptions&);

    std::vector<MultiIndex> indices_, retained_, dropped_;
    std::vector<int> retained_pos_;
    std::vector<double> dropped_residuals_, norms_;
    Eigen::MatrixXd coefficients_, projections_;
    double drop_tol_ = 0.0;
    double condition_ = 1.0;
    bool reorthogonalized_ = false;
    std::uint64_t fingerprint_ = 0;
    int max_degree_ = 0;
};

/// Modified Gram-Schmidt in the Gram-matrix geometry, processing indices in
/// graded-lex order. Throws NumericError on an indefinite residual.
MartingaleBasis orthogonalize(const GramMatrix& gram, const OrthogonalizeOptions& options = {});

}  // namespace levychaos
