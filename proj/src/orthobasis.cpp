#include "levychaos/orthobasis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "levychaos/errors.hpp"

namespace levychaos {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Sweep {
    Eigen::MatrixXd coeffs;  // rows = retained, cols = candidates
    std::vector<int> retained;
    std::vector<double> norms;
    std::vector<int> dropped;
    std::vector<double> dropped_residuals;
};

Sweep run_mgs(const Eigen::MatrixXd& G, double tol, int passes) {
    const int m = static_cast<int>(G.rows());
    Sweep s;
    std::vector<Eigen::VectorXd> h, gh;
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        v[j] = 1.0;
        for (int pass = 0; pass < passes; ++pass) {
            for (std::size_t i = 0; i < h.size(); ++i) {
                const double proj = v.dot(gh[i]) / s.norms[i];
                v -= proj * h[i];
            }
        }
        v[j] = 1.0;
        const Eigen::VectorXd gv = G * v;
        const double r = v.dot(gv);
        if (r < -tol) throw NumericError("Gram matrix is indefinite at index position " + std::to_string(j), r);
        if (r <= tol) {
            s.dropped.push_back(j);
            s.dropped_residuals.push_back(r);
            continue;
        }
        h.push_back(v);
        gh.push_back(gv);
        s.retained.push_back(j);
        s.norms.push_back(r);
    }
    s.coeffs.resize(static_cast<Eigen::Index>(h.size()), m);
    for (std::size_t i = 0; i < h.size(); ++i) s.coeffs.row(static_cast<Eigen::Index>(i)) = h[i].transpose();
    return s;
}

}  // namespace

double inner_product(const MomentTable& table, const Eigen::MatrixXd& sigma, const MultiIndex& p, const MultiIndex& q) {
    if (p.size() != q.size()) throw DimensionError("inner product indices differ in length");
    if (p.degree() < 1 || q.degree() < 1) throw DomainError("inner product needs |p|, |q| >= 1");
    double v = table.value(p + q);
    const int i = p.unit_coordinate();
    const int j = q.unit_coordinate();
    if (i >= 0 && j >= 0 && sigma.size() > 0) v += sigma(i, j);
    return v;
}

GramMatrix gram_matrix(const MomentTable& table, const Eigen::MatrixXd& sigma, int d_max) {
    if (d_max < 1) throw ParameterError("Gram matrix needs d_max >= 1");
    if (2 * d_max > table.coverage())
        throw CoverageError("moment table covers degree " + std::to_string(table.coverage()) + ", Gram matrix needs " +
                            std::to_string(2 * d_max));
    const int n = table.dimension();
    if (sigma.size() > 0 && (sigma.rows() != n || sigma.cols() != n)) throw DimensionError("sigma must be n x n");
    GramMatrix g;
    g.indices = enumerate_up_to(n, d_max);
    g.model_fingerprint = table.model_fingerprint();
    const auto m = static_cast<Eigen::Index>(g.indices.size());
    g.matrix.resize(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) {
            const double v = inner_product(table, sigma, g.indices[a], g.indices[b]);
            g.matrix(a, b) = v;
            g.matrix(b, a) = v;
        }
    }
    return g;
}

std::string GramMatrix::to_csv() const {
    std::ostringstream os;
    os << "index";
    for (const auto& p : indices) os << ",\"" << p.to_string() << '"';
    os << '\n';
    for (Eigen::Index a = 0; a < matrix.rows(); ++a) {
        os << '"' << indices[a].to_string() << '"';
        for (Eigen::Index b = 0; b < matrix.cols(); ++b) os << ',' << fmt(matrix(a, b));
        os << '\n';
    }
    return os.str();
}

MartingaleBasis orthogonalize(const GramMatrix& gram, const OrthogonalizeOptions& options) {
    const Eigen::MatrixXd& G = gram.matrix;
    const auto m = G.rows();
    if (G.cols() != m || static_cast<Eigen::Index>(gram.indices.size()) != m)
        throw DimensionError("Gram matrix and index list sizes differ");
    if (m == 0) throw DimensionError("Gram matrix is empty");
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, G.cwiseAbs().maxCoeff()))
        throw NumericError("Gram matrix is not symmetric");
    const double max_diag = G.diagonal().maxCoeff();
    double tol = options.drop_tol;
    if (!(tol > 0.0)) tol = std::max(1e-10 * max_diag, 1e-14);

    bool second = options.reorthogonalize;
    Sweep s = run_mgs(G, tol, second ? 2 : 1);
    double cond = 1.0;
    if (!s.norms.empty()) cond = max_diag / *std::min_element(s.norms.begin(), s.norms.end());
    if (!second && options.auto_reorthogonalize && cond > 1e8) {
        second = true;
        s = run_mgs(G, tol, 2);
        if (!s.norms.empty()) cond = max_diag / *std::min_element(s.norms.begin(), s.norms.end());
    }

    MartingaleBasis b;
    b.indices_ = gram.indices;
    b.fingerprint_ = gram.model_fingerprint;
    b.drop_tol_ = tol;
    b.condition_ = cond;
    b.reorthogonalized_ = second;
    b.max_degree_ = gram.indices.back().degree();
    for (int j : s.retained) {
        b.retained_.push_back(gram.indices[j]);
        b.retained_pos_.push_back(j);
    }
    for (int j : s.dropped) b.dropped_.push_back(gram.indices[j]);
    b.dropped_residuals_ = s.dropped_residuals;
    b.norms_ = s.norms;
    b.coefficients_ = s.coeffs;
    b.projections_ = G * s.coeffs.transpose();
    for (Eigen::Index p = 0; p < b.projections_.cols(); ++p) b.projections_.col(p) /= s.norms[static_cast<std::size_t>(p)];
    return b;
}

double MartingaleBasis::orthogonality_certificate(const Eigen::MatrixXd& gram) const {
    if (coefficients_.rows() == 0) return 0.0;
    const Eigen::MatrixXd P = coefficients_ * gram * coefficients_.transpose();
    double off = 0.0;
    for (Eigen::Index a = 0; a < P.rows(); ++a)
        for (Eigen::Index b = 0; b < P.cols(); ++b)
            if (a != b) off = std::max(off, std::abs(P(a, b)));
    return off / P.diagonal().cwiseAbs().maxCoeff();
}

nlohmann::json MartingaleBasis::to_json() const {
    nlohmann::json coeffs = nlohmann::json::array();
    for (Eigen::Index r = 0; r < coefficients_.rows(); ++r) {
        std::vector<double> row(coefficients_.cols());
        for (Eigen::Index c = 0; c < coefficients_.cols(); ++c) row[c] = coefficients_(r, c);
        coeffs.push_back(row);
    }
    return {{"indices", retained_},    {"candidates", indices_},   {"coefficients", coeffs},
            {"norms", norms_},         {"dropped", dropped_},      {"dropped_residuals", dropped_residuals_},
            {"drop_tol", drop_tol_},   {"reorthogonalized", reorthogonalized_}};
}

std::string MartingaleBasis::to_csv() const {
    std::ostringstream os;
    os << "index";
    for (const auto& p : indices_) os << ",\"" << p.to_string() << '"';
    os << '\n';
    for (Eigen::Index r = 0; r < coefficients_.rows(); ++r) {
        os << '"' << retained_[r].to_string() << '"';
        for (Eigen::Index c = 0; c < coefficients_.cols(); ++c) os << ',' << fmt(coefficients_(r, c));
        os << '\n';
    }
    return os.str();
}

}  // namespace levychaos
