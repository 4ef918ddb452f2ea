#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "levychaos/levy_model.hpp"
#include "levychaos/moments.hpp"
#include "levychaos/orthobasis.hpp"

namespace levychaos {

/// Philox4x32-10 counter-based generator. The key is the seed and the upper
/// counter words hold the stream id, so every (seed, stream) pair yields an
/// independent reproducible sequence.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32(std::uint64_t seed, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }
    result_type operator()();

    /// One Philox4x32-10 block for the given counter and key.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

private:
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

/// One trajectory on [0, T]. The Brownian part is stored as increments over
/// uniform cells of width dt and treated as a step process that moves at the
/// right end of each cell.
struct SamplePath {
    int n = 0;
    double horizon = 0.0;
    std::vector<double> times;   ///< strictly increasing jump times in (0, T]
    std::vector<double> jumps;   ///< row-major, jump j occupies [j*n, (j+1)*n)
    double dt = 0.0;             ///< Brownian cell width (0 when Sigma = 0)
    std::vector<double> brownian;  ///< row-major increments per cell
    Eigen::VectorXd drift;       ///< effective drift
    Eigen::MatrixXd sigma;
    double trunc = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t model_fingerprint = 0;

    std::size_t jump_count() const noexcept { return times.size(); }
    std::size_t cell_count() const noexcept { return n == 0 ? 0 : brownian.size() / static_cast<std::size_t>(n); }
    const double* jump(std::size_t j) const { return jumps.data() + j * static_cast<std::size_t>(n); }
    const double* cell(std::size_t k) const { return brownian.data() + k * static_cast<std::size_t>(n); }
    /// Right end of Brownian cell k.
    double cell_time(std::size_t k) const;

    /// Columns t_jump, dx_1..dx_n.
    std::string jumps_csv() const;
    /// Columns t, dw_1..dw_n (t is the right end of each cell).
    std::string brownian_csv() const;
};

struct SimConfig {
    double horizon = 1.0;
    double dt = 0.01;     ///< Brownian grid step; ignored when Sigma = 0
    double trunc = 0.0;   ///< > 0 replaces the copula truncation level of the model
};

/// Precomputed jump-size samplers for one model; reusable across paths.
class PathSampler {
public:
    PathSampler(const LevyModel& model, const SimConfig& config);
    ~PathSampler();
    PathSampler(PathSampler&&) noexcept;
    PathSampler& operator=(PathSampler&&) noexcept;

    SamplePath sample(std::uint64_t seed, std::uint64_t stream) const;
    /// Total (truncated) jump intensity.
    double intensity() const;
    const LevyModel& model() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SamplePath simulate_path(const LevyModel& model, const SimConfig& config, std::uint64_t seed, std::uint64_t stream = 0);

/// Jump sum of prod (dX_i)^{p_i} over jumps at times <= t.
double power_jump(const SamplePath& path, const MultiIndex& p, double t);

/// Full X_i(t): drift, Brownian steps and jumps.
double state(const SamplePath& path, int i, double t);

/// Y^p(t) = X^p(t) - m_p t, with X^{e_i} the full coordinate.
double teugels(const SamplePath& path, const MomentTable& table, const MultiIndex& p, double t);

/// Y^q(t) for every candidate index of the basis.
Eigen::VectorXd teugels_vector(const SamplePath& path, const MomentTable& table, const std::vector<MultiIndex>& indices,
                               double t);

/// H(t) = C Y(t), one entry per retained index.
Eigen::VectorXd evaluate_basis(const SamplePath& path, const MartingaleBasis& basis, const MomentTable& table, double t);

/// Pathwise [Y^p, Y^q](t).
double bracket(const SamplePath& path, const MultiIndex& p, const MultiIndex& q, double t);

/// Matrix of pathwise brackets [H^a, H^b](t) over the retained basis.
Eigen::MatrixXd basis_brackets(const SamplePath& path, const MartingaleBasis& basis, double t);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
    std::uint64_t seed = 0;

    /// |mean - target| / se (0 when both the deviation and se vanish).
    double z_score(double target = 0.0) const;
    nlohmann::json to_json() const;
};

struct McOptions {
    std::size_t paths = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

using PathFunctional = std::function<std::vector<double>(const SamplePath&)>;

/// Monte Carlo estimates of each component of a vector-valued functional.
/// Path i uses stream i of the seed; results do not depend on `threads`.
std::vector<McEstimate> mc_expectation(const PathSampler& sampler, const PathFunctional& f, const McOptions& options);

McEstimate mc_expectation(const LevyModel& model, const SimConfig& config,
                          const std::function<double(const SamplePath&)>& f, const McOptions& options);

}  // namespace levychaos
