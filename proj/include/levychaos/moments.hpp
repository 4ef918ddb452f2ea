#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "levychaos/levy_model.hpp"
#include "levychaos/multiindex.hpp"

namespace levychaos {

enum class MomentMethod { exact_sum, quadrature, series, synthetic };

std::string to_string(MomentMethod m);

struct MomentEntry {
    double value = 0.0;
    MomentMethod method = MomentMethod::exact_sum;
    double error_bound = 0.0;
    int series_terms = 0;  ///< highest shell |k| summed (series only)
};

/// Moment functionals m_p for 1 <= |p| <= coverage().
///
/// For |p| = 1 the entry is the expectation rate E[X_i(1)] (drift included);
/// for |p| >= 2 it is the jump integral of x^p over the (truncated) measure.
class MomentTable {
public:
    using Map = std::map<MultiIndex, MomentEntry, GrlexLess>;

    MomentTable() = default;
    MomentTable(int n, int max_degree, std::uint64_t model_fingerprint, Map entries);

    /// Table with caller-supplied values (method synthetic, error 0), used to
    /// study expansions with artificial compensators.
    static MomentTable synthetic(int n, int max_degree, const std::function<double(const MultiIndex&)>& value);

    int dimension() const noexcept { return n_; }
    /// Basis degree the table was built for; entries cover 2 * max_degree.
    int max_degree() const noexcept { return max_degree_; }
    int coverage() const noexcept { return 2 * max_degree_; }
    std::uint64_t model_fingerprint() const noexcept { return fingerprint_; }

    bool covers(const MultiIndex& p) const;
    /// Throws CoverageError when p is outside the table.
    const MomentEntry& entry(const MultiIndex& p) const;
    double value(const MultiIndex& p) const { return entry(p).value; }
    const Map& entries() const noexcept { return entries_; }

    /// Columns index, value, method, error_bound.
    std::string to_csv() const;
    nlohmann::json to_json() const;

private:
    int n_ = 0;
    int max_degree_ = 0;
    std::uint64_t fingerprint_ = 0;
    Map entries_;
};

MomentEntry moment(const LevyModel& model, const MultiIndex& p);

/// All moments with 1 <= |p| <= 2 * max_degree.
MomentTable moment_table(const LevyModel& model, int max_degree);

}  // namespace levychaos
