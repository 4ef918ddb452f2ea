#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

namespace levychaos {

/// Exponent vector p in N_0^n. Labels power-jump processes X^p, Teugels
/// martingales Y^p and orthogonalized martingales H^p.
///
/// The zero index is representable (it shows up as the exponent of an empty
/// increment product); use `MultiIndex::label` where a martingale label is
/// required, which rejects |p| = 0.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> components);
    MultiIndex(std::initializer_list<int> components);

    static MultiIndex zero(std::size_t n);
    static MultiIndex unit(std::size_t n, std::size_t i);
    /// Same as the vector constructor but requires |p| >= 1.
    static MultiIndex label(std::vector<int> components);

    std::size_t size() const noexcept { return components_.size(); }
    int operator[](std::size_t i) const { return components_[i]; }
    const std::vector<int>& components() const noexcept { return components_; }

    int degree() const noexcept { return degree_; }
    bool is_zero() const noexcept { return degree_ == 0; }
    /// Index i when p = e_i, otherwise -1.
    int unit_coordinate() const noexcept;
    /// Componentwise p <= q.
    bool dominated_by(const MultiIndex& q) const;

    /// Overflow-checked componentwise sum; lengths must match.
    MultiIndex operator+(const MultiIndex& q) const;
    /// Componentwise difference; requires q <= *this componentwise.
    MultiIndex operator-(const MultiIndex& q) const;

    /// x^p for a point x of matching length.
    double monomial(const double* x) const;

    std::string to_string() const;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

private:
    std::vector<int> components_;
    int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first; within a degree the
/// index with the larger first differing component comes first, so
/// (2,0) < (1,1) < (0,2). Throws DimensionError on a length mismatch.
std::strong_ordering compare_grlex(const MultiIndex& p, const MultiIndex& q);

struct GrlexLess {
    bool operator()(const MultiIndex& p, const MultiIndex& q) const {
        return compare_grlex(p, q) == std::strong_ordering::less;
    }
};

/// All indices of total degree d in graded-lex order; C(d+n-1, d) entries.
std::vector<MultiIndex> enumerate_degree(int n, int d);

/// All indices with 1 <= |p| <= d in graded-lex order.
std::vector<MultiIndex> enumerate_up_to(int n, int d);

/// Binomial coefficient with overflow detection.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// dim of martingale polynomials of degree at most d: C(d+n, d) - 1.
std::uint64_t dim_polyspace(int n, int d);

/// Homogeneous component dimension C(d+n-1, d).
std::uint64_t dim_homogeneous(int n, int d);

void to_json(nlohmann::json& j, const MultiIndex& p);
void from_json(const nlohmann::json& j, MultiIndex& p);

}  // namespace levychaos
