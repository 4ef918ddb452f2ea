#include "levychaos/multiindex.hpp"

#include <limits>
#include <numeric>

#include "levychaos/errors.hpp"

namespace levychaos {

namespace {

int checked_degree(const std::vector<int>& c) {
    long long sum = 0;
    for (int v : c) {
        if (v < 0) throw DomainError("multi-index components must be nonnegative");
        sum += v;
        if (sum > std::numeric_limits<int>::max()) throw DomainError("multi-index degree overflows");
    }
    return static_cast<int>(sum);
}

void enumerate_rec(int n, int pos, int remaining, std::vector<int>& cur, std::vector<MultiIndex>& out) {
    if (pos == n - 1) {
        cur[pos] = remaining;
        out.emplace_back(cur);
        return;
    }
    for (int v = remaining; v >= 0; --v) {
        cur[pos] = v;
        enumerate_rec(n, pos + 1, remaining - v, cur, out);
    }
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> components)
    : components_(std::move(components)), degree_(checked_degree(components_)) {
    if (components_.empty()) throw DimensionError("multi-index must have length >= 1");
}

MultiIndex::MultiIndex(std::initializer_list<int> components)
    : MultiIndex(std::vector<int>(components)) {}

MultiIndex MultiIndex::zero(std::size_t n) { return MultiIndex(std::vector<int>(n, 0)); }

MultiIndex MultiIndex::unit(std::size_t n, std::size_t i) {
    if (i >= n) throw DimensionError("unit index out of range");
    std::vector<int> c(n, 0);
    c[i] = 1;
    return MultiIndex(std::move(c));
}

MultiIndex MultiIndex::label(std::vector<int> components) {
    MultiIndex p(std::move(components));
    if (p.is_zero()) throw DomainError("the zero multi-index is not a martingale label");
    return p;
}

int MultiIndex::unit_coordinate() const noexcept {
    if (degree_ != 1) return -1;
    for (std::size_t i = 0; i < components_.size(); ++i)
        if (components_[i] == 1) return static_cast<int>(i);
    return -1;
}

bool MultiIndex::dominated_by(const MultiIndex& q) const {
    if (size() != q.size()) throw DimensionError("multi-index length mismatch");
    for (std::size_t i = 0; i < size(); ++i)
        if (components_[i] > q.components_[i]) return false;
    return true;
}

MultiIndex MultiIndex::operator+(const MultiIndex& q) const {
    if (size() != q.size()) throw DimensionError("multi-index length mismatch");
    std::vector<int> c(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (components_[i] > std::numeric_limits<int>::max() - q.components_[i])
            throw DomainError("multi-index addition overflows");
        c[i] = components_[i] + q.components_[i];
    }
    return MultiIndex(std::move(c));
}

MultiIndex MultiIndex::operator-(const MultiIndex& q) const {
    if (!q.dominated_by(*this)) throw DomainError("multi-index difference would be negative");
    std::vector<int> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = components_[i] - q.components_[i];
    return MultiIndex(std::move(c));
}

double MultiIndex::monomial(const double* x) const {
    double v = 1.0;
    for (std::size_t i = 0; i < components_.size(); ++i)
        for (int e = 0; e < components_[i]; ++e) v *= x[i];
    return v;
}

std::string MultiIndex::to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(components_[i]);
    }
    return s + "]";
}

std::strong_ordering compare_grlex(const MultiIndex& p, const MultiIndex& q) {
    if (p.size() != q.size()) throw DimensionError("cannot compare multi-indices of different length");
    if (p.degree() != q.degree()) return p.degree() <=> q.degree();
    for (std::size_t i = 0; i < p.size(); ++i) {
        // larger component ranks earlier
        if (p[i] != q[i]) return q[i] <=> p[i];
    }
    return std::strong_ordering::equal;
}

std::vector<MultiIndex> enumerate_degree(int n, int d) {
    if (n < 1) throw DimensionError("dimension must be >= 1");
    if (d < 1) throw DomainError("degree must be >= 1 (the zero index is not a martingale label)");
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(dim_homogeneous(n, d)));
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    enumerate_rec(n, 0, d, cur, out);
    return out;
}

std::vector<MultiIndex> enumerate_up_to(int n, int d) {
    std::vector<MultiIndex> out;
    for (int k = 1; k <= d; ++k) {
        auto level = enumerate_degree(n, k);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i stays integral at every step
        const std::uint64_t num = n - k + i;
        const std::uint64_t g = std::gcd(r, i);
        const std::uint64_t rr = r / g;
        const std::uint64_t ii = i / g;
        const std::uint64_t nn = num / ii;
        if (rr > std::numeric_limits<std::uint64_t>::max() / nn) throw DomainError("binomial coefficient overflows");
        r = rr * nn;
    }
    return r;
}

std::uint64_t dim_polyspace(int n, int d) {
    if (n < 1 || d < 1) throw DomainError("dim_polyspace requires n, d >= 1");
    return binomial(static_cast<std::uint64_t>(d + n), static_cast<std::uint64_t>(d)) - 1;
}

std::uint64_t dim_homogeneous(int n, int d) {
    if (n < 1 || d < 0) throw DomainError("dim_homogeneous requires n >= 1, d >= 0");
    return binomial(static_cast<std::uint64_t>(d + n - 1), static_cast<std::uint64_t>(d));
}

void to_json(nlohmann::json& j, const MultiIndex& p) { j = p.components(); }

void from_json(const nlohmann::json& j, MultiIndex& p) {
    if (!j.is_array()) throw ValidationError("multi-index must be a JSON array of integers");
    std::vector<int> c;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ValidationError("multi-index entries must be integers");
        c.push_back(v.get<int>());
    }
    p = MultiIndex(std::move(c));
}

}  // namespace levychaos
