#include <doctest.h>

#include <cmath>
#include <cstring>

#include "levychaos/errors.hpp"
#include "levychaos/moments.hpp"
#include "oracle/oracle.hpp"

using namespace levychaos;
using doctest::Approx;

namespace {

const std::vector<Atom> kTwoAtoms = {{{1, 1}, 2.0}, {{1, 2}, 0.5}};

LevyModel two_atom() { return LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{kTwoAtoms}); }

}  // namespace

TEST_CASE("discrete moments are atom sums") {
    const auto m = two_atom();
    CHECK(moment(m, MultiIndex{1, 1}).value == 3.0);
    CHECK(moment(m, MultiIndex{2, 2}).value == 4.0);
    CHECK(moment(m, MultiIndex{1, 0}).value == 2.5);
    CHECK(moment(m, MultiIndex{0, 1}).value == 3.0);
    const auto table = moment_table(m, 3);
    for (const auto& [p, e] : table.entries()) {
        CHECK(e.method == MomentMethod::exact_sum);
        CHECK(e.error_bound == 0.0);
        CHECK(e.value == oracle::atom_sum_moment(kTwoAtoms, p.components()));
    }
}

TEST_CASE("first moments include the drift") {
    const LevyModel m({0.3, -1.0}, Eigen::MatrixXd(), DiscreteJumps{kTwoAtoms});
    CHECK(moment(m, MultiIndex{1, 0}).value == Approx(2.8));
    CHECK(moment(m, MultiIndex{0, 1}).value == Approx(2.0));
    CHECK(moment(m, MultiIndex{1, 1}).value == 3.0);
}

TEST_CASE("pure drift") {
    const LevyModel m({1.0, 0.0}, Eigen::MatrixXd(), DiscreteJumps{});
    CHECK(moment(m, MultiIndex{1, 0}).value == 1.0);
    CHECK(moment(m, MultiIndex{0, 1}).value == 0.0);
    const auto table = moment_table(m, 2);
    for (const auto& [p, e] : table.entries())
        if (p.degree() >= 2) CHECK(e.value == 0.0);
}

TEST_CASE("gamma marginal moments are gamma functions") {
    const auto g = make_gamma_copula({1.0}, {1.0}, {1, 1}, 0.0);
    CHECK(moment(g, MultiIndex{2}).value == Approx(1.0).epsilon(1e-8));
    CHECK(moment(g, MultiIndex{3}).value == Approx(2.0).epsilon(1e-8));
    for (int p = 2; p <= 8; ++p) {
        const auto e = moment(g, MultiIndex{p});
        CHECK(e.method == MomentMethod::quadrature);
        CHECK(std::abs(e.value - std::tgamma(p)) <= 1e-8 * std::tgamma(p));
    }
    const auto g2 = make_gamma_copula({2.5}, {1.7}, {1, 1}, 0.0);
    for (int p = 2; p <= 6; ++p)
        CHECK(moment(g2, MultiIndex{p}).value == Approx(2.5 * std::tgamma(p) / std::pow(1.7, p)).epsilon(1e-8));
    CHECK(moment(g2, MultiIndex{1}).value == Approx(2.5 / 1.7).epsilon(1e-10));
}

TEST_CASE("truncated gamma marginal moments use the truncated measure") {
    const auto g = make_gamma_copula({1.0}, {1.0}, {1, 1}, 0.5);
    // int_{0.5}^inf x e^{-x} dx = 1.5 e^{-0.5}
    CHECK(moment(g, MultiIndex{2}).value == Approx(1.5 * std::exp(-0.5)).epsilon(1e-9));
    CHECK(moment(g, MultiIndex{1}).value == Approx(std::exp(-0.5)).epsilon(1e-9));
}

TEST_CASE("table size and coverage") {
    const auto t = moment_table(two_atom(), 2);
    CHECK(t.entries().size() == 14);
    CHECK(t.coverage() == 4);
    CHECK(t.covers(MultiIndex{4, 0}));
    CHECK_FALSE(t.covers(MultiIndex{5, 0}));
    CHECK_THROWS_AS((void)t.entry(MultiIndex{3, 2}), CoverageError);
    CHECK_THROWS_AS(moment(two_atom(), MultiIndex{0, 0}), DomainError);
    CHECK_THROWS_AS(moment(two_atom(), MultiIndex{1}), DimensionError);
    CHECK_THROWS_AS(moment_table(two_atom(), 0), ValidationError);
}

TEST_CASE("negative multinomial moments match the closed-form oracle") {
    const LevyModel m({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1}));
    const auto t = moment_table(m, 3);
    for (const auto& [p, e] : t.entries()) {
        if (p.degree() < 2) continue;
        CHECK(e.method == MomentMethod::series);
        CHECK(e.error_bound < 1e-14);
        CHECK(e.series_terms > 0);
        const double ref = oracle::negmult_moment({0.1, 0.1}, p.components());
        CHECK(e.value == Approx(ref).epsilon(1e-12));
    }
    const LevyModel m3({0, 0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.4, 0.5, {0.3, 0.5, 0.4}));
    for (const auto& p : enumerate_degree(3, 3))
        CHECK(moment(m3, p).value == Approx(oracle::negmult_moment({0.15, 0.25, 0.2}, p.components())).epsilon(1e-11));
}

TEST_CASE("negative multinomial series agrees with direct summation") {
    const LevyModel m({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1}));
    for (const auto& p : enumerate_degree(2, 2)) {
        double direct = 0.0;
        for (int a = 0; a <= 80; ++a)
            for (int b = 0; a + b <= 80; ++b)
                if (a + b > 0) direct += std::pow(a, p[0]) * std::pow(b, p[1]) * oracle::negmult_mass({0.1, 0.1}, {a, b});
        CHECK(moment(m, p).value == Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("symmetric measures give symmetric moments") {
    const LevyModel d({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1, 2}, 0.7}, {{2, 1}, 0.7}, {{-1, 3}, 0.2}, {{3, -1}, 0.2}}});
    const LevyModel s({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.6, 1.0, {0.2, 0.2}));
    const auto mx = make_meixner_copula({1.0, 1.0}, {0.0, 0.0}, {1.5, 0.6}, 0.1);
    for (const auto* m : {&d, &s, &mx}) {
        const auto t = moment_table(*m, 2);
        for (const auto& [p, e] : t.entries()) {
            const MultiIndex swapped{p[1], p[0]};
            const auto& o = t.entry(swapped);
            CHECK(std::abs(e.value - o.value) <= 1e-12 * std::max(1.0, std::abs(e.value)) + e.error_bound + o.error_bound);
        }
    }
}

TEST_CASE("copula moments carry a quadrature error bound") {
    const auto g = make_gamma_copula({1.0, 1.5}, {1.0, 2.0}, {1.5, 1.0}, 0.1);
    const auto t = moment_table(g, 2);
    for (const auto& [p, e] : t.entries()) {
        if (p.degree() < 2) continue;
        CHECK(e.method == MomentMethod::quadrature);
        CHECK(e.error_bound <= 1e-8 * std::max(1.0, std::abs(e.value)));
        CHECK(e.value > 0.0);
    }
}

TEST_CASE("tables are deterministic") {
    const auto g = make_gamma_copula({1.0, 1.5}, {1.0, 2.0}, {1.5, 1.0}, 0.1);
    const auto a = moment_table(g, 2);
    const auto b = moment_table(g, 2);
    REQUIRE(a.entries().size() == b.entries().size());
    for (const auto& [p, e] : a.entries()) CHECK(std::memcmp(&e.value, &b.entry(p).value, sizeof(double)) == 0);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.model_fingerprint() == g.fingerprint());
}

TEST_CASE("csv export") {
    const auto csv = moment_table(two_atom(), 1).to_csv();
    CHECK(csv.rfind("index,value,method,error_bound\n", 0) == 0);
    CHECK(csv.find("\"[1,1]\",3,exact-sum,0") != std::string::npos);
}

TEST_CASE("synthetic tables") {
    const auto t = MomentTable::synthetic(2, 2, [](const MultiIndex& p) { return double(p.degree()); });
    CHECK(t.value(MultiIndex{2, 1}) == 3.0);
    CHECK(t.entry(MultiIndex{1, 0}).method == MomentMethod::synthetic);
    CHECK(t.model_fingerprint() == 0);
}
