#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "levychaos/chaos.hpp"
#include "levychaos/errors.hpp"
#include "oracle/oracle.hpp"

using namespace levychaos;
using doctest::Approx;

namespace {

LevyModel two_atom() { return LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1, 1}, 2.0}, {{1, 2}, 0.5}}}); }

LevyModel three_atoms() {
    return LevyModel({0.1, -0.2}, Eigen::MatrixXd(), DiscreteJumps{{{{1.0, 0.5}, 1.2}, {{-0.7, 1.3}, 0.8}, {{0.4, -1.1}, 0.5}}});
}

LevyModel jump_diffusion() {
    return LevyModel({0.2}, Eigen::MatrixXd::Ones(1, 1), DiscreteJumps{{{{1.0}, 1.0}, {{-0.5}, 2.0}}});
}

std::vector<std::vector<MultiIndex>> integrator_lists(const ChaosExpansion& e) {
    std::vector<std::vector<MultiIndex>> v;
    for (const auto& t : e.terms) v.push_back(t.integrators);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), GrlexLess{});
    });
    return v;
}

Polynomial poly_t(std::initializer_list<std::pair<int, Rational>> coefs) {
    Polynomial p(1);
    for (const auto& [e, c] : coefs) p.add_term({e}, c);
    return p;
}

bool same_multiset(std::vector<ChaosTerm> a, std::vector<ChaosTerm> b) {
    if (a.size() != b.size()) return false;
    for (const auto& t : a) {
        auto it = std::find(b.begin(), b.end(), t);
        if (it == b.end()) return false;
        b.erase(it);
    }
    return true;
}

}  // namespace

TEST_CASE("first-order expansion") {
    const auto m = two_atom();
    const auto table = moment_table(m, 1);
    const auto e = expand_increment_product(m, table, MultiIndex{1, 0});
    CHECK(e.f == poly_t({{1, Rational(5, 2)}}));
    REQUIRE(e.terms.size() == 1);
    CHECK(e.terms[0].integrators == std::vector<MultiIndex>{MultiIndex{1, 0}});
    CHECK(e.terms[0].integrand == Polynomial::constant(2, 1));
}

TEST_CASE("expansion of a product of two coordinates") {
    const auto m = two_atom();
    const auto table = moment_table(m, 2);
    const auto e = expand_increment_product(m, table, MultiIndex{1, 1});
    const std::vector<std::vector<MultiIndex>> expected = {
        {MultiIndex{0, 1}}, {MultiIndex{1, 0}}, {MultiIndex{1, 1}}, {MultiIndex{0, 1}, MultiIndex{1, 0}}, {MultiIndex{1, 0}, MultiIndex{0, 1}}};
    auto sorted_expected = expected;
    std::sort(sorted_expected.begin(), sorted_expected.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), GrlexLess{});
    });
    CHECK(integrator_lists(e) == sorted_expected);
    CHECK(e.f == poly_t({{1, Rational(3)}, {2, Rational(15, 2)}}));
    CHECK(moment_function(e, 1.0) == 10.5);
    CHECK(moment_function(e, 0.0) == 0.0);
}

TEST_CASE("expansion of a square in one dimension") {
    const LevyModel m({0.3}, Eigen::MatrixXd(), DiscreteJumps{{{{1.0}, 1.5}, {{-2.0}, 0.25}}});
    const auto table = moment_table(m, 2);
    const auto e = expand_increment_product(m, table, MultiIndex{2});
    const Rational m1 = exact_rational(table.value(MultiIndex{1}));
    const Rational m2 = exact_rational(table.value(MultiIndex{2}));
    CHECK(e.f == poly_t({{1, m2}, {2, m1 * m1}}));
}

TEST_CASE("covariance entries enter the expansion unsquared") {
    for (double s : {1.0, 4.0}) {
        const auto m = LevyModel::brownian(Eigen::MatrixXd::Constant(1, 1, s));
        const auto table = moment_table(m, 2);
        const auto e = expand_increment_product(m, table, MultiIndex{2});
        CHECK(moment_function(e, 1.0) == s);
    }
    const auto jd = jump_diffusion();
    const auto table = moment_table(jd, 2);
    const auto e = expand_increment_product(jd, table, MultiIndex{2});
    const double m1 = table.value(MultiIndex{1}), m2 = table.value(MultiIndex{2});
    CHECK(moment_function(e, 0.5) == Approx(0.5 * (m2 + 1.0) + 0.25 * m1 * m1).epsilon(1e-14));
}

TEST_CASE("moment function of pure drift") {
    const LevyModel m({1.0, 0.0}, Eigen::MatrixXd(), DiscreteJumps{});
    const auto table = moment_table(m, 3);
    const auto e = expand_increment_product(m, table, MultiIndex{1, 0});
    for (double t : {0.0, 0.3, 1.0}) CHECK(moment_function(e, t) == t);
    for (const auto& k : enumerate_up_to(2, 3)) CHECK(moment_function(expand_increment_product(m, table, k), 0.0) == 0.0);
}

TEST_CASE("moment function matches Monte Carlo") {
    const auto m = two_atom();
    const auto table = moment_table(m, 2);
    const auto est = mc_expectation(
        m, SimConfig{}, [](const SamplePath& p) { return increment_product(p, MultiIndex{1, 1}, 0.0, 1.0); }, McOptions{100000, 8, 1});
    CHECK(est.z_score(10.5) < 4.0);
}

TEST_CASE("compensated drift integrates to zero") {
    const LevyModel m({1.0, 0.0}, Eigen::MatrixXd(), DiscreteJumps{});
    const auto table = moment_table(m, 1);
    const auto path = simulate_path(m, SimConfig{}, 1);
    ChaosTerm term;
    term.integrators = {MultiIndex{1, 0}};
    term.integrand = Polynomial::constant(2, 1);
    CHECK(evaluate_iterated_integral(path, table, term, 0.0, 1.0) == 0.0);
}

TEST_CASE("double integrals equal ordered jump-pair sums") {
    const auto zero = MomentTable::synthetic(2, 2, [](const MultiIndex&) { return 0.0; });
    SamplePath hand;
    hand.n = 2;
    hand.horizon = 1.0;
    hand.times = {0.3, 0.7};
    hand.jumps = {1, 2, 2, 1};
    hand.drift = Eigen::VectorXd::Zero(2);
    hand.sigma = Eigen::MatrixXd::Zero(2, 2);
    ChaosTerm term;
    term.integrators = {MultiIndex{1, 0}, MultiIndex{0, 1}};
    term.integrand = Polynomial::constant(3, 1);
    // outer dY^(1,0) at 0.7 times inner dY^(0,1) at 0.3
    CHECK(evaluate_iterated_integral(hand, zero, term, 0.0, 1.0) == 4.0);
    CHECK(oracle::pathwise_double_sum(hand, {1, 0}, {0, 1}, 1.0) == 4.0);

    const LevyModel m({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1.0, 0.5}, 30.0}, {{-0.7, 1.3}, 20.0}}});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto path = simulate_path(m, SimConfig{}, 31, s);
        CHECK(path.jump_count() > 20);
        for (const auto& [p, q] : std::vector<std::pair<MultiIndex, MultiIndex>>{
                 {MultiIndex{1, 0}, MultiIndex{0, 1}}, {MultiIndex{2, 0}, MultiIndex{1, 1}}, {MultiIndex{0, 1}, MultiIndex{0, 1}}}) {
            ChaosTerm t2;
            t2.integrators = {p, q};
            t2.integrand = Polynomial::constant(3, 1);
            for (double t : {0.5, 1.0}) {
                const double ref = oracle::pathwise_double_sum(path, p.components(), q.components(), t);
                CHECK(evaluate_iterated_integral(path, zero, t2, 0.0, t) == Approx(ref).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("moment function does not depend on the anchor") {
    const auto m = three_atoms();
    const auto table = moment_table(m, 3);
    for (const auto& k : enumerate_up_to(2, 3)) {
        const auto a = expand_increment_product(m, table, k, 0.0);
        const auto b = expand_increment_product(m, table, k, 0.375);
        const auto c = expand_increment_product(m, table, k, 0.1);
        CHECK(a.f == b.f);
        CHECK(a.f == c.f);
    }
}

TEST_CASE("degree bounds") {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.3, 0.3, 0.5;
    const LevyModel m({0.1, 0.2}, s, DiscreteJumps{{{{1.0, 0.5}, 1.2}, {{-0.7, 1.3}, 0.8}}});
    const auto table = moment_table(m, 3);
    for (const auto& k : enumerate_up_to(2, 3)) {
        const auto e = expand_increment_product(m, table, k);
        CHECK(e.f.total_degree() <= k.degree());
        for (const auto& term : e.terms) {
            int total = 0;
            for (const auto& p : term.integrators) {
                CHECK(p.degree() >= 1);
                total += p.degree();
            }
            CHECK(total <= k.degree());
            CHECK(term.integrand.total_degree() <= k.degree());
            CHECK(term.integrand.nvars() == static_cast<int>(term.integrators.size()) + 1);
        }
    }
    CHECK_THROWS_AS(expand_increment_product(m, table, MultiIndex{2, 2}), CapabilityError);
    CHECK_THROWS_AS(expand_increment_product(m, table, MultiIndex{0, 0}), DomainError);
}

TEST_CASE("predictable form") {
    const auto m = two_atom();
    const auto table = moment_table(m, 2);
    const auto e1 = to_predictable_form(expand_increment_product(m, table, MultiIndex{1, 0}));
    REQUIRE(e1.phi.size() == 1);
    REQUIRE(e1.phi.count(MultiIndex{1, 0}) == 1);
    const auto& only = e1.phi.at(MultiIndex{1, 0});
    REQUIRE(only.size() == 1);
    CHECK(only[0].integrators.empty());
    CHECK(only[0].integrand == Polynomial::constant(2, 1));

    const auto e = expand_increment_product(m, table, MultiIndex{1, 1});
    const auto form = to_predictable_form(e);
    const auto& phi1 = form.phi.at(MultiIndex{1, 0});
    CHECK(phi1.size() == 2);
    int constants = 0, inner = 0;
    for (const auto& t : phi1) {
        if (t.integrators.empty()) ++constants;
        if (t.integrators == std::vector<MultiIndex>{MultiIndex{0, 1}}) ++inner;
    }
    CHECK(constants == 1);
    CHECK(inner == 1);
    const auto& phi11 = form.phi.at(MultiIndex{1, 1});
    REQUIRE(phi11.size() == 1);
    CHECK(phi11[0].integrators.empty());
    CHECK(phi11[0].integrand == Polynomial::constant(2, 1));
    CHECK(same_multiset(flatten(form), e.terms));

    const auto table3 = moment_table(three_atoms(), 3);
    for (const auto& k : enumerate_up_to(2, 3)) {
        const auto x = expand_increment_product(three_atoms(), table3, k);
        CHECK(same_multiset(flatten(to_predictable_form(x)), x.terms));
    }
}

TEST_CASE("bounded variation identity") {
    for (const auto& m : {two_atom(), three_atoms()}) {
        for (std::uint64_t s = 0; s < 50; ++s) {
            const auto path = simulate_path(m, SimConfig{}, 4, s);
            for (double t : {0.0, 0.33, 1.0}) CHECK(bounded_variation_residual(path, t) <= 1e-12);
        }
    }
}

TEST_CASE("exact chaos representation on finite-activity models") {
    const LevyModel nm({0.05, 0.0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1}));
    for (const auto& m : {two_atom(), three_atoms(), nm}) {
        const auto table = moment_table(m, 2);
        const auto basis = orthogonalize(gram_matrix(table, m.sigma(), 2));
        for (const auto& k : enumerate_up_to(2, 2)) {
            CrpOptions opt;
            opt.mc.paths = 300;
            opt.mc.seed = 12;
            const auto r = verify_crp(m, table, basis, k, opt);
            CHECK(r.max_residual_y <= 1e-9);
            CHECK(r.max_residual_h <= 1e-9);
            if (k.degree() == 1) CHECK(r.max_residual_y <= 1e-12);
        }
    }
}

TEST_CASE("exact mode anchored away from zero") {
    const auto m = three_atoms();
    const auto table = moment_table(m, 3);
    const auto basis = orthogonalize(gram_matrix(table, m.sigma(), 3));
    CrpOptions opt;
    opt.mc.paths = 200;
    opt.mc.seed = 3;
    opt.sim.horizon = 1.5;
    opt.t0 = 0.5;
    const auto r = verify_crp(m, table, basis, MultiIndex{2, 1}, opt);
    CHECK(r.max_residual_y <= 1e-9);
    CHECK(r.max_residual_h <= 1e-9);
}

TEST_CASE("H expansion agrees with the Y expansion pathwise") {
    const auto m = three_atoms();
    const auto table = moment_table(m, 2);
    const auto basis = orthogonalize(gram_matrix(table, m.sigma(), 2));
    const auto e = expand_increment_product(m, table, MultiIndex{1, 1});
    const auto h = to_h_basis(e, basis);
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto path = simulate_path(m, SimConfig{}, 6, s);
        const double lhs = increment_product(path, MultiIndex{1, 1}, 0.0, 1.0);
        CHECK(evaluate_expansion(path, table, e, 1.0) == Approx(lhs).epsilon(1e-10).scale(1.0));
        CHECK(evaluate_expansion(path, table, basis, h, 1.0) == Approx(lhs).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("Monte Carlo chaos representation with a Brownian part") {
    const auto m = jump_diffusion();
    const auto table = moment_table(m, 2);
    const auto basis = orthogonalize(gram_matrix(table, m.sigma(), 2));
    CrpOptions opt;
    opt.sim.dt = 0.02;
    opt.mc.paths = 20000;
    opt.mc.seed = 5;
    CHECK_THROWS_AS(verify_crp(m, table, basis, MultiIndex{2}, opt), ConfigurationError);
    opt.mode = CrpMode::mc;
    const auto r = verify_crp(m, table, basis, MultiIndex{2}, opt);
    CHECK(r.residual_y.z_score() <= 4.0);
    CHECK(r.residual_h.z_score() <= 4.0);
}

TEST_CASE("expansion JSON") {
    const auto m = two_atom();
    const auto table = moment_table(m, 2);
    const auto j = expand_increment_product(m, table, MultiIndex{1, 1}).to_json();
    CHECK(j.at("k") == nlohmann::json::array({1, 1}));
    CHECK(j.at("terms").size() == 5);
    CHECK(j.contains("f"));
    for (const auto& t : j.at("terms")) {
        CHECK(t.contains("integrators"));
        CHECK(t.contains("integrand"));
    }
}
