#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levychaos/errors.hpp"
#include "levychaos/levy_model.hpp"
#include "oracle/oracle.hpp"

using namespace levychaos;
using doctest::Approx;

namespace {

CopulaJumps gamma_pair(double theta, double eta, double trunc) {
    CopulaJumps c;
    c.kind = CopulaKind::gamma;
    c.marginals = {Marginal::gamma(1.0, 1.0), Marginal::gamma(1.5, 2.0)};
    c.clayton = {theta, eta};
    c.trunc = trunc;
    return c;
}

LevyModel two_atom() { return LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1, 1}, 2.0}, {{1, 2}, 0.5}}}); }

}  // namespace

TEST_CASE("clayton F point values") {
    CHECK(clayton_F({1, 1}, 1.0, 1.0) == Approx(0.5).epsilon(1e-15));
    CHECK(clayton_F({1, -1}, 1.0, 1.0) == 0.0);
    CHECK(clayton_F({1, 1, 1}, 2.0, 0.5) == Approx(0.5 / std::sqrt(3.0) * 0.5).epsilon(1e-14));
    CHECK(clayton_F({1, 1, 1}, 2.0, 0.5) == Approx(0.14434).epsilon(1e-4));
    CHECK_THROWS_AS((clayton_F({0, 1}, 1.0, 1.0)), DomainError);
    CHECK_THROWS_AS((clayton_F({1, 1}, 0.0, 1.0)), ParameterError);
    CHECK_THROWS_AS((clayton_F({1, 1}, 1.0, 1.5)), ParameterError);
}

TEST_CASE("clayton F matches its defining formula") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> mag(0.05, 20.0), th(0.2, 5.0), et(0.0, 1.0);
    std::bernoulli_distribution neg(0.4);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + trial % 2;
        std::vector<double> u(n);
        std::vector<long double> ul(n);
        for (std::size_t i = 0; i < n; ++i) ul[i] = u[i] = (neg(rng) ? -1.0 : 1.0) * mag(rng);
        const double theta = th(rng), eta = et(rng);
        const double ref = static_cast<double>(oracle::clayton_F(ul, theta, eta));
        CHECK(clayton_F(u, theta, eta) == Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("clayton F is homogeneous of order one") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> mag(0.01, 50.0), scale(0.01, 100.0), th(0.1, 8.0), et(0.0, 1.0);
    std::bernoulli_distribution neg(0.5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + trial % 2;
        std::vector<double> u(n), cu(n);
        const double c = scale(rng);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = (neg(rng) ? -1.0 : 1.0) * mag(rng);
            cu[i] = c * u[i];
        }
        const double theta = th(rng), eta = et(rng);
        const double lhs = clayton_F(cu, theta, eta);
        const double rhs = c * clayton_F(u, theta, eta);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("clayton mixed partial") {
    CHECK(clayton_mixed_partial({1, 1}, 1.0, 1.0) == Approx(0.25).epsilon(1e-15));
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> mag(0.1, 10.0), th(0.3, 4.0), et(0.0, 1.0);
    std::bernoulli_distribution neg(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = mag(rng), b = mag(rng);
        CHECK(clayton_mixed_partial({a, b}, 1.0, 1.0) == Approx(2 * a * b / std::pow(a + b, 3)).epsilon(1e-12));
        const std::size_t n = 2 + trial % 2;
        std::vector<double> u(n);
        for (auto& v : u) v = (neg(rng) ? -1.0 : 1.0) * mag(rng);
        const double theta = th(rng), eta = et(rng);
        const double fd = oracle::clayton_mixed_partial_fd(u, theta, eta);
        const double got = clayton_mixed_partial(u, theta, eta);
        CHECK(got >= 0.0);
        CHECK(std::abs(got - fd) <= 1e-5 * got + 1e-9);
    }
    CHECK_THROWS_AS((clayton_mixed_partial({1, 1, 1, 1}, 1.0, 1.0)), CapabilityError);
}

TEST_CASE("tail integral of the gamma marginal") {
    const auto g = Marginal::gamma(1.0, 1.0);
    CHECK(tail_integral(g, 1.0) == Approx(0.219384).epsilon(1e-6));
    for (double x : {1e-8, 1e-3, 0.05, 0.7, 1.0, 3.0, 12.0})
        CHECK(tail_integral(g, x) == Approx(oracle::exponential_integral_e1(x)).epsilon(1e-9));
    const auto g2 = Marginal::gamma(1.5, 2.0);
    CHECK(tail_integral(g2, 0.3) == Approx(1.5 * oracle::exponential_integral_e1(0.6)).epsilon(1e-9));
    CHECK(tail_integral(g, 200.0) < 1e-80);
    CHECK(tail_integral(g, -1.0) == 0.0);
    CHECK_THROWS_AS((tail_integral(g, 0.0)), DomainError);
    CHECK_THROWS_AS((tail_integral(g, 1e-310)), NumericError);
}

TEST_CASE("tail integral of the Meixner marginal uses the signed convention") {
    const auto m = Marginal::meixner(1.0, 0.4);
    const double up = tail_integral(m, 0.5);
    const double down = tail_integral(m, -0.5);
    CHECK(up > 0.0);
    CHECK(down < 0.0);
    CHECK(std::abs(down) < up);
    namespace bq = boost::math::quadrature;
    const double ref = bq::gauss_kronrod<double, 61>::integrate([&](double y) { return m.density(-y); }, 0.5,
                                                                std::numeric_limits<double>::infinity(), 30, 1e-12);
    CHECK(-down == Approx(ref).epsilon(1e-9));
}

TEST_CASE("copula density") {
    CopulaJumps c = gamma_pair(1.0, 1.0, 0.1);
    c.marginals = {Marginal::meixner(1.0, 0.2), Marginal::meixner(0.5, -0.3)};
    CHECK(copula_levy_density(c, {0.5, -0.7}) == 0.0);
    CHECK(copula_levy_density(c, {-0.5, -0.7}) > 0.0);
    CHECK_THROWS_AS((copula_levy_density(c, {0.0, 1.0})), DomainError);
    c.clayton.eta = 0.3;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> x(-4.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double a = x(rng), b = x(rng);
        if (a == 0.0 || b == 0.0) continue;
        CHECK(copula_levy_density(c, {a, b}) >= 0.0);
    }
    CopulaJumps four;
    four.marginals.assign(4, Marginal::gamma(1, 1));
    four.trunc = 0.1;
    CHECK_THROWS_AS((copula_levy_density(four, {1, 1, 1, 1})), CapabilityError);
    CHECK_THROWS_AS((LevyModel(std::vector<double>(4, 0.0), Eigen::MatrixXd(), four)), CapabilityError);
}

TEST_CASE("gamma copula density integrates to its marginal") {
    namespace bq = boost::math::quadrature;
    const CopulaJumps c = gamma_pair(3.0, 1.0, 0.0);
    for (double x1 : {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 3.0}) {
        // integrate over x2 in log scale down to the tail cutoff
        auto f = [&](double u) {
            const double x2 = std::exp(u);
            return x2 * copula_levy_density(c, {x1, x2});
        };
        const double lo = bq::gauss_kronrod<double, 31>::integrate(f, std::log(kTailCutoff), 0.0, 25, 1e-10);
        const double hi = bq::gauss_kronrod<double, 31>::integrate(f, 0.0, std::log(60.0), 25, 1e-10);
        const double marginal = std::exp(-x1) / x1;
        CHECK(std::abs(lo + hi - marginal) <= 1e-6 * marginal);
    }
}

TEST_CASE("orthant masses agree with grid quadrature") {
    for (double eta : {1.0, 0.35}) {
        CopulaJumps c = gamma_pair(1.5, eta, 0.05);
        c.marginals = {Marginal::meixner(1.0, 0.3), Marginal::meixner(0.7, -0.2)};
        double closed = 0.0;
        for (const auto& o : copula_orthant_masses(c)) closed += o.mass;
        double grid = 0.0;
        for_each_copula_node(c, 2, 16, 1.0, [&](const double*, double w) { grid += w; });
        CHECK(grid == Approx(closed).epsilon(1e-9));
    }
}

TEST_CASE("negative multinomial mass") {
    const auto nm = NegativeMultinomialJumps::make(0.7, 1.0, {0.2, 0.1});
    CHECK(negmult_levy_mass(nm, MultiIndex{1, 0}) == Approx(0.2).epsilon(1e-14));
    CHECK(negmult_levy_mass(nm, MultiIndex{2, 0}) == Approx(0.02).epsilon(1e-14));
    const auto sym = NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1});
    CHECK(negmult_levy_mass(sym, MultiIndex{1, 1}) == Approx(0.01).epsilon(1e-14));
    CHECK_THROWS_AS((negmult_levy_mass(sym, MultiIndex{0, 0})), DomainError);
    const auto nm3 = NegativeMultinomialJumps::make(0.4, 2.0, {0.1, 0.05, 0.15});
    for (int d = 1; d <= 6; ++d)
        for (const auto& k : enumerate_degree(3, d))
            CHECK(negmult_levy_mass(nm3, k) == Approx(oracle::negmult_mass({0.2, 0.1, 0.3}, k.components())).epsilon(1e-12));
}

TEST_CASE("negative multinomial constructor enforces the constraint") {
    CHECK_NOTHROW(NegativeMultinomialJumps::make(0.5, 1.0, {0.25, 0.25}));
    CHECK_THROWS_AS((NegativeMultinomialJumps::make(0.5, 1.0, {0.25, 0.2})), ParameterError);
    CHECK_THROWS_AS((NegativeMultinomialJumps::make(0.5, 1.0, {0.25, 0.25 + 1e-10})), ParameterError);
    CHECK_THROWS_AS((NegativeMultinomialJumps::make(1.2, 1.0, {-0.1, -0.1})), ParameterError);
    CHECK_THROWS_AS((NegativeMultinomialJumps::make(0.0, 1.0, {0.5, 0.5})), ParameterError);
}

TEST_CASE("exponential moment condition on discrete measures") {
    const auto m = two_atom();
    const auto r = check_hypothesis1(m, 0.7, 1.0);
    CHECK(r.holds);
    CHECK(r.value == Approx(2.0 * std::exp(0.7 * std::sqrt(2.0)) + 0.5 * std::exp(0.7 * std::sqrt(5.0))).epsilon(1e-14));
    CHECK(check_hypothesis1(m, 0.7, 2.0).value == Approx(0.5 * std::exp(0.7 * std::sqrt(5.0))).epsilon(1e-14));
}

TEST_CASE("exponential moment condition on negative multinomial measures") {
    const LevyModel diverging({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.4, 1.0, {0.3, 0.3}));
    CHECK(0.3 * std::exp(1.0 * std::sqrt(2.0)) >= 1.0);
    const auto bad = check_hypothesis1(diverging, 1.0, 1.0);
    CHECK_FALSE(bad.holds);
    CHECK_FALSE(bad.diagnostic.empty());

    // one heavy coordinate alone does not force divergence
    const LevyModel lopsided({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.69, 1.0, {0.3, 0.01}));
    CHECK(0.3 * std::exp(std::sqrt(2.0)) >= 1.0);
    const auto lop = check_hypothesis1(lopsided, 1.0, 1.0);
    CHECK(lop.holds);
    double lref = 0.0;
    for (int a = 0; a <= 300; ++a)
        for (int b = 0; a + b <= 300; ++b)
            if (a + b > 0) lref += std::exp(std::hypot(a, b)) * oracle::negmult_mass({0.3, 0.01}, {a, b});
    CHECK(lop.value == Approx(lref).epsilon(1e-10));

    const LevyModel fine({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1}));
    const auto ok = check_hypothesis1(fine, 0.5, 1.0);
    REQUIRE(ok.holds);
    double ref = 0.0;
    for (int a = 0; a <= 150; ++a)
        for (int b = 0; a + b <= 150; ++b) {
            if (a + b == 0) continue;
            ref += std::exp(0.5 * std::hypot(a, b)) * oracle::negmult_mass({0.1, 0.1}, {a, b});
        }
    CHECK(ok.value == Approx(ref).epsilon(1e-12));
    CHECK(ok.error_bound < 1e-14);
}

TEST_CASE("exponential moment condition on gamma marginals") {
    const auto g = make_gamma_copula({2.0}, {3.0}, {1, 1}, 0.0);
    const auto ok = check_hypothesis1(g, 1.0, 0.5);
    CHECK(ok.holds);
    CHECK(ok.value == Approx(2.0 * oracle::exponential_integral_e1((3.0 - 1.0) * 0.5)).epsilon(1e-8));
    CHECK_FALSE(check_hypothesis1(g, 3.0, 0.5).holds);
    const auto g2 = make_gamma_copula({1.0, 1.5}, {1.0, 2.0}, {1.5, 1.0}, 0.1);
    CHECK(check_hypothesis1(g2, 0.5, 0.2).holds);
    CHECK_FALSE(check_hypothesis1(g2, 1.5, 0.2).holds);
    CHECK_THROWS_AS((check_hypothesis1(g2, 0.0, 0.2)), ParameterError);
}

TEST_CASE("model validation") {
    Eigen::MatrixXd s(2, 2);
    s << 1, 2, 2, 1;
    CHECK_THROWS_AS((LevyModel({0, 0}, s, DiscreteJumps{})), ParameterError);
    s << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS((LevyModel({0, 0}, s, DiscreteJumps{})), ParameterError);
    CHECK_THROWS_AS((LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{0, 0}, 1.0}}})), DomainError);
    CHECK_THROWS_AS((LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1, 0}, -1.0}}})), ParameterError);
    CHECK_THROWS_AS((LevyModel({0, 0}, Eigen::MatrixXd(), DiscreteJumps{{{{1}, 1.0}}})), DimensionError);
    CHECK_THROWS_AS((make_gamma_copula({1, 1}, {1, 1}, {1, 1}, 0.0)), ConfigurationError);
}

TEST_CASE("model JSON round trip") {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.3, 0.3, 0.5;
    std::vector<LevyModel> models = {
        two_atom(),
        LevyModel({0.5, -1.0}, s, DiscreteJumps{}),
        make_gamma_copula({1.0, 1.5}, {1.0, 2.0}, {1.5, 1.0}, 0.1),
        make_meixner_copula({1.0, 0.5}, {0.3, -0.5}, {2.0, 0.6}, 0.05, {0.1, 0.2}),
        LevyModel({0, 0}, Eigen::MatrixXd(), NegativeMultinomialJumps::make(0.8, 1.0, {0.1, 0.1})),
    };
    CopulaJumps generic = gamma_pair(2.0, 0.7, 0.2);
    generic.kind = CopulaKind::generic;
    generic.marginals[1] = Marginal::meixner(1.0, 0.1);
    models.emplace_back(std::vector<double>{0, 0}, Eigen::MatrixXd(), generic, true);
    for (const auto& m : models) {
        const auto j = m.to_json();
        const auto back = LevyModel::from_json(nlohmann::json::parse(j.dump()));
        CHECK(back.to_json() == j);
        CHECK(back.fingerprint() == m.fingerprint());
    }
    CHECK(models[0].fingerprint() != models[1].fingerprint());
    CHECK_THROWS_AS((LevyModel::from_json(nlohmann::json::parse(R"({"n": 2, "jumps": {"kind": "stable"}})"))), ValidationError);
    CHECK_THROWS_AS((LevyModel::from_json(nlohmann::json::parse(R"({"n": 2, "drift": [0]})"))), DimensionError);
}

TEST_CASE("activity classes") {
    CHECK(LevyModel::brownian(Eigen::MatrixXd::Identity(2, 2)).activity_class() == "none");
    CHECK(two_atom().activity_class() == "finite");
    CHECK(make_gamma_copula({1}, {1}, {1, 1}, 0.0).activity_class() == "infinite");
    CHECK(make_gamma_copula({1}, {1}, {1, 1}, 0.1).activity_class() == "truncated-infinite");
}

TEST_CASE("small-jump compensation shifts the drift by the removed mean") {
    CopulaJumps c;
    c.kind = CopulaKind::gamma;
    c.marginals = {Marginal::gamma(2.0, 1.0)};
    c.trunc = 0.1;
    const LevyModel m({0.0}, Eigen::MatrixXd(), c, true);
    // removed part: int_0^0.1 x * 2 e^{-x} / x dx = 2 (1 - e^{-0.1})
    CHECK(m.effective_drift()[0] == Approx(2.0 * (1.0 - std::exp(-0.1))).epsilon(1e-9));
    const LevyModel plain({0.0}, Eigen::MatrixXd(), c, false);
    CHECK(plain.effective_drift()[0] == 0.0);
}
