#include "levychaos/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "levychaos/errors.hpp"

namespace levychaos {

// ---------------------------------------------------------------------------
// Philox4x32-10
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    counter_ = {0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

Philox4x32::result_type Philox4x32::operator()() {
    if (used_ == 4) {
        buffer_ = block(counter_, key_);
        if (++counter_[0] == 0) ++counter_[1];
        used_ = 0;
    }
    return buffer_[used_++];
}

// ---------------------------------------------------------------------------
// Jump-size samplers
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(Philox4x32& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Inverse of the tail integral on one side of a marginal, beyond trunc.
class TailInverse {
public:
    TailInverse(const Marginal& m, bool positive, double trunc) : m_(m), sign_(positive ? 1.0 : -1.0) {
        rate_ = m.decay_rate(positive);
        const double upper = trunc + 60.0 / rate_;
        const int count = 4000;
        x_.resize(count);
        tail_.resize(count);
        const double ratio = std::pow(upper / trunc, 1.0 / (count - 1));
        for (int k = 0; k < count; ++k) x_[k] = trunc * std::pow(ratio, k);
        x_[count - 1] = upper;
        tail_[count - 1] = std::abs(tail_integral(m, sign_ * upper));
        for (int k = count - 1; k-- > 0;) tail_[k] = tail_[k + 1] + segment(x_[k], x_[k + 1]);
        log_x_.resize(count);
        log_tail_.resize(count);
        for (int k = 0; k < count; ++k) {
            log_x_[k] = std::log(x_[k]);
            log_tail_[k] = std::log(tail_[k]);
        }
    }

    double total() const { return tail_.front(); }

    // |x| with |U(x)| = tau, 0 < tau <= total().
    double invert(double tau) const {
        const std::size_t count = x_.size();
        if (tau <= tail_.back()) return x_.back() + std::log(tail_.back() / tau) / rate_;
        // tail_ is decreasing in k
        const auto it = std::lower_bound(tail_.rbegin(), tail_.rend(), tau);
        std::size_t hi = count - 1 - static_cast<std::size_t>(it - tail_.rbegin());
        if (hi == 0) return x_.front();
        const std::size_t lo = hi - 1;
        const double lt = std::log(tau);
        const double w = (lt - log_tail_[lo]) / (log_tail_[hi] - log_tail_[lo]);
        double x = std::exp(log_x_[lo] + w * (log_x_[hi] - log_x_[lo]));
        // Newton refinement against U(x) = U(x_lo) - int_{x_lo}^{x} nu
        for (int iter = 0; iter < 2; ++iter) {
            const double u = tail_[lo] - segment(x_[lo], x);
            const double d = m_.density(sign_ * x);
            if (!(d > 0.0)) break;
            x = std::clamp(x + (u - tau) / d, x_[lo], x_[hi]);
        }
        return x;
    }

private:
    double segment(double a, double b) const {
        if (b == a) return 0.0;
        auto f = [&](double y) { return m_.density(sign_ * y); };
        return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
    }

    Marginal m_;
    double sign_;
    double rate_;
    std::vector<double> x_, tail_, log_x_, log_tail_;
};

struct CopulaSampler {
    CopulaJumps cop;
    std::vector<OrthantMass> orthants;
    std::vector<double> cumulative;
    // inverse[i][side]: side 0 positive, 1 negative
    std::vector<std::array<std::unique_ptr<TailInverse>, 2>> inverse;
    double total = 0.0;

    explicit CopulaSampler(const CopulaJumps& c) : cop(c) {
        if (!(c.trunc > 0.0)) throw ConfigurationError("simulation of an infinite-activity copula needs a truncation level > 0");
        orthants = copula_orthant_masses(c);
        for (const auto& o : orthants) {
            total += o.mass;
            cumulative.push_back(total);
        }
        inverse.resize(c.marginals.size());
        for (std::size_t i = 0; i < c.marginals.size(); ++i)
            for (int side = 0; side < 2; ++side)
                if (c.marginals[i].supports(side == 0))
                    inverse[i][side] = std::make_unique<TailInverse>(c.marginals[i], side == 0, c.trunc);
    }

    void draw(Philox4x32& rng, double* out) const {
        const std::size_t n = cop.marginals.size();
        const double pick = uniform01(rng) * total;
        std::size_t o = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        o = std::min(o, orthants.size() - 1);
        const auto& orth = orthants[o];
        std::vector<double> xi(n);
        if (n == 1) {
            xi[0] = orth.tail_bounds[0] * (1.0 - uniform01(rng));
        } else {
            const double theta = cop.clayton.theta;
            std::vector<double> bpow(n);
            for (std::size_t i = 0; i < n; ++i) bpow[i] = std::pow(orth.tail_bounds[i], -theta);
            double known = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double rest = 0.0;
                for (std::size_t i = j; i < n; ++i) rest += bpow[i];
                const double s_full = known + rest;
                const double r = 1.0 - uniform01(rng);
                const double expo = -theta / (1.0 + static_cast<double>(j) * theta);
                const double upow = bpow[j] + s_full * std::expm1(expo * std::log(r));
                xi[j] = std::pow(upow, -1.0 / theta);
                known += upow;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const bool negative = (orth.mask >> i) & 1u;
            const auto& inv = *inverse[i][negative ? 1 : 0];
            const double tau = std::min(xi[i], inv.total());
            const double x = inv.invert(tau);
            out[i] = negative ? -x : x;
        }
    }
};

struct NegMultSampler {
    double s = 0.0;
    double log_mass = 0.0;
    std::vector<double> pi;

    explicit NegMultSampler(const NegativeMultinomialJumps& nm) {
        s = nm.total_weight();
        log_mass = -std::log1p(-s);
        for (double l : nm.lambdas) pi.push_back(nm.mu * l / s);
    }

    void draw(Philox4x32& rng, double* out) const {
        // logarithmic(s) total, then a multinomial split
        const double u = uniform01(rng);
        long k = 1;
        double p = s / log_mass;
        double cdf = p;
        while (u > cdf && k < 100000000) {
            ++k;
            p *= s * static_cast<double>(k - 1) / static_cast<double>(k);
            cdf += p;
        }
        long remaining = k;
        double rest = 1.0;
        for (std::size_t i = 0; i < pi.size(); ++i) {
            long c = remaining;
            if (i + 1 < pi.size() && remaining > 0) {
                const double q = std::clamp(pi[i] / rest, 0.0, 1.0);
                c = std::binomial_distribution<long>(remaining, q)(rng);
            }
            out[i] = static_cast<double>(c);
            remaining -= c;
            rest -= pi[i];
        }
    }
};

}  // namespace

struct PathSampler::Impl {
    LevyModel model;
    SimConfig config;
    double intensity = 0.0;
    Eigen::VectorXd drift;
    Eigen::MatrixXd factor;
    bool brownian = false;
    std::size_t cells = 0;
    std::uint64_t fingerprint = 0;
    std::vector<Atom> atoms;
    std::unique_ptr<std::discrete_distribution<std::size_t>> atom_pick;
    std::unique_ptr<CopulaSampler> copula;
    std::unique_ptr<NegMultSampler> negmult;

    Impl(const LevyModel& m, const SimConfig& c) : model(m), config(c) {}
};

namespace {

LevyModel apply_truncation(const LevyModel& model, const SimConfig& config) {
    if (config.trunc > 0.0 && std::holds_alternative<CopulaJumps>(model.jumps()))
        return model.with_truncation(config.trunc);
    return model;
}

}  // namespace

PathSampler::PathSampler(const LevyModel& model, const SimConfig& config)
    : impl_(std::make_unique<Impl>(apply_truncation(model, config), config)) {
    if (!(config.horizon > 0.0) || !std::isfinite(config.horizon)) throw ParameterError("horizon must be > 0");
    auto& im = *impl_;
    const int n = im.model.dimension();
    im.drift = im.model.effective_drift();
    im.fingerprint = im.model.fingerprint();
    im.brownian = im.model.has_brownian();
    if (im.brownian) {
        if (!(config.dt > 0.0)) throw ParameterError("Brownian grid step must be > 0");
        im.cells = static_cast<std::size_t>(std::ceil(config.horizon / config.dt - 1e-9));
        im.cells = std::max<std::size_t>(im.cells, 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(im.model.sigma());
        const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        im.factor = es.eigenvectors() * ev.asDiagonal();
    }
    std::visit(
        [&](const auto& jm) {
            using T = std::decay_t<decltype(jm)>;
            if constexpr (std::is_same_v<T, DiscreteJumps>) {
                im.atoms = jm.atoms;
                std::vector<double> w;
                for (const auto& a : jm.atoms) {
                    w.push_back(a.rate);
                    im.intensity += a.rate;
                }
                if (!w.empty()) im.atom_pick = std::make_unique<std::discrete_distribution<std::size_t>>(w.begin(), w.end());
            } else if constexpr (std::is_same_v<T, CopulaJumps>) {
                im.copula = std::make_unique<CopulaSampler>(jm);
                im.intensity = im.copula->total;
            } else {
                im.negmult = std::make_unique<NegMultSampler>(jm);
                im.intensity = im.negmult->log_mass;
            }
        },
        im.model.jumps());
    if (!std::isfinite(im.intensity)) throw ConfigurationError("truncated jump intensity is infinite");
    (void)n;
}

PathSampler::~PathSampler() = default;
PathSampler::PathSampler(PathSampler&&) noexcept = default;
PathSampler& PathSampler::operator=(PathSampler&&) noexcept = default;

double PathSampler::intensity() const { return impl_->intensity; }
const LevyModel& PathSampler::model() const { return impl_->model; }

SamplePath PathSampler::sample(std::uint64_t seed, std::uint64_t stream) const {
    const auto& im = *impl_;
    const int n = im.model.dimension();
    const double T = im.config.horizon;
    Philox4x32 rng(seed, stream);
    SamplePath path;
    path.n = n;
    path.horizon = T;
    path.drift = im.drift;
    path.sigma = im.model.sigma();
    path.seed = seed;
    path.stream = stream;
    path.model_fingerprint = im.fingerprint;
    if (const auto* c = std::get_if<CopulaJumps>(&im.model.jumps())) path.trunc = c->trunc;

    long count = 0;
    if (im.intensity > 0.0) count = std::poisson_distribution<long>(im.intensity * T)(rng);
    path.times.resize(static_cast<std::size_t>(count));
    for (auto& t : path.times) t = T * (1.0 - uniform01(rng));
    std::sort(path.times.begin(), path.times.end());
    path.jumps.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(n));
    for (long j = 0; j < count; ++j) {
        double* out = path.jumps.data() + j * n;
        if (im.atom_pick) {
            const auto& a = im.atoms[(*im.atom_pick)(rng)];
            std::copy(a.x.begin(), a.x.end(), out);
        } else if (im.copula) {
            im.copula->draw(rng, out);
        } else {
            im.negmult->draw(rng, out);
        }
    }
    if (im.brownian) {
        path.dt = T / static_cast<double>(im.cells);
        path.brownian.resize(im.cells * static_cast<std::size_t>(n));
        std::normal_distribution<double> normal;
        Eigen::VectorXd z(n);
        const double scale = std::sqrt(path.dt);
        for (std::size_t k = 0; k < im.cells; ++k) {
            for (int i = 0; i < n; ++i) z[i] = normal(rng);
            const Eigen::VectorXd dw = scale * (im.factor * z);
            for (int i = 0; i < n; ++i) path.brownian[k * n + i] = dw[i];
        }
    }
    return path;
}

SamplePath simulate_path(const LevyModel& model, const SimConfig& config, std::uint64_t seed, std::uint64_t stream) {
    return PathSampler(model, config).sample(seed, stream);
}

// ---------------------------------------------------------------------------
// Path functionals
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_time(const SamplePath& path, double t) {
    if (!(t >= 0.0) || t > path.horizon) throw RangeError("time " + fmt(t) + " outside [0, horizon]");
}

std::size_t jumps_upto(const SamplePath& path, double t) {
    return static_cast<std::size_t>(std::upper_bound(path.times.begin(), path.times.end(), t) - path.times.begin());
}

}  // namespace

double SamplePath::cell_time(std::size_t k) const {
    const std::size_t m = cell_count();
    if (k + 1 == m) return horizon;
    return horizon * static_cast<double>(k + 1) / static_cast<double>(m);
}

std::string SamplePath::jumps_csv() const {
    std::ostringstream os;
    os << "t_jump";
    for (int i = 0; i < n; ++i) os << ",dx_" << (i + 1);
    os << '\n';
    for (std::size_t j = 0; j < times.size(); ++j) {
        os << fmt(times[j]);
        for (int i = 0; i < n; ++i) os << ',' << fmt(jump(j)[i]);
        os << '\n';
    }
    return os.str();
}

std::string SamplePath::brownian_csv() const {
    std::ostringstream os;
    os << "t";
    for (int i = 0; i < n; ++i) os << ",dw_" << (i + 1);
    os << '\n';
    for (std::size_t k = 0; k < cell_count(); ++k) {
        os << fmt(cell_time(k));
        for (int i = 0; i < n; ++i) os << ',' << fmt(cell(k)[i]);
        os << '\n';
    }
    return os.str();
}

double power_jump(const SamplePath& path, const MultiIndex& p, double t) {
    check_time(path, t);
    if (static_cast<int>(p.size()) != path.n) throw DimensionError("index length must equal path dimension");
    if (p.degree() < 1) throw DomainError("power jump needs |p| >= 1");
    const std::size_t J = jumps_upto(path, t);
    double acc = 0.0;
    for (std::size_t j = 0; j < J; ++j) acc += p.monomial(path.jump(j));
    return acc;
}

double state(const SamplePath& path, int i, double t) {
    check_time(path, t);
    if (i < 0 || i >= path.n) throw DimensionError("coordinate out of range");
    double x = path.drift[i] * t;
    const std::size_t J = jumps_upto(path, t);
    for (std::size_t j = 0; j < J; ++j) x += path.jump(j)[i];
    for (std::size_t k = 0; k < path.cell_count() && path.cell_time(k) <= t; ++k) x += path.cell(k)[i];
    return x;
}

double teugels(const SamplePath& path, const MomentTable& table, const MultiIndex& p, double t) {
    const double m = table.value(p);
    const int i = p.unit_coordinate();
    if (i >= 0) return state(path, i, t) - m * t;
    return power_jump(path, p, t) - m * t;
}

Eigen::VectorXd teugels_vector(const SamplePath& path, const MomentTable& table, const std::vector<MultiIndex>& indices,
                               double t) {
    check_time(path, t);
    Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
    const std::size_t J = jumps_upto(path, t);
    for (std::size_t a = 0; a < indices.size(); ++a) {
        const auto& p = indices[a];
        const int i = p.unit_coordinate();
        if (i >= 0) {
            y[a] = state(path, i, t) - table.value(p) * t;
            continue;
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < J; ++j) acc += p.monomial(path.jump(j));
        y[a] = acc - table.value(p) * t;
    }
    return y;
}

namespace {

void check_compatible(const SamplePath& path, const MartingaleBasis& basis, const MomentTable& table) {
    if (basis.model_fingerprint() != table.model_fingerprint())
        throw ConfigurationError("basis and moment table come from different models");
    if (table.model_fingerprint() != 0 && path.model_fingerprint != table.model_fingerprint())
        throw ConfigurationError("path and moment table come from different models");
}

}  // namespace

Eigen::VectorXd evaluate_basis(const SamplePath& path, const MartingaleBasis& basis, const MomentTable& table, double t) {
    check_compatible(path, basis, table);
    return basis.coefficients() * teugels_vector(path, table, basis.indices(), t);
}

double bracket(const SamplePath& path, const MultiIndex& p, const MultiIndex& q, double t) {
    if (p.degree() < 1 || q.degree() < 1) throw DomainError("bracket needs |p|, |q| >= 1");
    double v = power_jump(path, p + q, t);
    const int i = p.unit_coordinate();
    const int j = q.unit_coordinate();
    if (i >= 0 && j >= 0 && path.sigma.size() > 0) v += path.sigma(i, j) * t;
    return v;
}

Eigen::MatrixXd basis_brackets(const SamplePath& path, const MartingaleBasis& basis, double t) {
    check_time(path, t);
    const auto& idx = basis.indices();
    const auto& C = basis.coefficients();
    const Eigen::Index r = C.rows();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(r, r);
    Eigen::VectorXd z(static_cast<Eigen::Index>(idx.size()));
    const std::size_t J = jumps_upto(path, t);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t a = 0; a < idx.size(); ++a) z[a] = idx[a].monomial(path.jump(j));
        const Eigen::VectorXd h = C * z;
        B.noalias() += h * h.transpose();
    }
    if (path.sigma.size() > 0 && path.sigma.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(r, path.n);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const int i = idx[a].unit_coordinate();
            if (i >= 0) U.col(i) = C.col(static_cast<Eigen::Index>(a));
        }
        B += t * (U * path.sigma * U.transpose());
    }
    return B;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

double McEstimate::z_score(double target) const {
    const double dev = std::abs(mean - target);
    if (se == 0.0) return dev == 0.0 ? 0.0 : kInf;
    return dev / se;
}

nlohmann::json McEstimate::to_json() const { return {{"mean", mean}, {"se", se}, {"n", count}, {"seed", seed}}; }

namespace {

struct Moments {
    double count = 0.0;
    std::vector<double> mean, m2;
};

void combine(Moments& into, const Moments& part) {
    if (part.count == 0.0) return;
    if (into.count == 0.0) {
        into = part;
        return;
    }
    const double total = into.count + part.count;
    for (std::size_t k = 0; k < into.mean.size(); ++k) {
        const double delta = part.mean[k] - into.mean[k];
        into.mean[k] += delta * part.count / total;
        into.m2[k] += part.m2[k] + delta * delta * into.count * part.count / total;
    }
    into.count = total;
}

constexpr std::size_t kChunk = 512;

template <class E>
[[noreturn]] void rethrow_as(const E&, const std::string& msg) {
    throw E(msg);
}

}  // namespace

std::vector<McEstimate> mc_expectation(const PathSampler& sampler, const PathFunctional& f, const McOptions& options) {
    if (options.paths < 2) throw ParameterError("Monte Carlo needs at least 2 paths");
    const std::size_t chunks = (options.paths + kChunk - 1) / kChunk;
    std::vector<Moments> parts(chunks);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_path = std::numeric_limits<std::size_t>::max();
    std::exception_ptr err;

    auto worker = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            Moments m;
            const std::size_t lo = c * kChunk;
            const std::size_t hi = std::min(options.paths, lo + kChunk);
            for (std::size_t i = lo; i < hi; ++i) {
                std::vector<double> v;
                try {
                    v = f(sampler.sample(options.seed, i));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (i < err_path) {
                        err_path = i;
                        err = std::current_exception();
                    }
                    return;
                }
                if (m.count == 0.0) {
                    m.mean.assign(v.size(), 0.0);
                    m.m2.assign(v.size(), 0.0);
                }
                if (v.size() != m.mean.size()) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (i < err_path) {
                        err_path = i;
                        err = std::make_exception_ptr(Error("functional returned a vector of changing length"));
                    }
                    return;
                }
                m.count += 1.0;
                for (std::size_t k = 0; k < v.size(); ++k) {
                    const double delta = v[k] - m.mean[k];
                    m.mean[k] += delta / m.count;
                    m.m2[k] += delta * (v[k] - m.mean[k]);
                }
            }
            parts[c] = std::move(m);
        }
    };

    const unsigned threads = std::max(1u, options.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (err) {
        const std::string where = " (path " + std::to_string(err_path) + ", seed " + std::to_string(options.seed) + ")";
        try {
            std::rethrow_exception(err);
        } catch (const NumericError& e) {
            throw NumericError(e.what() + where, e.residual());
        } catch (const CapabilityError& e) {
            rethrow_as(e, e.what() + where);
        } catch (const ValidationError& e) {
            throw ValidationError(e.what() + where);
        } catch (const std::exception& e) {
            throw Error(std::string("path functional failed: ") + e.what() + where);
        }
    }
    Moments total;
    for (const auto& p : parts) combine(total, p);
    std::vector<McEstimate> out;
    for (std::size_t k = 0; k < total.mean.size(); ++k) {
        McEstimate e;
        e.mean = total.mean[k];
        e.count = static_cast<std::size_t>(total.count);
        e.se = std::sqrt(total.m2[k] / (total.count - 1.0)) / std::sqrt(total.count);
        e.seed = options.seed;
        out.push_back(e);
    }
    return out;
}

McEstimate mc_expectation(const LevyModel& model, const SimConfig& config, const std::function<double(const SamplePath&)>& f,
                          const McOptions& options) {
    const PathSampler sampler(model, config);
    return mc_expectation(sampler, [&](const SamplePath& p) { return std::vector<double>{f(p)}; }, options).front();
}

}  // namespace levychaos
