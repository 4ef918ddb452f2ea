#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "levychaos/chaos.hpp"
#include "levychaos/errors.hpp"
#include "levychaos/levy_model.hpp"
#include "levychaos/moments.hpp"
#include "levychaos/orthobasis.hpp"
#include "levychaos/simulate.hpp"

using namespace levychaos;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string command;
    std::string model_path;
    std::string kind = "orth";
    int degree = 2;
    double horizon = 1.0;
    double trunc = 0.0;
    double dt = 0.01;
    std::size_t paths = 10000;
    std::optional<std::uint64_t> seed;
    std::uint64_t resolved_seed = 0;
    unsigned threads = 1;
    std::string out;
    double tol = 0.0;
    bool reorthogonalize = false;
    double lambda = 1.0;
    double eps = 1.0;
};

class ParseFailure : public ValidationError {
public:
    using ValidationError::ValidationError;
};

json config_json(const RunConfig& c) {
    json j = {{"command", c.command}, {"model", c.model_path}, {"degree", c.degree}, {"horizon", c.horizon},
              {"trunc", c.trunc},     {"dt", c.dt},            {"paths", c.paths},   {"seed", c.resolved_seed},
              {"seed_source", c.seed ? "flag" : "entropy"},    {"tol", c.tol},
              {"reorthogonalize", c.reorthogonalize}};
    if (c.command == "verify") j["kind"] = c.kind;
    if (c.command == "inspect") {
        j["lambda"] = c.lambda;
        j["eps"] = c.eps;
    }
    return j;
}

void validate(const RunConfig& c) {
    if (c.degree < 1) throw ParameterError("--degree must be >= 1");
    if (!(c.horizon > 0.0)) throw ParameterError("--horizon must be > 0");
    if (c.trunc < 0.0) throw ParameterError("--trunc must be >= 0");
    if (!(c.dt > 0.0)) throw ParameterError("--dt must be > 0");
    if (c.paths < 2) throw ParameterError("--paths must be >= 2");
    if (c.threads < 1) throw ParameterError("--threads must be >= 1");
    if (c.tol < 0.0) throw ParameterError("--tol must be >= 0");
    if (!(c.lambda > 0.0) || !(c.eps > 0.0)) throw ParameterError("--lambda and --eps must be > 0");
}

LevyModel load_model(const RunConfig& c) {
    std::ifstream in(c.model_path, std::ios::binary);
    if (!in) throw ConfigurationError("cannot open model file '" + c.model_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseFailure(c.model_path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
    }
    try {
        LevyModel m = LevyModel::from_json(j);
        if (c.trunc > 0.0) m = m.with_truncation(c.trunc);
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid model: ") + e.what());
    }
}

void write_file(const RunConfig& c, const std::string& name, const std::string& content) {
    if (c.out.empty()) return;
    std::filesystem::create_directories(c.out);
    std::ofstream f(std::filesystem::path(c.out) / name, std::ios::binary);
    if (!f) throw ConfigurationError("cannot write to output directory '" + c.out + "'");
    f << content;
}

json estimate_json(const McEstimate& e, double target) {
    json j = e.to_json();
    j["target"] = target;
    j["z"] = e.z_score(target);
    return j;
}

json cmd_inspect(const RunConfig& c, const LevyModel& model) {
    const auto h = check_hypothesis1(model, c.lambda, c.eps);
    return {{"dimension", model.dimension()},
            {"activity_class", model.activity_class()},
            {"finite_activity", model.finite_activity()},
            {"has_brownian", model.has_brownian()},
            {"model", model.to_json()},
            {"hypothesis1", to_json(h)}};
}

json cmd_gram(const RunConfig& c, const LevyModel& model) {
    const auto table = moment_table(model, c.degree);
    const auto gram = gram_matrix(table, model.sigma(), c.degree);
    write_file(c, "moments.csv", table.to_csv());
    write_file(c, "gram.csv", gram.to_csv());
    json rows = json::array();
    for (Eigen::Index r = 0; r < gram.matrix.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(gram.matrix.cols()));
        for (Eigen::Index k = 0; k < gram.matrix.cols(); ++k) row[static_cast<std::size_t>(k)] = gram.matrix(r, k);
        rows.push_back(row);
    }
    return {{"indices", gram.indices}, {"gram", rows}, {"moments", table.to_json()}};
}

struct Pipeline {
    MomentTable table;
    GramMatrix gram;
    MartingaleBasis basis;
};

Pipeline build_basis(const RunConfig& c, const LevyModel& model, int degree) {
    Pipeline p;
    p.table = moment_table(model, degree);
    p.gram = gram_matrix(p.table, model.sigma(), degree);
    OrthogonalizeOptions opt;
    opt.drop_tol = c.tol;
    opt.auto_reorthogonalize = c.reorthogonalize;
    p.basis = orthogonalize(p.gram, opt);
    return p;
}

json cmd_orthogonalize(const RunConfig& c, const LevyModel& model) {
    const auto p = build_basis(c, model, c.degree);
    write_file(c, "moments.csv", p.table.to_csv());
    write_file(c, "gram.csv", p.gram.to_csv());
    write_file(c, "basis.json", p.basis.to_json().dump(2) + "\n");
    write_file(c, "basis.csv", p.basis.to_csv());
    return {{"basis", p.basis.to_json()},
            {"retained", p.basis.retained().size()},
            {"dropped", p.basis.dropped().size()},
            {"orthogonality_certificate", p.basis.orthogonality_certificate(p.gram.matrix)}};
}

json cmd_simulate(const RunConfig& c, const LevyModel& model) {
    const SimConfig sim{c.horizon, c.dt, 0.0};
    const auto path = simulate_path(model, sim, c.resolved_seed, 0);
    write_file(c, "jumps.csv", path.jumps_csv());
    if (path.cell_count() > 0) write_file(c, "brownian.csv", path.brownian_csv());
    std::vector<double> terminal;
    for (int i = 0; i < path.n; ++i) terminal.push_back(state(path, i, c.horizon));
    return {{"jump_count", path.jump_count()}, {"brownian_cells", path.cell_count()}, {"terminal_state", terminal}};
}

json cmd_verify_moments(const RunConfig& c, const LevyModel& model) {
    const auto table = moment_table(model, c.degree);
    const auto idx = enumerate_up_to(model.dimension(), c.degree);
    const PathSampler sampler(model, {c.horizon, c.dt, 0.0});
    const double T = c.horizon;
    auto est = mc_expectation(
        sampler,
        [&](const SamplePath& path) {
            std::vector<double> v;
            for (const auto& p : idx) {
                const int i = p.unit_coordinate();
                v.push_back((i >= 0 ? state(path, i, T) : power_jump(path, p, T)) / T);
            }
            return v;
        },
        {c.paths, c.resolved_seed, c.threads});
    json rows = json::array();
    double max_z = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const double m = table.value(idx[k]);
        max_z = std::max(max_z, est[k].z_score(m));
        rows.push_back({{"index", idx[k]}, {"estimate", estimate_json(est[k], m)}});
    }
    return {{"moments", rows}, {"max_abs_z", max_z}, {"pass", max_z <= 4.0}};
}

json cmd_verify_orth(const RunConfig& c, const LevyModel& model) {
    const auto p = build_basis(c, model, c.degree);
    const PathSampler sampler(model, {c.horizon, c.dt, 0.0});
    const double T = c.horizon;
    const auto r = static_cast<std::size_t>(p.basis.retained().size());
    auto est = mc_expectation(
        sampler,
        [&](const SamplePath& path) {
            const Eigen::VectorXd h = evaluate_basis(path, p.basis, p.table, T);
            const Eigen::MatrixXd br = basis_brackets(path, p.basis, T);
            std::vector<double> v(h.data(), h.data() + h.size());
            for (std::size_t a = 0; a < r; ++a)
                for (std::size_t b = a + 1; b < r; ++b) {
                    v.push_back(h[static_cast<Eigen::Index>(a)] * h[static_cast<Eigen::Index>(b)]);
                    v.push_back(br(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
                }
            return v;
        },
        {c.paths, c.resolved_seed, c.threads});
    json means = json::array();
    double max_z = 0.0;
    for (std::size_t a = 0; a < r; ++a) {
        max_z = std::max(max_z, est[a].z_score());
        means.push_back({{"index", p.basis.retained()[a]}, {"estimate", estimate_json(est[a], 0.0)}});
    }
    json pairs = json::array();
    std::size_t pos = r;
    for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = a + 1; b < r; ++b) {
            const auto& prod = est[pos++];
            const auto& brk = est[pos++];
            max_z = std::max({max_z, prod.z_score(), brk.z_score()});
            pairs.push_back({{"p", p.basis.retained()[a]},
                             {"q", p.basis.retained()[b]},
                             {"product", estimate_json(prod, 0.0)},
                             {"bracket", estimate_json(brk, 0.0)}});
        }
    return {{"retained", p.basis.retained()},
            {"orthogonality_certificate", p.basis.orthogonality_certificate(p.gram.matrix)},
            {"means", means},
            {"pairs", pairs},
            {"max_abs_z", max_z},
            {"pass", max_z <= 4.0}};
}

json cmd_verify_crp(const RunConfig& c, const LevyModel& model) {
    const int kmax = std::min(c.degree, kDefaultKMax);
    const auto p = build_basis(c, model, kmax);
    CrpOptions opt;
    opt.mode = model.has_brownian() ? CrpMode::mc : CrpMode::exact;
    opt.sim = {c.horizon, c.dt, 0.0};
    opt.mc = {c.paths, c.resolved_seed, c.threads};
    json reports = json::array();
    bool pass = true;
    for (const auto& k : enumerate_up_to(model.dimension(), kmax)) {
        const auto rep = verify_crp(model, p.table, p.basis, k, opt);
        json j = rep.to_json();
        j.erase("covariances");
        if (opt.mode == CrpMode::exact) pass = pass && rep.max_residual_y < 1e-9 && rep.max_residual_h < 1e-9;
        else pass = pass && rep.residual_y.z_score() <= 4.0 && rep.residual_h.z_score() <= 4.0;
        pass = pass && rep.max_abs_z <= 4.0;
        reports.push_back(j);
    }
    return {{"mode", opt.mode == CrpMode::exact ? "exact" : "mc"}, {"expansions", reports}, {"pass", pass}};
}

int exit_code_for(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ValidationError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const NumericError& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return 3;
    } catch (const CapabilityError& ex) {
        std::cerr << "unsupported: " << ex.what() << "\n";
        return 4;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
}

void add_common(CLI::App* sub, RunConfig& c, bool sampling) {
    sub->add_option("--model", c.model_path, "model JSON file")->required();
    sub->add_option("--degree", c.degree, "maximum basis degree");
    sub->add_option("--trunc", c.trunc, "copula truncation level (overrides the model)");
    sub->add_option("--out", c.out, "output directory for CSV/JSON side files");
    sub->add_option("--tol", c.tol, "Gram-Schmidt drop tolerance (0 = relative default)");
    sub->add_flag("--reorthogonalize", c.reorthogonalize, "second Gram-Schmidt sweep when the condition estimate exceeds 1e8");
    if (sampling) {
        sub->add_option("--horizon", c.horizon, "time horizon");
        sub->add_option("--dt", c.dt, "Brownian grid step");
        sub->add_option("--paths", c.paths, "Monte Carlo path count");
        sub->add_option("--seed", c.seed, "random seed");
        sub->add_option("--threads", c.threads, "worker threads");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Teugels-martingale bases and chaos expansions of multidimensional Levy processes"};
    app.require_subcommand(1);
    RunConfig c;
    auto* inspect = app.add_subcommand("inspect", "model summary and exponential moment check");
    add_common(inspect, c, false);
    inspect->add_option("--lambda", c.lambda, "exponential moment rate");
    inspect->add_option("--eps", c.eps, "radius excluded from the exponential moment");
    auto* gram = app.add_subcommand("gram", "moment table and Gram matrix");
    add_common(gram, c, false);
    auto* ortho = app.add_subcommand("orthogonalize", "graded-lex Gram-Schmidt basis");
    add_common(ortho, c, false);
    auto* simulate = app.add_subcommand("simulate", "simulate one path");
    add_common(simulate, c, true);
    auto* verify = app.add_subcommand("verify", "Monte Carlo and pathwise verification");
    add_common(verify, c, true);
    verify->add_option("--kind", c.kind, "orth | crp | moments")->check(CLI::IsMember({"orth", "crp", "moments"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    c.command = app.get_subcommands().front()->get_name();

    try {
        validate(c);
        c.resolved_seed = c.seed ? *c.seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
        const LevyModel model = load_model(c);
        json result;
        if (c.command == "inspect") result = cmd_inspect(c, model);
        else if (c.command == "gram") result = cmd_gram(c, model);
        else if (c.command == "orthogonalize") result = cmd_orthogonalize(c, model);
        else if (c.command == "simulate") result = cmd_simulate(c, model);
        else if (c.kind == "orth") result = cmd_verify_orth(c, model);
        else if (c.kind == "crp") result = cmd_verify_crp(c, model);
        else result = cmd_verify_moments(c, model);
        json report = {{"config", config_json(c)}, {"model_fingerprint", model.fingerprint()}, {"result", result}};
        const std::string text = report.dump(2) + "\n";
        write_file(c, "report.json", text);
        std::cout << text;
        return 0;
    } catch (...) {
        return exit_code_for(std::current_exception());
    }
}
