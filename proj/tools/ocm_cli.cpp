// Command-line driver: solves, sweeps and simulations with CSV output and a
// JSON manifest per run.

#include "ocm/ocm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/version.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Options {
    std::string model_path;
    std::string builtin;
    double rho0 = 1e3;
    int doublings = 6;
    double tol = 1e-8;
    std::vector<double> cobs;
    std::vector<double> switch_cost;
    std::optional<int> horizon;
    std::uint64_t seed = 12345;
    int trajectories = 5000;
    std::string out = ".";
    // extras for individual subcommands
    std::vector<double> p_values{0.5, 0.8, 0.9, 0.95};
    std::vector<double> gammas{0.8, 0.9, 0.99};
    std::vector<std::string> priors{"2:5", "3:3", "5:2"};
    double true_theta = 0.3;
    std::string reward = "peak";
    bool dump_lattice = false;
    bool warm_start = false;
};

/// Run-wide bookkeeping written to manifest.json.
class Manifest {
  public:
    Manifest(std::string subcommand, const Options& opt) {
        doc_["subcommand"] = std::move(subcommand);
        doc_["config"] = {{"model", opt.model_path},
                          {"builtin", opt.builtin},
                          {"rho0", opt.rho0},
                          {"doublings", opt.doublings},
                          {"tol", opt.tol},
                          {"cobs", opt.cobs},
                          {"switch_cost", opt.switch_cost},
                          {"horizon", opt.horizon ? json(*opt.horizon) : json(nullptr)},
                          {"seed", opt.seed},
                          {"trajectories", opt.trajectories},
                          {"out", opt.out}};
        doc_["versions"] = {{"ocm", ocm::version},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"boost", BOOST_LIB_VERSION},
                            {"compiler", __VERSION__}};
        const char* env = std::getenv("OCM_THREADS");
        doc_["threads"] = {{"OCM_THREADS", env ? json(env) : json(nullptr)}, {"workers", ocm::worker_count()}};
        doc_["timestamp"] = static_cast<long long>(std::time(nullptr));
        doc_["outputs"] = json::array();
        doc_["timings"] = json::array();
    }

    json& doc() { return doc_; }
    void output(const std::string& path) { doc_["outputs"].push_back(path); }
    void timing(const std::string& label, double seconds) {
        doc_["timings"].push_back({{"step", label}, {"wall_seconds", seconds}});
    }

    void write(const fs::path& dir) const {
        std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
        out << doc_.dump(2) << '\n';
    }

  private:
    json doc_;
};

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Shortest round-trip spelling, for file names and labels.
std::string cost_tag(double c) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, c);
    return std::string(buf, res.ptr);
}

ocm::BetaParams parse_prior(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ocm::ValidationError("prior", "expected alpha:beta, got '" + text + "'");
    ocm::BetaParams p{ocm::parse_double(text.substr(0, colon)), ocm::parse_double(text.substr(colon + 1))};
    try {
        p.validate();
    } catch (const ocm::ArgumentError& e) {
        throw ocm::ValidationError("prior", e.what());
    }
    return p;
}

ocm::PenaltyConfig penalty_config(const Options& opt) {
    ocm::PenaltyConfig cfg;
    cfg.rho = opt.rho0;
    cfg.doublings = opt.doublings;
    cfg.rel_tol = opt.tol;
    cfg.warm_start = opt.warm_start;
    cfg.validate();
    return cfg;
}

/// Default random-walk experiment.
ocm::OcmModel default_random_walk() {
    ocm::RandomWalkOptions o;
    o.gamma = 0.99;
    o.observation_cost = 0.25;
    o.horizon = 500;
    o.reward_timing = ocm::RewardTiming::end_of_step;
    return ocm::build_random_walk(0.75, 50, ocm::RewardKind::inverse, o);
}

ocm::OcmModel load_checked(const std::string& path) {
    if (!fs::is_regular_file(path))
        throw ocm::ValidationError("model", "no such file '" + path + "'");
    return ocm::load_model(path);
}

ocm::OcmModel resolve_model(const Options& opt, const std::string& fallback) {
    ocm::OcmModel m = [&] {
        if (!opt.model_path.empty())
            return load_checked(opt.model_path);
        const std::string tag = opt.builtin.empty() ? fallback : opt.builtin;
        if (tag == "toy")
            return ocm::build_two_state_toy(0.9);
        if (tag == "random-walk")
            return default_random_walk();
        if (tag == "ctmc")
            return ocm::to_ocm_model(ocm::build_synthetic_ctmc());
        throw ocm::ValidationError("builtin", "unknown builtin '" + tag + "'");
    }();
    if (opt.horizon)
        m = m.with_horizon(*opt.horizon);
    if (!opt.switch_cost.empty())
        m = m.with_switching_cost(opt.switch_cost.front());
    return m;
}

std::vector<double> costs_or(const Options& opt, std::vector<double> fallback) {
    return opt.cobs.empty() ? fallback : opt.cobs;
}

void emit(Manifest& manifest, const fs::path& dir, const std::string& name, const ocm::CsvTable& table) {
    const auto path = dir / name;
    ocm::emit_csv(table, path.string());
    manifest.output(name);
}

// ---------------------------------------------------------------------------

int run_solve(const Options& opt, Manifest& manifest, const fs::path& dir) {
    const auto base = resolve_model(opt, "random-walk");
    const auto cfg = penalty_config(opt);
    ocm::CsvTable summary;
    summary.header = {"c_obs", "final_residual", "value_at_first_index"};
    for (double c : costs_or(opt, {base.observation_cost()})) {
        const auto model = base.with_observation_cost(c);
        ocm::QviSystem sys(model);
        Stopwatch sw;
        const auto sol = ocm::solve_qvi(sys, cfg);
        manifest.timing("solve c=" + cost_tag(c), sw.seconds());
        emit(manifest, dir, "report_c" + cost_tag(c) + ".csv", sol.report.to_csv());
        emit(manifest, dir, "policy_c" + cost_tag(c) + ".csv",
             ocm::extract_policy(sys, sol.values).to_csv(model.state_labels()));
        summary.add_row({cost_tag(c), ocm::format_double(sol.report.final_residual),
                         ocm::format_double(sol.values[0])});
        std::cout << "c_obs=" << c << " iterations:";
        for (int it : sol.report.newton_iterations)
            std::cout << ' ' << it;
        std::cout << "  residual=" << sol.report.final_residual << '\n';
    }
    emit(manifest, dir, "solve_summary.csv", summary);
    return 0;
}

int toy_horizon(double gamma) {
    // gamma^N below 1e-10 keeps the truncation well under the penalty error
    return static_cast<int>(std::ceil(std::log(1e-10) / std::log(gamma)));
}

int run_toy(const Options& opt, Manifest& manifest, const fs::path& dir) {
    const auto cfg = penalty_config(opt);
    const double rho_max = cfg.rho * std::pow(2.0, cfg.doublings);
    ocm::CsvTable t;
    t.header = {"p", "gamma", "c_obs", "closed_form", "t_star", "solver", "gap", "bound"};
    for (double p : opt.p_values)
        for (double gamma : opt.gammas)
            for (double c : costs_or(opt, {0.0, 0.1, 0.5, 1.0})) {
                const auto cf = ocm::toy_closed_form(p, gamma, c);
                ocm::ToyOptions to{gamma, c, opt.horizon ? *opt.horizon : toy_horizon(gamma)};
                ocm::QviSystem sys(ocm::build_two_state_toy(p, to));
                Stopwatch sw;
                const auto sol = ocm::solve_qvi(sys, cfg);
                manifest.timing("toy p=" + cost_tag(p) + " gamma=" + cost_tag(gamma) + " c=" + cost_tag(c),
                                sw.seconds());
                const double v = sol.values[static_cast<Eigen::Index>(sys.index(1, 0, 0))];
                t.add_row({cost_tag(p), cost_tag(gamma), cost_tag(c),
                           ocm::format_double(cf.v1),
                           cf.t_star == ocm::never_observe ? "inf" : ocm::format_int(cf.t_star),
                           ocm::format_double(v), ocm::format_double(std::abs(v - cf.v1)),
                           ocm::format_double(5.0 / rho_max)});
                std::cout << "p=" << p << " gamma=" << gamma << " c_obs=" << c << " closed form " << cf.v1
                          << " solver " << v << '\n';
            }
    emit(manifest, dir, "toy.csv", t);
    return 0;
}

int run_table1(const Options& opt, Manifest& manifest, const fs::path& dir) {
    const auto base = resolve_model(opt, "random-walk");
    const auto cfg = penalty_config(opt);
    ocm::CsvTable t;
    t.header = {"c_obs", "line"};
    for (int k = 0; k <= cfg.doublings; ++k)
        t.header.push_back(ocm::format_double(cfg.rho * std::pow(2.0, k)));
    for (double c : costs_or(opt, {0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 6.0})) {
        ocm::QviSystem sys(base.with_observation_cost(c));
        Stopwatch sw;
        const auto sol = ocm::solve_qvi(sys, cfg);
        manifest.timing("table1 c=" + cost_tag(c), sw.seconds());
        const auto block = sol.report.to_csv();
        for (const auto& row : block.rows) {
            std::vector<std::string> r{cost_tag(c)};
            r.insert(r.end(), row.begin(), row.end());
            t.add_row(std::move(r));
        }
        std::cout << "c_obs=" << c << "\n  (a)";
        for (int it : sol.report.newton_iterations)
            std::cout << ' ' << it;
        std::cout << "\n  (b)";
        for (double inc : sol.report.increments)
            std::cout << ' ' << inc;
        std::cout << '\n';
    }
    emit(manifest, dir, "table1.csv", t);
    return 0;
}

int run_waiting(const Options& opt, Manifest& manifest, const fs::path& dir) {
    const auto base = resolve_model(opt, "random-walk");
    const auto cfg = penalty_config(opt);
    const auto costs = costs_or(opt, {0.0, 0.25, 0.5, 1.0});
    const auto switches = opt.switch_cost.empty() ? std::vector<double>{0.0, 0.25, 0.5, 1.0} : opt.switch_cost;
    std::vector<std::pair<double, double>> pairs{{0.0, 0.0}};
    for (double g : switches)
        pairs.emplace_back(0.25, g);
    for (double c : costs)
        pairs.emplace_back(c, 0.25);
    std::vector<std::pair<std::string, ocm::OcmPolicy>> policies;
    std::vector<std::string> seen;
    for (auto [c, g] : pairs) {
        const std::string label = "c=" + cost_tag(c) + ";g=" + cost_tag(g);
        if (std::find(seen.begin(), seen.end(), label) != seen.end())
            continue;
        seen.push_back(label);
        ocm::QviSystem sys(base.with_observation_cost(c).with_switching_cost(g));
        Stopwatch sw;
        const auto sol = ocm::solve_qvi(sys, cfg);
        manifest.timing("waiting " + label, sw.seconds());
        policies.emplace_back(label, ocm::extract_policy(sys, sol.values));
        std::cout << "solved " << label << '\n';
    }
    std::vector<std::string> labels = base.state_labels();
    if (labels.empty())
        for (int x = 0; x < base.num_states(); ++x)
            labels.push_back(std::to_string(x));
    emit(manifest, dir, "waiting.csv", ocm::waiting_time_table(policies, labels));
    return 0;
}

ocm::BayesOcmModel bayes_model(const Options& opt, const ocm::BetaParams& prior, double c) {
    ocm::BayesOcmModel m;
    m.prior = prior;
    m.observation_cost = c;
    m.horizon = opt.horizon ? *opt.horizon : 50;
    if (opt.reward == "peak")
        m.reward = ocm::line_reward(ocm::RewardKind::peak);
    else if (opt.reward == "inverse")
        m.reward = ocm::line_reward(ocm::RewardKind::inverse);
    else
        throw ocm::ValidationError("reward", "expected 'peak' or 'inverse'");
    m.validate();
    return m;
}

std::string prior_tag(const ocm::BetaParams& p) {
    return "Beta(" + cost_tag(p.alpha) + "," + cost_tag(p.beta) + ")";
}

int run_bayes(const Options& opt, Manifest& manifest, const fs::path& dir) {
    ocm::CsvTable t;
    t.header = {"prior", "c_obs", "initial_value", "initial_action"};
    for (const auto& text : opt.priors) {
        const auto prior = parse_prior(text);
        for (double c : costs_or(opt, {0.1, 0.25, 0.5, 0.75})) {
            Stopwatch sw;
            const auto sol = ocm::solve_bayes_finite(bayes_model(opt, prior, c));
            manifest.timing("bayes " + prior_tag(prior) + " c=" + cost_tag(c), sw.seconds());
            t.add_row({prior_tag(prior), cost_tag(c), ocm::format_double(sol.initial_value()),
                       ocm::format_int(sol.initial_action())});
            if (opt.dump_lattice)
                emit(manifest, dir,
                     "lattice_" + cost_tag(prior.alpha) + "_" + cost_tag(prior.beta) + "_c" +
                         cost_tag(c) + ".csv",
                     sol.to_csv());
            std::cout << prior_tag(prior) << " c_obs=" << c << " V0=" << sol.initial_value() << '\n';
        }
    }
    emit(manifest, dir, "bayes.csv", t);
    return 0;
}

int run_simulate(const Options& opt, Manifest& manifest, const fs::path& dir) {
    if (opt.trajectories < 2)
        throw ocm::ValidationError("trajectories", "need at least two trajectories");
    ocm::CsvTable table;
    table.header = {"prior", "c_obs", "avg_observations", "se_observations", "avg_profit", "se_profit",
                    "avg_hdi_width", "se_hdi_width", "trajectories"};
    const auto costs = costs_or(opt, {0.1, 0.25, 0.5, 0.75});
    // wide layout: one row per prior and statistic, one column per cost
    ocm::CsvTable wide;
    wide.header = {"prior", "line"};
    for (double c : costs)
        wide.header.push_back(cost_tag(c));
    ocm::CsvTable reg;
    reg.header = {"prior", "c_obs", "mode", "time", "mean", "stderr"};
    ocm::CsvTable exps;
    exps.header = {"prior", "c_obs", "mode", "exponent"};
    manifest.doc()["true_theta"] = opt.true_theta;
    for (const auto& text : opt.priors) {
        const auto prior = parse_prior(text);
        std::vector<std::string> obs_row{prior_tag(prior), "observations"};
        std::vector<std::string> profit_row{prior_tag(prior), "profit"};
        std::vector<std::string> hdi_row{prior_tag(prior), "hdi_width"};
        for (double c : costs) {
            const auto model = bayes_model(opt, prior, c);
            Stopwatch sw;
            auto sol = std::make_shared<const ocm::BayesLatticeSolution>(ocm::solve_bayes_finite(model));
            ocm::BayesRolloutPolicy policy(sol);
            const auto trs = ocm::simulate_many(model, policy, opt.true_theta, opt.seed, opt.trajectories);
            const auto st = ocm::mc_stats(trs);
            table.add_row({prior_tag(prior), cost_tag(c), ocm::format_double(st.avg_observations),
                           ocm::format_double(st.se_observations), ocm::format_double(st.avg_profit),
                           ocm::format_double(st.se_profit), ocm::format_double(st.avg_hdi_width),
                           ocm::format_double(st.se_hdi_width), ocm::format_int(st.trajectories)});
            obs_row.push_back(ocm::format_double(st.avg_observations));
            profit_row.push_back(ocm::format_double(st.avg_profit));
            hdi_row.push_back(ocm::format_double(st.avg_hdi_width));
            for (auto mode : {ocm::RegretMode::full, ocm::RegretMode::cost_adjusted}) {
                const std::string tag = mode == ocm::RegretMode::full ? "full" : "cost_adjusted";
                const auto curve = ocm::regret(trs, ocm::reference_reward_curve(model, opt.true_theta, mode));
                for (std::size_t i = 0; i < curve.mean.size(); ++i)
                    reg.add_row({prior_tag(prior), cost_tag(c), tag, ocm::format_int(static_cast<long long>(i)),
                                 ocm::format_double(curve.mean[i]), ocm::format_double(curve.stderr_[i])});
                std::string exponent = "nan";
                if (model.horizon > 10) {
                    try {
                        exponent = ocm::format_double(ocm::regret_exponent(curve, 10, model.horizon));
                    } catch (const ocm::Error&) {
                        // nonpositive mean regret in the window: no power law to fit
                    }
                }
                exps.add_row({prior_tag(prior), cost_tag(c), tag, exponent});
            }
            manifest.timing("simulate " + prior_tag(prior) + " c=" + cost_tag(c), sw.seconds());
            std::cout << prior_tag(prior) << " c_obs=" << c << "  obs " << st.avg_observations << " ("
                      << st.se_observations << ")  profit " << st.avg_profit << " (" << st.se_profit << ")  hdi "
                      << st.avg_hdi_width << '\n';
        }
        wide.add_row(std::move(obs_row));
        wide.add_row(std::move(profit_row));
        wide.add_row(std::move(hdi_row));
    }
    emit(manifest, dir, "table3.csv", wide);
    emit(manifest, dir, "table3_cells.csv", table);
    emit(manifest, dir, "regret.csv", reg);
    emit(manifest, dir, "regret_exponents.csv", exps);
    return 0;
}

int run_validate(const Options& opt, Manifest& manifest, const fs::path&) {
    if (opt.model_path.empty())
        throw ocm::ValidationError("model", "validate needs --model");
    const auto m = load_checked(opt.model_path);
    manifest.doc()["model_summary"] = {{"states", m.num_states()}, {"actions", m.num_actions()},
                                       {"horizon", m.horizon()}};
    std::cout << opt.model_path << ": ok (" << m.num_states() << " states, " << m.num_actions() << " actions, N="
              << m.horizon() << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Observation cost models: QVI solves, sweeps and Bayesian simulation"};
    app.require_subcommand(1);
    Options opt;

    auto* model_opt = app.add_option("--model", opt.model_path, "model JSON file");
    app.add_option("--builtin", opt.builtin, "builtin model")
        ->check(CLI::IsMember({"toy", "random-walk", "ctmc"}))
        ->excludes(model_opt);
    app.add_option("--rho0", opt.rho0, "initial penalty");
    app.add_option("--doublings", opt.doublings, "number of penalty doublings");
    app.add_option("--tol", opt.tol, "relative Newton tolerance");
    app.add_option("--cobs", opt.cobs, "observation costs (comma list)")->delimiter(',');
    app.add_option("--switch-cost", opt.switch_cost, "switching costs (comma list)")->delimiter(',');
    app.add_option("--horizon", opt.horizon, "truncation level / horizon");
    app.add_option("--seed", opt.seed, "root seed");
    app.add_option("--trajectories", opt.trajectories, "trajectories per cell");
    app.add_option("--out", opt.out, "output directory");
    app.add_option("--p", opt.p_values, "toy persistence probabilities")->delimiter(',');
    app.add_option("--gamma", opt.gammas, "toy discount factors")->delimiter(',');
    app.add_option("--prior", opt.priors, "Beta priors alpha:beta (comma list)")->delimiter(',');
    app.add_option("--theta", opt.true_theta, "true drift parameter for simulation");
    app.add_option("--reward", opt.reward, "line reward for Bayesian runs")->check(CLI::IsMember({"peak", "inverse"}));
    app.add_flag("--dump-lattice", opt.dump_lattice, "write the full Bayesian lattice");
    app.add_flag("--warm-start", opt.warm_start, "start each penalty level from the previous solution");

    using Runner = int (*)(const Options&, Manifest&, const fs::path&);
    const std::vector<std::tuple<std::string, std::string, Runner>> commands{
        {"solve", "solve the QVI for each c_obs", run_solve},
        {"toy", "closed form against the solver on the two-state model", run_toy},
        {"table1", "iteration counts and increments over the penalty schedule", run_table1},
        {"waiting", "waiting-time sweep over c_obs and switching cost", run_waiting},
        {"bayes", "Bayesian lattice values", run_bayes},
        {"simulate", "Bayesian rollouts: observations, profit, HDI width, regret", run_simulate},
        {"validate", "check a model file", run_validate},
    };
    for (const auto& [name, help, fn] : commands)
        app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto* sub = app.get_subcommands().front();
    try {
        const fs::path dir(opt.out);
        fs::create_directories(dir);
        Manifest manifest(sub->get_name(), opt);
        Stopwatch total;
        int status = 1;
        for (const auto& [name, help, fn] : commands)
            if (name == sub->get_name())
                status = fn(opt, manifest, dir);
        manifest.timing("total", total.seconds());
        manifest.write(dir);
        return status;
    } catch (const ocm::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ocm::ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ocm::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << " (last residual " << e.last_residual() << ")\n";
        return 3;
    } catch (const ocm::SolverError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ocm::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ocm::ResourceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
