// nlhk: build, oracle, simulate, check, report
#include "nlhk/duhamel.hpp"
#include "nlhk/estimates.hpp"
#include "nlhk/kernels.hpp"
#include "nlhk/oracle.hpp"
#include "nlhk/process_sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nlhk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kNumerical = 3 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string coef;
    double t = 1.0;
    std::string grid;
    std::string out = ".";
    std::uint64_t seed = 1;
    int threads = 0;
    std::string only;
    std::string table;
    // simulate
    std::size_t paths = 10000;
    double dt = 1e-3;
    double eps = 0.05;
    std::vector<double> x0;
    std::vector<double> radii{0.25, 0.5, 1.0};
    bool jumps_csv = false;
    bool csv = false;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

Coefficient load_coefficient(const std::string& path) {
    if (path.empty()) throw ConfigError("--coef is required");
    const json spec = read_json(path);
    try {
        Coefficient c = make_coefficient(spec);
        const std::string bad = c.check_invariants();
        if (!bad.empty()) std::cerr << "warning: coefficient invariant violated: " << bad << "\n";
        for (const auto& w : c.warnings()) std::cerr << "warning: " << w << "\n";
        return c;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
}

struct GridOverride {
    int K = 48;
    double dx = -1.0;
    double L = -1.0;
};

GridOverride parse_grid(const std::string& s) {
    GridOverride g;
    if (s.empty()) return g;
    std::stringstream ss(s);
    std::string item;
    std::vector<std::string> parts;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError("--grid expects K,dx,L");
    try {
        g.K = std::stoi(parts[0]);
        g.dx = std::stod(parts[1]);
        g.L = std::stod(parts[2]);
    } catch (const std::exception&) {
        throw ConfigError("--grid: cannot parse '" + s + "'");
    }
    if (g.K < 2 || !(g.dx > 0.0) || !(g.L > 0.0)) throw ConfigError("--grid: need K >= 2, dx > 0, L > 0");
    return g;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = fs::path(dir) / ".nlhk_write_probe";
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory not writable: " + dir);
    f.close();
    fs::remove(probe, ec);
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream f(p);
    f << j.dump(2) << "\n";
}

json base_log(const std::string& command, const Options& o, const Coefficient& c) {
    json j;
    j["command"] = command;
    j["coefficient"] = c.spec();
    j["coefficient_hash"] = c.hash();
    j["config"] = {{"coef", o.coef}, {"t", o.t},     {"grid", o.grid},
                   {"out", o.out},   {"seed", o.seed}, {"threads", omp_get_max_threads()}};
    return j;
}

struct Built {
    KernelTable table;
    json log;
};

Built build_table(const Coefficient& c, const Options& o) {
    if (!(o.t > 0.0)) throw ConfigError("--t must be positive");
    const GridOverride go = parse_grid(o.grid);
    const double Tb = choose_base_horizon(c);
    double T = o.t;
    int halvings = 0;
    while (T > Tb * (1.0 + 1e-12)) {
        T *= 0.5;
        ++halvings;
    }
    const SpaceTimeGrid g = default_grid(c, T, o.t, go.K, go.dx, go.L);
    const auto t0 = std::chrono::steady_clock::now();
    SeriesResult s = build_series(c, g);
    KernelTable q = o.t > T * (1 + 1e-12) ? extend_to(s.table, o.t) : s.table;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json log;
    log["base_horizon"] = T;
    log["T_base_rule"] = Tb;
    log["doublings"] = halvings;
    log["grid"] = {{"K", g.times.size()}, {"dx", g.dx}, {"L", q.grid.L}, {"n", q.grid.n}, {"times", q.n_times()}};
    log["terms"] = s.states.size();
    json sr = json::array();
    for (const SeriesState& st : s.states) sr.push_back(st.sup_ratio);
    log["sup_ratios"] = sr;
    SpaceTimeGrid gb = q.grid;
    gb.times.resize(std::min<std::size_t>(q.meta.value("base_K", 0), gb.times.size()));
    if (!gb.times.empty()) {
        const ResidualReport rr = duhamel_residuals(q, DuhamelOperator(c, gb));
        log["residuals"] = {{"first", rr.first},
                            {"second", rr.second_supported ? json(rr.second) : json(nullptr)},
                            {"mutual", rr.second_supported ? json(rr.mutual) : json(nullptr)}};
    }
    const double mn = q.min_value(), sup = q.sup_abs();
    log["min_value"] = mn;
    log["sup"] = sup;
    log["negative_values"] = mn < -1e-4 * sup;
    log["seconds"] = secs;
    return {std::move(q), std::move(log)};
}

int cmd_build(const Options& o) {
    const Coefficient c = load_coefficient(o.coef);
    ensure_dir(o.out);
    Built b = build_table(c, o);
    const fs::path dir(o.out);
    write_nlhk((dir / "q.nlhk").string(), b.table);
    if (o.csv) write_csv((dir / "q.csv").string(), b.table);
    json log = base_log("build", o, c);
    log["build"] = b.log;
    write_json(dir / "build_log.json", log);
    if (b.log["negative_values"].get<bool>()) std::cerr << "note: table has values below -1e-4 * sup\n";
    std::cout << log.dump() << "\n";
    return kOk;
}

int cmd_oracle(const Options& o) {
    const Coefficient c = load_coefficient(o.coef);
    if (!c.translation_invariant()) throw ConfigError("oracle needs an x-independent coefficient");
    ensure_dir(o.out);
    const GridOverride go = parse_grid(o.grid);
    const double T = o.t;
    const SpaceTimeGrid g = default_grid(c, T, T, go.K, go.dx, go.L);
    const KernelTable q = oracle_table(LevySymbol::of(c), g);
    const fs::path dir(o.out);
    write_nlhk((dir / "oracle.nlhk").string(), q);
    if (o.csv) write_csv((dir / "oracle.csv").string(), q);
    json log = base_log("oracle", o, c);
    log["oracle"] = q.meta;
    write_json(dir / "oracle_log.json", log);
    std::cout << log.dump() << "\n";
    return kOk;
}

int cmd_simulate(const Options& o) {
    const Coefficient c = load_coefficient(o.coef);
    ensure_dir(o.out);
    SimConfig cfg;
    cfg.n_paths = o.paths;
    cfg.dt = o.dt;
    cfg.eps_jump = o.eps;
    cfg.seed = o.seed;
    cfg.horizon = o.t;
    cfg.record_jumps = o.jumps_csv;
    const std::size_t steps = static_cast<std::size_t>(std::llround(o.t / o.dt));
    cfg.record_positions = !o.radii.empty() && static_cast<double>(o.paths) * (steps + 1) * c.dim() <= 2e8;
    Point x0{0.0, 0.0};
    for (std::size_t i = 0; i < o.x0.size() && i < 2; ++i) x0[i] = o.x0[i];
    SimResult sim;
    try {
        sim = simulate(c, cfg, x0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    json log = base_log("simulate", o, c);
    log["simulation"] = sim.summary();
    if (cfg.record_positions) {
        json ex = json::array();
        for (double r : o.radii) {
            const ExitStats e = exit_time_stats(sim, r);
            ex.push_back({{"r", r}, {"kappa", e.kappa}, {"median_over_r2", !e.p.empty() && e.p.back().p >= 0.5 ? json(e.median_over_r2) : json(nullptr)}, {"c20", e.c20},
                          {"p_at_horizon", e.p.empty() ? 0.0 : e.p.back().p}});
        }
        log["exit_times"] = ex;
    } else if (!o.radii.empty()) {
        log["exit_times"] = "skipped: path storage above the memory budget";
    }
    const fs::path dir(o.out);
    write_json(dir / "stats.json", {{"simulation", log["simulation"]}, {"exit_times", log["exit_times"]}});
    write_json(dir / "simulate.json", log);
    if (o.jumps_csv) {
        std::ofstream f(dir / "jumps.csv");
        f << (c.dim() == 1 ? "path,t,x_pre,z\n" : "path,t,x_pre0,x_pre1,z0,z1\n");
        f.precision(17);
        for (std::size_t i = 0; i < sim.paths.size(); ++i)
            for (const JumpRecord& j : sim.paths[i].jumps) {
                f << i << "," << j.t << "," << j.pre[0];
                if (c.dim() == 2) f << "," << j.pre[1];
                f << "," << j.z[0];
                if (c.dim() == 2) f << "," << j.z[1];
                f << "\n";
            }
    }
    std::cout << log.dump() << "\n";
    return kOk;
}

int cmd_check(const Options& o) {
    const Coefficient c = load_coefficient(o.coef);
    ensure_dir(o.out);
    KernelTable q;
    if (!o.table.empty()) {
        try {
            q = read_nlhk(o.table);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    } else {
        q = build_table(c, o).table;
    }
    if (!q.meta.contains("base_K")) {
        // uniform prefix t_k = k tau
        const auto& ts = q.grid.times;
        std::size_t k = 1;
        while (k < ts.size() && std::abs(ts[k] - (k + 1) * ts[0]) <= 1e-9 * ts[k]) ++k;
        q.meta["base_K"] = k;
    }
    const double T = q.grid.T();
    const std::size_t K = std::min<std::size_t>(q.meta.value("base_K", static_cast<int>(q.n_times())), q.n_times());
    const double Tb = q.grid.times[K - 1];
    std::vector<std::pair<std::string, std::function<std::vector<CheckReport>()>>> suite = {
        {"conservativeness", [&] { return std::vector<CheckReport>{check_conservativeness(q, c)}; }},
        {"positivity", [&] { return std::vector<CheckReport>{check_positivity(q, c)}; }},
        {"near_diag_lower", [&] { return std::vector<CheckReport>{check_near_diag_lower(q, c)}; }},
        {"two_sided", [&] { return std::vector<CheckReport>{check_two_sided(q, c)}; }},
        {"duhamel", [&] { return std::vector<CheckReport>{check_duhamel(q, c)}; }},
        {"generator", [&] { return std::vector<CheckReport>{check_generator(q, c, std::min(0.1, Tb))}; }},
        {"lemma", [&] { return check_lemma_inequalities(c.params()); }},
    };
    if (c.is_zero() || std::isfinite(c.support_radius()))
        suite.push_back({"finite_range", [&] { return std::vector<CheckReport>{check_finite_range(q, c)}; }});
    if (q.ti && c.translation_invariant())
        suite.push_back({"oracle_agreement", [&] {
                             const double hi = std::min(0.5, T);
                             return std::vector<CheckReport>{check_oracle_agreement(q, c, std::min(0.05, hi), hi)};
                         }});
    std::vector<CheckReport> all;
    bool matched = o.only.empty();
    for (auto& [name, run] : suite) {
        if (!o.only.empty() && name != o.only) continue;
        matched = true;
        for (CheckReport& r : run()) {
            std::cout << r.to_json().dump() << "\n";
            all.push_back(std::move(r));
        }
    }
    if (!matched) throw ConfigError("--only: unknown or inapplicable check '" + o.only + "'");
    std::ofstream f(fs::path(o.out) / "checks.jsonl");
    f << to_json_lines(all);
    for (const CheckReport& r : all)
        if (!r.pass) return kCheckFailed;
    return kOk;
}

int cmd_report(const Options& o) {
    if (o.table.empty()) throw ConfigError("report needs --table");
    KernelTable q;
    try {
        q = read_nlhk(o.table);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    json j;
    j["table"] = o.table;
    j["d"] = q.grid.d;
    j["translation_invariant"] = q.ti;
    j["beta"] = q.beta;
    j["times"] = q.n_times();
    j["T"] = q.grid.T();
    j["dx"] = q.grid.dx;
    j["L"] = q.grid.L;
    j["n"] = q.grid.n;
    j["sup"] = q.sup_abs();
    j["min"] = q.min_value();
    j["meta"] = q.meta;
    if (!o.out.empty() && o.csv) {
        ensure_dir(o.out);
        write_csv((fs::path(o.out) / "report.csv").string(), q);
        // log-log tail columns of the last slice along the first axis
        std::ofstream f(fs::path(o.out) / "tail.csv");
        f << "log_u,log_q\n";
        f.precision(17);
        const std::size_t k = q.n_times() - 1;
        const int n = q.grid.n;
        for (int j2 = (n - 1) / 2 + 1; j2 < n; ++j2) {
            const Point x{q.grid.coord(j2), 0.0};
            const double v = q.at(k, x, {0.0, 0.0});
            if (v > 0.0) f << std::log(x[0]) << "," << std::log(v) << "\n";
        }
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat kernels of Laplacian plus bounded nonlocal perturbations"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* s) {
        s->add_option("--coef", o.coef, "coefficient JSON");
        s->add_option("--t", o.t, "horizon");
        s->add_option("--grid", o.grid, "K,dx,L");
        s->add_option("--out", o.out, "output directory");
        s->add_option("--seed", o.seed, "RNG seed");
        s->add_option("--threads", o.threads, "worker cap (env NLHK_THREADS)");
    };
    CLI::App* build = app.add_subcommand("build", "series construction and time extension");
    common(build);
    build->add_flag("--csv", o.csv, "also write q.csv");
    CLI::App* oracle = app.add_subcommand("oracle", "Fourier oracle table");
    common(oracle);
    oracle->add_flag("--csv", o.csv, "also write oracle.csv");
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo of the process");
    common(sim);
    sim->add_option("--paths", o.paths, "number of paths");
    sim->add_option("--dt", o.dt, "Euler step");
    sim->add_option("--eps", o.eps, "small-jump cutoff");
    sim->add_option("--x0", o.x0, "start point")->expected(1, 2);
    sim->add_option("--radii", o.radii, "exit-time radii");
    sim->add_flag("--jumps-csv", o.jumps_csv, "write the jump log");
    CLI::App* check = app.add_subcommand("check", "run the inequality checks");
    common(check);
    check->add_option("--only", o.only, "run one check");
    check->add_option("--table", o.table, "table to check instead of building one");
    CLI::App* report = app.add_subcommand("report", "summarize a table");
    report->add_option("--table", o.table, "NLHK file")->required();
    report->add_option("--out", o.out, "directory for CSV output");
    report->add_flag("--csv", o.csv, "write report.csv and tail.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    int threads = o.threads;
    if (threads <= 0)
        if (const char* env = std::getenv("NLHK_THREADS")) threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*build) return cmd_build(o);
        if (*oracle) return cmd_oracle(o);
        if (*sim) return cmd_simulate(o);
        if (*check) return cmd_check(o);
        if (*report) return cmd_report(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const NonContraction& e) {
        std::cerr << "series does not contract at horizon " << e.horizon << "; try a horizon of at most "
                  << e.suggested_horizon << " or a smaller --grid step\n";
        return kNumerical;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
    return kConfig;
}
