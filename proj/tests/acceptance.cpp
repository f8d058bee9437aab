// acceptance run: one line per criterion, exit status 1 if any fails
#include "nlhk/duhamel.hpp"
#include "nlhk/estimates.hpp"
#include "nlhk/kernels.hpp"
#include "nlhk/oracle.hpp"
#include "nlhk/process_sim.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace nlhk;

namespace {

struct Outcome {
    bool pass = false;
    double value = 0.0;
    std::string tol;
    std::string detail;
};

const double A1 = 1.0 / M_PI;

// pinned tolerances
constexpr double kGaussRel = 1e-6;
constexpr double kOracleRel = 2e-2;
constexpr double kSupRatio = 0.6;
constexpr double kMass = 2e-3;
constexpr double kCK = 1e-3;
constexpr double kScaling = 1e-3;
constexpr double kDuhamel = 1e-3;
constexpr double kDuhamelMutual = 5e-3;
constexpr double kNearDiag = 0.5;
constexpr double kPositivity = 1e-4;
constexpr double kC7 = 50.0;
constexpr double kKS = 0.02;
constexpr double kKappa = 32.0 / 9.0;
constexpr double kC20Ratio = 2.0;
constexpr double kSlopeTol = 0.3;
constexpr double kLevySE = 3.0;
constexpr double kLemmaDrift = 0.05;

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Coefficient coef(const nlohmann::json& j) { return make_coefficient(j); }

const Coefficient& b_zero() {
    static const Coefficient c = coef({{"family", "zero"}});
    return c;
}
const Coefficient& b_half() {
    static const Coefficient c = coef({{"family", "constant"}, {"params", {{"c", 0.5 * A1}}}});
    return c;
}
const Coefficient& b_ind() {
    static const Coefficient c = coef({{"family", "indicator"}, {"params", {{"M", 1.0}, {"lambda", 1.0}}}});
    return c;
}
const Coefficient& b_neg() {
    static const Coefficient c =
        coef({{"family", "indicator"}, {"params", {{"M", -0.2}, {"lambda", 2.0}, {"inner", 1.0}}}});
    return c;
}

struct Built {
    SeriesResult base;
    KernelTable table;
};

// base horizon T = t / 2^m <= T_base, series on the default grid, then extension to t
const Built& built(const std::string& name, const Coefficient& c, double t) {
    static std::map<std::string, Built> cache;
    const std::string key = name + "@" + std::to_string(t);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double Tb = choose_base_horizon(c);
    double T = t;
    while (T > Tb * (1 + 1e-12)) T *= 0.5;
    Built b;
    b.base = build_series(c, default_grid(c, T, t));
    b.table = t > T * (1 + 1e-12) ? extend_to(b.base.table, t) : b.base.table;
    return cache.emplace(key, std::move(b)).first->second;
}

double rel_sup(const double* a, const double* b, std::size_t n) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / den;
}

Outcome gaussian_recovery() {
    const Built& b = built("zero", b_zero(), 1.0);
    const KernelTable& q = b.table;
    double worst = 0.0;
    for (std::size_t k = 0; k < q.n_times(); ++k)
        for (int j = 0; j < q.grid.n; ++j) {
            const double e = gaussian_r(q.grid.times[k], std::abs(q.grid.coord(j)), 1);
            if (e > 1e-280) worst = std::max(worst, std::abs(q.slice(k)[j] - e) / e);
        }
    double higher = 0.0;
    for (std::size_t n = 1; n < b.base.states.size(); ++n) higher = std::max(higher, b.base.states[n].sup);
    return {worst <= kGaussRel && higher == 0.0, worst, fmt("%.0e", kGaussRel),
            "sup of terms n>=1 = " + fmt("%g", higher)};
}

Outcome oracle_agreement() {
    const Built& b = built("half", b_half(), 0.5);
    const CheckReport r = check_oracle_agreement(b.table, b_half(), 0.05, 0.5);
    return {r.value < kOracleRel, r.value, fmt("%.0e", kOracleRel),
            "T_base=" + fmt("%g", choose_base_horizon(b_half())) + " t in [0.05,0.5], |x-y|<=4sqrt(t)"};
}

Outcome geometric_decay() {
    const Built& b = built("half", b_half(), 0.5);
    double worst = 0.0;
    std::string rs;
    for (std::size_t n = 1; n < b.base.states.size(); ++n) {
        worst = std::max(worst, b.base.states[n].sup_ratio);
        if (n <= 6) rs += fmt("%.3f ", b.base.states[n].sup_ratio);
    }
    return {worst <= kSupRatio, worst, fmt("%.1f", kSupRatio),
            "terms=" + std::to_string(b.base.states.size()) + " ratios " + rs};
}

Outcome conservativeness() {
    double worst = 0.0;
    std::string d;
    for (const auto& [name, c] : std::vector<std::pair<std::string, const Coefficient*>>{
             {"zero", &b_zero()}, {"half", &b_half()}, {"ind", &b_ind()}, {"neg", &b_neg()}}) {
        const CheckReport r = check_conservativeness(built(name, *c, 1.0).table, *c);
        worst = std::max(worst, r.value);
        d += name + "=" + fmt("%.1e ", r.value);
    }
    return {worst < kMass, worst, fmt("%.0e", kMass), d};
}

Outcome chapman_kolmogorov() {
    const Built& b = built("half", b_half(), 0.5);
    const KernelTable& q = b.base.table;
    const std::size_t K = q.n_times();
    double worst = 0.0;
    // t_k = (k + 1) tau
    for (std::size_t k1 : {K / 2 - 1, K / 4 - 1, K / 8 - 1}) {
        const std::size_t k2 = K - 2 - k1;
        const std::vector<double> comp = compose(q, k1, k2);
        worst = std::max(worst, rel_sup(comp.data(), q.slice(K - 1), q.slice_size()));
    }
    return {worst < kCK, worst, fmt("%.0e", kCK), "T=" + fmt("%g", q.grid.T()) + ", splits T/2+T/2, T/4+3T/4, T/8+7T/8"};
}

Outcome scaling_identity() {
    const double lambda = 4.0;
    const ScaledCoefficient cl = rescale(b_half(), lambda);
    const SpaceTimeGrid target = make_grid(1, 0.0625, 16, 0.015625, 4.0);
    const SpaceTimeGrid image = make_grid(1, lambda * 0.0625, 16, 0.015625 * 2.0, 8.0);
    const KernelTable tr = scaling_transfer(build_series(cl.scaled, image).table, lambda, target);
    const KernelTable direct = build_series(b_half(), target).table;
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.n_times(); ++k)
        worst = std::max(worst, rel_sup(tr.slice(k), direct.slice(k), tr.slice_size()));
    return {worst < kScaling, worst, fmt("%.0e", kScaling), "b=0.5A, lambda=4, b^(lambda)=" + fmt("%.4f", cl.sup_norm())};
}

Outcome duhamel() {
    double worst_single = 0.0, worst_mutual = 0.0;
    std::string d;
    for (const auto& [name, c] : std::vector<std::pair<std::string, const Coefficient*>>{{"half", &b_half()}, {"ind", &b_ind()}}) {
        const KernelTable& q = built(name, *c, 0.5).base.table;
        const ResidualReport rr = duhamel_residuals(q, DuhamelOperator(*c, q.grid));
        worst_single = std::max({worst_single, rr.first, rr.second});
        worst_mutual = std::max(worst_mutual, rr.mutual);
        d += name + ": first=" + fmt("%.1e", rr.first) + " second=" + fmt("%.1e", rr.second) +
             " mutual=" + fmt("%.1e ", rr.mutual);
    }
    return {worst_single < kDuhamel && worst_mutual < kDuhamelMutual, worst_single,
            fmt("%.0e", kDuhamel) + " (mutual " + fmt("%.0e", kDuhamelMutual) + ")", d};
}

Outcome near_diagonal() {
    double worst = 1e300;
    std::string d;
    for (const auto& [name, c] : std::vector<std::pair<std::string, const Coefficient*>>{
             {"zero", &b_zero()}, {"half", &b_half()}, {"ind", &b_ind()}}) {
        const CheckReport r = check_near_diag_lower(built(name, *c, 1.0).table, *c);
        // min of q / p0 on |x-y| <= 3 sqrt(t)
        const double ratio = kNearDiag * r.constants.at("min_ratio");
        worst = std::min(worst, ratio);
        d += name + "=" + fmt("%.3f ", ratio);
    }
    return {worst >= kNearDiag, worst, ">= " + fmt("%.1f", kNearDiag) + " p0", "min q/p0: " + d};
}

Outcome positivity() {
    double worst_nonneg = 0.0;
    for (const auto& [name, c] : std::vector<std::pair<std::string, const Coefficient*>>{
             {"zero", &b_zero()}, {"half", &b_half()}, {"ind", &b_ind()}}) {
        const KernelTable& q = built(name, *c, 1.0).table;
        worst_nonneg = std::max(worst_nonneg, -q.min_value() / q.sup_abs());
    }
    const CheckReport neg = check_positivity(built("neg", b_neg(), 1.0).table, b_neg());
    const double mn = neg.constants.at("min_over_sup");
    return {worst_nonneg <= kPositivity && mn < -kPositivity, worst_nonneg, fmt("%.0e", kPositivity),
            "negative-part min/sup=" + fmt("%.2e", mn)};
}

Outcome finite_range() {
    const CheckReport r = check_finite_range(built("ind", b_ind(), 1.0).table, b_ind());
    const double c7 = r.constants.at("C7");
    std::string d = "C8=" + fmt("%g", r.constants.at("C8"));
    for (const char* k : {"far_field_c", "far_field_r2"})
        if (r.constants.count(k)) d += std::string(" ") + k + "=" + fmt("%.3f", r.constants.at(k));
    return {r.pass && c7 < kC7, c7, fmt("C7 < %.0f", kC7), d};
}

SimConfig sim_config(std::size_t n, double horizon, bool positions, bool jumps) {
    SimConfig cfg;
    cfg.n_paths = n;
    cfg.dt = 1e-3;
    cfg.eps_jump = 0.05;
    cfg.horizon = horizon;
    cfg.record_positions = positions;
    cfg.record_jumps = jumps;
    return cfg;
}

Outcome monte_carlo() {
    double worst = 0.0;
    std::string d;
    for (const auto& [name, c] : std::vector<std::pair<std::string, const Coefficient*>>{{"zero", &b_zero()}, {"ind", &b_ind()}}) {
        const SimResult s = simulate(*c, sim_config(100000, 0.25, false, false), Point{});
        const KSResult ks = empirical_density_check(s, built(name, *c, 0.25).table, 0.25);
        worst = std::max(worst, ks.distance);
        d += name + "=" + fmt("%.4f ", ks.distance);
    }
    return {worst < kKS, worst, fmt("%.2f", kKS), "KS n=1e5 t=0.25: " + d};
}

double g_kappa_half = 0.0;

Outcome exit_time() {
    const SimResult s = simulate(b_ind(), sim_config(10000, 1.0, true, false), Point{});
    const ExitStats e1 = exit_time_stats(s, 0.5), e2 = exit_time_stats(s, 1.0);
    g_kappa_half = e1.kappa;
    const double ratio = std::max(e1.c20, e2.c20) / std::min(e1.c20, e2.c20);
    const bool ok = e1.kappa > 0 && e2.kappa > 0 && e1.kappa < kKappa && e2.kappa < kKappa && ratio <= kC20Ratio;
    return {ok, std::max(e1.kappa, e2.kappa), "0 < kappa < 32/9, C20 ratio <= " + fmt("%.0f", kC20Ratio),
            "b=1{|z|<=1}: kappa(0.5)=" + fmt("%.3f", e1.kappa) + " kappa(1)=" + fmt("%.3f", e2.kappa) +
                " C20(0.5)=" + fmt("%.2f", e1.c20) + " C20(1)=" + fmt("%.2f", e2.c20) + " ratio=" + fmt("%.2f", ratio)};
}

Outcome hitting() {
    const double r = 0.5;
    const double kappa = g_kappa_half > 0 ? g_kappa_half : 0.25;
    const double deadline = kappa * r * r;
    const SimResult s = simulate(b_ind(), sim_config(100000, deadline, true, false), Point{});
    std::vector<double> dist{2, 3, 4}, p;
    std::string d;
    for (double D : dist) {
        p.push_back(hitting_prob_stats(s, Point{D, 0}, r, deadline).p);
        d += fmt("P(%g)=", D) + fmt("%.2e ", p.back());
    }
    const SlopeFit f = loglog_slope(dist, p);
    const double target = -(1 + 1.0);
    const bool ok = f.valid && std::abs(f.slope - target) <= kSlopeTol;
    d += "deadline=" + fmt("%.4f", deadline);
    if (!f.valid) d += " (zero hits at some distance, no fit)";
    return {ok, f.valid ? f.slope : std::nan(""), fmt("-(d+beta) = -2 +- %.1f", kSlopeTol), d};
}

Outcome levy_system() {
    const SimResult s = simulate(b_ind(), sim_config(10000, 0.25, true, true), Point{});
    const Box A{{-0.5, 0}, {0.5, 0}};
    const LevySystemCheck near = levy_system_check(s, b_ind(), A, Box{{1.0, 0}, {1.5, 0}});
    const LevySystemCheck far = levy_system_check(s, b_ind(), A, Box{{2.0, 0}, {2.5, 0}});
    const bool ok = near.lhs > 0 && std::abs(near.defect) <= kLevySE && far.lhs == 0 && far.rhs == 0;
    return {ok, std::abs(near.defect), fmt("%.0f SE", kLevySE),
            "B=[1,1.5]: lhs=" + fmt("%.5f", near.lhs) + " rhs=" + fmt("%.5f", near.rhs) +
                "; B=[2,2.5]: lhs=" + fmt("%g", far.lhs) + " rhs=" + fmt("%g", far.rhs)};
}

Outcome lemma_suite() {
    double worst = 0.0;
    bool ok = true;
    std::string d;
    for (double beta : {0.5, 1.0, 1.5}) {
        for (const CheckReport& r : check_lemma_inequalities(ModelParams{1, beta})) {
            for (const auto& [k, v] : r.constants) ok = ok && std::isfinite(v);
            ok = ok && r.pass;
            worst = std::max(worst, r.value);
        }
    }
    d = "beta in {0.5,1,1.5}, d=1, constants C9..C13";
    return {ok && worst < kLemmaDrift, worst, fmt("drift < %.2f", kLemmaDrift), d};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gaussian_recovery", gaussian_recovery},
        {"oracle_agreement", oracle_agreement},
        {"geometric_decay", geometric_decay},
        {"conservativeness", conservativeness},
        {"chapman_kolmogorov", chapman_kolmogorov},
        {"scaling_identity", scaling_identity},
        {"duhamel_residuals", duhamel},
        {"near_diagonal_lower", near_diagonal},
        {"positivity_iff", positivity},
        {"finite_range_bound", finite_range},
        {"monte_carlo_ks", monte_carlo},
        {"exit_time", exit_time},
        {"hitting_scaling", hitting},
        {"levy_system", levy_system},
        {"lemma_suite", lemma_suite},
    };
    int failed = 0, i = 0;
    for (const auto& [name, run] : criteria) {
        ++i;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.value = std::nan("");
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::printf("[%s] %2d %-20s value=%-12.4g tol=%s | %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i, name.c_str(),
                    o.value, o.tol.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
