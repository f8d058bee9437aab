#include "nlhk/process_sim.hpp"

#include "nlhk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace nlhk {

void SimConfig::validate(const Coefficient& c) const {
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be at least 1");
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be positive");
    if (!(eps_jump > 0.0)) throw std::invalid_argument("SimConfig: eps_jump must be positive");
    if (!c.is_zero() && !(eps_jump < c.support_radius()))
        throw std::invalid_argument("SimConfig: eps_jump must lie below the support radius of b");
    if (!(r_max > eps_jump)) throw std::invalid_argument("SimConfig: r_max must exceed eps_jump");
}

nlohmann::json SimConfig::to_json() const {
    return {{"n_paths", n_paths}, {"dt", dt},         {"eps_jump", eps_jump},
            {"seed", seed},       {"horizon", horizon}, {"r_max", r_max},
            {"record_positions", record_positions}, {"record_jumps", record_jumps}};
}

Point SimResult::position(std::size_t path, std::size_t step) const {
    const std::vector<double>& v = paths[path].positions;
    if (v.empty()) throw std::logic_error("SimResult: positions were not recorded");
    return d == 1 ? Point{v[step], 0.0} : Point{v[2 * step], v[2 * step + 1]};
}

nlohmann::json SimResult::summary() const {
    nlohmann::json j;
    j["config"] = cfg.to_json();
    j["d"] = d;
    j["x0"] = d == 1 ? nlohmann::json{x0[0]} : nlohmann::json{x0[0], x0[1]};
    j["steps"] = steps;
    j["jump_rate"] = rate;
    j["unsimulated_tail_rate"] = tail_mass;
    j["proposals"] = proposals;
    j["accepted"] = accepted;
    j["acceptance_rate"] = proposals ? static_cast<double>(accepted) / proposals : 0.0;
    j["clipped"] = clipped;
    nlohmann::json mean = nlohmann::json::array(), var = nlohmann::json::array();
    for (int a = 0; a < d; ++a) {
        double m = 0.0, m2 = 0.0;
        for (const PathSample& p : paths) {
            const double u = p.final_pos[a] - x0[a];
            m += u;
            m2 += u * u;
        }
        const double n = static_cast<double>(paths.size());
        m /= n;
        mean.push_back(m);
        var.push_back(n > 1 ? (m2 - n * m * m) / (n - 1) : 0.0);
    }
    j["displacement_mean"] = mean;
    j["displacement_var"] = var;
    return j;
}

double jump_rate(const Coefficient& c, double eps, double r_max) {
    if (c.is_zero()) return 0.0;
    const ModelParams& p = c.params();
    const double R = std::min(c.support_radius(), r_max);
    if (!(R > eps)) return 0.0;
    const double radial = (std::pow(eps, -p.beta) - std::pow(R, -p.beta)) / p.beta;
    return c.sup_norm() * sphere_area(p.d) * radial;
}

std::array<double, 3> small_jump_covariance(const Coefficient& c, const Point& x, double eps) {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    if (c.is_zero()) return out;
    const ModelParams& p = c.params();
    // radial weight rho^{1 - beta} on [0, eps], split at the jumps of b
    std::vector<double> br{0.0};
    for (double b : c.radial_breaks())
        if (b > 0.0 && b < eps) br.push_back(b);
    br.push_back(eps);
    std::vector<double> nodes, weights;
    {
        const double a = br[1];
        const QuadRule gj = gauss_jacobi_unit(12, 1.0 - p.beta);
        for (std::size_t i = 0; i < gj.size(); ++i) {
            nodes.push_back(a * gj.nodes[i]);
            weights.push_back(gj.weights[i] * std::pow(a, 2.0 - p.beta));
        }
        for (std::size_t k = 1; k + 1 < br.size(); ++k) {
            const QuadRule gl = gauss_legendre(12, br[k], br[k + 1]);
            for (std::size_t i = 0; i < gl.size(); ++i) {
                nodes.push_back(gl.nodes[i]);
                weights.push_back(gl.weights[i] * std::pow(gl.nodes[i], 1.0 - p.beta));
            }
        }
    }
    if (p.d == 1) {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            out[0] += weights[i] * (c(x, {nodes[i], 0.0}) + c(x, {-nodes[i], 0.0}));
        return out;
    }
    const int na = 32;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (int a = 0; a < na; ++a) {
            const double th = 2.0 * M_PI * a / na;
            const double cx = std::cos(th), sy = std::sin(th);
            const double w = weights[i] * (2.0 * M_PI / na) * c(x, {nodes[i] * cx, nodes[i] * sy});
            out[0] += w * cx * cx;
            out[1] += w * sy * sy;
            out[2] += w * cx * sy;
        }
    return out;
}

namespace {

struct Counters {
    std::size_t proposals = 0, accepted = 0, clipped = 0;
};

void run_path(const Coefficient& c, const SimResult& res, const std::array<double, 3>* fixed_cov, std::size_t path,
              PathSample& out, Counters& cnt) {
    const SimConfig& cfg = res.cfg;
    const int d = res.d;
    const double beta = c.params().beta;
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::poisson_distribution<int> clock(res.rate * cfg.dt);

    const double M = c.sup_norm();
    const double R = std::min(c.support_radius(), cfg.r_max);
    const double e_b = std::pow(cfg.eps_jump, -beta);
    const double span = e_b - (std::isfinite(R) ? std::pow(R, -beta) : 0.0);

    Point X = res.x0;
    if (cfg.record_positions) {
        out.positions.reserve((res.steps + 1) * d);
        for (int a = 0; a < d; ++a) out.positions.push_back(X[a]);
    }
    for (std::size_t k = 0; k < res.steps; ++k) {
        const std::array<double, 3> cov =
            fixed_cov ? *fixed_cov : small_jump_covariance(c, X, cfg.eps_jump);
        // Brownian part of Δ (variance 2 dt) plus the small-jump Gaussian
        if (d == 1) {
            X[0] += std::sqrt((2.0 + cov[0]) * cfg.dt) * normal(rng);
        } else {
            const double a11 = 2.0 + cov[0], a22 = 2.0 + cov[1], a12 = cov[2];
            const double l11 = std::sqrt(a11), l21 = a12 / l11, l22 = std::sqrt(std::max(0.0, a22 - l21 * l21));
            const double n1 = normal(rng), n2 = normal(rng);
            const double s = std::sqrt(cfg.dt);
            X[0] += s * l11 * n1;
            X[1] += s * (l21 * n1 + l22 * n2);
        }
        if (res.rate > 0.0) {
            const int nj = clock(rng);
            for (int j = 0; j < nj; ++j) {
                ++cnt.proposals;
                const double rho = std::pow(e_b - unif(rng) * span, -1.0 / beta);
                Point z;
                if (d == 1) {
                    z = {unif(rng) < 0.5 ? -rho : rho, 0.0};
                } else {
                    const double th = 2.0 * M_PI * unif(rng);
                    z = {rho * std::cos(th), rho * std::sin(th)};
                }
                double acc = c(X, z) / M;
                if (acc > 1.0) {
                    ++cnt.clipped;
                    acc = 1.0;
                }
                if (unif(rng) < acc) {
                    ++cnt.accepted;
                    if (cfg.record_jumps) out.jumps.push_back({(k + 1) * cfg.dt, X, z});
                    X = X + z;
                }
            }
        }
        if (cfg.record_positions)
            for (int a = 0; a < d; ++a) out.positions.push_back(X[a]);
    }
    out.final_pos = X;
}

}  // namespace

SimResult simulate(const Coefficient& c, const SimConfig& cfg, const Point& x0) {
    cfg.validate(c);
    if (!c.nonneg()) throw std::invalid_argument("simulate: b takes negative values; no process exists");
    SimResult res;
    res.cfg = cfg;
    res.d = c.dim();
    res.x0 = res.d == 1 ? Point{x0[0], 0.0} : x0;
    res.steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
    if (res.steps == 0) throw std::invalid_argument("simulate: horizon shorter than one step");
    res.rate = jump_rate(c, cfg.eps_jump, cfg.r_max);
    if (!c.is_zero() && cfg.r_max < c.support_radius())
        res.tail_mass = c.sup_norm() * sphere_area(res.d) * std::pow(cfg.r_max, -c.beta()) / c.beta();
    res.paths.resize(cfg.n_paths);

    std::array<double, 3> cov0{0.0, 0.0, 0.0};
    const bool frozen = c.translation_invariant();
    if (frozen) cov0 = small_jump_covariance(c, {0.0, 0.0}, cfg.eps_jump);

    std::size_t prop = 0, acc = 0, clip = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : prop, acc, clip)
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
        Counters cnt;
        run_path(c, res, frozen ? &cov0 : nullptr, i, res.paths[i], cnt);
        prop += cnt.proposals;
        acc += cnt.accepted;
        clip += cnt.clipped;
    }
    res.proposals = prop;
    res.accepted = acc;
    res.clipped = clip;
    return res;
}

KSResult empirical_density_check(const SimResult& sim, const KernelTable& table, double t) {
    const int k = table.grid.time_index(t);
    if (k < 0) throw std::invalid_argument("empirical_density_check: t is not a table time");
    if (std::abs(sim.steps * sim.cfg.dt - t) > 1e-9 * std::max(1.0, t))
        throw std::invalid_argument("empirical_density_check: t differs from the simulated horizon");
    const SpaceTimeGrid& g = table.grid;
    const int n = g.n;
    const double* s = table.slice(static_cast<std::size_t>(k));
    // marginal masses in the first coordinate at positions pos[j]
    std::vector<double> pos(n), mass(n, 0.0);
    if (table.ti) {
        for (int j = 0; j < n; ++j) pos[j] = sim.x0[0] + g.coord(j);
        if (g.d == 1) {
            for (int j = 0; j < n; ++j) mass[j] = s[j] * g.dx;
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) mass[i] += s[static_cast<std::size_t>(i) * n + j] * g.dx * g.dx;
        }
    } else {
        const int i0 = g.index_of(sim.x0[0]);
        if (i0 < 0) throw std::invalid_argument("empirical_density_check: x0 is not a lattice node");
        for (int j = 0; j < n; ++j) {
            pos[j] = g.coord(j);
            mass[j] = s[static_cast<std::size_t>(i0) * n + j] * g.dx;
        }
    }
    std::vector<double> cum(n + 1, 0.0);
    for (int j = 0; j < n; ++j) cum[j + 1] = cum[j] + mass[j];
    const double total = cum[n];
    auto F = [&](double x) {
        const double u = (x - (pos[0] - 0.5 * g.dx)) / g.dx;
        if (u <= 0.0) return 0.0;
        if (u >= n) return 1.0;
        const int j = static_cast<int>(u);
        return (cum[j] + (u - j) * mass[j]) / total;
    };
    std::vector<double> xs;
    xs.reserve(sim.paths.size());
    for (const PathSample& p : sim.paths) xs.push_back(p.final_pos[0]);
    std::sort(xs.begin(), xs.end());
    KSResult r;
    r.n = xs.size();
    const double N = static_cast<double>(r.n);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = F(xs[i]);
        r.distance = std::max({r.distance, std::abs(f - i / N), std::abs((i + 1) / N - f)});
    }
    r.se = 0.5 / std::sqrt(N);
    r.critical95 = 1.36 / std::sqrt(N);
    return r;
}

Proportion wilson(std::size_t hits, std::size_t n, double z) {
    Proportion p;
    p.hits = hits;
    p.n = n;
    if (n == 0) return p;
    const double N = static_cast<double>(n);
    p.p = hits / N;
    const double den = 1.0 + z * z / N;
    const double centre = (p.p + z * z / (2 * N)) / den;
    const double half = z * std::sqrt(p.p * (1 - p.p) / N + z * z / (4 * N * N)) / den;
    p.lo = std::max(0.0, centre - half);
    p.hi = std::min(1.0, centre + half);
    return p;
}

ExitStats exit_time_stats(const SimResult& sim, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("exit_time_stats: r must be positive");
    const std::size_t S = sim.steps;
    std::vector<std::size_t> first(S + 2, 0);  // count of exits at step k
    for (std::size_t i = 0; i < sim.paths.size(); ++i) {
        for (std::size_t k = 1; k <= S; ++k) {
            if (dist(sim.position(i, k), sim.x0, sim.d) >= r) {
                ++first[k];
                break;
            }
        }
    }
    ExitStats e;
    e.r = r;
    const std::size_t n = sim.paths.size();
    std::size_t cum = 0;
    const double r2 = r * r;
    for (std::size_t k = 1; k <= S; ++k) {
        cum += first[k];
        const double s = k * sim.cfg.dt;
        const Proportion p = wilson(cum, n);
        e.s.push_back(s);
        e.p.push_back(p);
        if (s / r2 < 32.0 / 9.0 && p.hi <= 0.5) e.kappa = s / r2;
        if (e.median_over_r2 == 0.0 && p.p >= 0.5) e.median_over_r2 = s / r2;
        e.c20 = std::max(e.c20, p.p * r2 / s);
    }
    return e;
}

Proportion hitting_prob_stats(const SimResult& sim, const Point& y, double r, double deadline) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sim.paths.size(); ++i) {
        for (std::size_t k = 0; k <= sim.steps && k * sim.cfg.dt < deadline; ++k) {
            if (dist(sim.position(i, k), y, sim.d) < r) {
                ++hits;
                break;
            }
        }
    }
    return wilson(hits, sim.paths.size());
}

SlopeFit loglog_slope(const std::vector<double>& dist, const std::vector<double>& p) {
    SlopeFit f;
    const std::size_t n = dist.size();
    if (n < 2 || p.size() != n) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p[i] > 0.0)) return f;
        const double x = std::log(dist[i]), y = std::log(p[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double vx = sxx - sx * sx / n;
    f.slope = (sxy - sx * sy / n) / vx;
    f.intercept = (sy - f.slope * sx) / n;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::log(p[i]) - f.intercept - f.slope * std::log(dist[i]);
            rss += e * e;
        }
        f.se = std::sqrt(rss / (n - 2) / vx);
    }
    f.valid = true;
    return f;
}

bool Box::contains(const Point& x, int d) const {
    if (x[0] < lo[0] || x[0] > hi[0]) return false;
    return d == 1 || (x[1] >= lo[1] && x[1] <= hi[1]);
}

namespace {

// int_{B, |u - x| >= eps} b(x, u - x) |u - x|^{-d-beta} du
double jump_intensity(const Coefficient& c, const Point& x, const Box& B, double eps) {
    const ModelParams& p = c.params();
    if (p.d == 1) {
        std::vector<double> br{B.lo[0], B.hi[0], x[0] - eps, x[0] + eps};
        for (double b : c.radial_breaks()) {
            br.push_back(x[0] - b);
            br.push_back(x[0] + b);
        }
        if (std::isfinite(c.support_radius())) {
            br.push_back(x[0] - c.support_radius());
            br.push_back(x[0] + c.support_radius());
        }
        std::sort(br.begin(), br.end());
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < br.size(); ++i) {
            const double a = std::max(br[i], B.lo[0]), b = std::min(br[i + 1], B.hi[0]);
            if (!(b > a)) continue;
            const double mid = 0.5 * (a + b);
            if (std::abs(mid - x[0]) < eps) continue;
            const QuadRule q = gauss_legendre(16, a, b);
            for (std::size_t k = 0; k < q.size(); ++k) {
                const double z = q.nodes[k] - x[0];
                acc += q.weights[k] * c(x, {z, 0.0}) * std::pow(std::abs(z), -1.0 - p.beta);
            }
        }
        return acc;
    }
    const QuadRule q0 = gauss_legendre(48, B.lo[0], B.hi[0]);
    const QuadRule q1 = gauss_legendre(48, B.lo[1], B.hi[1]);
    double acc = 0.0;
    for (std::size_t i = 0; i < q0.size(); ++i)
        for (std::size_t j = 0; j < q1.size(); ++j) {
            const Point z{q0.nodes[i] - x[0], q1.nodes[j] - x[1]};
            const double r = std::hypot(z[0], z[1]);
            if (r < eps) continue;
            acc += q0.weights[i] * q1.weights[j] * c(x, z) * std::pow(r, -2.0 - p.beta);
        }
    return acc;
}

}  // namespace

LevySystemCheck levy_system_check(const SimResult& sim, const Coefficient& c, const Box& A, const Box& B) {
    if (!sim.cfg.record_positions || !sim.cfg.record_jumps)
        throw std::invalid_argument("levy_system_check: needs recorded positions and jumps");
    const std::size_t n = sim.paths.size();
    const int d = sim.d;
    std::vector<double> diff(n);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double cnt = 0.0;
        for (const JumpRecord& j : sim.paths[i].jumps)
            if (A.contains(j.pre, d) && B.contains(j.pre + j.z, d)) cnt += 1.0;
        double integ = 0.0;
        if (!c.is_zero())
            for (std::size_t k = 0; k < sim.steps; ++k) {
                const Point x = sim.position(i, k);
                if (A.contains(x, d)) integ += sim.cfg.dt * jump_intensity(c, x, B, sim.cfg.eps_jump);
            }
        lhs += cnt;
        rhs += integ;
        diff[i] = cnt - integ;
    }
    LevySystemCheck r;
    r.lhs = lhs / n;
    r.rhs = rhs / n;
    double m = 0.0, v = 0.0;
    for (double x : diff) m += x;
    m /= n;
    for (double x : diff) v += (x - m) * (x - m);
    r.se = n > 1 ? std::sqrt(v / (n - 1) / n) : 0.0;
    if (r.lhs == 0.0 && r.rhs == 0.0) {
        r.defect = 0.0;
        r.pass = true;
    } else {
        r.defect = r.se > 0.0 ? (r.lhs - r.rhs) / r.se : std::numeric_limits<double>::infinity();
        r.pass = std::abs(r.defect) <= 3.0;
    }
    return r;
}

}  // namespace nlhk
