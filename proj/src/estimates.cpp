#include "nlhk/estimates.hpp"

#include "nlhk/duhamel.hpp"
#include "nlhk/kernels.hpp"
#include "nlhk/nonlocal_op.hpp"
#include "nlhk/oracle.hpp"
#include "nlhk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nlhk {

nlohmann::json CheckReport::to_json() const {
    nlohmann::json j;
    j["check_id"] = check_id;
    j["constants"] = nlohmann::json::object();
    for (const auto& [k, v] : constants) j["constants"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    j["worst_point"] = worst_point;
    j["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
    j["threshold"] = threshold;
    j["margin"] = std::isfinite(margin) ? nlohmann::json(margin) : nlohmann::json(nullptr);
    j["verdict"] = pass ? "pass" : "fail";
    if (!note.empty()) j["note"] = note;
    return j;
}

std::string to_json_lines(const std::vector<CheckReport>& reports) {
    std::string out;
    for (const CheckReport& r : reports) out += r.to_json().dump() + "\n";
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One table value with its lattice offset (x - y) / dx.
struct Entry {
    std::size_t k;
    double t;
    Point x, y;
    int m0, m1;
    double q;
};

int half_width(const KernelTable& tb) { return (tb.grid.n - 1) / 2; }

// largest |offset| index that can occur
int offset_extent(const KernelTable& tb) { return tb.ti ? half_width(tb) : tb.grid.n - 1; }

template <class F>
void for_slice(const KernelTable& tb, std::size_t k, F&& f) {
    const SpaceTimeGrid& g = tb.grid;
    const int n = g.n, h = half_width(tb);
    const double* s = tb.slice(k);
    Entry e{k, g.times[k], {0, 0}, {0, 0}, 0, 0, 0.0};
    if (tb.ti && g.d == 1) {
        for (int j = 0; j < n; ++j) {
            e.x = {g.coord(j), 0.0};
            e.m0 = j - h;
            e.q = s[j];
            f(e);
        }
    } else if (tb.ti) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                e.x = {g.coord(i), g.coord(j)};
                e.m0 = i - h;
                e.m1 = j - h;
                e.q = s[static_cast<std::size_t>(i) * n + j];
                f(e);
            }
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                e.x = {g.coord(i), 0.0};
                e.y = {g.coord(j), 0.0};
                e.m0 = i - j;
                e.q = s[static_cast<std::size_t>(i) * n + j];
                f(e);
            }
    }
}

double offset_norm(const Entry& e, double dx, int d) {
    return d == 1 ? std::abs(e.m0) * dx : std::hypot(e.m0, e.m1) * dx;
}

std::vector<double> point_of(const Entry& e, int d) {
    if (d == 1) return {e.t, e.x[0], e.y[0]};
    return {e.t, e.x[0], e.x[1], e.y[0], e.y[1]};
}

// radial density sampled on offsets m * h, |m_i| <= half
struct Profile {
    int d = 1;
    int half = 0;
    std::vector<double> v;
    double at(int m0, int m1) const {
        const int n = 2 * half + 1;
        if (std::abs(m0) > half || std::abs(m1) > half) return 0.0;
        if (d == 1) return v[m0 + half];
        return v[static_cast<std::size_t>(m0 + half) * n + (m1 + half)];
    }
};

Profile gaussian_profile(int d, double t, double h, int half) {
    Profile p{d, half, {}};
    const int n = 2 * half + 1;
    p.v.resize(d == 1 ? n : static_cast<std::size_t>(n) * n);
    if (d == 1) {
        for (int j = 0; j < n; ++j) p.v[j] = gaussian_r(t, (j - half) * h, 1);
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                p.v[static_cast<std::size_t>(i) * n + j] = gaussian_r(t, std::hypot(i - half, j - half) * h, 2);
    }
    return p;
}

Profile symbol_profile(const LevySymbol& sym, double t, double h, int half) {
    const OracleDensity od = density_from_symbol(sym, t, h, half * h);
    if (od.n != 2 * half + 1) throw std::logic_error("symbol_profile: lattice mismatch");
    return Profile{sym.params().d, half, od.values};
}

// p_a(t, .) on offsets m * h; a = 0 is the Gaussian
Profile pa_profile(const ModelParams& p, double a, double t, double h, int half) {
    if (a <= 0.0) return gaussian_profile(p.d, t, h, half);
    return symbol_profile(LevySymbol::stable(p, a), t, h, half);
}

// indices of at most `count` table times with t <= t_max, spread evenly
std::vector<std::size_t> pick_times(const KernelTable& tb, double t_min, double t_max, std::size_t count) {
    std::vector<std::size_t> all;
    for (std::size_t k = 0; k < tb.n_times(); ++k) {
        const double t = tb.grid.times[k];
        if (t >= t_min * (1 - 1e-12) && t <= t_max * (1 + 1e-12)) all.push_back(k);
    }
    if (all.size() <= count) return all;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = (i * (all.size() - 1)) / (count - 1);
        if (out.empty() || out.back() != all[j]) out.push_back(all[j]);
    }
    return out;
}

double slice_peak(const KernelTable& tb, std::size_t k) {
    const double* s = tb.slice(k);
    double m = 0.0;
    for (std::size_t i = 0; i < tb.slice_size(); ++i) m = std::max(m, std::abs(s[i]));
    return m;
}

std::size_t base_count(const KernelTable& tb) {
    return static_cast<std::size_t>(tb.meta.value("base_K", static_cast<int>(tb.n_times())));
}

double base_horizon(const KernelTable& tb) {
    const std::size_t K = std::min(base_count(tb), tb.n_times());
    return tb.grid.times[K - 1];
}

CheckReport finish_upper(CheckReport r) {
    r.margin = r.threshold > 0.0 ? r.value / r.threshold : kInf;
    r.pass = std::isfinite(r.value) && r.value < r.threshold;
    return r;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

CheckReport check_conservativeness(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    CheckReport r;
    r.check_id = "conservativeness";
    r.threshold = th.mass;
    const SpaceTimeGrid& g = table.grid;
    const int d = g.d, n = g.n;
    const double cell = d == 1 ? g.dx : g.dx * g.dx;
    const double Le = g.L + 0.5 * g.dx;
    bool tail_known = true;
    // one-jump far field t * int_{|w| > R} J^b(x, w) dw
    auto jump_tail = [&](const Point& x, double R) {
        if (c.is_zero() || !tail_known) return 0.0;
        if (R >= c.support_radius()) return 0.0;
        try {
            return c.tail_mass(x, R);
        } catch (const std::exception&) {
            tail_known = false;
            return 0.0;
        }
    };
    double worst = -1.0;
    double max_corr = 0.0;
    for (std::size_t k = 0; k < table.n_times(); ++k) {
        const double t = g.times[k];
        const double* s = table.slice(k);
        const double st = 2.0 * std::sqrt(t);
        auto consider = [&](double mass, const Point& x) {
            const double err = std::abs(mass - 1.0);
            if (err > worst) {
                worst = err;
                r.worst_point = d == 1 ? std::vector<double>{t, x[0]} : std::vector<double>{t, x[0], x[1]};
            }
        };
        if (table.ti) {
            double mass = 0.0;
            for (std::size_t i = 0; i < table.slice_size(); ++i) mass += s[i];
            mass *= cell;
            const double e = std::erfc(Le / st);
            const double gauss = d == 1 ? e : 1.0 - (1.0 - e) * (1.0 - e);
            const double corr = gauss + t * jump_tail({0, 0}, Le);
            max_corr = std::max(max_corr, corr);
            consider(mass + corr, {0, 0});
        } else {
            // rows away from the lattice edge
            for (int i = 0; i < n; ++i) {
                const double x = g.coord(i);
                if (std::abs(x) > 0.5 * g.L) continue;
                double mass = 0.0;
                for (int j = 0; j < n; ++j) mass += s[static_cast<std::size_t>(i) * n + j];
                mass *= g.dx;
                const double gauss = 0.5 * std::erfc((Le - x) / st) + 0.5 * std::erfc((Le + x) / st);
                const double corr =
                    gauss + 0.5 * t * (jump_tail({x, 0}, Le - x) + jump_tail({x, 0}, Le + x));
                max_corr = std::max(max_corr, corr);
                consider(mass + corr, {x, 0});
            }
        }
    }
    r.value = worst;
    r.constants["max_tail_correction"] = max_corr;
    if (!tail_known) r.note = "no closed-form jump tail; Gaussian tail only";
    return finish_upper(r);
}

CheckReport check_two_sided(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    CheckReport r;
    r.check_id = "two_sided";
    r.threshold = th.two_sided_ratio;
    const ModelParams& p = c.params();
    const SpaceTimeGrid& g = table.grid;
    const double A = stable_normalizer(p).value;
    const double aM = std::max(0.0, c.upper_env()) / A;
    const double am = std::max(0.0, c.lower_env()) / A;
    const bool lower = c.lower_env() >= 0.0;
    const int ext = offset_extent(table);
    const std::vector<std::size_t> ks = pick_times(table, 0.0, 1.0, 12);
    const double shrinks[3] = {1.0, 0.5, 0.25};
    double best_up = kInf, best_lo = 0.0;
    std::vector<double> wp_up, wp_lo;
    for (double sc : shrinks) {
        double up = 0.0, lo = kInf;
        std::vector<double> wu, wl;
        for (std::size_t k : ks) {
            const double t = g.times[k];
            const double floor = th.noise_floor * slice_peak(table, k);
            const Profile Pu = pa_profile(p, aM, t, sc * g.dx, ext);
            Profile Pl;
            double env0 = 0.0;
            if (lower) {
                Pl = pa_profile(p, am, t, g.dx / sc, ext);
                env0 = Pl.at(0, 0);
            }
            for_slice(table, k, [&](const Entry& e) {
                const double eu = Pu.at(e.m0, e.m1);
                if (std::abs(e.q) > floor && eu > 0.0) {
                    const double ratio = e.q / eu;
                    if (ratio > up) {
                        up = ratio;
                        wu = point_of(e, p.d);
                    }
                }
                if (lower) {
                    const double el = Pl.at(e.m0, e.m1);
                    if (el >= 1e-6 * env0 && el > 0.0) {
                        const double ratio = e.q / el;
                        if (ratio < lo) {
                            lo = ratio;
                            wl = point_of(e, p.d);
                        }
                    }
                }
            });
        }
        r.constants["C_upper@" + fmt(sc)] = up;
        if (lower) r.constants["C_lower@" + fmt(sc)] = lo;
        if (up < best_up) {
            best_up = up;
            wp_up = wu;
            r.constants["C4"] = sc;
        }
        if (lower && lo > best_lo) {
            best_lo = lo;
            wp_lo = wl;
            r.constants["C2"] = sc;
        }
    }
    r.constants["C3"] = best_up;
    r.constants["a_upper"] = aM;
    if (lower) {
        r.constants["C1"] = best_lo;
        r.constants["a_lower"] = am;
        r.value = best_lo > 0.0 ? best_up / best_lo : kInf;
        r.worst_point = wp_lo;
    } else {
        r.value = std::isfinite(best_up) ? 1.0 : kInf;
        r.worst_point = wp_up;
        r.note = "b takes negative values: lower envelope not applicable, upper constant only";
    }
    return finish_upper(r);
}

CheckReport check_finite_range(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    if (!c.is_zero() && !std::isfinite(c.support_radius()))
        throw std::invalid_argument("check_finite_range: coefficient has infinite support");
    CheckReport r;
    r.check_id = "finite_range";
    r.threshold = th.finite_range_c7;
    const ModelParams& p = c.params();
    const SpaceTimeGrid& g = table.grid;
    const int d = p.d;
    const int ext = offset_extent(table);
    const std::vector<std::size_t> ks = pick_times(table, 0.0, 1.0, 12);
    const LevySymbol trunc = LevySymbol::truncated_stable(p);
    const double shrinks[3] = {1.0, 0.5, 0.25};
    double best = kInf;
    std::vector<std::string> skipped;
    for (double sc : shrinks) {
        double c7 = 0.0;
        std::vector<double> wp;
        for (std::size_t k : ks) {
            const double t = g.times[k];
            Profile P0 = gaussian_profile(d, t, sc * g.dx, ext);
            Profile Pb;
            try {
                Pb = symbol_profile(trunc, t, sc * g.dx, ext);
            } catch (const std::exception&) {
                if (sc == 1.0) skipped.push_back(fmt(t));
                continue;
            }
            const double cap = std::pow(t, -0.5 * d);
            const double floor = th.noise_floor * slice_peak(table, k);
            for_slice(table, k, [&](const Entry& e) {
                if (std::abs(e.q) <= floor) return;
                const double env = std::min(cap, P0.at(e.m0, e.m1) + std::max(0.0, Pb.at(e.m0, e.m1)));
                if (!(env > 0.0)) return;
                const double ratio = e.q / env;
                if (ratio > c7) {
                    c7 = ratio;
                    wp = point_of(e, d);
                }
            });
        }
        r.constants["C7@" + fmt(sc)] = c7;
        if (c7 < best) {
            best = c7;
            r.constants["C8"] = sc;
            r.worst_point = wp;
        }
    }
    r.constants["C7"] = best;
    r.value = best;

    // induction bound q <= C0 (t/n)^n on |x - y| >= n r
    const double lam = c.is_zero() ? 0.0 : c.support_radius();
    const double rr = 1.5 * std::max(1.0, lam);
    r.constants["induction_r"] = rr;
    bool induction_ok = true;
    for (int nn = 1; nn <= 3; ++nn) {
        double c0 = 0.0;
        for (std::size_t k = 0; k < table.n_times(); ++k) {
            const double t = g.times[k];
            if (t > 1.0) break;
            const double floor = th.noise_floor * slice_peak(table, k);
            const double bound = std::pow(t / nn, nn);
            for_slice(table, k, [&](const Entry& e) {
                if (offset_norm(e, g.dx, d) < nn * rr || std::abs(e.q) <= floor) return;
                c0 = std::max(c0, e.q / bound);
            });
        }
        r.constants["C0_n" + std::to_string(nn)] = c0;
        if (!std::isfinite(c0)) induction_ok = false;
    }

    // far-field shape log q ~ a + c |u| log(t / |u|) on |u| in [2, 6]
    bool shape_ok = true;
    std::size_t kf = table.n_times();
    for (std::size_t k = 0; k < table.n_times(); ++k)
        if (g.times[k] <= 1.0 + 1e-12) kf = k;
    std::string shape_note;
    if (c.is_zero()) {
        shape_note = "b = 0: far-field shape not applicable";
    } else if (!c.nonneg()) {
        shape_note = "b takes negative values: far-field shape not applicable";
    } else if (kf < table.n_times()) {
        const double t = g.times[kf];
        const double floor = th.noise_floor * slice_peak(table, kf);
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        int cnt = 0;
        for_slice(table, kf, [&](const Entry& e) {
            if (!table.ti && std::abs(e.y[0]) > 1e-12) return;
            const double u = offset_norm(e, g.dx, d);
            if (u < 2.0 || u > 6.0 || e.q <= floor) return;
            const double X = u * std::log(t / u), Y = std::log(e.q);
            sx += X;
            sy += Y;
            sxx += X * X;
            sxy += X * Y;
            syy += Y * Y;
            ++cnt;
        });
        if (cnt >= 3) {
            const double vx = sxx - sx * sx / cnt, vy = syy - sy * sy / cnt, cxy = sxy - sx * sy / cnt;
            const double slope = cxy / vx;
            const double r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
            r.constants["far_field_c"] = slope;
            r.constants["far_field_r2"] = r2;
            r.constants["far_field_t"] = t;
            shape_ok = slope > 0.0 && r2 >= 0.95;
        } else {
            shape_note = "too few far-field points above the noise floor";
            shape_ok = false;
        }
    }
    r = finish_upper(r);
    r.pass = r.pass && induction_ok && shape_ok;
    if (!skipped.empty()) {
        std::string s = "truncated-stable profile unavailable at t =";
        for (const auto& x : skipped) s += " " + x;
        shape_note += (shape_note.empty() ? "" : "; ") + s;
    }
    r.note = shape_note;
    return r;
}

CheckReport check_positivity(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    CheckReport r;
    r.check_id = "positivity";
    r.threshold = th.positivity;
    const int d = table.grid.d;
    auto scan = [&](const KernelTable& tb, double& mn, std::vector<double>& wp) {
        const double sup = tb.sup_abs();
        mn = kInf;
        for (std::size_t k = 0; k < tb.n_times(); ++k)
            for_slice(tb, k, [&](const Entry& e) {
                if (e.q < mn) {
                    mn = e.q;
                    wp = point_of(e, d);
                }
            });
        return sup > 0.0 ? mn / sup : 0.0;
    };
    double mn;
    std::vector<double> wp;
    double rel = scan(table, mn, wp);
    r.worst_point = wp;
    r.constants["min_over_sup"] = rel;
    if (c.nonneg()) {
        r.value = std::max(0.0, -rel);
        return finish_upper(r);
    }
    int refinements = 0;
    if (!(rel < -th.positivity)) {
        double T = base_horizon(table);
        for (int i = 0; i < 3 && !(rel < -th.positivity); ++i) {
            T *= 0.5;
            ++refinements;
            try {
                const SeriesResult s = build_series(c, default_grid(c, T, T));
                std::vector<double> w2;
                double m2;
                const double rel2 = scan(s.table, m2, w2);
                if (rel2 < rel) {
                    rel = rel2;
                    r.worst_point = w2;
                }
            } catch (const std::exception& ex) {
                r.note = std::string("refinement failed: ") + ex.what();
                break;
            }
        }
    }
    r.constants["min_over_sup"] = rel;
    r.constants["refinements"] = refinements;
    // a negative value must be found
    r.value = -rel;
    r.margin = r.value > 0.0 ? th.positivity / r.value : kInf;
    r.pass = rel < -th.positivity;
    if (r.note.empty()) r.note = "b has a negative part: a value below -tol * sup is required";
    return r;
}

CheckReport check_near_diag_lower(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    (void)c;
    CheckReport r;
    r.check_id = "near_diag_lower";
    r.threshold = 1.0;
    const SpaceTimeGrid& g = table.grid;
    const int d = g.d;
    const double Tb = base_horizon(table);
    double worst = kInf;
    for (std::size_t k = 0; k < table.n_times(); ++k) {
        const double t = g.times[k];
        if (t > Tb * (1 + 1e-12)) break;
        const double rad = 3.0 * std::sqrt(t);
        for_slice(table, k, [&](const Entry& e) {
            const double u = offset_norm(e, g.dx, d);
            if (u > rad) return;
            const double target = th.near_diag_factor * gaussian_r(t, u, d);
            const double ratio = (e.q + th.near_diag_abs) / target;
            if (ratio < worst) {
                worst = ratio;
                r.worst_point = point_of(e, d);
            }
        });
    }
    r.constants["min_ratio"] = worst;
    r.constants["T_base"] = Tb;
    r.value = worst;
    r.margin = worst > 0.0 ? 1.0 / worst : kInf;
    r.pass = worst >= 1.0;
    return r;
}

CheckReport check_oracle_agreement(const KernelTable& table, const Coefficient& c, double t_min, double t_max,
                                   double radius, const Thresholds& th) {
    if (!table.ti) throw std::invalid_argument("check_oracle_agreement: needs a translation-invariant table");
    CheckReport r;
    r.check_id = "oracle_agreement";
    r.threshold = th.oracle;
    const SpaceTimeGrid& g = table.grid;
    const LevySymbol sym = LevySymbol::of(c);
    const int half = half_width(table);
    double worst = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < table.n_times(); ++k) {
        const double t = g.times[k];
        if (t < t_min * (1 - 1e-12) || t > t_max * (1 + 1e-12)) continue;
        ++used;
        const Profile o = symbol_profile(sym, t, g.dx, half);
        const double rad = radius * std::sqrt(t);
        for_slice(table, k, [&](const Entry& e) {
            if (offset_norm(e, g.dx, g.d) > rad) return;
            const double ov = o.at(e.m0, e.m1);
            const double err = std::abs(e.q - ov) / std::abs(ov);
            if (err > worst) {
                worst = err;
                r.worst_point = point_of(e, g.d);
            }
        });
    }
    r.constants["times_compared"] = used;
    r.value = used > 0 ? worst : kInf;
    if (used == 0) r.note = "no grid time in the requested window";
    return finish_upper(r);
}

CheckReport check_duhamel(const KernelTable& table, const Coefficient& c, const Thresholds& th) {
    CheckReport r;
    r.check_id = "duhamel";
    r.threshold = th.duhamel;
    SpaceTimeGrid g = table.grid;
    g.times.resize(std::min(base_count(table), g.times.size()));
    const DuhamelOperator op(c, g);
    const ResidualReport rr = duhamel_residuals(table, op);
    r.constants["first"] = rr.first;
    r.constants["second"] = rr.second;
    r.constants["mutual"] = rr.mutual;
    r.value = rr.second_supported ? std::max(rr.first, rr.second) : rr.first;
    r = finish_upper(r);
    if (rr.second_supported) {
        r.margin = std::max(r.margin, rr.mutual / th.duhamel_mutual);
        r.pass = r.pass && rr.mutual < th.duhamel_mutual;
    } else {
        r.note = "second form not supported for d = 2; first form only";
    }
    return r;
}

CheckReport check_generator(const KernelTable& table, const Coefficient& c, double t_max, const Thresholds& th) {
    CheckReport r;
    r.check_id = "generator";
    r.threshold = th.generator;
    const int d = table.grid.d;
    const TestFunction f = gaussian_bump(1.0, {0.0, 0.0}, d);
    std::vector<Point> xs;
    if (d == 1)
        xs = {{-1.0, 0}, {-0.5, 0}, {0, 0}, {0.5, 0}, {1.0, 0}};
    else
        xs = {{0, 0}, {0.5, 0}, {0.5, 0.5}, {-1.0, 0.25}};
    const GeneratorDefect gd = generator_check(table, c, f, xs, t_max);
    r.constants["defect"] = gd.defect;
    r.constants["defect_over_t2"] = gd.scaled;
    r.constants["c2_norm"] = f.c2_norm;
    r.worst_point = d == 1 ? std::vector<double>{gd.t_scaled} : std::vector<double>{gd.t_scaled};
    r.value = gd.scaled / f.c2_norm;
    return finish_upper(r);
}

// ---------------------------------------------------------------------------
// lemma suite

namespace {

// breakpoints c + s * {0, ±2^k} clipped to [lo, hi]
void add_scale_points(std::vector<double>& pts, double c, double s, double lo, double hi) {
    pts.push_back(c);
    for (double f = 1.0 / 16.0; f * s < hi - lo + 1.0; f *= 2.0) {
        pts.push_back(c + f * s);
        pts.push_back(c - f * s);
    }
    (void)lo;
}

QuadRule panels_from(std::vector<double> pts, double lo, double hi, int order) {
    pts.push_back(lo);
    pts.push_back(hi);
    std::vector<double> b;
    for (double x : pts)
        if (x >= lo && x <= hi) b.push_back(x);
    std::sort(b.begin(), b.end());
    std::vector<double> u;
    for (double x : b)
        if (u.empty() || x - u.back() > 1e-14 * std::max(1.0, std::abs(x))) u.push_back(x);
    const QuadRule gl = gauss_legendre(order);
    QuadRule q;
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        const double a = u[i], c = u[i + 1];
        for (std::size_t j = 0; j < gl.size(); ++j) {
            q.nodes.push_back(0.5 * (a + c) + 0.5 * (c - a) * gl.nodes[j]);
            q.weights.push_back(0.5 * (c - a) * gl.weights[j]);
        }
    }
    return q;
}

// s nodes on (0, t), geometric toward both ends
QuadRule time_rule(double t, int levels) {
    std::vector<double> pts;
    for (int k = 1; k <= levels; ++k) {
        pts.push_back(t * std::ldexp(1.0, -k));
        pts.push_back(t - t * std::ldexp(1.0, -k));
    }
    return panels_from(pts, 0.0, t, 6);
}

constexpr double kZmax = 1e4;
constexpr double kZmax2 = 1e3;

// int h(tau, x, z) f0(s, z, 0) dz with x = (r, 0)
double space_integral(const ModelParams& p, double tau, double s, double r) {
    const double ss = std::sqrt(s), st = std::sqrt(tau);
    if (p.d == 1) {
        std::vector<double> pts;
        add_scale_points(pts, 0.0, ss, -kZmax, kZmax);
        add_scale_points(pts, r, st, -kZmax, kZmax);
        for (double f = 1.0; f < kZmax; f *= 2.0) {
            pts.push_back(f);
            pts.push_back(-f);
        }
        const QuadRule q = panels_from(pts, -kZmax, kZmax, 8);
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double z = q.nodes[i];
            acc += q.weights[i] * h_fn(tau, std::abs(r - z), p) * f0(s, std::abs(z), p);
        }
        return acc;
    }
    // polar about y = 0
    std::vector<double> pts;
    add_scale_points(pts, 0.0, ss, 0.0, kZmax2);
    add_scale_points(pts, r, st, 0.0, kZmax2);
    for (double f = 1.0; f < kZmax2; f *= 2.0) pts.push_back(f);
    const QuadRule qr = panels_from(pts, 0.0, kZmax2, 6);
    double acc = 0.0;
    for (std::size_t i = 0; i < qr.size(); ++i) {
        const double rho = qr.nodes[i];
        // angular panels refined toward theta = 0 where z approaches x
        std::vector<double> th;
        const double w = std::max(1e-8, std::min(M_PI, st / std::max(rho, 1e-300)));
        for (double f = w / 4.0; f < M_PI; f *= 2.0) th.push_back(f);
        const QuadRule qa = panels_from(th, 0.0, M_PI, 6);
        double ang = 0.0;
        for (std::size_t j = 0; j < qa.size(); ++j) {
            const double c = std::cos(qa.nodes[j]), sn = std::sin(qa.nodes[j]);
            const double dz = std::hypot(rho * c - r, rho * sn);
            ang += qa.weights[j] * h_fn(tau, dz, p);
        }
        acc += qr.weights[i] * rho * 2.0 * ang * f0(s, rho, p);
    }
    return acc;
}

struct Fit {
    double value = 0.0;
    std::vector<double> at;
};

void update(Fit& f, double v, std::vector<double> at) {
    if (v > f.value) {
        f.value = v;
        f.at = std::move(at);
    }
}

CheckReport lemma_report(const std::string& id, const std::string& name, double coarse, double fine,
                         const std::vector<double>& at, const Thresholds& th) {
    CheckReport r;
    r.check_id = id;
    r.constants[name] = fine;
    r.constants[name + "_coarse"] = coarse;
    r.worst_point = at;
    r.threshold = th.lemma_drift;
    r.value = coarse > 0.0 ? std::abs(fine - coarse) / coarse : kInf;
    r = finish_upper(r);
    r.pass = r.pass && std::isfinite(fine) && fine > 0.0;
    return r;
}

}  // namespace

double f0_space_time_integral(const ModelParams& p, double t) {
    const double S = sphere_area(p.d);
    auto inner = [&](double s) {
        std::vector<double> pts;
        add_scale_points(pts, 0.0, std::sqrt(s), 0.0, kZmax);
        const QuadRule q = panels_from(pts, 0.0, kZmax, 8);
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            acc += q.weights[i] * S * std::pow(q.nodes[i], p.d - 1) * f0(s, q.nodes[i], p);
        return acc + S * std::pow(kZmax, -p.beta) / p.beta;
    };
    // weight u^{-beta/2} on s = t u
    const QuadRule gj = gauss_jacobi_unit(24, -0.5 * p.beta);
    double acc = 0.0;
    for (std::size_t i = 0; i < gj.size(); ++i) {
        const double u = gj.nodes[i];
        acc += gj.weights[i] * inner(t * u) * std::pow(u, 0.5 * p.beta);
    }
    return acc * t;
}

double h_f0_convolution(const ModelParams& p, double t, double r) {
    const QuadRule qs = time_rule(t, p.d == 1 ? 40 : 16);
    double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(dynamic)
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const double s = qs.nodes[i];
        acc += qs.weights[i] * space_integral(p, t - s, s, r);
    }
    return acc;
}

std::vector<CheckReport> check_lemma_inequalities(const ModelParams& p, const LemmaOptions& opt,
                                                  const Thresholds& th) {
    p.validate();
    const int d = p.d;
    std::vector<CheckReport> out;
    const std::string tag = "@beta=" + fmt(p.beta) + ",d=" + std::to_string(d);
    const double log_tmin = std::log(opt.t_min);
    auto t_of = [&](double u) { return std::exp(log_tmin * (1.0 - u)); };

    // Lemma 2.1: both Gaussian bounds, sampled in (t, |x| / sqrt t)
    {
        auto fit = [&](std::size_t N) {
            Fit f;
            auto eval = [&](double t, double rho) {
                const double x = rho * std::sqrt(t);
                const Point X{x, 0.0}, O{0.0, 0.0};
                const double w = std::min(1.0, rho > 0 ? 1.0 / rho : 1.0);
                const double b1 = std::pow(t, -0.5 * d) * std::pow(w, d + 2);
                const double b2 = std::pow(t, -0.5 * (d + 2)) * std::pow(w, d + 4);
                update(f, gaussian(t, X, O, d) / b1, {t, x});
                update(f, gaussian_max_second_partial(t, X, d) / b2, {t, x});
            };
            for (std::size_t i = 1; i <= N; ++i) {
                double u[2];
                halton(i, 2, u);
                eval(t_of(u[0]), 12.0 * u[1] * u[1]);
            }
            for (double t : {opt.t_min, 1.0})
                for (double rho : {0.0, 1.0, 12.0}) eval(t, rho);
            return f;
        };
        const Fit a = fit(opt.samples), b = fit(2 * opt.samples);
        CheckReport r = lemma_report("lemma_C9" + tag, "C9", a.value, b.value, b.at, th);
        r.constants["C9_reference"] = gaussian_c9(d);
        out.push_back(r);
    }

    // Lemma 2.2: |Δ^{β/2}| p0 <= C10 f0
    {
        auto fit = [&](std::size_t N) {
            Fit f;
            auto eval = [&](double t, double rho) {
                const double x = rho * std::sqrt(t);
                const Point X{x, 0.0}, O{0.0, 0.0};
                update(f, abs_frac_gaussian(p, t, X, O) / f0(t, x, p), {t, x});
            };
            for (std::size_t i = 1; i <= N; ++i) {
                double u[2];
                halton(i, 2, u);
                eval(t_of(u[0]), 30.0 * u[1] * u[1]);
            }
            for (double t : {opt.t_min, 1.0})
                for (double rho : {0.0, 1.0, 30.0}) eval(t, rho);
            return f;
        };
        const Fit a = fit(opt.samples), b = fit(2 * opt.samples);
        out.push_back(lemma_report("lemma_C10" + tag, "C10", a.value, b.value, b.at, th));
    }

    // Lemma 2.3: int_0^t int f0 <= C11 t^{1 - beta/2}
    {
        auto ratio = [&](double t) { return f0_space_time_integral(p, t) / std::pow(t, 1.0 - 0.5 * p.beta); };
        auto fit = [&](std::size_t N) {
            Fit f;
            for (std::size_t i = 1; i <= N; ++i) {
                double u[1];
                halton(i, 1, u);
                const double t = t_of(u[0]);
                update(f, ratio(t), {t});
            }
            update(f, ratio(opt.t_min), {opt.t_min});
            update(f, ratio(1.0), {1.0});
            return f;
        };
        const std::size_t N = std::max<std::size_t>(4, opt.samples / 8);
        const Fit a = fit(N), b = fit(2 * N);
        CheckReport r = lemma_report("lemma_C11" + tag, "C11", a.value, b.value, b.at, th);
        double lo = kInf, hi = 0.0;
        for (double t : {0.1, 0.5, 1.0}) {
            const double v = ratio(t);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        r.constants["t_spread"] = hi / lo;
        r.pass = r.pass && hi / lo <= 2.0;
        out.push_back(r);
    }

    // Lemma 2.4
    {
        struct Sample {
            double t, r, I;
        };
        auto samples = [&](std::size_t N) {
            std::vector<Sample> s;
            for (std::size_t i = 1; i <= N; ++i) {
                double u[2];
                halton(i, 2, u);
                s.push_back({t_of(u[0]), 6.0 * u[1] * u[1], 0.0});
            }
            for (double t : {opt.t_min, 1.0})
                for (double rr : {0.0, std::sqrt(t), 1.0, 1.0 + 1e-9, 6.0}) s.push_back({t, rr, 0.0});
            for (Sample& x : s) x.I = h_f0_convolution(p, x.t, x.r);
            return s;
        };
        struct LemmaFit {
            double c12 = 0.0, c13 = 0.125;
            std::vector<double> at;
            std::map<std::string, double> mid;
        };
        auto fit = [&](const std::vector<Sample>& s) {
            LemmaFit f;
            for (const Sample& x : s) {
                if (x.r <= std::sqrt(x.t) || x.r > 1.0) {
                    const double v = x.I / h_fn(x.t, x.r, p);
                    if (v > f.c12) {
                        f.c12 = v;
                        f.at = {x.t, x.r};
                    }
                }
            }
            const double outer = f.c12;
            double fallback = 0.0;
            bool found = false;
            for (double c13 : {0.5, 0.25, 0.125}) {
                double m = 0.0;
                for (const Sample& x : s)
                    if (x.r > std::sqrt(x.t) && x.r <= 1.0) m = std::max(m, x.I / h_fn(x.t, c13 * x.r, p));
                f.mid["mid@" + fmt(c13)] = m;
                fallback = m;
                if (!found && m <= outer) {
                    f.c13 = c13;
                    found = true;
                }
            }
            if (!found) f.c12 = std::max(outer, fallback);
            return f;
        };
        const LemmaFit a = fit(samples(opt.conv_samples));
        const LemmaFit b = fit(samples(2 * opt.conv_samples));
        CheckReport r12 = lemma_report("lemma_C12" + tag, "C12", a.c12, b.c12, b.at, th);
        for (const auto& [k, v] : b.mid) r12.constants[k] = v;
        out.push_back(r12);
        CheckReport r13;
        r13.check_id = "lemma_C13" + tag;
        r13.constants["C13"] = b.c13;
        r13.constants["C13_coarse"] = a.c13;
        r13.threshold = th.lemma_drift;
        r13.value = a.c13 == b.c13 ? 0.0 : std::abs(b.c13 - a.c13) / a.c13;
        r13 = finish_upper(r13);
        out.push_back(r13);
    }
    return out;
}

}  // namespace nlhk
