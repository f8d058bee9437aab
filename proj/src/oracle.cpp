#include "nlhk/oracle.hpp"

#include "nlhk/fft.hpp"
#include "nlhk/kernels.hpp"
#include "nlhk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>

namespace nlhk {

namespace {

// e^{-60} is below double resolution relative to the peak of any density here
constexpr double kNegligible = 60.0;

// (1 - cos x) / x^2
double omc2(double x) {
    if (std::abs(x) < 1e-4) return 0.5 - x * x / 24.0;
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s / (x * x);
}

// (1 - J0(x)) / x^2
double omj2(double x) {
    if (std::abs(x) < 1e-2) return 0.25 - x * x / 64.0 + x * x * x * x / 2304.0;
    return (1.0 - std::cyl_bessel_j(0.0, x)) / (x * x);
}

}  // namespace

struct LevySymbol::State {
    ModelParams p;
    bool lap = true;
    bool table_kind = false;
    double a = 0.0;  // stable kind

    Coefficient c;
    bool radial = true;
    double R_end = 0.0;
    std::vector<double> breaks;  // positive, below R_end
    double tail = 0.0;           // jump mass beyond R_end
    double dk = 0.0;
    double k_direct = 0.0;
    std::vector<double> tab;
    bool asym = false;
    double b0_over_A = 0.0;
    double kappa = 0.0;
    bool nonneg = true;
    double neg_over_A = 0.0;

    // int_0^R_end om(k r) g(r) r^{-1-beta} dr along the ray e, om = 1-cos or 1-J0
    double ray_integral(double k, const Point& e, bool bessel) const {
        if (k == 0.0) return 0.0;
        const double beta = p.beta;
        auto g = [&](double r) { return c(Point{0.0, 0.0}, r * e); };
        auto om2 = [&](double x) { return bessel ? omj2(x) : omc2(x); };
        double r0 = std::min(1.0 / k, R_end);
        if (!breaks.empty()) r0 = std::min(r0, breaks.front());
        const QuadRule jac = gauss_jacobi_unit(20, 1.0 - beta);
        double inner = 0.0;
        for (std::size_t i = 0; i < jac.size(); ++i) {
            const double r = r0 * jac.nodes[i];
            inner += jac.weights[i] * k * k * om2(k * r) * g(r);
        }
        inner *= std::pow(r0, 2.0 - beta);
        std::vector<double> br{r0};
        for (double b : breaks)
            if (b > r0 * (1.0 + 1e-12) && b < R_end * (1.0 - 1e-12)) br.push_back(b);
        br.push_back(R_end);
        double outer = 0.0;
        if (R_end > r0 * (1.0 + 1e-12)) {
            const QuadRule q = composite_gauss(br, 8, 0.5 * M_PI / k, 1.0);
            for (std::size_t i = 0; i < q.size(); ++i) {
                const double r = q.nodes[i];
                const double x = k * r;
                outer += q.weights[i] * x * x * om2(x) * g(r) * std::pow(r, -1.0 - beta);
            }
        }
        return inner + outer;
    }

    // jump part at |xi| = k for radial b
    double jump_direct(double k) const {
        if (p.d == 1) return 2.0 * ray_integral(k, Point{1.0, 0.0}, false) + tail;
        return 2.0 * M_PI * ray_integral(k, Point{1.0, 0.0}, true) + tail;
    }

    double jump_direct(const Point& xi) const {
        const double k = std::hypot(xi[0], xi[1]);
        if (k == 0.0) return 0.0;
        const int nphi = 64;
        double acc = 0.0;
        for (int i = 0; i < nphi; ++i) {
            const double phi = M_PI * i / nphi;
            const Point e{std::cos(phi), std::sin(phi)};
            const double kk = xi[0] * e[0] + xi[1] * e[1];
            acc += 2.0 * ray_integral(std::abs(kk), e, false);
        }
        return acc * M_PI / nphi + tail;
    }

    double jump(double k) const {
        k = std::abs(k);
        if (k > k_direct) {
            if (asym) return b0_over_A * std::pow(k, p.beta) - kappa;
            return jump_direct(k);
        }
        const double u = k / dk;
        const int i = static_cast<int>(u);
        if (i < 4) return jump_direct(k);
        const int i0 = std::min(i - 1, static_cast<int>(tab.size()) - 4);
        const double x = u - i0;
        // cubic Lagrange on i0 .. i0+3
        const double l0 = -(x - 1) * (x - 2) * (x - 3) / 6.0;
        const double l1 = x * (x - 2) * (x - 3) / 2.0;
        const double l2 = -x * (x - 1) * (x - 3) / 2.0;
        const double l3 = x * (x - 1) * (x - 2) / 6.0;
        return l0 * tab[i0] + l1 * tab[i0 + 1] + l2 * tab[i0 + 2] + l3 * tab[i0 + 3];
    }
};

LevySymbol LevySymbol::stable(const ModelParams& p, double a) {
    p.validate();
    auto s = std::make_shared<State>();
    s->p = p;
    s->a = a;
    s->nonneg = a >= 0.0;
    LevySymbol out;
    out.s_ = s;
    return out;
}

LevySymbol LevySymbol::of(const Coefficient& c) {
    if (!c.translation_invariant()) throw std::invalid_argument("LevySymbol: coefficient depends on x");
    const ModelParams& p = c.params();
    const double A = stable_normalizer(p).value;
    if (c.is_zero()) return stable(p, 0.0);
    const std::vector<double> probe{1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3};
    const double b0 = c(Point{0.0, 0.0}, Point{1e-9, 0.0});
    bool constant = !std::isfinite(c.support_radius());
    for (double r : probe)
        for (int dir = 0; dir < p.d && constant; ++dir) {
            const Point z = dir == 0 ? Point{r, 0.0} : Point{0.0, r};
            if (std::abs(c(Point{0.0, 0.0}, z) - b0) > 1e-14 * std::max(1.0, std::abs(b0))) constant = false;
        }
    if (constant) return stable(p, b0 / A);

    auto s = std::make_shared<State>();
    s->p = p;
    s->table_kind = true;
    s->c = c;
    s->radial = p.d == 1 || c.radial();
    s->nonneg = c.nonneg();
    s->neg_over_A = c.sup_norm() / A;
    std::vector<double> br = c.radial_breaks();
    std::sort(br.begin(), br.end());
    br.erase(std::remove_if(br.begin(), br.end(), [](double b) { return !(b > 0.0) || !std::isfinite(b); }), br.end());
    const double supp = c.support_radius();
    double R_eff = 1.0;
    for (double b : br) R_eff = std::max(R_eff, b);
    if (std::isfinite(supp)) {
        s->R_end = supp;
        R_eff = std::max(R_eff, supp);
        s->k_direct = p.d == 1 ? 400.0 : 100.0;
    } else {
        s->R_end = std::max(20.0, 8.0 * R_eff);
        s->tail = c.tail_mass(Point{0.0, 0.0}, s->R_end);
        s->k_direct = p.d == 1 ? 100.0 : 50.0;
    }
    for (double b : br)
        if (b < s->R_end * (1.0 - 1e-12)) s->breaks.push_back(b);

    // b constant on the ball below the first break: psi_b ~ b0/A |k|^beta - kappa
    const double r1 = s->breaks.empty() ? s->R_end : s->breaks.front();
    bool flat = std::isfinite(r1);
    for (double f : {1e-6, 0.1, 0.3, 0.6, 0.9})
        for (int dir = 0; dir < 4 && flat; ++dir) {
            const double phi = p.d == 1 ? 0.0 : dir * M_PI / 4.0;
            const Point z{f * r1 * std::cos(phi), f * r1 * std::sin(phi)};
            if (std::abs(c(Point{0.0, 0.0}, z) - b0) > 1e-14 * std::max(1.0, std::abs(b0))) flat = false;
        }
    if (flat) {
        s->asym = true;
        s->b0_over_A = b0 / A;
        s->kappa = b0 * sphere_area(p.d) * std::pow(r1, -p.beta) / p.beta - c.tail_mass(Point{0.0, 0.0}, r1);
    }

    if (s->radial) {
        s->dk = std::min(0.02, 0.1 / R_eff);
        const int m = static_cast<int>(std::ceil(s->k_direct / s->dk)) + 4;
        s->tab.resize(m);
        const State& st = *s;
        std::vector<double>& tab = s->tab;
#pragma omp parallel for schedule(dynamic, 64)
        for (int i = 0; i < m; ++i) tab[i] = st.jump_direct(i * st.dk);
    }
    LevySymbol out;
    out.s_ = s;
    return out;
}

LevySymbol LevySymbol::truncated_stable(const ModelParams& p) {
    p.validate();
    static std::mutex mu;
    static std::map<std::pair<int, double>, LevySymbol> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(p.d, p.beta);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double A = stable_normalizer(p).value;
    const Coefficient c = make_coefficient(
        {{"family", "indicator"}, {"params", {{"M", A}, {"lambda", 1.0}}}, {"d", p.d}, {"beta", p.beta}}, 2000);
    LevySymbol sym = of(c);
    auto s = std::make_shared<State>(*sym.s_);
    s->lap = false;
    sym.s_ = s;
    cache.emplace(key, sym);
    return sym;
}

double LevySymbol::radial(double k) const {
    const State& s = *s_;
    k = std::abs(k);
    const double l = s.lap ? k * k : 0.0;
    if (!s.table_kind) return l + s.a * std::pow(k, s.p.beta);
    if (!s.radial) throw std::logic_error("LevySymbol: symbol is not radial");
    return l + s.jump(k);
}

double LevySymbol::operator()(const Point& xi) const {
    const State& s = *s_;
    if (s.p.d == 1) return radial(xi[0]);
    if (!s.table_kind || s.radial) return radial(std::hypot(xi[0], xi[1]));
    const double k = std::hypot(xi[0], xi[1]);
    if (k > s.k_direct && s.asym) return (s.lap ? k * k : 0.0) + s.b0_over_A * std::pow(k, s.p.beta) - s.kappa;
    return (s.lap ? k * k : 0.0) + s.jump_direct(xi);
}

bool LevySymbol::is_radial() const { return !s_->table_kind || s_->radial; }

double LevySymbol::lower(double k) const {
    const State& s = *s_;
    k = std::abs(k);
    const double l = s.lap ? k * k : 0.0;
    const double kb = std::pow(k, s.p.beta);
    if (!s.table_kind) return l + std::min(0.0, s.a) * kb;
    if (!s.nonneg) return l - s.neg_over_A * kb;
    if (s.asym) return l + std::max(0.0, (k > s.k_direct ? 0.9 : 0.5) * (s.b0_over_A * kb - s.kappa));
    return l;
}

double LevySymbol::cutoff(double t) const {
    double k = 1.0;
    while (t * lower(k) <= kNegligible) {
        k *= 1.25;
        if (k > 1e13) throw std::invalid_argument("LevySymbol: e^{-t psi} does not decay; no cutoff");
    }
    return k;
}

bool LevySymbol::nonneg() const { return s_->nonneg; }
const ModelParams& LevySymbol::params() const { return s_->p; }
bool LevySymbol::has_laplacian() const { return s_->lap; }

namespace {

std::vector<double> lattice_density(const LevySymbol& sym, double t, double hi, int N, int stride, int m, double kc) {
    const int d = sym.params().d;
    const double w = 2.0 * M_PI / hi;  // folding period
    RealFFT fft(d == 1 ? std::vector<int>{N} : std::vector<int>{N, N});
    std::vector<cplx> F(fft.complex_size());
    const int last = N / 2 + 1;
    if (d == 1) {
#pragma omp parallel for schedule(dynamic, 256)
        for (int i = 0; i < last; ++i) {
            const double k = fft.frequency(0, i, hi);
            const long lo = static_cast<long>(std::ceil((-kc - k) / w));
            const long hi_m = static_cast<long>(std::floor((kc - k) / w));
            double acc = 0.0;
            for (long q = lo; q <= hi_m; ++q) acc += std::exp(-t * sym.radial(k + q * w));
            F[i] = acc;
        }
    } else {
#pragma omp parallel for schedule(dynamic, 8)
        for (int i1 = 0; i1 < N; ++i1) {
            const double k1 = fft.frequency(0, i1, hi);
            for (int i2 = 0; i2 < last; ++i2) {
                const double k2 = fft.frequency(1, i2, hi);
                const long a0 = static_cast<long>(std::ceil((-kc - k1) / w)), a1 = static_cast<long>(std::floor((kc - k1) / w));
                const long b0 = static_cast<long>(std::ceil((-kc - k2) / w)), b1 = static_cast<long>(std::floor((kc - k2) / w));
                double acc = 0.0;
                for (long qa = a0; qa <= a1; ++qa)
                    for (long qb = b0; qb <= b1; ++qb) {
                        const Point xi{k1 + qa * w, k2 + qb * w};
                        if (std::hypot(xi[0], xi[1]) > kc) continue;
                        acc += std::exp(-t * sym(xi));
                    }
                F[static_cast<std::size_t>(i1) * last + i2] = acc;
            }
        }
    }
    std::vector<double> buf(fft.real_size());
    fft.inverse(F.data(), buf.data());
    const double scale = 1.0 / std::pow(hi, d);
    const int n = 2 * m + 1;
    auto wrap = [&](long j) { return static_cast<int>(((j % N) + N) % N); };
    std::vector<double> out(d == 1 ? n : static_cast<std::size_t>(n) * n);
    if (d == 1) {
        for (int j = 0; j < n; ++j) out[j] = scale * buf[wrap(static_cast<long>(j - m) * stride)];
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i) * n + j] =
                    scale * buf[static_cast<std::size_t>(wrap(static_cast<long>(i - m) * stride)) * N +
                                wrap(static_cast<long>(j - m) * stride)];
    }
    return out;
}

int pow2_at_least(double x) {
    int n = 16;
    while (n < x) n *= 2;
    return n;
}

}  // namespace

OracleDensity density_from_symbol(const LevySymbol& sym, double t, double h, double L, const OracleOptions& opt) {
    if (!(t > 0.0) || !(h > 0.0) || !(L > 0.0)) throw std::invalid_argument("density_from_symbol: bad arguments");
    OracleDensity out;
    out.d = sym.params().d;
    out.t = t;
    out.h = h;
    const int m = static_cast<int>(std::ceil(L / h - 1e-9));
    out.n = 2 * m + 1;
    out.L = m * h;
    const int d = out.d;
    const double kc = sym.cutoff(t);
    const double fold_limit = d == 1 ? 1e300 : 2.0;
    int r = 0;
    while (kc > fold_limit * M_PI * (1 << r) / h && r < 20) ++r;

    for (;;) {
        const int stride = 1 << r;
        const double hi = h / stride;
        int N = pow2_at_least(8.0 * out.L / hi);
        auto fits = [&](int NN) { return std::pow(static_cast<double>(NN), d) <= static_cast<double>(opt.max_points); };
        if (!fits(N)) throw std::invalid_argument("density_from_symbol: lattice exceeds the size cap");
        std::vector<double> prev = lattice_density(sym, t, hi, N, stride, m, kc);
        std::vector<double> cur = prev;
        double err = 0.0;
        bool settled = false;
        while (fits(2 * N)) {
            cur = lattice_density(sym, t, hi, 2 * N, stride, m, kc);
            double peak = 0.0, diff = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                peak = std::max(peak, std::abs(cur[i]));
                diff = std::max(diff, std::abs(cur[i] - prev[i]));
            }
            err = peak > 0.0 ? diff / peak : diff;
            N *= 2;
            if (err <= opt.period_tol) {
                settled = true;
                break;
            }
            prev = cur;
        }
        out.values = std::move(cur);
        out.periodization_error = err;
        out.fft_size = N;
        out.refinements = r;
        out.warnings.clear();
        if (!settled)
            out.warnings.push_back("aliasing: periodization change " + std::to_string(err) + " above " +
                                   std::to_string(opt.period_tol));
        double peak = 0.0, mn = 0.0;
        for (double v : out.values) {
            peak = std::max(peak, std::abs(v));
            mn = std::min(mn, v);
        }
        if (sym.nonneg() && mn < opt.ringing * peak) {
            if (r < opt.max_refinements && fits(2 * N)) {
                ++r;
                continue;
            }
            out.warnings.push_back("ringing: minimum " + std::to_string(mn / peak) + " of peak after " +
                                   std::to_string(r) + " refinements");
        }
        return out;
    }
}

KernelTable oracle_table(const LevySymbol& sym, const SpaceTimeGrid& grid, const OracleOptions& opt) {
    KernelTable out(grid, true, sym.params().beta);
    nlohmann::json warn = nlohmann::json::array();
    double perr = 0.0;
    for (std::size_t k = 0; k < grid.times.size(); ++k) {
        const OracleDensity od = density_from_symbol(sym, grid.times[k], grid.dx, grid.L, opt);
        if (od.n != grid.n) throw std::logic_error("oracle_table: lattice mismatch");
        std::copy(od.values.begin(), od.values.end(), out.slice(k));
        perr = std::max(perr, od.periodization_error);
        for (const std::string& w : od.warnings) warn.push_back({{"t", grid.times[k]}, {"warning", w}});
    }
    out.meta["oracle"] = true;
    out.meta["periodization_error"] = perr;
    out.meta["warnings"] = warn;
    return out;
}

double density_at(const LevySymbol& sym, double t, double r) {
    if (!sym.is_radial()) throw std::invalid_argument("density_at: symbol is not radial");
    if (!(t > 0.0)) throw std::invalid_argument("density_at: t must be positive");
    const int d = sym.params().d;
    r = std::abs(r);
    const double kc = sym.cutoff(t);
    const double k_lo = 1e-10 * std::min(1.0, kc);
    double max_len = kc / 256.0;
    if (r > 0.0) max_len = std::min(max_len, 0.5 * M_PI / r);
    if (kc / max_len > 4e6) throw std::invalid_argument("density_at: t too small for pointwise inversion");
    const QuadRule q = composite_gauss({k_lo, kc}, 8, max_len, 1.0);
    double acc = 0.0;
    if (d == 1) {
        acc = k_lo;
        for (std::size_t i = 0; i < q.size(); ++i)
            acc += q.weights[i] * std::exp(-t * sym.radial(q.nodes[i])) * std::cos(q.nodes[i] * r);
        return acc / M_PI;
    }
    acc = 0.5 * k_lo * k_lo;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double k = q.nodes[i];
        acc += q.weights[i] * std::exp(-t * sym.radial(k)) * std::cyl_bessel_j(0.0, k * r) * k;
    }
    return acc / (2.0 * M_PI);
}

double pa_density(double a, const ModelParams& p, double t, const Point& x, const Point& y) {
    if (a < 0.0) throw std::invalid_argument("pa_density: a must be nonnegative");
    if (a == 0.0) return gaussian(t, x, y, p.d);
    return density_at(LevySymbol::stable(p, a), t, dist(x, y, p.d));
}

double truncated_stable_density(const ModelParams& p, double t, const Point& x, const Point& y) {
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("truncated_stable_density: t must lie in (0, 1]");
    return density_at(LevySymbol::truncated_stable(p), t, dist(x, y, p.d));
}

}  // namespace nlhk
