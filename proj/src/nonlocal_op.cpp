#include "nlhk/nonlocal_op.hpp"

#include "nlhk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nlhk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// exp(-x) I_0(x) for x >= 0
double bessel_i0e(double x) {
    if (x < 600.0) return std::cyl_bessel_i(0.0, x) * std::exp(-x);
    const double ix = 1.0 / x;
    return (1.0 + ix * (0.125 + ix * (9.0 / 128.0 + ix * 225.0 / 3072.0))) / std::sqrt(2.0 * M_PI * x);
}

std::vector<double> clean_breaks(std::vector<double> b, double lo, double hi) {
    b.push_back(lo);
    b.push_back(hi);
    std::vector<double> out;
    for (double r : b)
        if (r >= lo && r <= hi && std::isfinite(r)) out.push_back(r);
    std::sort(out.begin(), out.end());
    std::vector<double> uniq;
    for (double r : out)
        if (uniq.empty() || r - uniq.back() > 1e-12 * std::max(1.0, r)) uniq.push_back(r);
    if (uniq.back() < hi) uniq.back() = hi;
    return uniq;
}

// sum_k W_k Phi(r_k) over both parts of the rule
template <class Phi>
double integrate(const PVQuadrature& q, Phi&& phi) {
    double acc = 0.0;
    for (std::size_t k = 0; k < q.inner.size(); ++k) acc += q.inner.weights[k] * phi(q.inner.nodes[k]);
    for (std::size_t k = 0; k < q.outer.size(); ++k) acc += q.outer.weights[k] * phi(q.outer.nodes[k]);
    return acc;
}

double first_break_below(const std::vector<double>& breaks, double r) {
    for (double b : breaks)
        if (b > 0.0 && b < r) return b;
    return r;
}

// Angular part in d = 2: int_0^pi g(phi) dphi for a pi-periodic g by the trapezoid rule.
template <class G>
double half_circle(int n, G&& g) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += g(M_PI * j / n);
    return acc * M_PI / n;
}

}  // namespace

PVQuadrature make_pv_quadrature(double beta, double r_in, double z_max, std::vector<double> breaks,
                                const PVOptions& opt) {
    if (!(r_in > 0.0) || !(z_max >= r_in)) throw std::invalid_argument("make_pv_quadrature: need 0 < r_in <= z_max");
    PVQuadrature q;
    std::sort(breaks.begin(), breaks.end());
    q.inner_radius = std::min(r_in, first_break_below(breaks, r_in));
    q.z_max = z_max;
    const QuadRule gj = gauss_jacobi_unit(opt.inner_points, 1.0 - beta);
    const double a = q.inner_radius;
    const double scale = std::pow(a, 2.0 - beta);
    for (std::size_t k = 0; k < gj.size(); ++k) {
        const double r = a * gj.nodes[k];
        q.inner.nodes.push_back(r);
        q.inner.weights.push_back(scale * gj.weights[k] / (r * r));
    }
    if (z_max > a) {
        QuadRule o = composite_gauss(clean_breaks(breaks, a, z_max), opt.panel_points, opt.max_panel, opt.panel_ratio);
        for (std::size_t k = 0; k < o.size(); ++k) o.weights[k] *= std::pow(o.nodes[k], -1.0 - beta);
        q.outer = std::move(o);
    }
    return q;
}

SbValue apply_Sb(const Coefficient& c, const std::function<double(const Point&)>& f, const Point& x,
                 const ApplyOptions& opt) {
    SbValue res;
    if (c.is_zero()) return res;
    const int d = c.dim();
    const double beta = c.beta();
    const double fx = f(x);
    const double supp = c.support_radius();

    double r_in = opt.inner_radius > 0.0 ? opt.inner_radius : std::min(1.0, supp);
    double tail_bound = 0.0;
    double R = opt.z_max > 0.0 ? opt.z_max : supp;
    if (!std::isfinite(R)) {
        // smallest dyadic radius where the neglected far field is below tolerance
        auto far_sup = [&](double rad) {
            double m = opt.f_sup >= 0.0 ? opt.f_sup : 0.0;
            if (opt.f_sup >= 0.0) return m;
            for (double s = rad; s <= 1e9; s *= 1.15) {
                const int nd = d == 1 ? 1 : 16;
                for (int j = 0; j < nd; ++j) {
                    const double phi = 2.0 * M_PI * j / nd;
                    const Point w{s * std::cos(phi), d == 1 ? 0.0 : s * std::sin(phi)};
                    m = std::max({m, std::abs(f(x + w)), std::abs(f(x - w))});
                }
            }
            return m;
        };
        const double bn = c.sup_norm() * sphere_area(d) / beta;
        R = std::max(r_in, 1.0);
        while (true) {
            tail_bound = far_sup(R) * bn * std::pow(R, -beta);
            if (tail_bound < opt.tail_tol || R > 1e8) break;
            R *= 2.0;
        }
        if (tail_bound >= opt.tail_tol) res.divergent = true;
    }
    r_in = std::min(r_in, R);

    std::vector<double> breaks = c.radial_breaks();
    breaks.insert(breaks.end(), opt.breaks.begin(), opt.breaks.end());

    auto phi = [&](double r) {
        if (d == 1) {
            const double D = f(Point{x[0] + r, 0.0}) + f(Point{x[0] - r, 0.0}) - 2.0 * fx;
            return D * c(x, Point{r, 0.0});
        }
        return half_circle(opt.angular_points, [&](double a) {
            const Point w{r * std::cos(a), r * std::sin(a)};
            return (f(x + w) + f(x - w) - 2.0 * fx) * c(x, w);
        });
    };

    PVOptions fine = opt.pv;
    PVOptions coarse = opt.pv;
    coarse.panel_points = std::max(2, fine.panel_points - 2);
    coarse.inner_points = std::max(4, fine.inner_points - 4);
    const double v_fine = integrate(make_pv_quadrature(beta, r_in, R, breaks, fine), phi);
    const double v_coarse = integrate(make_pv_quadrature(beta, r_in, R, breaks, coarse), phi);
    const double tail = std::isfinite(supp) && R >= supp ? 0.0 : -fx * c.tail_mass(x, R);
    res.value = v_fine + tail;
    res.error = std::abs(v_fine - v_coarse) + tail_bound;
    return res;
}

double Sb_gaussian(const Coefficient& c, double s, const Point& z, const Point& y) {
    if (!(s > 0.0)) throw std::invalid_argument("Sb_gaussian: s must be positive");
    if (c.is_zero()) return 0.0;
    const int d = c.dim();
    const double beta = c.beta();
    const Point u = z - y;
    const double ru = norm(u, d);
    const double sig = std::sqrt(2.0 * s);
    const double p_u = gaussian_r(s, ru, d);
    const double supp = c.support_radius();

    // every difference term is below exp(-80) of the peak beyond the support
    if (std::isfinite(supp) && ru - supp > 13.0 * sig) return 0.0;

    const double r_in = std::min({std::sqrt(s), 1.0, supp});
    const double R_feat = ru + 12.0 * sig;
    const double R = std::min(supp, R_feat);

    std::vector<double> breaks = c.radial_breaks();
    for (int k = -10; k <= 10; k += 2) breaks.push_back(ru + k * sig);
    PVOptions opt;
    opt.inner_points = 20;
    opt.panel_points = 8;
    const PVQuadrature q = make_pv_quadrature(beta, r_in, R, breaks, opt);

    double acc = 0.0;
    if (d == 1) {
        acc = integrate(q, [&](double r) {
            const double D = gaussian_r(s, std::abs(u[0] + r), 1) + gaussian_r(s, std::abs(u[0] - r), 1) - 2.0 * p_u;
            return D * c(z, Point{r, 0.0});
        });
    } else if (c.radial()) {
        // angular average of p0(s, u + r e) over the circle in closed form
        acc = integrate(q, [&](double r) {
            const double avg = std::exp(-(ru - r) * (ru - r) / (4.0 * s)) * bessel_i0e(ru * r / (2.0 * s)) /
                               (4.0 * M_PI * s);
            return 2.0 * M_PI * (avg - p_u) * c(z, Point{r, 0.0});
        });
    } else {
        const int nphi = std::clamp(static_cast<int>(std::ceil(8.0 * M_PI * (ru + 6.0 * sig) / sig)), 64, 4096);
        acc = integrate(q, [&](double r) {
            return half_circle(nphi, [&](double a) {
                const Point w{r * std::cos(a), r * std::sin(a)};
                const double D = gaussian_r(s, norm(u + w, 2), 2) + gaussian_r(s, norm(u - w, 2), 2) - 2.0 * p_u;
                return D * c(z, w);
            });
        });
    }
    if (R < supp) acc -= p_u * c.tail_mass(z, R);
    return acc;
}

double Sb_gaussian_offset(const Coefficient& c, double s, const Point& u) {
    return Sb_gaussian(c, s, u, Point{0.0, 0.0});
}

double abs_frac_gaussian(const ModelParams& p, double s, const Point& z, const Point& y) {
    if (!(s > 0.0)) throw std::invalid_argument("abs_frac_gaussian: s must be positive");
    const int d = p.d;
    const double beta = p.beta;
    const Point u = z - y;
    const double ru = norm(u, d);
    const double sig = std::sqrt(2.0 * s);
    const double p_u = gaussian_r(s, ru, d);
    // gradient of p0(s, .) at u
    const Point grad = (-p_u / (2.0 * s)) * u;
    const double rho = ru * ru <= s ? std::sqrt(s) : 0.5 * ru;
    const double R = ru + 12.0 * sig;

    std::vector<double> breaks{rho, 2.0 * ru};
    for (int k = -10; k <= 10; ++k) breaks.push_back(ru + k * sig);
    PVOptions opt;
    opt.inner_points = 24;
    opt.panel_points = 10;
    const PVQuadrature q = make_pv_quadrature(beta, rho, std::max(R, rho), breaks, opt);

    auto point_val = [&](const Point& w, bool compensated) {
        double v = gaussian_r(s, norm(u + w, d), d) - p_u;
        if (compensated) v -= grad[0] * w[0] + grad[1] * w[1];
        return std::abs(v);
    };
    double acc = 0.0;
    if (d == 1) {
        auto phi = [&](double r, bool comp) {
            return point_val(Point{r, 0.0}, comp) + point_val(Point{-r, 0.0}, comp);
        };
        for (std::size_t k = 0; k < q.inner.size(); ++k) acc += q.inner.weights[k] * phi(q.inner.nodes[k], true);
        for (std::size_t k = 0; k < q.outer.size(); ++k) acc += q.outer.weights[k] * phi(q.outer.nodes[k], false);
    } else {
        // rotate u onto the first axis; the integrand is even in the angle
        const Point e = ru > 0.0 ? (1.0 / ru) * u : Point{1.0, 0.0};
        const int nphi = 512;
        auto phi = [&](double r, bool comp) {
            double a = 0.0;
            for (int j = 0; j < nphi; ++j) {
                const double ang = 2.0 * M_PI * (j + 0.5) / nphi;
                const double c1 = std::cos(ang), s1 = std::sin(ang);
                const Point w{r * (c1 * e[0] - s1 * e[1]), r * (c1 * e[1] + s1 * e[0])};
                a += point_val(w, comp);
            }
            return a * 2.0 * M_PI / nphi;
        };
        for (std::size_t k = 0; k < q.inner.size(); ++k) acc += q.inner.weights[k] * phi(q.inner.nodes[k], true);
        for (std::size_t k = 0; k < q.outer.size(); ++k) acc += q.outer.weights[k] * phi(q.outer.nodes[k], false);
    }
    // far field: only the -p0(u) term survives
    acc += p_u * sphere_area(d) * std::pow(std::max(R, rho), -beta) / beta;
    return acc;
}

LatticeSb::LatticeSb(const Coefficient& c, double x0, double h, int n)
    : c_(c), x0_(x0), h_(h), n_(n), ti_(c.translation_invariant()) {
    if (c.dim() != 1) throw std::invalid_argument("LatticeSb: one-dimensional lattices only");
    if (!(h > 0.0) || n < 2) throw std::invalid_argument("LatticeSb: bad lattice");
    if (ti_) {
        stencils_.push_back(stencil_for(0.0));
    } else {
        stencils_.resize(n);
        for (int j = 0; j < n; ++j) stencils_[j] = stencil_for(x0 + j * h);
    }
}

std::vector<double> LatticeSb::stencil_for(double x) const {
    const double beta = c_.beta();
    const Point xp{x, 0.0};
    const double supp = c_.support_radius();
    int m_max = n_ + 2;
    if (std::isfinite(supp)) m_max = std::min(m_max, static_cast<int>(std::ceil(supp / h_)) + 3);
    std::vector<double> w(m_max + 4, 0.0);
    if (c_.is_zero()) return w;
    const double R = m_max * h_;
    std::vector<double> brk;
    for (double b : c_.radial_breaks())
        if (b > 0.0 && b < R) brk.push_back(b);
    const QuadRule gl = gauss_legendre(8, 0.0, 1.0);
    const QuadRule gj = gauss_jacobi_unit(12, 1.0 - beta);

    auto lagrange = [](const int* nodes, int cnt, int k, double r) {
        double v = 1.0;
        for (int i = 0; i < cnt; ++i)
            if (i != k) v *= (r - nodes[i]) / double(nodes[k] - nodes[i]);
        return v;
    };
    // integrate g(r) * b(x, r) r^{-1-beta} over [a, b] (r in lattice units inside g)
    auto cell_integral = [&](double a, double bnd, auto&& g) {
        std::vector<double> cuts{a};
        for (double br : brk)
            if (br > a && br < bnd) cuts.push_back(br);
        cuts.push_back(bnd);
        double acc = 0.0;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            const double lo = cuts[p], hi = cuts[p + 1];
            if (lo == 0.0) {
                // g(r) = O(r^2) at the origin: Jacobi weight r^{1-beta}
                const double sc = std::pow(hi, 2.0 - beta);
                for (std::size_t k = 0; k < gj.size(); ++k) {
                    const double r = hi * gj.nodes[k];
                    acc += sc * gj.weights[k] * g(r) / (r * r) * c_(xp, Point{r, 0.0});
                }
            } else {
                for (std::size_t k = 0; k < gl.size(); ++k) {
                    const double r = lo + (hi - lo) * gl.nodes[k];
                    acc += (hi - lo) * gl.weights[k] * g(r) * std::pow(r, -1.0 - beta) * c_(xp, Point{r, 0.0});
                }
            }
        }
        return acc;
    };

    for (int m = 0; m < m_max; ++m) {
        const double a = m * h_, b = (m + 1) * h_;
        if (m < 2) {
            // even interpolation in r^2 through D_0 = 0, D_1, D_2, D_3
            const double nodes2[4] = {0.0, 1.0, 4.0, 9.0};
            for (int k = 1; k <= 3; ++k) {
                w[k] += cell_integral(a, b, [&](double r) {
                    const double v = (r / h_) * (r / h_);
                    double l = 1.0;
                    for (int i = 0; i < 4; ++i)
                        if (i != k) l *= (v - nodes2[i]) / (nodes2[k] - nodes2[i]);
                    return l;
                });
            }
        } else {
            int nodes[6];
            int lo = m - 2;
            for (int i = 0; i < 6; ++i) nodes[i] = lo + i;
            for (int k = 0; k < 6; ++k) {
                const int idx = nodes[k];
                if (idx == 0) continue;
                w[idx] += cell_integral(a, b, [&](double r) { return lagrange(nodes, 6, k, r / h_); });
            }
        }
    }
    // beyond m_max h only the -2 f(x) part survives: fold it into w[0] as a tail mass
    w[0] = (std::isfinite(supp) && R >= supp) ? 0.0 : c_.tail_mass(xp, R);
    return w;
}

std::vector<double> LatticeSb::apply(const std::vector<double>& f) const {
    if (static_cast<int>(f.size()) != n_) throw std::invalid_argument("LatticeSb::apply: size mismatch");
    std::vector<double> out(n_, 0.0);
    auto at = [&](int i) { return (i < 0 || i >= n_) ? 0.0 : f[i]; };
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n_; ++j) {
        const std::vector<double>& w = ti_ ? stencils_[0] : stencils_[j];
        double acc = -f[j] * w[0];
        const int m_max = static_cast<int>(w.size()) - 1;
        for (int m = 1; m <= m_max; ++m) acc += w[m] * (at(j + m) + at(j - m) - 2.0 * f[j]);
        out[j] = acc;
    }
    return out;
}

}  // namespace nlhk
