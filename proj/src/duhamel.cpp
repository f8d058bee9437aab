#include "nlhk/duhamel.hpp"

#include "nlhk/kernels.hpp"
#include "nlhk/nonlocal_op.hpp"
#include "nlhk/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nlhk {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SNode {
    double s;
    double w;   // plain weight (first term)
    double wa;  // weight of the left end of the panel (1 - theta)
    double wb;  // weight of the right end (theta)
    int panel;
};

std::vector<SNode> time_nodes(int K, double tau, double s_res, int p) {
    std::vector<SNode> out;
    // first panel: constant below s_res, geometric Gauss panels above
    out.push_back({s_res, s_res, s_res - s_res * s_res / (2.0 * tau), s_res * s_res / (2.0 * tau), 0});
    std::vector<double> br{s_res};
    while (br.back() * 2.0 < tau * 0.75) br.push_back(br.back() * 2.0);
    br.push_back(tau);
    const QuadRule first = composite_gauss(br, p, 0.0, 0.0);
    for (std::size_t k = 0; k < first.size(); ++k) {
        const double th = first.nodes[k] / tau;
        out.push_back({first.nodes[k], first.weights[k], first.weights[k] * (1.0 - th), first.weights[k] * th, 0});
    }
    const QuadRule ref = gauss_legendre(p, 0.0, 1.0);
    for (int i = 1; i < K; ++i)
        for (int l = 0; l < p; ++l) {
            const double th = ref.nodes[l];
            const double w = tau * ref.weights[l];
            out.push_back({(i + th) * tau, w, w * (1.0 - th), w * th, i});
        }
    return out;
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalFailure(std::string(what) + ": non-finite value (grid too coarse near t = 0?)");
}

bool uniform_prefix(const SpaceTimeGrid& g, std::size_t K) {
    if (g.times.size() < K) return false;
    const double tau = g.times[0];
    for (std::size_t k = 0; k < K; ++k)
        if (std::abs(g.times[k] - (k + 1) * tau) > 1e-9 * g.times[k]) return false;
    return true;
}

// phi0(x) = (1 - e^{-x})/x, phi1(x) = (1 - e^{-x}(1 + x))/x^2
void phis(double x, double& p0, double& p1) {
    if (x < 1e-3) {
        p0 = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
        p1 = 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
        return;
    }
    const double e = std::exp(-x);
    p0 = (1.0 - e) / x;
    p1 = (1.0 - e * (1.0 + x)) / (x * x);
}

}  // namespace

struct DuhamelOperator::Impl {
    int d = 1, n = 0, K = 0, M = 0;
    double h = 0.0, tau = 0.0;
    std::unique_ptr<RealFFT> fft;
    std::vector<double> xi2;  // |xi|^2 per complex index
    std::vector<std::vector<cplx>> omega_hat;  // TI
    std::vector<RowMat> omega;                 // x-dependent
    std::unique_ptr<LatticeSb> lattice;

    int ext() const { return 2 * n - 1; }

    // TI: embed a field of side `side` at the origin of the padded array and transform
    std::vector<cplx> spectrum(const double* f, int side) const {
        std::vector<double> buf(fft->real_size(), 0.0);
        if (d == 1) {
            std::copy(f, f + side, buf.begin());
        } else {
            for (int i = 0; i < side; ++i) std::copy(f + i * side, f + (i + 1) * side, buf.begin() + i * M);
        }
        std::vector<cplx> out(fft->complex_size());
        fft->forward(buf.data(), out.data());
        return out;
    }

    // TI: inverse transform and read n^d values starting at `shift` along every axis
    std::vector<double> extract(const std::vector<cplx>& spec, int shift) const {
        std::vector<double> buf(fft->real_size());
        fft->inverse(spec.data(), buf.data());
        std::vector<double> out(d == 1 ? n : n * n);
        if (d == 1) {
            std::copy(buf.begin() + shift, buf.begin() + shift + n, out.begin());
        } else {
            for (int i = 0; i < n; ++i)
                std::copy(buf.begin() + (i + shift) * M + shift, buf.begin() + (i + shift) * M + shift + n,
                          out.begin() + i * n);
        }
        return out;
    }

    // x-dependent: column transforms along the first axis of an n x n row-major field
    std::vector<cplx> column_spectrum(const double* f) const {
        const int cs = M / 2 + 1;
        std::vector<cplx> out(static_cast<std::size_t>(cs) * n);
        std::vector<double> buf(M);
        std::vector<cplx> tmp(cs);
        for (int j = 0; j < n; ++j) {
            std::fill(buf.begin(), buf.end(), 0.0);
            for (int i = 0; i < n; ++i) buf[i] = f[static_cast<std::size_t>(i) * n + j];
            fft->forward(buf.data(), tmp.data());
            std::copy(tmp.begin(), tmp.end(), out.begin() + static_cast<std::size_t>(j) * cs);
        }
        return out;
    }

    std::vector<double> column_extract(const std::vector<cplx>& spec) const {
        const int cs = M / 2 + 1;
        std::vector<double> out(static_cast<std::size_t>(n) * n);
        std::vector<double> buf(M);
        for (int j = 0; j < n; ++j) {
            fft->inverse(spec.data() + static_cast<std::size_t>(j) * cs, buf.data());
            for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i) * n + j] = buf[i];
        }
        return out;
    }
};

namespace {

// S^b p0(s) on the extended offset lattice (TI) or on lattice pairs (x-dependent).
// int_{|w| > R} J^b(x, w) dw, NaN when no closed form is available
double jump_tail(const Coefficient& c, const Point& x, double R) {
    if (c.is_zero() || R >= c.support_radius()) return 0.0;
    try {
        return c.tail_mass(x, R);
    } catch (const std::exception&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Shift the diagonal so the lattice mass of S^b p0(s) matches minus the jump
// mass leaving the lattice; at s below dx^2 the spike is aliased otherwise.
void fix_mass(std::vector<double>& v, std::size_t centre, double cell, double target) {
    if (!std::isfinite(target)) return;
    double sum = 0.0;
    for (double x : v) sum += x;
    v[centre] -= (sum * cell - target) / cell;
}

std::vector<double> kernel_field_raw(const Coefficient& c, const SpaceTimeGrid& g, bool ti, double s);

std::vector<double> kernel_field(const Coefficient& c, const SpaceTimeGrid& g, bool ti, double s) {
    std::vector<double> out = kernel_field_raw(c, g, ti, s);
    const int n = g.n;
    const double h = g.dx;
    if (ti) {
        const int e = 2 * n - 1;
        const double Le = (n - 1) * h + 0.5 * h;
        const std::size_t centre = g.d == 1 ? static_cast<std::size_t>(n - 1)
                                            : static_cast<std::size_t>(n - 1) * e + (n - 1);
        fix_mass(out, centre, g.d == 1 ? h : h * h, -jump_tail(c, {0.0, 0.0}, Le));
        return out;
    }
    const double Le = g.L + 0.5 * h;
    const double reach = 10.0 * std::sqrt(s);
    for (int i = 0; i < n; ++i) {
        const double z = g.coord(i);
        if (Le - std::abs(z) < reach) continue;
        const Point x{z, 0.0};
        const double target = -0.5 * (jump_tail(c, x, Le - z) + jump_tail(c, x, Le + z));
        if (!std::isfinite(target)) continue;
        double sum = 0.0;
        double* row = out.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) sum += row[j];
        row[i] -= (sum * h - target) / h;
    }
    return out;
}

std::vector<double> kernel_field_raw(const Coefficient& c, const SpaceTimeGrid& g, bool ti, double s) {
    const int n = g.n;
    const double h = g.dx;
    if (ti && g.d == 1) {
        const int e = 2 * n - 1;
        const int mid = n - 1;
        std::vector<double> out(e);
#pragma omp parallel for schedule(dynamic, 16)
        for (int b = mid; b < e; ++b) out[b] = Sb_gaussian_offset(c, s, Point{(b - mid) * h, 0.0});
        for (int b = 0; b < mid; ++b) out[b] = out[2 * mid - b];
        return out;
    }
    if (ti) {
        const int e = 2 * n - 1;
        const int mid = n - 1;
        std::vector<double> out(static_cast<std::size_t>(e) * e);
        const bool radial = c.radial();
#pragma omp parallel for schedule(dynamic, 4)
        for (int a = mid; a < e; ++a)
            for (int b = 0; b < e; ++b) {
                const int ia = a - mid, ib = b - mid;
                if (radial && (ib < 0 || ib > ia)) continue;
                out[static_cast<std::size_t>(a) * e + b] = Sb_gaussian_offset(c, s, Point{ia * h, ib * h});
            }
        auto at = [&](int ia, int ib) -> double& { return out[static_cast<std::size_t>(ia + mid) * e + (ib + mid)]; };
        for (int ia = -mid; ia <= mid; ++ia)
            for (int ib = -mid; ib <= mid; ++ib) {
                if (radial) {
                    int p = std::abs(ia), q = std::abs(ib);
                    if (q > p) std::swap(p, q);
                    if (!(ia == p && ib == q)) at(ia, ib) = at(p, q);
                } else if (ia < 0) {
                    at(ia, ib) = at(-ia, -ib);
                }
            }
        return out;
    }
    std::vector<double> out(static_cast<std::size_t>(n) * n);
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = Sb_gaussian(c, s, Point{g.coord(i), 0.0}, Point{g.coord(j), 0.0});
    return out;
}

}  // namespace

DuhamelOperator::DuhamelOperator(const Coefficient& c, const SpaceTimeGrid& grid, int panel_points)
    : impl_(std::make_unique<Impl>()), c_(c), grid_(grid), ti_(c.translation_invariant()) {
    grid_.validate();
    if (grid_.d != c.dim()) throw std::invalid_argument("DuhamelOperator: grid and coefficient dimensions differ");
    if (!ti_ && grid_.d != 1)
        throw std::invalid_argument("x-dependent coefficients are supported in d = 1 only");
    Impl& m = *impl_;
    m.d = grid_.d;
    m.n = grid_.n;
    m.K = static_cast<int>(grid_.times.size());
    m.h = grid_.dx;
    m.tau = grid_.times[0];
    if (!uniform_prefix(grid_, m.K)) throw std::invalid_argument("DuhamelOperator: time nodes must be uniform");
    s_res_ = std::min(0.25 * m.h * m.h, 0.25 * m.tau);

    m.M = good_fft_size(3 * m.n);
    std::vector<int> shape = (ti_ && m.d == 2) ? std::vector<int>{m.M, m.M} : std::vector<int>{m.M};
    m.fft = std::make_unique<RealFFT>(shape);
    const int cs = m.fft->complex_size();
    const int last = m.M / 2 + 1;
    m.xi2.resize(cs);
    for (int idx = 0; idx < cs; ++idx) {
        if (shape.size() == 1) {
            const double w = m.fft->frequency(0, idx, m.h);
            m.xi2[idx] = w * w;
        } else {
            const double w0 = m.fft->frequency(0, idx / last, m.h);
            const double w1 = m.fft->frequency(1, idx % last, m.h);
            m.xi2[idx] = w0 * w0 + w1 * w1;
        }
    }
    if (m.d == 1 && !c.is_zero()) m.lattice = std::make_unique<LatticeSb>(c, -grid_.L, m.h, m.n);

    q1_ = KernelTable(grid_, ti_, c.beta());
    q1_.meta["term"] = 1;
    if (c.is_zero()) {
        if (ti_)
            m.omega_hat.assign(m.K, std::vector<cplx>(cs, cplx(0.0)));
        else
            m.omega.assign(m.K, RowMat::Zero(m.n, m.n));
        return;
    }

    const std::vector<SNode> nodes = time_nodes(m.K, m.tau, s_res_, panel_points);
    const double hd = m.d == 1 ? m.h : m.h * m.h;
    const std::size_t col_cs = static_cast<std::size_t>(last) * m.n;

    if (ti_) {
        std::vector<std::vector<cplx>> oa(m.K, std::vector<cplx>(cs, cplx(0.0))), ob = oa, acc = oa;
        for (const SNode& nd : nodes) {
            const std::vector<double> kf = kernel_field(c, grid_, true, nd.s);
            check_finite(kf, "kernel");
            const std::vector<cplx> kh = m.spectrum(kf.data(), m.ext());
            for (int idx = 0; idx < cs; ++idx) {
                oa[nd.panel][idx] += nd.wa * hd * kh[idx];
                ob[nd.panel][idx] += nd.wb * hd * kh[idx];
            }
            for (int k = nd.panel; k < m.K; ++k) {
                const double r = grid_.times[k] - nd.s;
                for (int idx = 0; idx < cs; ++idx) acc[k][idx] += nd.w * std::exp(-r * m.xi2[idx]) * kh[idx];
            }
        }
        m.omega_hat.resize(m.K);
        for (int mm = 0; mm < m.K; ++mm) {
            m.omega_hat[mm] = oa[mm];
            if (mm > 0)
                for (int idx = 0; idx < cs; ++idx) m.omega_hat[mm][idx] += ob[mm - 1][idx];
        }
        const int shift = (m.n - 1) / 2;
        for (int k = 0; k < m.K; ++k) {
            const std::vector<double> v = m.extract(acc[k], shift);
            std::copy(v.begin(), v.end(), q1_.slice(k));
        }
    } else {
        std::vector<RowMat> oa(m.K, RowMat::Zero(m.n, m.n)), ob = oa;
        std::vector<std::vector<cplx>> acc(m.K, std::vector<cplx>(col_cs, cplx(0.0)));
        for (const SNode& nd : nodes) {
            const std::vector<double> kf = kernel_field(c, grid_, false, nd.s);
            check_finite(kf, "kernel");
            Eigen::Map<const RowMat> km(kf.data(), m.n, m.n);
            oa[nd.panel] += (nd.wa * m.h) * km;
            ob[nd.panel] += (nd.wb * m.h) * km;
            const std::vector<cplx> kh = m.column_spectrum(kf.data());
            for (int k = nd.panel; k < m.K; ++k) {
                const double r = grid_.times[k] - nd.s;
                for (std::size_t idx = 0; idx < col_cs; ++idx)
                    acc[k][idx] += nd.w * std::exp(-r * m.xi2[idx % last]) * kh[idx];
            }
        }
        m.omega.resize(m.K);
        for (int mm = 0; mm < m.K; ++mm) {
            m.omega[mm] = oa[mm];
            if (mm > 0) m.omega[mm] += ob[mm - 1];
        }
        for (int k = 0; k < m.K; ++k) {
            const std::vector<double> v = m.column_extract(acc[k]);
            std::copy(v.begin(), v.end(), q1_.slice(k));
        }
    }
    check_finite(q1_.values, "first term");
}

DuhamelOperator::~DuhamelOperator() = default;

KernelTable DuhamelOperator::gaussian() const {
    KernelTable t(grid_, ti_, c_.beta());
    t.meta["term"] = 0;
    const int n = grid_.n;
    const int d = grid_.d;
    for (std::size_t k = 0; k < t.n_times(); ++k) {
        double* s = t.slice(k);
        const double tk = grid_.times[k];
        if (ti_ && d == 1) {
            for (int j = 0; j < n; ++j) s[j] = gaussian_r(tk, std::abs(grid_.coord(j)), 1);
        } else if (ti_) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) s[i * n + j] = gaussian_r(tk, std::hypot(grid_.coord(i), grid_.coord(j)), 2);
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    s[static_cast<std::size_t>(i) * n + j] = gaussian_r(tk, std::abs(grid_.coord(i) - grid_.coord(j)), 1);
        }
    }
    return t;
}

KernelTable DuhamelOperator::volterra(const KernelTable& g) const {
    const Impl& m = *impl_;
    if (g.ti != ti_ || g.grid.n != m.n || !uniform_prefix(g.grid, m.K) ||
        std::abs(g.grid.times[0] - m.tau) > 1e-12 * m.tau)
        throw std::invalid_argument("volterra: table does not match the operator grid");
    KernelTable out(grid_, ti_, c_.beta());
    if (c_.is_zero()) return out;
    if (ti_) {
        const int cs = m.fft->complex_size();
        std::vector<std::vector<cplx>> gh(m.K);
        for (int j = 0; j < m.K; ++j) gh[j] = m.spectrum(g.slice(j), m.n);
        for (int k = 0; k < m.K; ++k) {
            std::vector<cplx> acc(cs, cplx(0.0));
            // t_k has index k (time (k+1) tau); G_j at index j-1
            for (int j = 1; j <= k + 1; ++j) {
                const std::vector<cplx>& G = gh[j - 1];
                const std::vector<cplx>& W = m.omega_hat[k + 1 - j];
                for (int idx = 0; idx < cs; ++idx) acc[idx] += G[idx] * W[idx];
            }
            const std::vector<double> v = m.extract(acc, m.n - 1);
            std::copy(v.begin(), v.end(), out.slice(k));
        }
    } else {
        for (int k = 0; k < m.K; ++k) {
            Eigen::Map<RowMat> o(out.slice(k), m.n, m.n);
            for (int j = 1; j <= k + 1; ++j) {
                Eigen::Map<const RowMat> G(g.slice(j - 1), m.n, m.n);
                o.noalias() += G * m.omega[k + 1 - j];
            }
        }
    }
    check_finite(out.values, "volterra");
    return out;
}

KernelTable DuhamelOperator::heat_volterra(const KernelTable& g) const {
    const Impl& m = *impl_;
    if (m.d != 1) throw std::invalid_argument("heat_volterra: lattice S^b is available in d = 1 only");
    if (g.ti != ti_ || g.grid.n != m.n || !uniform_prefix(g.grid, m.K))
        throw std::invalid_argument("heat_volterra: table does not match the operator grid");
    KernelTable out(grid_, ti_, c_.beta());
    if (c_.is_zero()) return out;
    const int n = m.n;
    const int last = m.M / 2 + 1;
    // A_j = S^b g(t_j) acting on the first variable
    std::vector<std::vector<cplx>> ah(m.K);
    for (int j = 0; j < m.K; ++j) {
        const double* s = g.slice(j);
        if (ti_) {
            const std::vector<double> a = m.lattice->apply(std::vector<double>(s, s + n));
            ah[j] = m.spectrum(a.data(), n);
        } else {
            std::vector<double> a(static_cast<std::size_t>(n) * n);
            std::vector<double> col(n);
            for (int y = 0; y < n; ++y) {
                for (int i = 0; i < n; ++i) col[i] = s[static_cast<std::size_t>(i) * n + y];
                const std::vector<double> r = m.lattice->apply(col);
                for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + y] = r[i];
            }
            ah[j] = m.column_spectrum(a.data());
        }
    }
    const std::size_t cs = ah[0].size();
    for (int k = 0; k < m.K; ++k) {
        std::vector<cplx> acc(cs, cplx(0.0));
        // panel i covers [t_i, t_{i+1}] with t_0 = 0; A at t_0 vanishes
        for (int i = 0; i <= k; ++i) {
            const int mm = k - i;  // panels between the right end and t_k
            for (std::size_t idx = 0; idx < cs; ++idx) {
                const double a = m.xi2[ti_ ? idx : idx % last];
                double p0, p1;
                phis(a * m.tau, p0, p1);
                const double e = m.tau * std::exp(-a * mm * m.tau);
                const double wl = e * p1;         // weight of A(t_i)
                const double wr = e * (p0 - p1);  // weight of A(t_{i+1})
                if (i > 0) acc[idx] += wl * ah[i - 1][idx];
                acc[idx] += wr * ah[i][idx];
            }
        }
        const std::vector<double> v = ti_ ? m.extract(acc, 0) : m.column_extract(acc);
        std::copy(v.begin(), v.end(), out.slice(k));
    }
    check_finite(out.values, "heat_volterra");
    return out;
}

KernelTable iterate_once(const KernelTable& prev, const DuhamelOperator& op) {
    const int term = prev.meta.value("term", -1);
    KernelTable out = term == 0 ? op.first_term() : op.volterra(prev);
    out.meta["term"] = term < 0 ? -1 : term + 1;
    return out;
}

KernelTable iterate_once(const KernelTable& prev, const Coefficient& c) {
    const DuhamelOperator op(c, prev.grid);
    return iterate_once(prev, op);
}

namespace {

void fill_meta(KernelTable& t, const Coefficient& c) {
    t.meta["coefficient_hash"] = c.hash();
    t.meta["coefficient"] = c.spec();
    t.meta["beta"] = c.beta();
    t.meta["d"] = c.dim();
    t.meta["support_radius"] = std::isfinite(c.support_radius()) ? c.support_radius() : -1.0;
    t.meta["zero"] = c.is_zero();
    t.meta["sup_norm"] = c.sup_norm();
}

}  // namespace

SeriesResult build_series(const DuhamelOperator& op, const SeriesOptions& opt) {
    SeriesResult res;
    KernelTable q0 = op.gaussian();
    const double sup0 = q0.sup_abs();
    res.table = q0;
    res.states.push_back({0, sup0, 0.0});
    if (opt.keep_terms) res.terms.push_back(q0);
    KernelTable prev = std::move(q0);
    double prev_sup = sup0;
    int stalls = 0;
    bool converged = op.coefficient().is_zero();
    for (int n = 1; n <= opt.max_terms && !converged; ++n) {
        KernelTable q = iterate_once(prev, op);
        const double s = q.sup_abs();
        const double ratio = prev_sup > 0.0 ? s / prev_sup : 0.0;
        res.states.push_back({n, s, ratio});
        for (std::size_t i = 0; i < q.values.size(); ++i) res.table.values[i] += q.values[i];
        if (opt.keep_terms) res.terms.push_back(q);
        stalls = ratio > opt.stall_ratio ? stalls + 1 : 0;
        if (stalls >= 2) {
            const double T = op.grid().T();
            throw NonContraction("series does not contract (sup ratio " + std::to_string(ratio) + " at n = " +
                                     std::to_string(n) + "); shrink the horizon below " + std::to_string(T / 4.0),
                                 T, T / 4.0);
        }
        if (s < opt.tol * sup0) converged = true;
        prev = std::move(q);
        prev_sup = s;
    }
    if (!converged) {
        const double T = op.grid().T();
        throw NonContraction("series did not reach tolerance within " + std::to_string(opt.max_terms) + " terms", T,
                             T / 4.0);
    }
    fill_meta(res.table, op.coefficient());
    res.table.meta["term"] = -1;
    res.table.meta["terms"] = static_cast<int>(res.states.size());
    nlohmann::json sr = nlohmann::json::array();
    nlohmann::json sups = nlohmann::json::array();
    for (const SeriesState& st : res.states) {
        if (st.n > 0) sr.push_back(st.sup_ratio);
        sups.push_back(st.sup);
    }
    res.table.meta["sup_ratios"] = sr;
    res.table.meta["term_sups"] = sups;
    res.table.meta["s_res"] = op.s_res();
    res.table.meta["base_K"] = static_cast<int>(op.grid().times.size());
    return res;
}

SeriesResult build_series(const Coefficient& c, const SpaceTimeGrid& grid, const SeriesOptions& opt) {
    const DuhamelOperator op(c, grid);
    return build_series(op, opt);
}

double choose_base_horizon(const Coefficient& c, double a0_factor) {
    const double a0 = a0_factor * stable_normalizer(c.params()).value;
    const double b = std::max(c.sup_norm(), a0);
    return std::min(1.0, std::pow(a0 / b, 2.0 / (2.0 - c.beta())));
}

namespace {

double extent_rule(double support, bool zero, double t) {
    if (zero) return 8.0 * std::sqrt(t);
    if (support < 0.0 || !std::isfinite(support)) return 16.0 * std::sqrt(t);
    return 8.0 * std::sqrt(t) + 3.0 * support;
}

}  // namespace

double required_extent(const Coefficient& c, double t) {
    return extent_rule(std::isfinite(c.support_radius()) ? c.support_radius() : -1.0, c.is_zero(), t);
}

SpaceTimeGrid default_grid(const Coefficient& c, double T, double final_horizon, int K, double dx, double L) {
    if (dx <= 0.0) dx = std::sqrt(T) / 16.0;
    if (L <= 0.0) L = std::max(8.0 * std::sqrt(T), required_extent(c, std::max(T, final_horizon)));
    return make_grid(c.dim(), T, K, dx, L);
}

KernelTable scaling_transfer(const KernelTable& src, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("scaling_transfer: lambda must be positive");
    KernelTable out = src;
    for (double& t : out.grid.times) t /= lambda;
    const double r = std::sqrt(lambda);
    out.grid.dx = src.grid.dx / r;
    out.grid.L = src.grid.L / r;
    const double f = std::pow(lambda, 0.5 * src.grid.d);
    for (double& v : out.values) v *= f;
    out.meta["scaling_lambda"] = lambda;
    return out;
}

KernelTable scaling_transfer(const KernelTable& src, double lambda, const SpaceTimeGrid& target) {
    const double r = std::sqrt(lambda);
    bool ok = target.n == src.grid.n && target.d == src.grid.d && target.times.size() == src.grid.times.size() &&
              std::abs(target.dx * r - src.grid.dx) <= 1e-12 * src.grid.dx &&
              std::abs(target.L * r - src.grid.L) <= 1e-12 * std::max(1.0, src.grid.L);
    for (std::size_t k = 0; ok && k < target.times.size(); ++k)
        ok = std::abs(target.times[k] * lambda - src.grid.times[k]) <= 1e-12 * src.grid.times[k];
    if (!ok) throw std::invalid_argument("scaling_transfer: grid mismatch (target is not the image of the source grid)");
    KernelTable out = scaling_transfer(src, lambda);
    out.grid = target;
    return out;
}

KernelTable enlarge_extent(const KernelTable& table, double L_new) {
    const SpaceTimeGrid& g = table.grid;
    if (L_new <= g.L) return table;
    SpaceTimeGrid ng = g;
    const int m = static_cast<int>(std::ceil(L_new / g.dx - 1e-9));
    ng.n = 2 * m + 1;
    ng.L = m * g.dx;
    KernelTable out(ng, table.ti, table.beta);
    out.meta = table.meta;
    const int off = (ng.n - g.n) / 2;
    const int n = g.n, nn = ng.n;
    for (std::size_t k = 0; k < table.n_times(); ++k) {
        const double* s = table.slice(k);
        double* o = out.slice(k);
        if (table.ti && g.d == 1) {
            std::copy(s, s + n, o + off);
        } else {
            for (int i = 0; i < n; ++i)
                std::copy(s + static_cast<std::size_t>(i) * n, s + static_cast<std::size_t>(i + 1) * n,
                          o + static_cast<std::size_t>(i + off) * nn + off);
        }
    }
    return out;
}

std::vector<double> compose(const KernelTable& table, std::size_t k1, std::size_t k2) {
    const SpaceTimeGrid& g = table.grid;
    const int n = g.n;
    const double h = g.dx;
    if (!table.ti) {
        Eigen::Map<const RowMat> A(table.slice(k1), n, n), B(table.slice(k2), n, n);
        std::vector<double> out(static_cast<std::size_t>(n) * n);
        Eigen::Map<RowMat> o(out.data(), n, n);
        o.noalias() = h * (A * B);
        return out;
    }
    const int M = good_fft_size(2 * n);
    const int d = g.d;
    RealFFT fft(d == 1 ? std::vector<int>{M} : std::vector<int>{M, M});
    auto spec = [&](const double* f) {
        std::vector<double> buf(fft.real_size(), 0.0);
        if (d == 1)
            std::copy(f, f + n, buf.begin());
        else
            for (int i = 0; i < n; ++i) std::copy(f + i * n, f + (i + 1) * n, buf.begin() + i * M);
        std::vector<cplx> o(fft.complex_size());
        fft.forward(buf.data(), o.data());
        return o;
    };
    std::vector<cplx> a = spec(table.slice(k1));
    const std::vector<cplx> b = spec(table.slice(k2));
    const double hd = d == 1 ? h : h * h;
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i] * hd;
    std::vector<double> buf(fft.real_size());
    fft.inverse(a.data(), buf.data());
    const int shift = (n - 1) / 2;
    std::vector<double> out(d == 1 ? n : n * n);
    if (d == 1)
        std::copy(buf.begin() + shift, buf.begin() + shift + n, out.begin());
    else
        for (int i = 0; i < n; ++i)
            std::copy(buf.begin() + (i + shift) * M + shift, buf.begin() + (i + shift) * M + shift + n,
                      out.begin() + i * n);
    return out;
}

KernelTable extend_time(const KernelTable& table, double s, const ExtendOptions& opt) {
    const std::vector<double>& ts = table.grid.times;
    const double T = ts.back();
    if (s <= T * (1.0 + 1e-12)) return table;
    const double step = ts.size() > 1 ? 2.0 * (T - ts[ts.size() - 2]) : T;
    const double reach = std::min(T, s - T);
    std::vector<std::size_t> picks;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        const double t = ts[j];
        if (t > reach * (1.0 + 1e-12)) break;
        const double q = t / step;
        const bool on_step = std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q) && std::round(q) >= 1.0;
        const bool endpoint = std::abs(t - (s - T)) <= 1e-12 * s;
        if (on_step || endpoint) picks.push_back(j);
    }
    if (picks.empty()) throw std::invalid_argument("extend_time: no table node fits the doubled step");

    const double support = opt.support_radius >= 0.0 ? opt.support_radius : table.meta.value("support_radius", -1.0);
    const bool zero = table.meta.value("zero", false);
    const double t_new = T + ts[picks.back()];
    const double L_req = extent_rule(support, zero, t_new);
    KernelTable base = table;
    if (L_req > table.grid.L * (1.0 + 1e-9)) {
        if (L_req > opt.L_cap)
            throw NumericalFailure("extend_time: required extent " + std::to_string(L_req) + " exceeds cap " +
                                   std::to_string(opt.L_cap));
        base = enlarge_extent(table, L_req);
    }
    SpaceTimeGrid ng = base.grid;
    for (std::size_t j : picks) ng.times.push_back(T + ts[j]);
    KernelTable out(ng, base.ti, base.beta);
    out.meta = base.meta;
    std::copy(base.values.begin(), base.values.end(), out.values.begin());
    const std::size_t kT = ts.size() - 1;
    for (std::size_t p = 0; p < picks.size(); ++p) {
        const std::vector<double> v = compose(base, kT, picks[p]);
        std::copy(v.begin(), v.end(), out.slice(ts.size() + p));
    }
    check_finite(out.values, "extend_time");
    nlohmann::json ext = out.meta.value("extensions", nlohmann::json::array());
    ext.push_back({{"from", T}, {"to", ng.times.back()}, {"L", ng.L}});
    out.meta["extensions"] = ext;
    return out;
}

KernelTable extend_to(const KernelTable& table, double s, const ExtendOptions& opt) {
    KernelTable t = table;
    while (t.grid.times.back() < s * (1.0 - 1e-12)) {
        const double before = t.grid.times.back();
        t = extend_time(t, s, opt);
        if (!(t.grid.times.back() > before)) throw NumericalFailure("extend_to: no progress");
    }
    if (std::abs(t.grid.times.back() - s) > 1e-9 * s)
        throw std::invalid_argument("extend_to: target time is not reachable on the doubled node sets");
    return t;
}

namespace {

KernelTable prefix(const KernelTable& t, std::size_t K) {
    SpaceTimeGrid g = t.grid;
    g.times.resize(K);
    KernelTable out(g, t.ti, t.beta);
    std::copy(t.values.begin(), t.values.begin() + static_cast<std::ptrdiff_t>(K * t.slice_size()), out.values.begin());
    out.meta = t.meta;
    return out;
}

struct Pieces {
    KernelTable q, p0, d1;
    double sup_q = 0.0;
};

Pieces first_form_pieces(const KernelTable& table, const DuhamelOperator& op) {
    const std::size_t K = op.grid().times.size();
    if (table.grid.times.size() < K || table.grid.n != op.grid().n)
        throw std::invalid_argument("duhamel_residual: table does not extend the operator grid");
    Pieces p;
    p.q = prefix(table, K);
    p.p0 = op.gaussian();
    KernelTable qr = p.q;
    for (std::size_t i = 0; i < qr.values.size(); ++i) qr.values[i] -= p.p0.values[i];
    p.d1 = op.volterra(qr);
    const KernelTable& q1 = op.first_term();
    for (std::size_t i = 0; i < p.d1.values.size(); ++i) p.d1.values[i] += q1.values[i];
    p.sup_q = p.q.sup_abs();
    return p;
}

}  // namespace

double duhamel_residual(const KernelTable& table, const DuhamelOperator& op, DuhamelForm form) {
    const Pieces p = first_form_pieces(table, op);
    KernelTable dd = p.d1;
    if (form == DuhamelForm::Second) {
        KernelTable qr = p.q;
        for (std::size_t i = 0; i < qr.values.size(); ++i) qr.values[i] -= p.p0.values[i];
        dd = op.heat_volterra(qr);
        const KernelTable& q1 = op.first_term();
        for (std::size_t i = 0; i < dd.values.size(); ++i) dd.values[i] += q1.values[i];
    }
    double r = 0.0;
    for (std::size_t i = 0; i < dd.values.size(); ++i)
        r = std::max(r, std::abs(p.q.values[i] - p.p0.values[i] - dd.values[i]));
    return p.sup_q > 0.0 ? r / p.sup_q : r;
}

double duhamel_residual(const KernelTable& table, const Coefficient& c, DuhamelForm form) {
    const std::size_t K = table.meta.value("base_K", static_cast<int>(table.grid.times.size()));
    SpaceTimeGrid g = table.grid;
    g.times.resize(K);
    const DuhamelOperator op(c, g);
    return duhamel_residual(table, op, form);
}

ResidualReport duhamel_residuals(const KernelTable& table, const DuhamelOperator& op) {
    ResidualReport rep;
    const Pieces p = first_form_pieces(table, op);
    for (std::size_t i = 0; i < p.d1.values.size(); ++i)
        rep.first = std::max(rep.first, std::abs(p.q.values[i] - p.p0.values[i] - p.d1.values[i]));
    if (op.grid().d != 1) {
        rep.second_supported = false;
        rep.second = rep.mutual = std::numeric_limits<double>::quiet_NaN();
    } else {
        KernelTable qr = p.q;
        for (std::size_t i = 0; i < qr.values.size(); ++i) qr.values[i] -= p.p0.values[i];
        KernelTable d2 = op.heat_volterra(qr);
        const KernelTable& q1 = op.first_term();
        for (std::size_t i = 0; i < d2.values.size(); ++i) {
            d2.values[i] += q1.values[i];
            rep.second = std::max(rep.second, std::abs(p.q.values[i] - p.p0.values[i] - d2.values[i]));
            rep.mutual = std::max(rep.mutual, std::abs(p.d1.values[i] - d2.values[i]));
        }
    }
    if (p.sup_q > 0.0) {
        rep.first /= p.sup_q;
        rep.second /= p.sup_q;
        rep.mutual /= p.sup_q;
    }
    return rep;
}

TestFunction gaussian_bump(double width, const Point& center, int d) {
    TestFunction t;
    const double w2 = width * width;
    t.f = [=](const Point& y) {
        const Point u = y - center;
        const double r2 = d == 1 ? u[0] * u[0] : u[0] * u[0] + u[1] * u[1];
        return std::exp(-r2 / (2.0 * w2));
    };
    t.laplacian = [=](const Point& y) {
        const Point u = y - center;
        const double r2 = d == 1 ? u[0] * u[0] : u[0] * u[0] + u[1] * u[1];
        return std::exp(-r2 / (2.0 * w2)) * (r2 / (w2 * w2) - d / w2);
    };
    t.c2_norm = 1.0 + 1.0 / width + 1.0 / w2;
    t.name = "gaussian_bump";
    return t;
}

TestFunction cosine_wave(const Point& xi, int d) {
    TestFunction t;
    const double k2 = d == 1 ? xi[0] * xi[0] : xi[0] * xi[0] + xi[1] * xi[1];
    t.f = [=](const Point& y) { return std::cos(xi[0] * y[0] + (d == 2 ? xi[1] * y[1] : 0.0)); };
    t.laplacian = [=](const Point& y) { return -k2 * std::cos(xi[0] * y[0] + (d == 2 ? xi[1] * y[1] : 0.0)); };
    t.c2_norm = 1.0 + std::sqrt(k2) + k2;
    t.name = "cosine";
    return t;
}

TestFunction constant_one() {
    TestFunction t;
    t.f = [](const Point&) { return 1.0; };
    t.laplacian = [](const Point&) { return 0.0; };
    t.c2_norm = 1.0;
    t.name = "one";
    return t;
}

namespace {

// values f(y) at the lattice points used by apply_semigroup for x
std::vector<double> semigroup_samples(const KernelTable& table, const std::function<double(const Point&)>& f,
                                      const Point& x) {
    const SpaceTimeGrid& g = table.grid;
    const int n = g.n;
    std::vector<double> v;
    if (table.ti && g.d == 1) {
        v.resize(n);
        for (int j = 0; j < n; ++j) v[j] = f(Point{x[0] - g.coord(j), 0.0});
    } else if (table.ti) {
        v.resize(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(i) * n + j] = f(Point{x[0] - g.coord(i), x[1] - g.coord(j)});
    } else {
        v.resize(n);
        for (int j = 0; j < n; ++j) v[j] = f(Point{g.coord(j), 0.0});
    }
    return v;
}

double semigroup_dot(const KernelTable& table, std::size_t k, const std::vector<double>& fv, const Point& x) {
    const SpaceTimeGrid& g = table.grid;
    const int n = g.n;
    const double* s = table.slice(k);
    double acc = 0.0;
    if (table.ti) {
        for (std::size_t j = 0; j < fv.size(); ++j) acc += s[j] * fv[j];
        return acc * (g.d == 1 ? g.dx : g.dx * g.dx);
    }
    // interpolate between lattice rows
    const double u = (x[0] + g.L) / g.dx;
    if (u < 0.0 || u > n - 1) return 0.0;
    const int i = std::min(static_cast<int>(std::floor(u)), n - 2);
    const double fr = u - i;
    for (int j = 0; j < n; ++j)
        acc += ((1.0 - fr) * s[static_cast<std::size_t>(i) * n + j] + fr * s[static_cast<std::size_t>(i + 1) * n + j]) * fv[j];
    return acc * g.dx;
}

}  // namespace

double apply_semigroup(const KernelTable& table, const std::function<double(const Point&)>& f, std::size_t k,
                       const Point& x) {
    return semigroup_dot(table, k, semigroup_samples(table, f, x), x);
}

GeneratorDefect generator_check(const KernelTable& table, const Coefficient& c, const TestFunction& f,
                                const std::vector<Point>& xs, double t_max) {
    GeneratorDefect worst;
    auto Lf = [&](const Point& y) {
        double v = f.laplacian(y);
        if (!c.is_zero()) v += apply_Sb(c, f.f, y).value;
        return v;
    };
    std::vector<double> ts{0.0};
    for (std::size_t k = 0; k < table.n_times(); ++k) {
        if (table.grid.times[k] > t_max * (1.0 + 1e-12)) break;
        ts.push_back(table.grid.times[k]);
    }
    const std::size_t m = ts.size();
    if (m < 2) return worst;
    // integral of the quadratic through nodes (i0, i0+1, i0+2) over [ts[k-1], ts[k]]
    auto piece = [&](const std::vector<double>& g, std::size_t k) {
        std::size_t i0 = k + 1 < m ? k - 1 : k - 2;
        if (m == 2) {
            return 0.5 * (ts[1] - ts[0]) * (g[0] + g[1]);
        }
        const double a = ts[k - 1], b = ts[k];
        static const double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        double acc = 0.0;
        for (int q = 0; q < 3; ++q) {
            const double s = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
            double v = 0.0;
            for (std::size_t i = i0; i < i0 + 3; ++i) {
                double l = 1.0;
                for (std::size_t j = i0; j < i0 + 3; ++j)
                    if (j != i) l *= (s - ts[j]) / (ts[i] - ts[j]);
                v += l * g[i];
            }
            acc += gw[q] * v;
        }
        return 0.5 * (b - a) * acc;
    };
    for (const Point& x : xs) {
        const std::vector<double> fv = semigroup_samples(table, f.f, x);
        const std::vector<double> gv = semigroup_samples(table, Lf, x);
        const double fx = f.f(x);
        std::vector<double> g(m);
        g[0] = Lf(x);
        for (std::size_t k = 1; k < m; ++k) g[k] = semigroup_dot(table, k - 1, gv, x);
        double integral = 0.0;
        for (std::size_t k = 1; k < m; ++k) {
            integral += piece(g, k);
            const double defect = std::abs(semigroup_dot(table, k - 1, fv, x) - fx - integral);
            if (defect > worst.defect) {
                worst.defect = defect;
                worst.t = ts[k];
                worst.x = x;
            }
            const double sc = defect / (ts[k] * ts[k]);
            if (sc > worst.scaled) {
                worst.scaled = sc;
                worst.t_scaled = ts[k];
            }
        }
    }
    return worst;
}

}  // namespace nlhk
