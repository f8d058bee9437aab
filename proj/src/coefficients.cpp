#include "nlhk/coefficients.hpp"

#include "nlhk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nlhk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double require_finite(const nlohmann::json& p, const char* key, double fallback, bool required) {
    if (!p.contains(key)) {
        if (required) throw std::invalid_argument(std::string("coefficient: missing parameter '") + key + "'");
        return fallback;
    }
    const double v = p.at(key).get<double>();
    if (!std::isfinite(v))
        throw std::invalid_argument(std::string("coefficient: parameter '") + key + "' is not finite (unbounded b)");
    return v;
}

class ZeroFamily final : public CoefficientFamily {
public:
    double eval(const Point&, const Point&) const override { return 0.0; }
    double support_radius() const override { return 0.0; }
    bool tail_mass(const Point&, double, const ModelParams&, double& out) const override {
        out = 0.0;
        return true;
    }
};

class ConstantFamily final : public CoefficientFamily {
public:
    explicit ConstantFamily(double c) : c_(c) {}
    double eval(const Point&, const Point&) const override { return c_; }
    bool tail_mass(const Point&, double R, const ModelParams& p, double& out) const override {
        out = R <= 0.0 ? (c_ == 0.0 ? 0.0 : kInf) : c_ * sphere_area(p.d) * std::pow(R, -p.beta) / p.beta;
        return true;
    }

private:
    double c_;
};

// M on the shell inner <= |z| <= lambda, zero elsewhere.
class IndicatorFamily final : public CoefficientFamily {
public:
    IndicatorFamily(double M, double lambda, double inner) : M_(M), lambda_(lambda), inner_(inner) {}
    double eval(const Point&, const Point& z) const override {
        const double r = std::hypot(z[0], z[1]);
        return (r <= lambda_ && r >= inner_) ? M_ : 0.0;
    }
    double support_radius() const override { return lambda_; }
    std::vector<double> radial_breaks() const override {
        std::vector<double> b;
        if (inner_ > 0.0) b.push_back(inner_);
        b.push_back(lambda_);
        return b;
    }
    bool tail_mass(const Point&, double R, const ModelParams& p, double& out) const override {
        out = shell_mass(R, p);
        return true;
    }
    double shell_mass(double R, const ModelParams& p) const {
        const double a = std::max(R, inner_);
        if (a >= lambda_) return 0.0;
        if (a <= 0.0) return M_ == 0.0 ? 0.0 : kInf;
        return M_ * sphere_area(p.d) * (std::pow(a, -p.beta) - std::pow(lambda_, -p.beta)) / p.beta;
    }
    double M() const { return M_; }

private:
    double M_, lambda_, inner_;
};

// a(x) * rho(|z|) with a(x) = mean + amp cos(freq x_1) and rho constant or a shell indicator.
class ProductFamily final : public CoefficientFamily {
public:
    ProductFamily(double mean, double amp, double freq, std::shared_ptr<const CoefficientFamily> rho)
        : mean_(mean), amp_(amp), freq_(freq), rho_(std::move(rho)) {}
    double a(const Point& x) const { return mean_ + amp_ * std::cos(freq_ * x[0]); }
    double eval(const Point& x, const Point& z) const override { return a(x) * rho_->eval(x, z); }
    double support_radius() const override { return rho_->support_radius(); }
    bool translation_invariant() const override { return amp_ == 0.0 || freq_ == 0.0; }
    std::vector<double> radial_breaks() const override { return rho_->radial_breaks(); }
    bool tail_mass(const Point& x, double R, const ModelParams& p, double& out) const override {
        double m = 0.0;
        if (!rho_->tail_mass(x, R, p, m)) return false;
        out = a(x) * m;
        return true;
    }
    double x_box() const override {
        if (freq_ == 0.0) return 4.0;
        return std::max(4.0, 2.0 * M_PI / std::abs(freq_));
    }

private:
    double mean_, amp_, freq_;
    std::shared_ptr<const CoefficientFamily> rho_;
};

// Multilinear interpolation on a lattice over (x, z) in d = 1 or over z only;
// zero outside the tabulated box.
class TableFamily final : public CoefficientFamily {
public:
    TableFamily(int d, const nlohmann::json& p) : d_(d) {
        auto read_axes = [&](const char* lo, const char* hi, const char* cnt, std::vector<Axis>& axes) {
            const auto& vlo = p.at(lo);
            const auto& vhi = p.at(hi);
            const auto& vc = p.at(cnt);
            if (vlo.size() != static_cast<std::size_t>(d) || vhi.size() != vlo.size() || vc.size() != vlo.size())
                throw std::invalid_argument("table coefficient: axis arrays must have length d");
            for (std::size_t k = 0; k < vlo.size(); ++k) {
                Axis a{vlo[k].get<double>(), vhi[k].get<double>(), vc[k].get<int>()};
                if (!(a.hi > a.lo) || a.n < 2 || !std::isfinite(a.lo) || !std::isfinite(a.hi))
                    throw std::invalid_argument("table coefficient: bad axis");
                axes.push_back(a);
            }
        };
        read_axes("z_min", "z_max", "z_count", z_axes_);
        if (p.contains("x_count")) {
            if (d != 1) throw std::invalid_argument("table coefficient: x-dependent tables are supported for d = 1 only");
            read_axes("x_min", "x_max", "x_count", x_axes_);
        }
        std::size_t total = 1;
        for (const auto& a : x_axes_) total *= a.n;
        for (const auto& a : z_axes_) total *= a.n;
        values_ = p.at("values").get<std::vector<double>>();
        if (values_.size() != total) throw std::invalid_argument("table coefficient: values size mismatch");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("table coefficient: non-finite value (unbounded b)");
        support_ = 0.0;
        for (double sx : {0.0, 1.0})
            for (double sy : {0.0, 1.0}) {
                Point c{0.0, 0.0};
                c[0] = sx ? z_axes_[0].hi : z_axes_[0].lo;
                if (d == 2) c[1] = sy ? z_axes_[1].hi : z_axes_[1].lo;
                support_ = std::max(support_, std::hypot(c[0], c[1]));
            }
    }

    double eval(const Point& x, const Point& z) const override {
        // collect coordinates: x axes first then z axes
        double coord[4];
        const Axis* axes[4];
        int n = 0;
        for (std::size_t k = 0; k < x_axes_.size(); ++k) {
            coord[n] = x[k];
            axes[n++] = &x_axes_[k];
        }
        for (std::size_t k = 0; k < z_axes_.size(); ++k) {
            coord[n] = z[k];
            axes[n++] = &z_axes_[k];
        }
        int base[4];
        double frac[4];
        for (int k = 0; k < n; ++k) {
            const Axis& a = *axes[k];
            if (coord[k] < a.lo || coord[k] > a.hi) return 0.0;
            const double h = (a.hi - a.lo) / (a.n - 1);
            double u = (coord[k] - a.lo) / h;
            int i = std::min(static_cast<int>(std::floor(u)), a.n - 2);
            base[k] = i;
            frac[k] = u - i;
        }
        double acc = 0.0;
        for (int corner = 0; corner < (1 << n); ++corner) {
            double w = 1.0;
            std::size_t idx = 0;
            for (int k = 0; k < n; ++k) {
                const int bit = (corner >> k) & 1;
                w *= bit ? frac[k] : 1.0 - frac[k];
                idx = idx * axes[k]->n + static_cast<std::size_t>(base[k] + bit);
            }
            if (w != 0.0) acc += w * values_[idx];
        }
        return acc;
    }
    double support_radius() const override { return support_; }
    bool translation_invariant() const override { return x_axes_.empty(); }
    bool radial() const override { return false; }
    std::vector<double> radial_breaks() const override {
        std::vector<double> b;
        if (d_ == 1) {
            const Axis& a = z_axes_[0];
            const double h = (a.hi - a.lo) / (a.n - 1);
            for (int i = 0; i < a.n; ++i) {
                const double r = std::abs(a.lo + i * h);
                if (r > 0.0) b.push_back(r);
            }
        } else {
            b.push_back(support_);
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }
    double x_box() const override {
        if (x_axes_.empty()) return 4.0;
        return std::max(std::abs(x_axes_[0].lo), std::abs(x_axes_[0].hi)) * 1.1;
    }

private:
    struct Axis {
        double lo, hi;
        int n;
    };
    int d_;
    std::vector<Axis> x_axes_, z_axes_;
    std::vector<double> values_;
    double support_ = 0.0;
};

std::shared_ptr<const CoefficientFamily> make_family(const std::string& family, const nlohmann::json& p, int d) {
    if (family == "zero") return std::make_shared<ZeroFamily>();
    if (family == "constant") return std::make_shared<ConstantFamily>(require_finite(p, "c", 0.0, true));
    if (family == "indicator") {
        const double M = require_finite(p, "M", 1.0, false);
        const double lambda = require_finite(p, "lambda", 1.0, false);
        const double inner = require_finite(p, "inner", 0.0, false);
        if (!(lambda > 0.0) || inner < 0.0 || inner >= lambda)
            throw std::invalid_argument("indicator coefficient: need 0 <= inner < lambda");
        return std::make_shared<IndicatorFamily>(M, lambda, inner);
    }
    if (family == "product") {
        nlohmann::json a = p.value("a", nlohmann::json::object());
        const double mean = require_finite(a, "mean", 1.0, false);
        const double amp = require_finite(a, "amp", 0.0, false);
        const double freq = require_finite(a, "freq", 1.0, false);
        if (!p.contains("rho")) throw std::invalid_argument("product coefficient: missing 'rho'");
        const auto& rho = p.at("rho");
        const std::string rf = rho.value("family", "constant");
        if (rf != "constant" && rf != "indicator")
            throw std::invalid_argument("product coefficient: rho must be constant or indicator");
        return std::make_shared<ProductFamily>(mean, amp, freq, make_family(rf, rho.value("params", rho), d));
    }
    if (family == "table") return std::make_shared<TableFamily>(d, p);
    throw std::invalid_argument("unknown coefficient family '" + family + "'");
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

void halton(std::size_t index, int dims, double* out) {
    static const int primes[] = {2, 3, 5, 7, 11, 13};
    for (int k = 0; k < dims; ++k) {
        double f = 1.0, r = 0.0;
        std::size_t i = index;
        const int b = primes[k];
        while (i > 0) {
            f /= b;
            r += f * static_cast<double>(i % b);
            i /= b;
        }
        out[k] = r;
    }
}

Coefficient::Coefficient(std::shared_ptr<const CoefficientFamily> family, ModelParams params, bool symmetrize,
                         nlohmann::json spec, std::size_t envelope_samples, std::vector<std::string> warnings)
    : family_(std::move(family)),
      params_(params),
      symmetrize_(symmetrize),
      spec_(std::move(spec)),
      warnings_(std::move(warnings)) {
    params_.validate();
    support_radius_ = family_->support_radius();
    sample_envelopes(envelope_samples);
}

void Coefficient::sample_envelopes(std::size_t n) {
    const int d = params_.d;
    const double zbox = std::isfinite(support_radius_) ? std::max(1.25 * support_radius_, 1e-3) : 4.0;
    const double xbox = family_->x_box();
    double lo = kInf, hi = -kInf;
    double u[4];
    for (std::size_t i = 1; i <= n; ++i) {
        halton(i, 2 * d, u);
        Point x{0.0, 0.0}, z{0.0, 0.0};
        for (int k = 0; k < d; ++k) {
            x[k] = (2.0 * u[k] - 1.0) * xbox;
            z[k] = (2.0 * u[d + k] - 1.0) * zbox;
        }
        const double v = (*this)(scale_ * x, scale_ * z);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // exact nodes the low-discrepancy set can miss: the origin shell and far field
    for (double r : {0.0, 0.5 * zbox}) {
        const double v = (*this)(Point{0.0, 0.0}, Point{scale_ * r, 0.0});
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (n == 0) lo = hi = 0.0;
    if (std::isfinite(support_radius_)) {
        lo = std::min(lo, 0.0);
        hi = std::max(hi, 0.0);
    }
    lower_env_ = lo;
    upper_env_ = hi;
    sup_norm_ = std::max(std::abs(lo), std::abs(hi));
    nonneg_ = lo >= 0.0;
    support_radius_ = family_->support_radius() * scale_;
}

std::vector<double> Coefficient::radial_breaks() const {
    auto b = family_->radial_breaks();
    for (double& r : b) r *= scale_;
    return b;
}

double Coefficient::tail_mass(const Point& x, double R) const {
    if (is_zero()) return 0.0;
    const double beta = params_.beta;
    double m = 0.0;
    // rescaling: int_{|w|>R} amp b0(x/s, w/s) |w|^{-d-beta} dw = amp s^{-beta} int_{|v|>R/s} ...
    if (!symmetrize_ && family_->tail_mass(inv_scale_ * x, R * inv_scale_, params_, m))
        return amp_ * std::pow(scale_, -beta) * m;
    // numeric fallback for finite-support families
    const double rs = support_radius_;
    if (!std::isfinite(rs)) throw std::logic_error("tail_mass: no closed form for infinite support");
    if (R >= rs) return 0.0;
    std::vector<double> breaks{R};
    for (double r : radial_breaks())
        if (r > R && r < rs) breaks.push_back(r);
    breaks.push_back(rs);
    std::sort(breaks.begin(), breaks.end());
    const QuadRule q = composite_gauss(breaks, 12, 0.0, 0.5);
    const int d = params_.d;
    double acc = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double r = q.nodes[k];
        double ang = 0.0;
        if (d == 1) {
            ang = (*this)(x, Point{r, 0.0}) + (*this)(x, Point{-r, 0.0});
        } else {
            const int nphi = 256;
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * M_PI * j / nphi;
                ang += (*this)(x, Point{r * std::cos(phi), r * std::sin(phi)});
            }
            ang *= 2.0 * M_PI / nphi;
        }
        acc += q.weights[k] * ang * std::pow(r, -1.0 - beta);
    }
    return acc;
}

double Coefficient::inf_on_ball(double lambda, std::size_t samples) const {
    const int d = params_.d;
    const double xbox = family_->x_box() * scale_;
    double lo = kInf;
    double u[4];
    for (std::size_t i = 1; i <= samples; ++i) {
        halton(i, 2 * d, u);
        Point x{0.0, 0.0}, z{0.0, 0.0};
        for (int k = 0; k < d; ++k) {
            x[k] = (2.0 * u[k] - 1.0) * xbox;
            z[k] = (2.0 * u[d + k] - 1.0) * lambda;
        }
        if (norm(z, d) > lambda) continue;
        lo = std::min(lo, (*this)(x, z));
    }
    return lo;
}

Coefficient Coefficient::scaled(double amp_factor, double scale_factor) const {
    Coefficient c = *this;
    c.amp_ = amp_ * amp_factor;
    c.scale_ = scale_ * scale_factor;
    c.inv_scale_ = 1.0 / c.scale_;
    const double a = std::abs(amp_factor);
    c.sup_norm_ = sup_norm_ * a;
    if (amp_factor >= 0.0) {
        c.lower_env_ = lower_env_ * amp_factor;
        c.upper_env_ = upper_env_ * amp_factor;
    } else {
        c.lower_env_ = upper_env_ * amp_factor;
        c.upper_env_ = lower_env_ * amp_factor;
    }
    c.nonneg_ = c.lower_env_ >= 0.0;
    c.support_radius_ = support_radius_ * scale_factor;
    return c;
}

Coefficient Coefficient::with_nonneg_flag(bool flag) const {
    Coefficient c = *this;
    c.nonneg_ = flag;
    return c;
}

std::string Coefficient::hash() const {
    nlohmann::json j = spec_;
    j["_amp"] = amp_;
    j["_scale"] = scale_;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

std::string Coefficient::check_invariants(std::size_t samples) const {
    const int d = params_.d;
    const double zbox = std::isfinite(support_radius_) ? 2.0 * support_radius_ + 1.0 : 6.0;
    const double xbox = family_->x_box() * scale_;
    double u[4];
    std::ostringstream msg;
    for (std::size_t i = 1; i <= samples; ++i) {
        halton(i + 7919, 2 * d, u);
        Point x{0.0, 0.0}, z{0.0, 0.0};
        for (int k = 0; k < d; ++k) {
            x[k] = (2.0 * u[k] - 1.0) * xbox;
            z[k] = (2.0 * u[d + k] - 1.0) * zbox;
        }
        const double v = (*this)(x, z);
        const double vm = (*this)(x, Point{-z[0], -z[1]});
        if (v != vm) {
            msg << "asymmetric at z=(" << z[0] << "," << z[1] << ")";
            return msg.str();
        }
        if (std::abs(v) > sup_norm_ * (1.0 + 1e-12) + 1e-300) {
            msg << "|b| exceeds sup_norm at z=(" << z[0] << "," << z[1] << ")";
            return msg.str();
        }
        if (nonneg_ && v < 0.0) return "negative value despite nonneg flag";
        if (std::isfinite(support_radius_) && norm(z, d) > support_radius_ && v != 0.0)
            return "nonzero outside support radius";
    }
    return {};
}

Coefficient make_coefficient(const nlohmann::json& spec, const ModelParams& params, std::size_t envelope_samples) {
    ModelParams p = params;
    if (spec.contains("d")) p.d = spec.at("d").get<int>();
    if (spec.contains("beta")) p.beta = spec.at("beta").get<double>();
    p.validate();
    if (!spec.contains("family")) throw std::invalid_argument("coefficient spec: missing 'family'");
    const std::string family = spec.at("family").get<std::string>();
    const nlohmann::json params_json = spec.value("params", nlohmann::json::object());
    auto fam = make_family(family, params_json, p.d);

    nlohmann::json canon = spec;
    canon["d"] = p.d;
    canon["beta"] = p.beta;

    // symmetry probe: asymmetric descriptions are symmetrized, not rejected
    bool symmetric = true;
    double u[4];
    for (std::size_t i = 1; i <= 4000 && symmetric; ++i) {
        halton(i, 2 * p.d, u);
        Point x{0.0, 0.0}, z{0.0, 0.0};
        const double zb = std::isfinite(fam->support_radius()) ? 1.1 * fam->support_radius() + 1e-3 : 4.0;
        for (int k = 0; k < p.d; ++k) {
            x[k] = (2.0 * u[k] - 1.0) * fam->x_box();
            z[k] = (2.0 * u[p.d + k] - 1.0) * zb;
        }
        if (fam->eval(x, z) != fam->eval(x, Point{-z[0], -z[1]})) symmetric = false;
    }
    std::vector<std::string> warnings;
    if (!symmetric) warnings.push_back("coefficient is not even in z; using (b(x,z)+b(x,-z))/2");
    Coefficient c(fam, p, !symmetric, canon, envelope_samples, std::move(warnings));
    if (spec.contains("nonneg")) c = c.with_nonneg_flag(spec.at("nonneg").get<bool>());
    return c;
}

Coefficient make_coefficient(const nlohmann::json& spec, std::size_t envelope_samples) {
    return make_coefficient(spec, ModelParams{}, envelope_samples);
}

ScaledCoefficient rescale(const Coefficient& c, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("rescale: lambda must be positive");
    const double amp = std::pow(lambda, c.beta() / 2.0 - 1.0);
    return ScaledCoefficient{c, lambda, c.scaled(amp, std::sqrt(lambda))};
}

}  // namespace nlhk
