#pragma once

#include "nlhk/params.hpp"

#include <json.hpp>

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace nlhk {

/// Raw analytic description of b(x, z) before symmetrization and scaling.
class CoefficientFamily {
public:
    virtual ~CoefficientFamily() = default;
    virtual double eval(const Point& x, const Point& z) const = 0;
    virtual double support_radius() const { return std::numeric_limits<double>::infinity(); }
    virtual bool translation_invariant() const { return true; }
    /// True when b(x, .) depends on |z| only.
    virtual bool radial() const { return true; }
    /// Radii |z| across which b(x, .) may jump.
    virtual std::vector<double> radial_breaks() const { return {}; }
    /// Closed form of  int_{|w|>R} b(x,w) |w|^{-d-beta} dw  when one is known.
    virtual bool tail_mass(const Point& x, double R, const ModelParams& p, double& out) const {
        (void)x; (void)R; (void)p; (void)out;
        return false;
    }
    /// Half-width of the x box used for envelope sampling.
    virtual double x_box() const { return 4.0; }
};

/// Immutable perturbation coefficient b(x, z), always even in z.
///
/// Evaluates  amp * b0(x / scale, z / scale)  where b0 is the (symmetrized)
/// family; amp and scale are 1 for coefficients built by make_coefficient and
/// are changed only by rescale().
class Coefficient {
public:
    Coefficient() = default;
    Coefficient(std::shared_ptr<const CoefficientFamily> family, ModelParams params, bool symmetrize,
                nlohmann::json spec, std::size_t envelope_samples = 100000,
                std::vector<std::string> warnings = {});

    double operator()(const Point& x, const Point& z) const {
        if (amp_ == 0.0) return 0.0;
        const Point xs = inv_scale_ * x;
        const Point zs = inv_scale_ * z;
        if (!symmetrize_) return amp_ * family_->eval(xs, zs);
        const Point mz{-zs[0], -zs[1]};
        return amp_ * 0.5 * (family_->eval(xs, zs) + family_->eval(xs, mz));
    }

    const ModelParams& params() const { return params_; }
    int dim() const { return params_.d; }
    double beta() const { return params_.beta; }

    double sup_norm() const { return sup_norm_; }
    /// m_b = inf_x essinf_z b (sampled).
    double lower_env() const { return lower_env_; }
    /// M_b = esssup b (sampled).
    double upper_env() const { return upper_env_; }
    double support_radius() const { return support_radius_; }
    bool nonneg() const { return nonneg_; }
    bool is_zero() const { return amp_ == 0.0 || sup_norm_ == 0.0; }
    bool translation_invariant() const { return family_->translation_invariant(); }
    bool radial() const { return family_->radial() && !symmetrize_; }
    std::vector<double> radial_breaks() const;

    ///  int_{|w|>R} b(x,w) |w|^{-d-beta} dw
    double tail_mass(const Point& x, double R) const;

    /// inf over sampled x and |z| <= lambda of b(x, z); the predicate of the
    /// mixed lower bound asks for this to exceed a positive epsilon.
    double inf_on_ball(double lambda, std::size_t samples = 20000) const;

    /// Scale bookkeeping used by rescale().
    double amplitude() const { return amp_; }
    double spatial_scale() const { return scale_; }
    Coefficient scaled(double amp_factor, double scale_factor) const;
    /// Copy whose nonneg flag is the asserted value instead of the sampled one.
    Coefficient with_nonneg_flag(bool flag) const;

    const nlohmann::json& spec() const { return spec_; }
    std::string hash() const;
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Sampled check of the type invariants (symmetry, sup bound, sign,
    /// support). Returns a description of the first violation, empty if none.
    std::string check_invariants(std::size_t samples = 20000) const;

private:
    void sample_envelopes(std::size_t n);

    std::shared_ptr<const CoefficientFamily> family_;
    ModelParams params_;
    bool symmetrize_ = false;
    double amp_ = 1.0;
    double scale_ = 1.0;
    double inv_scale_ = 1.0;
    double sup_norm_ = 0.0;
    double lower_env_ = 0.0;
    double upper_env_ = 0.0;
    double support_radius_ = std::numeric_limits<double>::infinity();
    bool nonneg_ = true;
    nlohmann::json spec_;
    std::vector<std::string> warnings_;
};

/// b^{(lambda)}(x, z) = lambda^{beta/2 - 1} b(lambda^{-1/2} x, lambda^{-1/2} z).
struct ScaledCoefficient {
    Coefficient base;
    double lambda = 1.0;
    Coefficient scaled;

    double operator()(const Point& x, const Point& z) const { return scaled(x, z); }
    double sup_norm() const { return scaled.sup_norm(); }
};

/// Builds a coefficient from its JSON description
///   {"family": "zero|constant|indicator|product|table", "params": {...},
///    "d": int, "beta": float}
Coefficient make_coefficient(const nlohmann::json& spec, std::size_t envelope_samples = 100000);

/// Same, with (d, beta) supplied separately; fields in `spec` take precedence.
Coefficient make_coefficient(const nlohmann::json& spec, const ModelParams& params,
                             std::size_t envelope_samples = 100000);

ScaledCoefficient rescale(const Coefficient& c, double lambda);

/// Halton point in [0,1)^dims (dims <= 6), index starting at 1.
void halton(std::size_t index, int dims, double* out);

}  // namespace nlhk
