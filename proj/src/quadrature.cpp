#include "nlhk/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace nlhk {

namespace {

// Golub-Welsch for the Jacobi weight (1-x)^a (1+x)^b on [-1, 1].
QuadRule golub_welsch_jacobi(int n, double a, double b) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    const double ab = a + b;
    for (int k = 0; k < n; ++k) {
        const double two_k_ab = 2.0 * k + ab;
        double diag;
        if (k == 0)
            diag = (b - a) / (ab + 2.0);
        else
            diag = (b * b - a * a) / (two_k_ab * (two_k_ab + 2.0));
        J(k, k) = diag;
        if (k + 1 < n) {
            const double m = k + 1.0;
            const double t = 2.0 * m + ab;
            const double num = 4.0 * m * (m + a) * (m + b) * (m + ab);
            const double den = t * t * (t + 1.0) * (t - 1.0);
            const double off = std::sqrt(num / den);
            J(k, k + 1) = off;
            J(k + 1, k) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) +
                                std::lgamma(b + 1.0) - std::lgamma(ab + 2.0));
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        r.nodes[k] = es.eigenvalues()(k);
        const double v = es.eigenvectors()(0, k);
        r.weights[k] = mu0 * v * v;
    }
    return r;
}

std::mutex g_cache_mutex;
std::map<std::pair<int, double>, QuadRule> g_jacobi_cache;
std::map<int, QuadRule> g_legendre_cache;

const QuadRule& reference_legendre(int n) {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    auto it = g_legendre_cache.find(n);
    if (it == g_legendre_cache.end())
        it = g_legendre_cache.emplace(n, golub_welsch_jacobi(n, 0.0, 0.0)).first;
    return it->second;
}

}  // namespace

QuadRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    const QuadRule& ref = reference_legendre(n);
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int k = 0; k < n; ++k) {
        r.nodes[k] = mid + half * ref.nodes[k];
        r.weights[k] = half * ref.weights[k];
    }
    return r;
}

QuadRule gauss_jacobi_unit(int n, double alpha) {
    if (n < 1) throw std::invalid_argument("gauss_jacobi_unit: n must be positive");
    if (!(alpha > -1.0)) throw std::invalid_argument("gauss_jacobi_unit: alpha must exceed -1");
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    auto key = std::make_pair(n, alpha);
    auto it = g_jacobi_cache.find(key);
    if (it != g_jacobi_cache.end()) return it->second;
    // weight u^alpha on [0,1] corresponds to (1+x)^alpha on [-1,1] with u = (x+1)/2
    QuadRule ref = golub_welsch_jacobi(n, 0.0, alpha);
    const double scale = std::pow(2.0, -(alpha + 1.0));
    for (int k = 0; k < n; ++k) {
        ref.nodes[k] = 0.5 * (ref.nodes[k] + 1.0);
        ref.weights[k] *= scale;
    }
    return g_jacobi_cache.emplace(key, std::move(ref)).first->second;
}

QuadRule composite_gauss(const std::vector<double>& breaks, int points_per_panel, double max_len,
                         double ratio) {
    if (breaks.size() < 2) throw std::invalid_argument("composite_gauss: need two breakpoints");
    const QuadRule& ref = reference_legendre(points_per_panel);
    QuadRule out;
    auto add_panel = [&](double a, double b) {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int k = 0; k < points_per_panel; ++k) {
            out.nodes.push_back(mid + half * ref.nodes[k]);
            out.weights.push_back(half * ref.weights[k]);
        }
    };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        double a = breaks[i];
        const double b = breaks[i + 1];
        if (!(b > a)) continue;
        while (a < b) {
            double len = b - a;
            if (max_len > 0.0) len = std::min(len, max_len);
            if (a > 0.0 && ratio > 0.0) len = std::min(len, std::max(ratio * a, 1e-300));
            double next = a + len;
            // avoid a sliver at the end of the interval
            if (b - next < 0.25 * len) next = b;
            add_panel(a, next);
            a = next;
        }
    }
    return out;
}

}  // namespace nlhk
