#pragma once

#include "nlhk/params.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace nlhk {

/// Time nodes in (0, T] and a uniform lattice {-L + j dx : j = 0..n-1}^d
/// with L = (n-1)/2 * dx.
struct SpaceTimeGrid {
    int d = 1;
    std::vector<double> times;
    double dx = 0.0;
    double L = 0.0;
    int n = 0;

    double T() const { return times.empty() ? 0.0 : times.back(); }
    double coord(int j) const { return -L + j * dx; }
    /// Lattice index of coordinate x, or -1 if x is not a node (within tol).
    int index_of(double x, double tol = 1e-9) const;
    int time_index(double t, double rel_tol = 1e-9) const;
    void validate() const;
};

/// Uniform time nodes t_k = k T / K; L is rounded up to a multiple of dx.
SpaceTimeGrid make_grid(int d, double T, int K, double dx, double L);

/// q on a grid. Translation-invariant tables store q(t, u) for the offset
/// u = x - y on the lattice (n^d values per time); otherwise d = 1 and values
/// are q(t, x_i, y_j) with i major (n^2 values per time).
struct KernelTable {
    SpaceTimeGrid grid;
    bool ti = true;
    double beta = 1.0;
    std::vector<double> values;
    nlohmann::json meta = nlohmann::json::object();

    KernelTable() = default;
    KernelTable(SpaceTimeGrid g, bool translation_invariant, double beta);

    std::size_t slice_size() const;
    std::size_t n_times() const { return grid.times.size(); }
    double* slice(std::size_t k) { return values.data() + k * slice_size(); }
    const double* slice(std::size_t k) const { return values.data() + k * slice_size(); }

    /// q(t_k, x, y) with multilinear interpolation in space; zero off the lattice.
    double at(std::size_t k, const Point& x, const Point& y) const;

    double sup_abs() const;
    double min_value() const;
};

/// Bit-exact NLHK container (see README for the layout).
void write_nlhk(const std::string& path, const KernelTable& t);
KernelTable read_nlhk(const std::string& path);

/// Columns t, x..., y..., q. Translation-invariant tables are written with y = 0.
void write_csv(const std::string& path, const KernelTable& t);

}  // namespace nlhk
