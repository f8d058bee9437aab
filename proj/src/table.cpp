#include "nlhk/table.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nlhk {

static_assert(std::endian::native == std::endian::little, "NLHK IO assumes a little-endian host");

int SpaceTimeGrid::index_of(double x, double tol) const {
    const double u = (x + L) / dx;
    const double r = std::round(u);
    if (std::abs(u - r) > tol * std::max(1.0, std::abs(u)) || r < 0 || r > n - 1) return -1;
    return static_cast<int>(r);
}

int SpaceTimeGrid::time_index(double t, double rel_tol) const {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= rel_tol * std::max(t, times[k])) return static_cast<int>(k);
    return -1;
}

void SpaceTimeGrid::validate() const {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("grid: bad dimension");
    if (times.empty() || !(times[0] > 0.0)) throw std::invalid_argument("grid: first time must be positive");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw std::invalid_argument("grid: times must increase");
    if (!(dx > 0.0) || n < 3 || n % 2 == 0) throw std::invalid_argument("grid: bad lattice");
    if (std::abs((n - 1) * 0.5 * dx - L) > 1e-9 * L) throw std::invalid_argument("grid: L inconsistent with n and dx");
}

SpaceTimeGrid make_grid(int d, double T, int K, double dx, double L) {
    if (!(T > 0.0) || K < 1 || !(dx > 0.0) || !(L > 0.0)) throw std::invalid_argument("make_grid: bad parameters");
    SpaceTimeGrid g;
    g.d = d;
    for (int k = 1; k <= K; ++k) g.times.push_back(T * k / K);
    g.dx = dx;
    const int m = static_cast<int>(std::ceil(L / dx - 1e-9));
    g.n = 2 * m + 1;
    g.L = m * dx;
    g.validate();
    return g;
}

KernelTable::KernelTable(SpaceTimeGrid g, bool translation_invariant, double b)
    : grid(std::move(g)), ti(translation_invariant), beta(b) {
    if (!ti && grid.d != 1) throw std::invalid_argument("KernelTable: x-dependent tables need d = 1");
    values.assign(grid.times.size() * slice_size(), 0.0);
}

std::size_t KernelTable::slice_size() const {
    const std::size_t n = grid.n;
    if (ti) return grid.d == 1 ? n : n * n;
    return n * n;
}

namespace {

// linear interpolation weights on the lattice; false if outside
bool locate(const SpaceTimeGrid& g, double x, int& i, double& f) {
    const double u = (x + g.L) / g.dx;
    if (u < 0.0 || u > g.n - 1) return false;
    i = std::min(static_cast<int>(std::floor(u)), g.n - 2);
    f = u - i;
    return true;
}

}  // namespace

double KernelTable::at(std::size_t k, const Point& x, const Point& y) const {
    const double* s = slice(k);
    const int n = grid.n;
    if (ti) {
        const Point u = x - y;
        int i0, i1 = 0;
        double f0, f1 = 0.0;
        if (!locate(grid, u[0], i0, f0)) return 0.0;
        if (grid.d == 1) return (1.0 - f0) * s[i0] + f0 * s[i0 + 1];
        if (!locate(grid, u[1], i1, f1)) return 0.0;
        auto v = [&](int a, int b) { return s[static_cast<std::size_t>(a) * n + b]; };
        return (1 - f0) * (1 - f1) * v(i0, i1) + f0 * (1 - f1) * v(i0 + 1, i1) + (1 - f0) * f1 * v(i0, i1 + 1) +
               f0 * f1 * v(i0 + 1, i1 + 1);
    }
    int ix, iy;
    double fx, fy;
    if (!locate(grid, x[0], ix, fx) || !locate(grid, y[0], iy, fy)) return 0.0;
    auto v = [&](int a, int b) { return s[static_cast<std::size_t>(a) * n + b]; };
    return (1 - fx) * (1 - fy) * v(ix, iy) + fx * (1 - fy) * v(ix + 1, iy) + (1 - fx) * fy * v(ix, iy + 1) +
           fx * fy * v(ix + 1, iy + 1);
}

double KernelTable::sup_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double KernelTable::min_value() const {
    double m = values.empty() ? 0.0 : values[0];
    for (double v : values) m = std::min(m, v);
    return m;
}

namespace {

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("NLHK: truncated file");
    return v;
}

}  // namespace

void write_nlhk(const std::string& path, const KernelTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write("NLHK", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.grid.d));
    put<double>(out, t.beta);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.grid.times.size()));
    for (double s : t.grid.times) put<double>(out, s);
    put<double>(out, t.grid.dx);
    put<double>(out, t.grid.L);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.grid.n));
    put<std::uint8_t>(out, t.ti ? 1 : 0);
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

KernelTable read_nlhk(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NLHK", 4) != 0) throw std::runtime_error("NLHK: bad magic");
    if (get<std::uint32_t>(in) != 1) throw std::runtime_error("NLHK: unsupported version");
    SpaceTimeGrid g;
    g.d = static_cast<int>(get<std::uint32_t>(in));
    const double beta = get<double>(in);
    const std::uint32_t K = get<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < K; ++k) g.times.push_back(get<double>(in));
    g.dx = get<double>(in);
    g.L = get<double>(in);
    g.n = static_cast<int>(get<std::uint32_t>(in));
    const bool ti = get<std::uint8_t>(in) != 0;
    g.validate();
    KernelTable t(g, ti, beta);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("NLHK: truncated values");
    return t;
}

void write_csv(const std::string& path, const KernelTable& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.precision(17);
    const int d = t.grid.d;
    const int n = t.grid.n;
    out << "t";
    for (int a = 0; a < d; ++a) out << ",x" << a + 1;
    for (int a = 0; a < d; ++a) out << ",y" << a + 1;
    out << ",q\n";
    for (std::size_t k = 0; k < t.n_times(); ++k) {
        const double* s = t.slice(k);
        const double tk = t.grid.times[k];
        if (t.ti && d == 1) {
            for (int j = 0; j < n; ++j) out << tk << ',' << t.grid.coord(j) << ",0," << s[j] << '\n';
        } else if (t.ti) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    out << tk << ',' << t.grid.coord(i) << ',' << t.grid.coord(j) << ",0,0," << s[i * n + j] << '\n';
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    out << tk << ',' << t.grid.coord(i) << ',' << t.grid.coord(j) << ',' << s[i * n + j] << '\n';
        }
    }
}

}  // namespace nlhk
