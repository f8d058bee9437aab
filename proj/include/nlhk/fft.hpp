#pragma once

#include <complex>
#include <vector>

namespace nlhk {

using cplx = std::complex<double>;

/// Real-to-complex transform of fixed shape (1 or 2 axes), backed by FFTW.
/// Plans are created under a lock; execution is thread-safe.
class RealFFT {
public:
    explicit RealFFT(std::vector<int> shape);
    ~RealFFT();
    RealFFT(const RealFFT&) = delete;
    RealFFT& operator=(const RealFFT&) = delete;

    int real_size() const { return real_size_; }
    int complex_size() const { return complex_size_; }
    const std::vector<int>& shape() const { return shape_; }

    void forward(const double* in, cplx* out) const;
    /// Normalized inverse: inverse(forward(x)) == x.
    void inverse(const cplx* in, double* out) const;

    /// Angular frequency of complex index k along axis a for lattice spacing h.
    double frequency(int axis, int k, double h) const;

private:
    std::vector<int> shape_;
    int real_size_ = 0;
    int complex_size_ = 0;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
};

/// Smallest 2^a 3^b >= n.
int good_fft_size(int n);

}  // namespace nlhk
