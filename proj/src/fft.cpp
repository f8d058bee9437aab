#include "nlhk/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace nlhk {

namespace {
std::mutex g_plan_mutex;
}

RealFFT::RealFFT(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 2) throw std::invalid_argument("RealFFT: one or two axes");
    real_size_ = 1;
    for (int n : shape_) {
        if (n < 2) throw std::invalid_argument("RealFFT: axis too short");
        real_size_ *= n;
    }
    complex_size_ = real_size_ / shape_.back() * (shape_.back() / 2 + 1);
    std::vector<double> rbuf(real_size_);
    std::vector<cplx> cbuf(complex_size_);
    auto* cb = reinterpret_cast<fftw_complex*>(cbuf.data());
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (shape_.size() == 1) {
        fwd_ = fftw_plan_dft_r2c_1d(shape_[0], rbuf.data(), cb, flags);
        inv_ = fftw_plan_dft_c2r_1d(shape_[0], cb, rbuf.data(), flags | FFTW_DESTROY_INPUT);
    } else {
        fwd_ = fftw_plan_dft_r2c_2d(shape_[0], shape_[1], rbuf.data(), cb, flags);
        inv_ = fftw_plan_dft_c2r_2d(shape_[0], shape_[1], cb, rbuf.data(), flags | FFTW_DESTROY_INPUT);
    }
    if (!fwd_ || !inv_) throw std::runtime_error("RealFFT: planning failed");
}

RealFFT::~RealFFT() {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (inv_) fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

void RealFFT::forward(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void RealFFT::inverse(const cplx* in, double* out) const {
    // c2r destroys its input
    std::vector<cplx> tmp(in, in + complex_size_);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_), reinterpret_cast<fftw_complex*>(tmp.data()), out);
    const double s = 1.0 / real_size_;
    for (int i = 0; i < real_size_; ++i) out[i] *= s;
}

double RealFFT::frequency(int axis, int k, double h) const {
    const int n = shape_[axis];
    const int kk = (k <= n / 2) ? k : k - n;
    return 2.0 * M_PI * kk / (n * h);
}

int good_fft_size(int n) {
    int best = 1;
    while (best < n) best *= 2;
    for (int p3 = 1; p3 < best; p3 *= 3)
        for (int p = p3; p < best; p *= 2)
            if (p >= n) {
                best = std::min(best, p);
                break;
            }
    return best;
}

}  // namespace nlhk
