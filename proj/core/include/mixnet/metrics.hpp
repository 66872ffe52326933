#pragma once

#include <string>
#include <vector>

#include "mixnet/tensor.hpp"

namespace mixnet {

// 10*log10(peak^2 / MSE) over all elements, capped at 100 dB for identical
// images (zero MSE).
inline constexpr double kPsnrCap = 100.0;

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

// Single-scale SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
// dynamic range 1.0; per channel then averaged over channels and positions.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

struct MetricEntry {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricEntry> per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    void add(MetricEntry e);

    // UTF-8 table: `id<TAB>psnr<TAB>ssim`, final line `MEAN<TAB>...`.
    void write(const std::string& path) const;
    std::string to_table() const;
};

} // namespace mixnet
