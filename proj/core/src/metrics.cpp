#include "mixnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mixnet {

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
    if (!a.same_shape(b))
        throw ShapeError("psnr: shapes " + a.shape().str() + " and " + b.shape().str() +
                         " differ");
    const i64 n = a.numel();
    double mse = 0.0;
    for (i64 i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWindow * kWindow);
        const int half = kWindow / 2;
        double sum = 0.0;
        for (int y = 0; y < kWindow; ++y)
            for (int x = 0; x < kWindow; ++x) {
                const double dy = y - half, dx = x - half;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                w[y * kWindow + x] = v;
                sum += v;
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

} // namespace

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b))
        throw ShapeError("ssim: shapes " + a.shape().str() + " and " + b.shape().str() +
                         " differ");
    const Shape& s = a.shape();
    if (s.h < kWindow || s.w < kWindow)
        throw ShapeError("ssim requires extents >= " + std::to_string(kWindow) + ", got " +
                         std::to_string(s.w) + "x" + std::to_string(s.h));
    const std::vector<double>& win = gaussian_window();
    const double c1 = kK1 * kK1;
    const double c2 = kK2 * kK2;

    const i64 out_h = s.h - kWindow + 1;
    const i64 out_w = s.w - kWindow + 1;
    double total = 0.0;
    i64 count = 0;
    const i64 plane = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c) {
            const T* pa = a.data() + (n * s.c + c) * plane;
            const T* pb = b.data() + (n * s.c + c) * plane;
            for (i64 y = 0; y < out_h; ++y)
                for (i64 x = 0; x < out_w; ++x) {
                    double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                    for (int wy = 0; wy < kWindow; ++wy) {
                        const T* ra = pa + (y + wy) * s.w + x;
                        const T* rb = pb + (y + wy) * s.w + x;
                        const double* wr = win.data() + wy * kWindow;
                        for (int wx = 0; wx < kWindow; ++wx) {
                            const double va = static_cast<double>(ra[wx]);
                            const double vb = static_cast<double>(rb[wx]);
                            const double wv = wr[wx];
                            mx += wv * va;
                            my += wv * vb;
                            mxx += wv * va * va;
                            myy += wv * vb * vb;
                            mxy += wv * va * vb;
                        }
                    }
                    const double var_x = mxx - mx * mx;
                    const double var_y = myy - my * my;
                    const double cov = mxy - mx * my;
                    const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
                    const double den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
                    total += std::clamp(num / den, -1.0, 1.0);
                    ++count;
                }
        }
    return total / static_cast<double>(count);
}

void MetricReport::add(MetricEntry e) {
    per_image.push_back(std::move(e));
    double ps = 0.0, ss = 0.0;
    for (const auto& m : per_image) {
        ps += m.psnr;
        ss += m.ssim;
    }
    mean_psnr = ps / static_cast<double>(per_image.size());
    mean_ssim = ss / static_cast<double>(per_image.size());
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    for (const auto& m : per_image)
        os << m.id << '\t' << m.psnr << '\t' << m.ssim << '\n';
    os << "MEAN" << '\t' << mean_psnr << '\t' << mean_ssim << '\n';
    return os.str();
}

void MetricReport::write(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open report file " + path);
    os << to_table();
    if (!os) throw IoError("write failure on report file " + path);
}

template double psnr<float>(const Tensor<float>&, const Tensor<float>&, double);
template double psnr<double>(const Tensor<double>&, const Tensor<double>&, double);
template double ssim<float>(const Tensor<float>&, const Tensor<float>&);
template double ssim<double>(const Tensor<double>&, const Tensor<double>&);

} // namespace mixnet
