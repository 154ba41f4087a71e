// SPDX-License-Identifier: Apache-2.0

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "waffle/metrics.hpp"

namespace waffle {
namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex mu;
    return mu;
}

void fft2(std::vector<cd>& data, int n, int sign) {
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_2d(n, n, p, p, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

int signed_freq(int k, int n) { return k < n / 2 ? k : k - n; }

double highpass(double r) {
    if (r <= kPi / 4) return 0.0;
    if (r >= kPi / 2) return 1.0;
    return std::cos(kPi / 2 * std::log2(2 * r / kPi));
}

double lowpass(double r) {
    if (r <= kPi / 4) return 1.0;
    if (r >= kPi / 2) return 0.0;
    return std::cos(kPi / 2 * std::log2(4 * r / kPi));
}

double angular_norm(int orientations) {
    const int order = orientations - 1;
    return std::pow(2.0, order) * std::tgamma(order + 1.0) /
           std::sqrt(orientations * std::tgamma(2.0 * order + 1.0));
}

// One-sided angular window: doubled on the half plane facing `center`,
// zero on the other half, so the band is analytic.
double angular(double theta, double center, int orientations, double norm) {
    double d = std::remainder(theta - center, 2 * kPi);
    if (std::abs(d) >= kPi / 2) return 0.0;
    return 2 * norm * std::pow(std::cos(d), orientations - 1);
}

struct Polar {
    std::vector<double> r;
    std::vector<double> theta;
};

Polar polar_grid(int n) {
    Polar g;
    g.r.resize(static_cast<std::size_t>(n) * n);
    g.theta.resize(g.r.size());
    for (int y = 0; y < n; ++y) {
        const double wy = 2 * kPi * signed_freq(y, n) / n;
        for (int x = 0; x < n; ++x) {
            const double wx = 2 * kPi * signed_freq(x, n) / n;
            const auto i = static_cast<std::size_t>(y) * n + x;
            g.r[i] = std::hypot(wx, wy);
            g.theta[i] = std::atan2(wy, wx);
        }
    }
    return g;
}

// Keeps the central half of the spectrum: the DFT of the image subsampled
// by two once everything above pi/2 has been removed.
std::vector<cd> crop_half(const std::vector<cd>& spec, int n) {
    const int m = n / 2;
    std::vector<cd> out(static_cast<std::size_t>(m) * m);
    for (int y = 0; y < m; ++y) {
        const int sy = (signed_freq(y, m) + n) % n;
        for (int x = 0; x < m; ++x) {
            const int sx = (signed_freq(x, m) + n) % n;
            out[static_cast<std::size_t>(y) * m + x] = spec[static_cast<std::size_t>(sy) * n + sx] / 4.0;
        }
    }
    return out;
}

double mean_square(const GrayImage& g) {
    double s = 0;
    for (double v : g.values) s += v * v;
    return g.values.empty() ? 0.0 : s / static_cast<double>(g.values.size());
}

// Sums over every w x w window that fits; result is (n-w+1)^2, row-major.
std::vector<double> box_sums(const std::vector<double>& v, int n, int w) {
    const int m = n - w + 1;
    std::vector<double> rows(static_cast<std::size_t>(n) * m);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < m; ++x) {
            double s = 0;
            for (int t = 0; t < w; ++t) s += v[static_cast<std::size_t>(y) * n + x + t];
            rows[static_cast<std::size_t>(y) * m + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(m) * m);
    for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
            double s = 0;
            for (int t = 0; t < w; ++t) s += rows[static_cast<std::size_t>(y + t) * m + x];
            out[static_cast<std::size_t>(y) * m + x] = s;
        }
    }
    return out;
}

}  // namespace

void CwSsimParams::validate() const {
    if (levels < 1 || orientations < 1 || window < 1 || size < 1) {
        throw std::invalid_argument("cw-ssim: levels, orientations, window and size must be positive");
    }
    if (k < 0 || !std::isfinite(k)) throw std::invalid_argument("cw-ssim: k must be finite and non-negative");
    if (size % (1 << levels) != 0) {
        throw std::invalid_argument("cw-ssim: size must be divisible by 2^levels");
    }
    if ((size >> (levels - 1)) < window) {
        throw std::invalid_argument("cw-ssim: coarsest band is smaller than the window");
    }
}

std::vector<Subband> steerable_pyramid(const GrayImage& image, int levels, int orientations) {
    const int n = image.width;
    if (n <= 0 || image.height != n) throw std::invalid_argument("steerable_pyramid: square image required");
    if (n % (1 << levels) != 0) throw std::invalid_argument("steerable_pyramid: size must be divisible by 2^levels");

    std::vector<cd> spec(image.values.begin(), image.values.end());
    fft2(spec, n, FFTW_FORWARD);
    {
        const Polar g = polar_grid(n);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= lowpass(g.r[i] / 2);
    }

    const double norm = angular_norm(orientations);
    std::vector<Subband> bands;
    int size = n;
    for (int level = 0; level < levels; ++level) {
        const Polar g = polar_grid(size);
        for (int o = 0; o < orientations; ++o) {
            const double center = kPi * o / orientations;
            Subband b;
            b.size = size;
            b.coeffs.resize(spec.size());
            for (std::size_t i = 0; i < spec.size(); ++i) {
                b.coeffs[i] = spec[i] * (highpass(g.r[i]) * angular(g.theta[i], center, orientations, norm));
            }
            fft2(b.coeffs, size, FFTW_BACKWARD);
            const double scale = 1.0 / (static_cast<double>(size) * size);
            for (auto& c : b.coeffs) c *= scale;
            bands.push_back(std::move(b));
        }
        if (level + 1 < levels) {
            for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= lowpass(g.r[i]);
            spec = crop_half(spec, size);
            size /= 2;
        }
    }
    return bands;
}

double band_similarity(const Subband& a, const Subband& b, int window, double k, double floor) {
    if (a.size != b.size) throw std::invalid_argument("band_similarity: band sizes differ");
    const int n = a.size;
    if (window > n) throw std::invalid_argument("band_similarity: window larger than band");
    const std::size_t len = a.coeffs.size();
    std::vector<double> cross_re(len), cross_im(len), ea(len), eb(len);
    for (std::size_t i = 0; i < len; ++i) {
        // Spelled out so that a == b gives cross == energy bit for bit.
        const double ar = a.coeffs[i].real(), ai = a.coeffs[i].imag();
        const double br = b.coeffs[i].real(), bi = b.coeffs[i].imag();
        cross_re[i] = ar * br + ai * bi;
        cross_im[i] = ai * br - ar * bi;
        ea[i] = ar * ar + ai * ai;
        eb[i] = br * br + bi * bi;
    }
    const auto sre = box_sums(cross_re, n, window);
    const auto sim = box_sums(cross_im, n, window);
    const auto sa = box_sums(ea, n, window);
    const auto sb = box_sums(eb, n, window);
    double total = 0;
    for (std::size_t i = 0; i < sre.size(); ++i) {
        const double den = sa[i] + sb[i] + k;
        if (k == 0 && den <= floor) {
            total += 1.0;
            continue;
        }
        total += (2 * std::hypot(sre[i], sim[i]) + k) / den;
    }
    return total / static_cast<double>(sre.size());
}

double cw_ssim(const GrayImage& a, const GrayImage& b, const CwSsimParams& params) {
    params.validate();
    if (a.width <= 0 || a.height <= 0 || b.width <= 0 || b.height <= 0) {
        throw DegenerateImage("cw-ssim: image has zero area");
    }
    const GrayImage ra = resize_area(a, params.size, params.size);
    const GrayImage rb = resize_area(b, params.size, params.size);
    // Windows whose energy is at rounding-noise level relative to the
    // images count as matching; otherwise two flat images score at random.
    const double floor = static_cast<double>(params.window) * params.window * 1e-18 * (mean_square(ra) + mean_square(rb));
    const auto pa = steerable_pyramid(ra, params.levels, params.orientations);
    const auto pb = steerable_pyramid(rb, params.levels, params.orientations);
    double total = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) total += band_similarity(pa[i], pb[i], params.window, params.k, floor);
    return total / static_cast<double>(pa.size());
}

double cw_ssim(const Image& a, const Image& b, const CwSsimParams& params) {
    if (a.empty() || b.empty()) throw DegenerateImage("cw-ssim: image has zero area");
    return cw_ssim(to_grayscale(a), to_grayscale(b), params);
}

}  // namespace waffle
