#pragma once

// Correlation and significance helpers. Everything returns optional where
// the quantity is undefined (tiny n, zero variance) instead of NaN.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "convrank/common.hpp"

namespace convrank {

inline std::optional<double> pearson_r(const std::vector<double>& x,
                                       const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("pearson_r: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// 1-based ranks; ties share the average of the ranks they span.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> spearman_rho(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("spearman_rho: length mismatch");
    if (x.size() < 2) return std::nullopt;
    return pearson_r(average_ranks(x), average_ranks(y));
}

namespace detail {

// Regularized incomplete beta I_x(a, b) by continued fraction (Lentz).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_two_tailed = 1.0;
};

// One-sample two-tailed Student t-test of mean(x) against mu0.
inline std::optional<TTestResult> t_test_one_sample(const std::vector<double>& x, double mu0) {
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    if (var == 0.0) return std::nullopt;
    TTestResult r;
    r.df = static_cast<double>(n - 1);
    r.t = (mean - mu0) / std::sqrt(var / static_cast<double>(n));
    r.p_two_tailed = detail::incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

struct WilcoxonResult {
    double w_plus = 0.0;
    std::size_t n_nonzero = 0;
    double z = 0.0;
    double p_two_tailed = 1.0;
};

// Wilcoxon signed-rank, normal approximation with tie correction and
// continuity correction. Zero differences drop out.
inline std::optional<WilcoxonResult> wilcoxon_signed_rank(const std::vector<double>& x,
                                                          const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("wilcoxon: length mismatch");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t n = diffs.size();
    if (n < 2) return std::nullopt;
    std::vector<double> abs_d(n);
    for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::fabs(diffs[i]);
    const std::vector<double> ranks = average_ranks(abs_d);

    WilcoxonResult r;
    r.n_nonzero = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (diffs[i] > 0.0) r.w_plus += ranks[i];
    }
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> sorted = abs_d;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return std::nullopt;
    const double delta = r.w_plus - mean;
    const double cc = delta > 0.0 ? -0.5 : (delta < 0.0 ? 0.5 : 0.0);
    r.z = (delta + cc) / std::sqrt(var);
    r.p_two_tailed = 2.0 * (1.0 - detail::normal_cdf(std::fabs(r.z)));
    if (r.p_two_tailed > 1.0) r.p_two_tailed = 1.0;
    return r;
}

}  // namespace convrank
