#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmgeo/error.hpp"

namespace oracles {

using pmgeo::AxisSeries;
using pmgeo::DepthMap;
using pmgeo::PointMap;
using pmgeo::ValidMask;

double objective_l1(std::span<const AxisSeries> axes, double a, std::span<const double> b) {
    double sum = 0.0;
    for (size_t k = 0; k < axes.size(); ++k) {
        double bk = b.empty() ? 0.0 : b[k];
        for (size_t i = 0; i < axes[k].src.size(); ++i)
            sum += axes[k].w[i] * std::fabs(a * axes[k].src[i] + bk - axes[k].dst[i]);
    }
    return sum;
}

double scale_only(std::span<const AxisSeries> axes) {
    std::vector<double> breakpoints;
    for (const auto& ax : axes)
        for (size_t i = 0; i < ax.src.size(); ++i)
            if (ax.src[i] != 0.0 && ax.w[i] > 0.0) breakpoints.push_back(ax.dst[i] / ax.src[i]);
    std::sort(breakpoints.begin(), breakpoints.end());
    double best_f = std::numeric_limits<double>::infinity();
    for (double a : breakpoints) best_f = std::min(best_f, objective_l1(axes, a, {}));
    // The minimum can sit on a flat interval between breakpoints; report the
    // smallest minimizer, matching the documented lower-median convention.
    for (double a : breakpoints)
        if (objective_l1(axes, a, {}) <= best_f + 1e-12 * std::max(1.0, best_f)) return a;
    return breakpoints.front();
}

namespace {

double inner_shift(const AxisSeries& ax, double a) {
    std::vector<std::pair<double, double>> tv;
    tv.reserve(ax.src.size());
    double total = 0.0;
    for (size_t i = 0; i < ax.src.size(); ++i) {
        tv.emplace_back(ax.dst[i] - a * ax.src[i], ax.w[i]);
        total += ax.w[i];
    }
    std::stable_sort(tv.begin(), tv.end(),
                     [](const auto& p, const auto& q) { return p.first < q.first; });
    double cum = 0.0;
    for (const auto& [t, w] : tv) {
        cum += w;
        if (cum >= 0.5 * total) return t;
    }
    return tv.back().first;
}

double g_of_a(std::span<const AxisSeries> axes, double a, std::vector<double>* b_out) {
    double g = 0.0;
    for (size_t k = 0; k < axes.size(); ++k) {
        double b = inner_shift(axes[k], a);
        if (b_out) (*b_out)[k] = b;
        for (size_t i = 0; i < axes[k].src.size(); ++i)
            g += axes[k].w[i] * std::fabs(a * axes[k].src[i] + b - axes[k].dst[i]);
    }
    return g;
}

}  // namespace

double scale_shift(std::span<const AxisSeries> axes, std::vector<double>* b_out) {
    const int grid = 240;
    double best_a = 1.0, best_g = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k <= grid; ++k) {
        double a = std::pow(10.0, -3.0 + 6.0 * k / grid);
        double g = g_of_a(axes, a, nullptr);
        if (g < best_g) {
            best_g = g;
            best_a = a;
            best_k = k;
        }
    }
    double lo = std::pow(10.0, -3.0 + 6.0 * std::max(0, best_k - 1) / double(grid));
    double hi = std::pow(10.0, -3.0 + 6.0 * std::min(grid, best_k + 1) / double(grid));
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double g1 = g_of_a(axes, x1, nullptr), g2 = g_of_a(axes, x2, nullptr);
    for (int it = 0; it < 160; ++it) {
        if (g1 <= g2) {
            hi = x2; x2 = x1; g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g_of_a(axes, x1, nullptr);
        } else {
            lo = x1; x1 = x2; g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g_of_a(axes, x2, nullptr);
        }
    }
    double a = 0.5 * (lo + hi);
    if (best_g < g_of_a(axes, a, nullptr)) a = best_a;
    if (b_out) {
        b_out->assign(axes.size(), 0.0);
        g_of_a(axes, a, b_out);
    }
    return a;
}

std::vector<double> shift_only(std::span<const AxisSeries> axes) {
    std::vector<double> shifts(axes.size(), 0.0);
    for (size_t k = 0; k < axes.size(); ++k) {
        const auto& ax = axes[k];
        std::vector<double> candidates;
        for (size_t c = 0; c < ax.src.size(); ++c) candidates.push_back(ax.dst[c] - ax.src[c]);
        std::sort(candidates.begin(), candidates.end());
        auto f_at = [&](double b) {
            double f = 0.0;
            for (size_t i = 0; i < ax.src.size(); ++i)
                f += ax.w[i] * std::fabs(ax.src[i] + b - ax.dst[i]);
            return f;
        };
        double best_f = std::numeric_limits<double>::infinity();
        for (double b : candidates) best_f = std::min(best_f, f_at(b));
        // smallest minimizer (lower-median convention) on flat intervals
        for (double b : candidates)
            if (f_at(b) <= best_f + 1e-12 * std::max(1.0, best_f)) {
                shifts[k] = b;
                break;
            }
    }
    return shifts;
}

void lsq_cramer(std::span<const double> src, std::span<const double> dst, double* a, double* b) {
    double n = double(src.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < src.size(); ++i) {
        sx += src[i];
        sy += dst[i];
        sxx += src[i] * src[i];
        sxy += src[i] * dst[i];
    }
    double det = n * sxx - sx * sx;
    *a = (n * sxy - sx * sy) / det;
    *b = (sxx * sy - sx * sxy) / det;
}

DepthMap poisson_dense(const DepthMap& known, const ValidMask& known_mask,
                       const DepthMap& guide) {
    int w = known.width, h = known.height;
    std::vector<int> unknown_of(size_t(w) * h, -1);
    std::vector<int> pixels;
    for (int i = 0; i < w * h; ++i) {
        if (!known_mask.at(i)) {
            unknown_of[i] = int(pixels.size());
            pixels.push_back(i);
        }
    }
    int n = int(pixels.size());
    DepthMap out = known;
    if (n == 0) return out;

    std::vector<double> A(size_t(n) * n, 0.0), rhs(n, 0.0);
    const int du[4] = {1, -1, 0, 0};
    const int dv[4] = {0, 0, 1, -1};
    for (int k = 0; k < n; ++k) {
        int i = pixels[k];
        int u = i % w, v = i / w;
        double gi = std::log(guide.values[i]);
        for (int d = 0; d < 4; ++d) {
            int uu = u + du[d], vv = v + dv[d];
            if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
            int j = vv * w + uu;
            A[size_t(k) * n + k] += 1.0;
            rhs[k] += gi - std::log(guide.values[j]);
            if (known_mask.at(j))
                rhs[k] += std::log(known.values[j]);
            else
                A[size_t(k) * n + unknown_of[j]] -= 1.0;
        }
    }

    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(A[size_t(r) * n + col]) > std::fabs(A[size_t(piv) * n + col])) piv = r;
        if (A[size_t(piv) * n + col] == 0.0)
            pmgeo::throw_solver("poisson_dense: singular system (free-floating component?)");
        if (piv != col) {
            for (int cc = 0; cc < n; ++cc)
                std::swap(A[size_t(piv) * n + cc], A[size_t(col) * n + cc]);
            std::swap(rhs[piv], rhs[col]);
        }
        double inv = 1.0 / A[size_t(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            double f = A[size_t(r) * n + col] * inv;
            if (f == 0.0) continue;
            for (int cc = col; cc < n; ++cc)
                A[size_t(r) * n + cc] -= f * A[size_t(col) * n + cc];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = rhs[r];
        for (int cc = r + 1; cc < n; ++cc) s -= A[size_t(r) * n + cc] * x[cc];
        x[r] = s / A[size_t(r) * n + r];
    }
    for (int k = 0; k < n; ++k) out.values[pixels[k]] = std::exp(x[k]);
    return out;
}

std::vector<int> region_members(const PointMap& pm, const ValidMask& mask, int center_index,
                                double radius) {
    std::vector<int> members;
    const pmgeo::Vec3& c = pm.points[center_index];
    for (int i = 0; i < pm.size(); ++i) {
        if (!mask.at(i)) continue;
        if ((pm.points[i] - c).norm() <= radius) members.push_back(i);
    }
    return members;
}

}  // namespace oracles
