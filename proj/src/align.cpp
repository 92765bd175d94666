#include "pmgeo/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pmgeo/random.hpp"

namespace pmgeo {

namespace {

void validate_axes(std::span<const AxisSeries> axes) {
    if (axes.empty()) throw_data("alignment: no axes");
    size_t n = axes[0].src.size();
    if (n == 0) throw_data("alignment: empty input");
    double total_w = 0.0;
    for (const auto& ax : axes) {
        if (ax.src.size() != n || ax.dst.size() != n || ax.w.size() != n)
            throw_data("alignment: array length mismatch");
        for (size_t i = 0; i < n; ++i) {
            if (!(ax.w[i] >= 0.0) || !std::isfinite(ax.w[i]))
                throw_data("alignment: weights must be finite and nonnegative");
            total_w += ax.w[i];
        }
    }
    if (!(total_w > 0.0)) throw_data("alignment: total weight must be positive");
}

// Objective sum w |a*src + b - dst| over all axes, index order, pairwise.
double recompute_objective(std::span<const AxisSeries> axes, double a,
                           std::span<const double> b) {
    std::vector<double> terms;
    for (size_t k = 0; k < axes.size(); ++k) {
        const auto& ax = axes[k];
        for (size_t i = 0; i < ax.src.size(); ++i)
            terms.push_back(ax.w[i] * std::fabs(a * ax.src[i] + b[k] - ax.dst[i]));
    }
    return pairwise_sum(terms);
}

struct MedianScratch {
    std::vector<int> idx;
    std::vector<double> t;
};

// Lower weighted median element of `values` (ties broken by index).
// Returns the element index; cumulative weight is accumulated in sorted
// (value, index) order, so the result is platform-independent.
int weighted_median_element(std::span<const double> values, std::span<const double> weights,
                            MedianScratch& s) {
    size_t n = values.size();
    s.idx.resize(n);
    std::iota(s.idx.begin(), s.idx.end(), 0);
    std::sort(s.idx.begin(), s.idx.end(), [&](int i, int j) {
        if (values[i] != values[j]) return values[i] < values[j];
        return i < j;
    });
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += weights[i];
    double half = 0.5 * total;
    double cum = 0.0;
    for (size_t k = 0; k < n; ++k) {
        cum += weights[s.idx[k]];
        if (cum >= half) return s.idx[k];
    }
    return s.idx[n - 1];
}

struct AxisEval {
    double b = 0.0;           // optimal shift at a
    double g = 0.0;           // axis objective at (a, b)
    double slope_left = 0.0;  // one-sided derivatives of min_b sum w|a*src+b-dst|
    double slope_right = 0.0;
};

// One-sided view of the axis objective at a. Under a -> a + dir*eps the
// residuals t_i = dst_i - a*src_i reorder by (t_i, then -dir*src_i); the
// derivative is sum_i w_i * sign_i * (src_m - src_i) with the weighted
// median element m and signs taken in that perturbed order. Evaluating both
// sides is exact even at crossing points, where a single interval formula is
// not a valid subgradient.
struct SidedEval {
    double slope = 0.0;
    double b = 0.0;
    double g = 0.0;
};

SidedEval one_sided(const AxisSeries& ax, const std::vector<double>& t, int dir,
                    MedianScratch& s) {
    size_t n = t.size();
    s.idx.resize(n);
    std::iota(s.idx.begin(), s.idx.end(), 0);
    std::sort(s.idx.begin(), s.idx.end(), [&](int i, int j) {
        if (t[i] != t[j]) return t[i] < t[j];
        double xi = dir * ax.src[i], xj = dir * ax.src[j];
        if (xi != xj) return xi > xj;  // larger dir*src sinks under a + dir*eps
        return i < j;
    });
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += ax.w[i];
    double half = 0.5 * total;
    double cum = 0.0;
    size_t m_pos = n - 1;
    for (size_t k = 0; k < n; ++k) {
        cum += ax.w[s.idx[k]];
        if (cum >= half) {
            m_pos = k;
            break;
        }
    }
    int m = s.idx[m_pos];
    double xm = ax.src[m];
    SidedEval out;
    out.b = t[m];
    for (size_t k = 0; k < n; ++k) {
        int i = s.idx[k];
        out.g += ax.w[i] * std::fabs(t[i] - t[m]);
        if (k == m_pos) continue;
        double term = ax.w[i] * (xm - ax.src[i]);
        out.slope += (k > m_pos) ? term : -term;
    }
    return out;
}

AxisEval eval_axis(const AxisSeries& ax, double a, MedianScratch& s) {
    size_t n = ax.src.size();
    s.t.resize(n);
    for (size_t i = 0; i < n; ++i) s.t[i] = ax.dst[i] - a * ax.src[i];
    SidedEval right = one_sided(ax, s.t, +1, s);
    SidedEval left = one_sided(ax, s.t, -1, s);
    AxisEval out;
    out.b = right.b;
    out.g = right.g;
    out.slope_right = right.slope;
    out.slope_left = left.slope;
    return out;
}

struct GEval {
    double g = 0.0;
    double slope_left = 0.0;
    double slope_right = 0.0;
    std::array<double, 3> b{0.0, 0.0, 0.0};
};

GEval eval_g(std::span<const AxisSeries> axes, double a, std::vector<MedianScratch>& scratch) {
    GEval out;
    for (size_t k = 0; k < axes.size(); ++k) {
        AxisEval e = eval_axis(axes[k], a, scratch[k]);
        out.g += e.g;
        out.slope_left += e.slope_left;
        out.slope_right += e.slope_right;
        out.b[k] = e.b;
    }
    return out;
}

bool axis_degenerate(const AxisSeries& ax) {
    bool seen = false;
    double first = 0.0;
    for (size_t i = 0; i < ax.src.size(); ++i) {
        if (!(ax.w[i] > 0.0)) continue;
        if (!seen) {
            first = ax.src[i];
            seen = true;
        } else if (ax.src[i] != first) {
            return false;
        }
    }
    return true;
}

AffineAlignment finish_scale_shift(std::span<const AxisSeries> axes, double a,
                                   std::vector<MedianScratch>& scratch, bool clamped) {
    GEval e = eval_g(axes, a, scratch);
    AffineAlignment out;
    out.scale = a;
    out.shift = e.b;
    out.shift_dims = static_cast<int>(axes.size());
    out.scale_clamped = clamped;
    std::array<double, 3> b = e.b;
    out.objective = recompute_objective(axes, a, std::span<const double>(b.data(), axes.size()));
    return out;
}

}  // namespace

double weighted_median_lower(std::span<const double> values, std::span<const double> weights) {
    if (values.empty() || values.size() != weights.size())
        throw_data("weighted_median: bad input sizes");
    MedianScratch s;
    return values[weighted_median_element(values, weights, s)];
}

AffineAlignment solve_scale_l1(std::span<const AxisSeries> axes) {
    validate_axes(axes);

    // Breakpoints dst/src with mass w*|src|; the minimizer of the convex
    // piecewise-linear objective is their lower weighted median.
    std::vector<double> bp, bw;
    for (const auto& ax : axes) {
        for (size_t i = 0; i < ax.src.size(); ++i) {
            if (ax.src[i] != 0.0 && ax.w[i] > 0.0) {
                bp.push_back(ax.dst[i] / ax.src[i]);
                bw.push_back(ax.w[i] * std::fabs(ax.src[i]));
            }
        }
    }
    if (bp.empty())
        throw_solver("solve_scale_l1: all source coordinates are zero on the support");

    MedianScratch s;
    double a = bp[weighted_median_element(bp, bw, s)];

    bool clamped = false;
    if (!(a > 0.0)) {
        double smallest_pos = std::numeric_limits<double>::infinity();
        for (double c : bp)
            if (c > 0.0) smallest_pos = std::min(smallest_pos, c);
        if (!std::isfinite(smallest_pos))
            throw_solver("solve_scale_l1: optimal scale nonpositive and no positive breakpoint");
        a = smallest_pos;
        clamped = true;
    }

    AffineAlignment out;
    out.scale = a;
    out.shift_dims = 0;
    out.scale_clamped = clamped;
    std::array<double, 3> zero{0.0, 0.0, 0.0};
    out.objective = recompute_objective(axes, a, std::span<const double>(zero.data(), axes.size()));
    return out;
}

AffineAlignment solve_scale_shift_l1(std::span<const AxisSeries> axes, const AlignOptions& opts) {
    validate_axes(axes);

    std::vector<int> live_axes;  // axes that constrain the scale
    for (size_t k = 0; k < axes.size(); ++k)
        if (!axis_degenerate(axes[k])) live_axes.push_back(static_cast<int>(k));
    if (live_axes.empty())
        throw_solver("solve_scale_shift_l1: all source values identical per axis, slope undefined");

    std::vector<MedianScratch> scratch(axes.size());

    // Candidate slopes (dst_i - dst_j) / (src_i - src_j) from a bounded
    // seeded pair sample. They provide an initial bracket and hit the exact
    // optimum on noiseless data.
    std::vector<double> cands;
    if (opts.use_candidates) {
        SplitMix64 rng(opts.seed);
        for (int k = 0; k < opts.pair_samples; ++k) {
            const AxisSeries& ax = axes[live_axes[rng.uniform_index(live_axes.size())]];
            size_t n = ax.src.size();
            if (n < 2) continue;
            size_t i = rng.uniform_index(n);
            size_t j = rng.uniform_index(n);
            if (i == j || ax.src[i] == ax.src[j]) continue;
            if (!(ax.w[i] > 0.0) || !(ax.w[j] > 0.0)) continue;
            double c = (ax.dst[i] - ax.dst[j]) / (ax.src[i] - ax.src[j]);
            if (std::isfinite(c)) cands.push_back(c);
        }
    }
    cands.push_back(1.0);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    // Locate the zero of the subdifferential over the sorted candidates
    // (binary search; equivalent to evaluating g everywhere since g is
    // convex), then widen outward if the optimum lies outside the sample.
    // The one-sided derivatives make the direction test exact even when a
    // probe lands exactly on a residual crossing. A point with
    // slope_left <= 0 <= slope_right is a global minimizer.
    enum class Dir { left, right, optimal };
    double best_seen = cands.front();
    double best_seen_g = std::numeric_limits<double>::infinity();
    auto probe = [&](double a) {
        GEval e = eval_g(axes, a, scratch);
        if (e.g < best_seen_g) {
            best_seen_g = e.g;
            best_seen = a;
        }
        if (e.slope_right < 0.0) return Dir::right;  // minimum strictly right of a
        if (e.slope_left > 0.0) return Dir::left;
        return Dir::optimal;
    };

    double lo, hi;
    Dir first = probe(cands.front());
    if (first == Dir::optimal && cands.size() == 1)
        return finish_scale_shift(axes, cands.front(), scratch, false);
    Dir last = cands.size() > 1 ? probe(cands.back()) : first;
    if (first == Dir::optimal) return finish_scale_shift(axes, cands.front(), scratch, false);
    if (last == Dir::optimal) return finish_scale_shift(axes, cands.back(), scratch, false);

    if (first == Dir::left) {
        // optimum left of every candidate
        hi = cands.front();
        double step = std::max(1.0, std::fabs(hi));
        lo = hi - step;
        for (int it = 0;; ++it) {
            Dir d = probe(lo);
            if (d == Dir::optimal) return finish_scale_shift(axes, lo, scratch, false);
            if (d == Dir::right) break;
            if (it > 200) throw_solver("solve_scale_shift_l1: bracket expansion failed (left)");
            hi = lo;
            step *= 4.0;
            lo = hi - step;
        }
    } else if (last == Dir::right) {
        lo = cands.back();
        double step = std::max(1.0, std::fabs(lo));
        hi = lo + step;
        for (int it = 0;; ++it) {
            Dir d = probe(hi);
            if (d == Dir::optimal) return finish_scale_shift(axes, hi, scratch, false);
            if (d == Dir::left) break;
            if (it > 200) throw_solver("solve_scale_shift_l1: bracket expansion failed (right)");
            lo = hi;
            step *= 4.0;
            hi = lo + step;
        }
    } else {
        size_t a_i = 0, b_i = cands.size() - 1;  // min strictly inside (a_i, b_i)
        while (b_i - a_i > 1) {
            size_t m = (a_i + b_i) / 2;
            Dir d = probe(cands[m]);
            if (d == Dir::optimal) return finish_scale_shift(axes, cands[m], scratch, false);
            (d == Dir::right ? a_i : b_i) = m;
        }
        lo = cands[a_i];
        hi = cands[b_i];
    }

    // One-sided-derivative bisection on the bracket.
    while (hi - lo > opts.rel_tol * std::max({std::fabs(lo), std::fabs(hi), 1e-12})) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket at floating resolution
        Dir d = probe(mid);
        if (d == Dir::optimal) {
            lo = hi = mid;
            break;
        }
        (d == Dir::right ? lo : hi) = mid;
    }
    double a = 0.5 * (lo + hi);
    if (best_seen_g < eval_g(axes, a, scratch).g) a = best_seen;

    bool clamped = false;
    if (!(a > 0.0)) {
        double smallest_pos = std::numeric_limits<double>::infinity();
        for (double c : cands)
            if (c > 0.0) smallest_pos = std::min(smallest_pos, c);
        if (!std::isfinite(smallest_pos))
            throw_solver("solve_scale_shift_l1: optimal scale nonpositive, no positive candidate");
        a = smallest_pos;
        clamped = true;
    }
    return finish_scale_shift(axes, a, scratch, clamped);
}

AffineAlignment solve_shift_l1(std::span<const AxisSeries> axes) {
    validate_axes(axes);
    std::vector<MedianScratch> scratch(axes.size());
    AffineAlignment out;
    out.scale = 1.0;
    out.shift_dims = static_cast<int>(axes.size());
    std::array<double, 3> b{0.0, 0.0, 0.0};
    for (size_t k = 0; k < axes.size(); ++k) {
        AxisEval e = eval_axis(axes[k], 1.0, scratch[k]);
        b[k] = e.b;
    }
    out.shift = b;
    out.objective = recompute_objective(axes, 1.0, std::span<const double>(b.data(), axes.size()));
    return out;
}

namespace {

struct PointAxes {
    std::array<std::vector<double>, 3> src, dst;
    std::array<AxisSeries, 3> axes;

    PointAxes(std::span<const Vec3> s, std::span<const Vec3> d, std::span<const double> w) {
        if (s.size() != d.size() || s.size() != w.size())
            throw_data("alignment: point array length mismatch");
        for (int k = 0; k < 3; ++k) {
            src[k].resize(s.size());
            dst[k].resize(s.size());
        }
        for (size_t i = 0; i < s.size(); ++i) {
            src[0][i] = s[i].x; src[1][i] = s[i].y; src[2][i] = s[i].z;
            dst[0][i] = d[i].x; dst[1][i] = d[i].y; dst[2][i] = d[i].z;
        }
        for (int k = 0; k < 3; ++k) axes[k] = AxisSeries{src[k], dst[k], w};
    }
};

}  // namespace

AffineAlignment solve_scale_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                               std::span<const double> w) {
    PointAxes p(src, dst, w);
    return solve_scale_l1(p.axes);
}

AffineAlignment solve_scale_shift_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                                     std::span<const double> w, const AlignOptions& opts) {
    PointAxes p(src, dst, w);
    return solve_scale_shift_l1(p.axes, opts);
}

AffineAlignment solve_shift_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                               std::span<const double> w) {
    PointAxes p(src, dst, w);
    return solve_shift_l1(p.axes);
}

AffineAlignment solve_depth_scale_l1(std::span<const double> src, std::span<const double> dst,
                                     std::span<const double> w) {
    AxisSeries ax{src, dst, w};
    return solve_scale_l1(std::span<const AxisSeries>(&ax, 1));
}

AffineAlignment solve_depth_scale_shift_l1(std::span<const double> src,
                                           std::span<const double> dst,
                                           std::span<const double> w, const AlignOptions& opts) {
    AxisSeries ax{src, dst, w};
    return solve_scale_shift_l1(std::span<const AxisSeries>(&ax, 1), opts);
}

AffineAlignment solve_depth_shift_l1(std::span<const double> src, std::span<const double> dst,
                                     std::span<const double> w) {
    AxisSeries ax{src, dst, w};
    return solve_shift_l1(std::span<const AxisSeries>(&ax, 1));
}

AffineAlignment solve_disparity_affine_lsq(std::span<const double> src,
                                           std::span<const double> dst) {
    if (src.size() != dst.size()) throw_data("disparity lsq: array length mismatch");
    size_t n = src.size();
    if (n < 2) throw_data("disparity lsq: need at least 2 samples");

    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += src[i];
        my += dst[i];
    }
    mx /= double(n);
    my /= double(n);

    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = src[i] - mx;
        sxx += dx * dx;
        sxy += dx * (dst[i] - my);
    }
    if (!(sxx > 0.0))
        throw_solver("disparity lsq: zero variance in source disparity, degenerate fit");

    AffineAlignment out;
    out.scale = sxy / sxx;
    out.shift[0] = my - out.scale * mx;
    out.shift_dims = 1;
    std::vector<double> sq(n);
    for (size_t i = 0; i < n; ++i) {
        double r = out.scale * src[i] + out.shift[0] - dst[i];
        sq[i] = r * r;
    }
    out.objective = pairwise_sum(sq);
    return out;
}

DepthMap apply_disparity_alignment(const DisparityMap& pred, const ValidMask& mask,
                                   const AffineAlignment& align, double z_max) {
    if (!(z_max > 0.0)) throw_data("apply_disparity_alignment: z_max must be positive");
    require_same_shape(pred.width, pred.height, mask.width(), mask.height(), "disparity vs mask");
    DepthMap out(pred.width, pred.height);
    double floor = 1.0 / z_max;
    for (int i = 0; i < pred.size(); ++i) {
        if (!mask.at(i)) continue;
        double d = align.scale * pred.values[i] + align.shift[0];
        out.values[i] = 1.0 / std::max(d, floor);
    }
    return out;
}

}  // namespace pmgeo
