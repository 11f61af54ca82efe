#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "switchback/cec_curve.hpp"

namespace switchback {

namespace linalg {

// Gaussian elimination with partial pivoting; A is n x n row-major.
inline std::vector<double> solve(std::vector<double> A, std::vector<double> b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(A[r * n + col]) > std::fabs(A[piv * n + col])) piv = r;
        if (std::fabs(A[piv * n + col]) < 1e-14)
            throw std::runtime_error("linalg::solve: singular system");
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(A[piv * n + c], A[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            double fac = A[r * n + col] / A[col * n + col];
            if (fac == 0.0) continue;
            for (int c = col; c < n; ++c) A[r * n + c] -= fac * A[col * n + c];
            b[r] -= fac * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= A[r * n + c] * x[c];
        x[r] = s / A[r * n + r];
    }
    return x;
}

// Null-space basis of an m x n matrix (row-major) via Gauss-Jordan; returns
// column-major basis vectors, each of length n.
inline std::vector<std::vector<double>> nullspace(std::vector<double> A, int m, int n) {
    std::vector<int> pivot_col;
    int row = 0;
    for (int col = 0; col < n && row < m; ++col) {
        int piv = row;
        for (int r = row + 1; r < m; ++r)
            if (std::fabs(A[r * n + col]) > std::fabs(A[piv * n + col])) piv = r;
        if (std::fabs(A[piv * n + col]) < 1e-12) continue;
        if (piv != row)
            for (int c = 0; c < n; ++c) std::swap(A[piv * n + c], A[row * n + c]);
        double d = A[row * n + col];
        for (int c = 0; c < n; ++c) A[row * n + c] /= d;
        for (int r = 0; r < m; ++r) {
            if (r == row) continue;
            double fac = A[r * n + col];
            if (fac == 0.0) continue;
            for (int c = 0; c < n; ++c) A[r * n + c] -= fac * A[row * n + c];
        }
        pivot_col.push_back(col);
        ++row;
    }
    std::vector<bool> is_pivot(n, false);
    for (int c : pivot_col) is_pivot[c] = true;
    std::vector<std::vector<double>> basis;
    for (int freec = 0; freec < n; ++freec) {
        if (is_pivot[freec]) continue;
        std::vector<double> v(n, 0.0);
        v[freec] = 1.0;
        for (std::size_t r = 0; r < pivot_col.size(); ++r) v[pivot_col[r]] = -A[r * n + freec];
        basis.push_back(std::move(v));
    }
    return basis;
}

}  // namespace linalg

// Natural cubic spline with one interior knot at k = 1/2 on the rescaled
// domain [0, 1]:
//   g(x) = a0 + a1 x + a2 x^2 + a3 x^3   for x <  k
//        = b0 + b1 x + b2 x^2 + b3 x^3   for x >= k
// fitted by least squares under four linear constraints:
//   g'(1) = 0, g(k-) = g(k+), g'(k-) = g'(k+), g''(0) = 0.
struct SplineFit {
    std::array<double, 4> a{};
    std::array<double, 4> b{};
    double knot = 0.5;
    double rss = 0.0;

    double eval(double x) const {
        const auto& c = (x < knot) ? a : b;
        return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    }

    // the fitted GATE: the curve value at the right boundary
    double gate() const { return b[0] + b[1] + b[2] + b[3]; }

    std::array<double, 4> constraint_residuals() const {
        const double k = knot;
        std::array<double, 4> r{};
        r[0] = b[1] + 2.0 * b[2] + 3.0 * b[3];
        r[1] = (a[0] + a[1] * k + a[2] * k * k + a[3] * k * k * k) -
               (b[0] + b[1] * k + b[2] * k * k + b[3] * k * k * k);
        r[2] = (a[1] + 2.0 * a[2] * k + 3.0 * a[3] * k * k) -
               (b[1] + 2.0 * b[2] * k + 3.0 * b[3] * k * k);
        r[3] = 2.0 * a[2];
        return r;
    }

    nlohmann::json to_json() const {
        return {{"a", a}, {"b", b}, {"knot", knot}, {"gate", gate()}, {"rss", rss}};
    }
};

namespace detail {

inline std::vector<double> spline_constraint_matrix(double k) {
    return {
        0, 0, 0, 0, 0, 1, 2, 3,                                     // g'(1) = 0
        1, k, k * k, k * k * k, -1, -k, -k * k, -k * k * k,         // continuity at knot
        0, 1, 2 * k, 3 * k * k, 0, -1, -2 * k, -3 * k * k,          // gradient continuity
        0, 0, 2, 0, 0, 0, 0, 0,                                     // g''(0) = 0
    };
}

inline std::array<double, 8> design_row(double x, double k) {
    std::array<double, 8> row{};
    int off = (x < k) ? 0 : 4;
    row[off + 0] = 1.0;
    row[off + 1] = x;
    row[off + 2] = x * x;
    row[off + 3] = x * x * x;
    return row;
}

}  // namespace detail

// Equality-constrained least squares solved by eliminating the constraints
// into a reduced unconstrained problem over the 4-dimensional null space.
inline SplineFit fit_natural_cubic(const CecCurve& curve) {
    const int H = curve.horizon;
    if (H < 8) throw std::invalid_argument("fit_natural_cubic: need H >= 8");
    const double k = 0.5;
    auto basis = linalg::nullspace(detail::spline_constraint_matrix(k), 4, 8);
    if (basis.size() != 4)
        throw std::runtime_error("fit_natural_cubic: constraint matrix rank unexpected");

    // reduced design: columns are A * basis_j
    std::vector<std::array<double, 4>> rd(static_cast<std::size_t>(H));
    for (int i = 0; i < H; ++i) {
        double x = static_cast<double>(i + 1) / H;
        auto row = detail::design_row(x, k);
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int c = 0; c < 8; ++c) s += row[c] * basis[j][c];
            rd[i][j] = s;
        }
    }
    std::vector<double> G(16, 0.0), rhs(4, 0.0);
    for (int i = 0; i < H; ++i) {
        for (int r = 0; r < 4; ++r) {
            rhs[r] += rd[i][r] * curve.values[i];
            for (int c = 0; c < 4; ++c) G[r * 4 + c] += rd[i][r] * rd[i][c];
        }
    }
    std::vector<double> beta;
    try {
        beta = linalg::solve(G, rhs, 4);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("fit_natural_cubic: rank-deficient system");
    }
    SplineFit fit;
    fit.knot = k;
    std::array<double, 8> theta{};
    for (int c = 0; c < 8; ++c)
        for (int j = 0; j < 4; ++j) theta[c] += basis[j][c] * beta[j];
    for (int c = 0; c < 4; ++c) {
        fit.a[c] = theta[c];
        fit.b[c] = theta[c + 4];
    }
    double rss = 0.0;
    for (int i = 0; i < H; ++i) {
        double x = static_cast<double>(i + 1) / H;
        double r = curve.values[i] - fit.eval(x);
        rss += r * r;
    }
    fit.rss = rss;
    return fit;
}

// Smoothing baselines used by the cross-validation comparison.
struct SmootherChoice {
    enum class Kind { natural_cubic, polynomial, local } kind = Kind::natural_cubic;
    int degree = 0;      // polynomial / local degree
    double span = 0.75;  // local regression span (fraction of points)

    static SmootherChoice natural_cubic() { return {}; }
    static SmootherChoice polynomial(int d) {
        if (d < 0 || d > 4) throw std::invalid_argument("polynomial smoother: degree in 0..4");
        return {Kind::polynomial, d, 0.0};
    }
    static SmootherChoice local(int d, double span = 0.75) {
        if (d < 0 || d > 2) throw std::invalid_argument("local smoother: degree in 0..2");
        if (!(span > 0.0 && span <= 1.0)) throw std::invalid_argument("local smoother: span in (0,1]");
        return {Kind::local, d, span};
    }
};

namespace detail {

inline double poly_fit_at_one(const std::vector<double>& xs, const std::vector<double>& ys,
                              const std::vector<double>& ws, int degree) {
    const int p = degree + 1;
    std::vector<double> G(static_cast<std::size_t>(p) * p, 0.0), rhs(p, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double w = ws.empty() ? 1.0 : ws[i];
        if (w <= 0.0) continue;
        double pw_r = 1.0;
        std::vector<double> pows(p);
        for (int r = 0; r < p; ++r) {
            pows[r] = pw_r;
            pw_r *= xs[i];
        }
        for (int r = 0; r < p; ++r) {
            rhs[r] += w * pows[r] * ys[i];
            for (int c = 0; c < p; ++c) G[r * p + c] += w * pows[r] * pows[c];
        }
    }
    auto coef = linalg::solve(G, rhs, p);
    double v = 0.0, xp = 1.0;
    for (int r = 0; r < p; ++r) v += coef[r] * xp;  // x = 1
    return v;
}

}  // namespace detail

// Smoothed GATE estimate g_hat(1) from a CEC under the chosen smoother.
inline double smoothed_gate(const CecCurve& curve, const SmootherChoice& s) {
    const int H = curve.horizon;
    std::vector<double> xs(static_cast<std::size_t>(H)), ys = curve.values;
    for (int i = 0; i < H; ++i) xs[i] = static_cast<double>(i + 1) / H;
    switch (s.kind) {
        case SmootherChoice::Kind::natural_cubic:
            return fit_natural_cubic(curve).gate();
        case SmootherChoice::Kind::polynomial:
            return detail::poly_fit_at_one(xs, ys, {}, s.degree);
        case SmootherChoice::Kind::local: {
            // tricube-weighted local polynomial at the right boundary x0 = 1
            int m = std::max(s.degree + 1,
                             static_cast<int>(std::ceil(s.span * static_cast<double>(H))));
            m = std::min(m, H);
            double dmax = 1.0 - xs[static_cast<std::size_t>(H - m)];
            std::vector<double> ws(static_cast<std::size_t>(H), 0.0);
            for (int i = 0; i < H; ++i) {
                double d = std::fabs(1.0 - xs[i]);
                if (d > dmax || dmax == 0.0) continue;
                double u = d / dmax;
                double w = 1.0 - u * u * u;
                ws[i] = w * w * w;
            }
            if (dmax == 0.0) ws.back() = 1.0;
            return detail::poly_fit_at_one(xs, ys, ws, s.degree);
        }
    }
    throw std::logic_error("smoothed_gate: unreachable");
}

}  // namespace switchback
