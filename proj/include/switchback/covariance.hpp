#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "switchback/rng.hpp"

namespace switchback {

enum class CovarianceKind { none, linear_decay };

// Per-minute series, periodic with its own length. Used for variance
// profiles, control outcomes and effect sizes.
struct MinuteSeries {
    std::vector<double> v;

    MinuteSeries() : v{0.0} {}
    explicit MinuteSeries(std::vector<double> values) : v(std::move(values)) {
        if (v.empty()) throw std::invalid_argument("MinuteSeries: empty");
    }
    static MinuteSeries constant(double x) { return MinuteSeries(std::vector<double>{x}); }

    double at_cell(long k) const {
        long n = static_cast<long>(v.size());
        long i = k % n;
        if (i < 0) i += n;
        return v[static_cast<std::size_t>(i)];
    }
    double at_time(double t) const { return at_cell(static_cast<long>(std::floor(t))); }
    bool is_constant() const {
        for (double x : v)
            if (x != v[0]) return false;
        return true;
    }
};

// Covariance of measurement errors between two event times,
// cov(eps_i, eps_j | t_i, t_j). The stationary base decays with |t_i - t_j|;
// an optional per-minute scale profile makes it heteroskedastic via
// sqrt(scale(t_i) scale(t_j)).
class CovarianceKernel {
  public:
    static CovarianceKernel none() { return CovarianceKernel(); }

    static CovarianceKernel linear_decay(double sigma2, double h,
                                         std::optional<MinuteSeries> scale = std::nullopt) {
        if (!(sigma2 >= 0.0)) throw std::invalid_argument("CovarianceKernel: sigma2 must be >= 0");
        if (!(h > 0.0)) throw std::invalid_argument("CovarianceKernel: h must be positive");
        CovarianceKernel c;
        c.kind_ = CovarianceKind::linear_decay;
        c.sigma2_ = sigma2;
        c.h_ = h;
        c.scale_ = std::move(scale);
        return c;
    }

    CovarianceKind kind() const { return kind_; }
    double sigma2() const { return sigma2_; }
    double window() const { return h_; }
    const std::optional<MinuteSeries>& scale() const { return scale_; }

    double base(double dist) const {
        if (kind_ == CovarianceKind::none) return 0.0;
        double d = std::fabs(dist);
        if (d >= h_) return 0.0;
        return sigma2_ * (h_ - d) / h_;
    }

    double scale_at(double t) const { return scale_ ? scale_->at_time(t) : 1.0; }

    double eval(double t_i, double t_j) const {
        if (kind_ == CovarianceKind::none) return 0.0;
        double b = base(t_i - t_j);
        if (b == 0.0) return 0.0;
        return b * std::sqrt(scale_at(t_i) * scale_at(t_j));
    }

    // Exact ∫∫_{[a1,b1]x[a2,b2]} base(u - v) du dv.
    // Reduces to ∫ base(w) m(w) dw where m is the (piecewise-linear) overlap
    // length of [a1,b1] and [a2+w,b2+w]; base is piecewise linear in w, so the
    // product is piecewise quadratic and Simpson is exact on each piece.
    double box_integral(double a1, double b1, double a2, double b2) const {
        if (kind_ == CovarianceKind::none || b1 <= a1 || b2 <= a2) return 0.0;
        double lo = a1 - b2, hi = b1 - a2;
        double breaks[7] = {lo, a1 - a2, b1 - b2, hi, -h_, 0.0, h_};
        std::sort(breaks, breaks + 7);
        auto m = [&](double w) {
            return std::max(0.0, std::min(b1, b2 + w) - std::max(a1, a2 + w));
        };
        double total = 0.0;
        for (int i = 0; i + 1 < 7; ++i) {
            double w0 = std::max(breaks[i], std::max(lo, -h_));
            double w1 = std::min(breaks[i + 1], std::min(hi, h_));
            if (w1 <= w0) continue;
            double mid = 0.5 * (w0 + w1);
            double q0 = base(w0) * m(w0), qm = base(mid) * m(mid), q1 = base(w1) * m(w1);
            total += (w1 - w0) / 6.0 * (q0 + 4.0 * qm + q1);
        }
        return total;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        if (kind_ == CovarianceKind::none) {
            j["variant"] = "none";
        } else {
            j["variant"] = "linear_decay";
            j["sigma2"] = sigma2_;
            j["h"] = h_;
            if (scale_) j["heteroskedastic_scale"] = scale_->v;
        }
        return j;
    }

    static CovarianceKernel from_json(const nlohmann::json& j) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "none") return none();
        if (v == "linear_decay") {
            std::optional<MinuteSeries> sc;
            if (j.contains("heteroskedastic_scale"))
                sc = MinuteSeries(j.at("heteroskedastic_scale").get<std::vector<double>>());
            return linear_decay(j.at("sigma2").get<double>(), j.at("h").get<double>(), sc);
        }
        throw std::invalid_argument("CovarianceKernel: unknown variant '" + v + "'");
    }

  private:
    CovarianceKind kind_ = CovarianceKind::none;
    double sigma2_ = 0.0;
    double h_ = 1.0;
    std::optional<MinuteSeries> scale_;
};

inline double covariance_eval(const CovarianceKernel& c, double t_i, double t_j) {
    return c.eval(t_i, t_j);
}

// Banded lower Cholesky factor of the minute-grid covariance matrix
// K[j,k] = cov.eval(j + 0.5, k + 0.5). Shared latent values give events the
// modeled pairwise covariance at O(T h) sampling cost.
class LatentNoiseProcess {
  public:
    LatentNoiseProcess() = default;

    LatentNoiseProcess(const CovarianceKernel& cov, int horizon) : horizon_(horizon) {
        if (cov.kind() == CovarianceKind::none || cov.sigma2() == 0.0) {
            band_ = 0;
            return;
        }
        band_ = std::min(horizon - 1, static_cast<int>(std::ceil(cov.window())));
        const int bw = band_ + 1;
        chol_.assign(static_cast<std::size_t>(horizon) * bw, 0.0);
        // banded Cholesky, row by row; tiny diagonal jitter keeps the
        // factorization alive when the kernel is only positive semidefinite
        const double jitter = 1e-10 * cov.sigma2();
        for (int i = 0; i < horizon; ++i) {
            int j0 = std::max(0, i - band_);
            for (int j = j0; j <= i; ++j) {
                double k = cov.eval(i + 0.5, j + 0.5);
                if (i == j) k += jitter;
                double sum = k;
                int l0 = std::max(j0, j - band_);
                for (int l = l0; l < j; ++l) sum -= at(i, l) * at(j, l);
                if (i == j) {
                    if (sum <= 0.0)
                        throw std::runtime_error("LatentNoiseProcess: covariance kernel not positive definite");
                    at(i, j) = std::sqrt(sum);
                } else {
                    at(i, j) = sum / at(j, j);
                }
            }
        }
    }

    bool active() const { return band_ > 0 || !chol_.empty(); }

    // one draw of the latent minute-grid process
    std::vector<double> sample(Rng& rng) const {
        std::vector<double> out(static_cast<std::size_t>(horizon_), 0.0);
        if (chol_.empty()) return out;
        std::vector<double> z(static_cast<std::size_t>(horizon_));
        for (auto& x : z) x = rng.normal();
        for (int i = 0; i < horizon_; ++i) {
            double s = 0.0;
            int j0 = std::max(0, i - band_);
            for (int j = j0; j <= i; ++j) s += at_const(i, j) * z[j];
            out[i] = s;
        }
        return out;
    }

  private:
    double& at(int i, int j) { return chol_[static_cast<std::size_t>(i) * (band_ + 1) + (j - i + band_)]; }
    double at_const(int i, int j) const {
        return chol_[static_cast<std::size_t>(i) * (band_ + 1) + (j - i + band_)];
    }

    int horizon_ = 0;
    int band_ = 0;
    std::vector<double> chol_;
};

}  // namespace switchback
