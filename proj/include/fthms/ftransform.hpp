#pragma once

// Time-to-frequency machinery: smooth partition of the time axis, windowed
// "slow" Fourier transforms evaluated on arbitrary frequency grids, and two
// quadratures for the inverse transform whose cost per output time is fixed:
//  - a least-squares Fourier continuation for the main band, and
//  - a graded Filon-Chebyshev rule for the logarithmically singular band
//    near omega = 0 that two-sided (real) signals require.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "fthms/cheb.hpp"
#include "fthms/core.hpp"
#include "fthms/fft.hpp"
#include "fthms/geometry.hpp"

namespace fthms {

// Overlapping C-infinity bumps centered at s_q = t_start + (3/2) H q with
// support width 2H. Adjacent bumps share the eta argument on the overlap,
// so their sum is one up to a single rounding.
struct TimeWindowSet {
    double H = 10.0;
    int count = 1;
    double t_start = 0.0;

    double center(int q) const { return t_start + 1.5 * H * q; }

    // Bump profile at offset s from the center.
    double profile(double s) const {
        if (s >= -0.5 * H) return eta_window(s / H, 0.5, 1.0);
        if (s <= -H) return 0.0;
        return 1.0 - eta_window(s / H + 1.5, 0.5, 1.0);
    }

    double value(int q, double t) const { return profile(t - center(q)); }

    // Last time at which the window set still sums to one.
    double cover_end() const { return center(count - 1) + 0.5 * H; }

    static int windows_needed(double t_end, double H, double t_start = 0.0) {
        int q = 1;
        while (t_start + 1.5 * H * (q - 1) + 0.5 * H < t_end) ++q;
        return q;
    }
};

// Windowed transform G(w) = int_{-H}^{H} g(s_q + t) bump(t) e^{iwt} dt for a
// fixed list of output frequencies. The integrand is smooth and compactly
// supported, so its trigonometric interpolant on a uniform grid converges
// spectrally; each Fourier mode is then integrated in closed form. The whole
// pipeline collapses into one matrix so many signals amortize the setup.
class SlowFourierTransform {
public:
    SlowFourierTransform(std::vector<double> omegas, double H, int n_samples)
        : omegas_(std::move(omegas)), H_(H), n_(n_samples) {
        if (H_ <= 0) throw config_error("SlowFourierTransform: window size must be positive");
        if (n_ < 8) throw config_error("SlowFourierTransform: need at least 8 samples");
        const int J = static_cast<int>(omegas_.size());

        // Closed-form integral of each trigonometric mode: with
        // delta_k = w + pi k / H,  int_{-H}^{H} e^{i delta_k t} dt
        // = 2 sin(delta_k H) / delta_k, and sin(delta_k H) = (-1)^k sin(wH).
        // The samples start at t = -H, which contributes another (-1)^k to
        // the interpolation coefficients; the two sign factors cancel, so
        // the matrix below stores (-1)^k times the true mode integral.
        Eigen::MatrixXcd mode_moments(J, n_);
        for (int j = 0; j < J; ++j) {
            const double w = omegas_[j];
            const double sw = std::sin(w * H_);
            for (int idx = 0; idx < n_; ++idx) {
                const int k = idx <= n_ / 2 ? idx : idx - n_;
                const double delta = w + pi * k / H_;
                const double sign = (k % 2 == 0) ? 1.0 : -1.0;
                double integral;
                if (std::abs(delta * H_) < 1e-2) {
                    const double z = delta * H_;
                    integral = sign * 2.0 * H_ * (1.0 - z * z / 6.0 + z * z * z * z / 120.0);
                } else {
                    integral = 2.0 * sw / delta;
                }
                mode_moments(j, idx) = integral;
            }
        }

        // Fold the DFT into the moments: row j of the final matrix is the
        // inverse-order DFT of the moment row divided by n. Applying the
        // result to raw windowed samples then yields G directly.
        matrix_.resize(J, n_);
        for (int j = 0; j < J; ++j) {
            std::vector<cplx> row(n_);
            for (int idx = 0; idx < n_; ++idx) row[idx] = mode_moments(j, idx);
            const auto folded = fft(row, false);
            for (int i = 0; i < n_; ++i) matrix_(j, i) = folded[i] / double(n_);
        }

        window_.resize(n_);
        const TimeWindowSet bump{H_, 1, 0.0};
        for (int i = 0; i < n_; ++i) window_[i] = bump.profile(sample_offset(i));
    }

    int sample_count() const { return n_; }
    // Offsets t_i relative to the window center, uniform over [-H, H).
    double sample_offset(int i) const { return -H_ + 2.0 * H_ * i / n_; }
    const std::vector<double>& omegas() const { return omegas_; }
    double window_size() const { return H_; }

    // samples: one signal per row, sampled at the n offsets. Returns one row
    // of G values per signal (columns follow the frequency list).
    Eigen::MatrixXcd transform(const Eigen::MatrixXcd& samples) const {
        if (samples.cols() != n_)
            throw config_error("SlowFourierTransform: sample count mismatch");
        Eigen::MatrixXcd windowed = samples;
        for (int i = 0; i < n_; ++i) windowed.col(i) *= window_[i];
        return windowed * matrix_.transpose();
    }

private:
    std::vector<double> omegas_;
    double H_;
    int n_;
    Eigen::MatrixXcd matrix_;  // J x n, includes window-mode integrals and DFT
    std::vector<double> window_;
};

namespace detail {

// sin-cardinal style helper: (e^{i a L} - 1) / (i a), stable near a = 0.
inline cplx phase_ramp_integral(double a, double L) {
    if (std::abs(a * L) < 1e-6) {
        const cplx ia{0.0, a};
        return L * (1.0 + ia * L / 2.0 + ia * ia * L * L / 6.0);
    }
    return (std::exp(cplx{0.0, a * L}) - 1.0) / cplx{0.0, a};
}

}  // namespace detail

// Band integral int_{w0}^{w1} F(w) e^{-iwt} dw evaluated by fitting F on a
// uniform grid with a trigonometric frame of period lambda > w1 - w0
// (truncated-SVD least squares) and integrating each mode exactly. The
// number of function samples is fixed and independent of t.
class FourierContinuation {
public:
    // A truncation threshold near 1e-10 is load bearing: tighter cutoffs let
    // poorly resolved singular directions through and *degrade* the fit.
    FourierContinuation(double w0, double w1, int n_grid, int n_modes,
                        double lambda_factor = 2.0, double svd_cutoff = 1e-10)
        : w0_(w0), w1_(w1), span_(w1 - w0), n_modes_(n_modes) {
        if (!(w1 > w0)) throw config_error("FourierContinuation: empty band");
        if (n_grid < 2 * n_modes + 4)
            throw config_error("FourierContinuation: grid too coarse for the mode count");
        if (lambda_factor <= 1.0)
            throw config_error("FourierContinuation: lambda_factor must exceed one");
        lambda_ = lambda_factor * span_;

        grid_.resize(n_grid);
        for (int j = 0; j < n_grid; ++j) grid_[j] = w0 + span_ * j / (n_grid - 1.0);

        Eigen::MatrixXcd a(n_grid, 2 * n_modes + 1);
        for (int j = 0; j < n_grid; ++j)
            for (int k = -n_modes; k <= n_modes; ++k)
                a(j, k + n_modes) = mode(k, grid_[j]);

        // Truncated pseudoinverse; the frame is ill conditioned by design.
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a,
                                               Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > svd_cutoff * sv(0)) inv(i) = 1.0 / sv(i);
        pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
    }

    const std::vector<double>& grid() const { return grid_; }
    int mode_count() const { return 2 * n_modes_ + 1; }

    // values: one row per signal, sampled on grid(). Returns mode weights.
    Eigen::MatrixXcd fit(const Eigen::MatrixXcd& values) const {
        if (values.cols() != static_cast<long>(grid_.size()))
            throw config_error("FourierContinuation: sample count mismatch");
        return values * pinv_.transpose();
    }

    // Exact integrals of the modes against e^{-iwt} over the band.
    Eigen::VectorXcd mode_integrals(double t) const {
        Eigen::VectorXcd e(2 * n_modes_ + 1);
        const cplx shift = std::exp(cplx{0.0, -w0_ * t});
        for (int k = -n_modes_; k <= n_modes_; ++k) {
            const double beta = 2.0 * pi * k / lambda_;
            e(k + n_modes_) = shift * detail::phase_ramp_integral(beta - t, span_);
        }
        return e;
    }

    // Band integral for every fitted signal at one output time.
    Eigen::VectorXcd integrate(const Eigen::MatrixXcd& coef, double t) const {
        return coef * mode_integrals(t);
    }

    // Pointwise evaluation of the continuation (diagnostics only).
    cplx evaluate(const Eigen::RowVectorXcd& coef, double w) const {
        cplx s{0.0, 0.0};
        for (int k = -n_modes_; k <= n_modes_; ++k) s += coef(k + n_modes_) * mode(k, w);
        return s;
    }

private:
    cplx mode(int k, double w) const {
        return std::exp(cplx{0.0, 2.0 * pi * k * (w - w0_) / lambda_});
    }

    double w0_, w1_, span_, lambda_;
    int n_modes_;
    std::vector<double> grid_;
    Eigen::MatrixXcd pinv_;
};

namespace detail {

// int_{-1}^{1} T_2(x) e^{-i theta x} dx (imaginary part vanishes by parity).
inline cplx filon_moment_2(double theta) {
    const double th = theta;
    const double s = std::sin(th), c = std::cos(th);
    const double x2 = 2.0 * (s / th + 2.0 * c / (th * th) - 2.0 * s / (th * th * th));
    return cplx{2.0 * x2 - 2.0 * s / th, 0.0};
}

// Chebyshev moments m_k(theta) = int_{-1}^{1} T_k(x) e^{-i theta x} dx for
// k = 0..n-1. Forward recursion is stable only while k < |theta|; below the
// switch a fixed Gauss-Legendre rule handles the mildly oscillatory case.
inline void cheb_filon_moments(int n, double theta, cplx* out) {
    const double at = std::abs(theta);
    if (at <= std::max(40.0, 1.5 * n)) {
        static thread_local QuadRule rule;
        const int n_gl = std::max(48, n + 24);
        if (static_cast<int>(rule.nodes.size()) != n_gl) rule = gauss_legendre(n_gl);
        for (int k = 0; k < n; ++k) out[k] = cplx{0.0, 0.0};
        for (int i = 0; i < n_gl; ++i) {
            const double x = rule.nodes[i];
            const cplx f = rule.weights[i] * std::exp(cplx{0.0, -theta * x});
            // T_k by recurrence at this node.
            double t0 = 1.0, t1 = x;
            out[0] += f;
            if (n > 1) out[1] += f * x;
            for (int k = 2; k < n; ++k) {
                const double t2 = 2.0 * x * t1 - t0;
                out[k] += f * t2;
                t0 = t1;
                t1 = t2;
            }
        }
        return;
    }

    // Large theta: closed forms for m_0, m_1, m_2, then the relation
    //   m_{k+1} = (k+1) [ (2 / (i theta)) (m_k - B_k) + m_{k-1} / (k-1) ]
    // from integrating T_k e^{-i theta x} by parts; the boundary term is
    //   B_k = (1/(2(k+1)) - 1/(2(k-1))) (e^{-i theta} - (-1)^{k+1} e^{i theta}).
    // Forward iteration amplifies errors by ~k/theta per step, harmless
    // while k stays below theta.
    const cplx ith{0.0, theta};
    out[0] = 2.0 * std::sin(theta) / theta;
    if (n > 1)
        out[1] =
            cplx{0.0, 2.0} * (theta * std::cos(theta) - std::sin(theta)) / (theta * theta);
    if (n > 2) out[2] = filon_moment_2(theta);
    const cplx em = std::exp(cplx{0.0, -theta});
    const cplx ep = std::exp(cplx{0.0, theta});
    for (int k = 2; k + 1 < n; ++k) {
        const double c = 0.5 / (k + 1.0) - 0.5 / (k - 1.0);
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;  // -(-1)^{k+1}
        const cplx bk = c * (em + sgn * ep);
        out[k + 1] = (k + 1.0) * ((2.0 / ith) * (out[k] - bk) + out[k - 1] / (k - 1.0));
    }
}

}  // namespace detail

// Filon quadrature for int_0^{wc} F(w) e^{-iwt} dw where F carries a log
// singularity at w = 0 of the form (smooth) + (smooth) log w. The band is
// split into intervals graded toward zero; plain Chebyshev interpolation
// handles every interval except the first, which uses a least-squares fit
// in the mixed basis {s^m, s^m log s} with exact small-theta moments.
class GradedLogFilon {
public:
    GradedLogFilon(double w_c, int n_intervals = 8, double grading = 3.0, int n_cheb = 16,
                   int n_log = 6)
        : wc_(w_c), p_(n_intervals), n_(n_cheb), n_log_(n_log) {
        if (!(w_c > 0)) throw config_error("GradedLogFilon: cutoff must be positive");
        if (p_ < 2 || n_ < 8 || n_log_ < 2 || 2 * n_log_ > n_)
            throw config_error("GradedLogFilon: invalid rule shape");
        breaks_.resize(p_ + 1);
        for (int l = 0; l <= p_; ++l) breaks_[l] = w_c * std::pow(double(l) / p_, grading);

        const auto xs = fejer1_nodes(n_);
        coeff_mat_ = cheb_coeff_matrix(n_);
        for (int l = 0; l < p_; ++l) {
            const double a = breaks_[l], b = breaks_[l + 1];
            for (int i = 0; i < n_; ++i)
                nodes_.push_back(0.5 * (a + b) + 0.5 * (b - a) * xs[i]);
        }

        // First-interval fit: samples of F at the n_ nodes of (0, mu1) in the
        // basis {1, s, ..., s^{n_log-1}, log s, s log s, ...} with s = w/mu1.
        const double mu1 = breaks_[1];
        Eigen::MatrixXd basis(n_, 2 * n_log_);
        for (int i = 0; i < n_; ++i) {
            const double s = nodes_[i] / mu1;
            for (int m = 0; m < n_log_; ++m) {
                basis(i, m) = std::pow(s, m);
                basis(i, n_log_ + m) = std::pow(s, m) * std::log(s);
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis,
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-13 * sv(0)) inv(i) = 1.0 / sv(i);
        log_pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    }

    // All sampling frequencies, strictly inside (0, w_c).
    const std::vector<double>& nodes() const { return nodes_; }
    double cutoff() const { return wc_; }

    // Quadrature weight vector w(t): the band integral of a sampled signal
    // row is values * weights(t). Exposing the weights lets callers batch
    // many output times into one matrix product.
    Eigen::VectorXcd weights(double t) const {
        Eigen::VectorXcd w(static_cast<long>(nodes_.size()));

        // First interval in the log basis.
        {
            const double mu1 = breaks_[1];
            const double theta = t * mu1;
            if (std::abs(theta) > 8.0)
                throw domain_error("GradedLogFilon: t * mu1 too large for the series moments");
            Eigen::VectorXcd mom(2 * n_log_);
            for (int m = 0; m < n_log_; ++m) {
                mom(m) = poly_moment(m, theta);
                mom(n_log_ + m) = log_moment(m, theta);
            }
            // F(w) e^{-iwt}: w = mu1 s, dw = mu1 ds, theta = t mu1.
            w.head(n_) = mu1 * (log_pinv_.transpose().cast<cplx>() * mom);
        }

        // Remaining intervals with plain Chebyshev-Filon.
        std::vector<cplx> mom(n_);
        for (int l = 1; l < p_; ++l) {
            const double a = breaks_[l], b = breaks_[l + 1];
            const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
            detail::cheb_filon_moments(n_, t * h, mom.data());
            Eigen::VectorXcd weighted = Eigen::VectorXcd::Zero(n_);
            for (int k = 0; k < n_; ++k)
                for (int i = 0; i < n_; ++i) weighted(i) += mom[k] * coeff_mat_[k * n_ + i];
            const cplx phase = h * std::exp(cplx{0.0, -mid * t});
            w.segment(l * n_, n_) = phase * weighted;
        }
        return w;
    }

    // values: one row per signal, sampled at nodes(). Returns the band
    // integral per signal at output time t.
    Eigen::VectorXcd integrate(const Eigen::MatrixXcd& values, double t) const {
        if (values.cols() != static_cast<long>(nodes_.size()))
            throw config_error("GradedLogFilon: sample count mismatch");
        return values * weights(t);
    }

private:
    // int_0^1 s^m e^{-i theta s} ds by series (theta stays small because the
    // first interval is tiny).
    static cplx poly_moment(int m, double theta) {
        cplx term{1.0, 0.0}, sum = term / double(m + 1);
        for (int r = 1; r < 80; ++r) {
            term *= cplx{0.0, -theta} / double(r);
            const cplx add = term / double(m + r + 1);
            sum += add;
            if (std::abs(add) < 1e-18) break;
        }
        return sum;
    }

    // int_0^1 s^m log(s) e^{-i theta s} ds = -sum_r (-i theta)^r / (r! (m+r+1)^2).
    static cplx log_moment(int m, double theta) {
        cplx term{1.0, 0.0}, sum = -term / double((m + 1) * (m + 1));
        for (int r = 1; r < 80; ++r) {
            term *= cplx{0.0, -theta} / double(r);
            const cplx add = -term / double((m + r + 1) * (m + r + 1));
            sum += add;
            if (std::abs(add) < 1e-18) break;
        }
        return sum;
    }

    double wc_;
    int p_, n_, n_log_;
    std::vector<double> breaks_;
    std::vector<double> nodes_;
    std::vector<double> coeff_mat_;
    Eigen::MatrixXd log_pinv_;
};

}  // namespace fthms
