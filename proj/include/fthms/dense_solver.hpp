#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fthms/core.hpp"

namespace fthms {

using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

// Factored dense solve; the factorization is kept so many right-hand sides
// can reuse it (one per frequency window and generation).
class DirectSolver {
public:
    explicit DirectSolver(const MatC& a) : lu_(a), n_(static_cast<int>(a.rows())) {
        if (a.rows() != a.cols()) throw config_error("DirectSolver: matrix must be square");
    }

    VecC solve(const VecC& b) const {
        if (b.size() != n_) throw config_error("DirectSolver: right-hand side size mismatch");
        return lu_.solve(b);
    }

    int size() const { return n_; }

private:
    Eigen::PartialPivLU<MatC> lu_;
    int n_;
};

struct GmresResult {
    VecC x;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Full (unrestarted) GMRES with modified Gram-Schmidt and Givens rotations.
// Problem sizes here stay in the low thousands, so storing the Krylov basis
// is cheap and restarts would only obscure the iteration counts we report.
inline GmresResult gmres(const std::function<VecC(const VecC&)>& apply, const VecC& b,
                         double tol = 1e-10, int max_iter = 400) {
    const int n = static_cast<int>(b.size());
    GmresResult out;
    out.x = VecC::Zero(n);

    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }

    max_iter = std::min(max_iter, n);
    std::vector<VecC> basis;
    basis.reserve(max_iter + 1);
    basis.push_back(b / bnorm);

    MatC h = MatC::Zero(max_iter + 1, max_iter);
    VecC g = VecC::Zero(max_iter + 1);
    g(0) = bnorm;
    std::vector<cplx> cs(max_iter);
    std::vector<cplx> sn(max_iter);

    int k = 0;
    for (; k < max_iter; ++k) {
        VecC w = apply(basis[k]);
        for (int i = 0; i <= k; ++i) {
            h(i, k) = basis[i].dot(w);
            w -= h(i, k) * basis[i];
        }
        const double hk1 = w.norm();

        // Apply the accumulated rotations to the new column, then form the
        // rotation that annihilates the subdiagonal entry hk1.
        for (int i = 0; i < k; ++i) {
            const cplx t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
            h(i + 1, k) = -std::conj(sn[i]) * h(i, k) + cs[i] * h(i + 1, k);
            h(i, k) = t;
        }
        const double denom = std::sqrt(std::norm(h(k, k)) + hk1 * hk1);
        if (denom == 0.0) {
            cs[k] = 1.0;
            sn[k] = 0.0;
        } else {
            const double habs = std::abs(h(k, k));
            const cplx phase = habs == 0.0 ? cplx{1.0} : h(k, k) / habs;
            cs[k] = habs / denom;
            sn[k] = phase * (hk1 / denom);
        }
        h(k, k) = cs[k] * h(k, k) + sn[k] * hk1;
        g(k + 1) = -std::conj(sn[k]) * g(k);
        g(k) = cs[k] * g(k);

        const double res = std::abs(g(k + 1)) / bnorm;
        const bool breakdown = hk1 <= 1e-300;
        if (res < tol || breakdown) {
            ++k;
            break;
        }
        basis.push_back(w / hk1);
    }

    // Back-substitute the triangular system accumulated so far.
    VecC y = VecC::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
        cplx s = g(i);
        for (int j = i + 1; j < k; ++j) s -= h(i, j) * y(j);
        y(i) = s / h(i, i);
    }
    for (int i = 0; i < k; ++i) out.x += y(i) * basis[i];

    out.iterations = k;
    out.residual = (apply(out.x) - b).norm() / bnorm;
    out.converged = out.residual < 10 * tol;
    return out;
}

inline GmresResult gmres(const MatC& a, const VecC& b, double tol = 1e-10, int max_iter = 400) {
    return gmres([&a](const VecC& v) { return VecC(a * v); }, b, tol, max_iter);
}

struct solver_error : std::runtime_error {
    solver_error(const std::string& msg, GmresResult best_so_far)
        : std::runtime_error(msg), best(std::move(best_so_far)) {}
    GmresResult best;
};

struct SolveOptions {
    enum class Method { automatic, direct, iterative };
    Method method = Method::automatic;
    double tol = 1e-6;
    int cap = 600;
    int direct_threshold = 2000;  // automatic picks the dense LU below this
};

struct SolveReport {
    int iterations = 0;      // 0 for direct solves
    double residual = 0.0;
    bool direct = true;
};

inline VecC linear_solve(const MatC& a, const VecC& b, const SolveOptions& opts = {},
                         SolveReport* report = nullptr) {
    if (a.rows() != a.cols()) throw config_error("linear_solve: matrix must be square");
    if (a.rows() != b.size()) throw config_error("linear_solve: size mismatch");
    const bool use_direct = opts.method == SolveOptions::Method::direct ||
                            (opts.method == SolveOptions::Method::automatic &&
                             a.rows() < opts.direct_threshold);
    if (use_direct) {
        VecC x = DirectSolver(a).solve(b);
        if (report) {
            report->iterations = 0;
            report->residual = b.norm() > 0.0 ? (a * x - b).norm() / b.norm() : 0.0;
            report->direct = true;
        }
        return x;
    }
    GmresResult r = gmres(a, b, opts.tol, opts.cap);
    if (!r.converged)
        throw solver_error("linear_solve: GMRES failed to converge in " +
                               std::to_string(r.iterations) +
                               " iterations (residual " + std::to_string(r.residual) + ")",
                           r);
    if (report) {
        report->iterations = r.iterations;
        report->residual = r.residual;
        report->direct = false;
    }
    return r.x;
}

}  // namespace fthms
