#include "sigstop/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace sigstop {

void LpInstance::validate() const {
    if (n_paths < 1 || n_dates < 1) throw std::invalid_argument("LpInstance: empty instance");
    if (n_cols < 0) throw std::invalid_argument("LpInstance: negative column count");
    if (z_values.size() != static_cast<std::size_t>(n_paths) * n_dates)
        throw std::invalid_argument("LpInstance: Z size mismatch");
    if (basis_values.size() != static_cast<std::size_t>(n_paths) * n_dates * n_cols)
        throw std::invalid_argument("LpInstance: basis size mismatch");
}

LpInstance assemble_lp(std::span<const double> z_values, std::span<const double> basis_values,
                       long n_paths, int n_dates, int n_cols) {
    LpInstance lp;
    lp.n_paths = n_paths;
    lp.n_dates = n_dates;
    lp.n_cols = n_cols;
    lp.z_values = z_values;
    lp.basis_values = basis_values;
    lp.validate();
    return lp;
}

double lp_objective(const LpInstance& lp, const Eigen::VectorXd& lambda) {
    if (lambda.size() != lp.n_cols) throw std::invalid_argument("lp_objective: lambda size mismatch");
    double sum = 0.0;
    for (long i = 0; i < lp.n_paths; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int n = 0; n < lp.n_dates; ++n) {
            double v = lp.z(i, n);
            const double* a = lp.basis_values.data() +
                              (static_cast<std::size_t>(i) * lp.n_dates + n) * lp.n_cols;
            for (int r = 0; r < lp.n_cols; ++r) v -= a[r] * lambda(r);
            best = std::max(best, v);
        }
        sum += best;
    }
    return sum / static_cast<double>(lp.n_paths);
}

DualCoefficients solve_lp(const LpInstance& lp, double tol, int max_iter) {
    lp.validate();
    const long M = lp.n_paths;
    const int N1 = lp.n_dates;
    const int C = lp.n_cols;
    const std::size_t P = static_cast<std::size_t>(M) * N1;

    DualCoefficients out;
    out.lambda = Eigen::VectorXd::Zero(C);
    if (C == 0) {
        out.objective_train = lp_objective(lp, out.lambda);
        out.gap = 0.0;
        return out;
    }

    auto row = [&](long i, int n) {
        return Eigen::Map<const Eigen::VectorXd>(
            lp.basis_values.data() + (static_cast<std::size_t>(i) * N1 + n) * C, C);
    };

    // Primal variables (x, lambda, s), dual y; s_(i,n) = x_i + a.lambda - Z.
    Eigen::VectorXd x(M), lambda = Eigen::VectorXd::Zero(C);
    Eigen::VectorXd s(P), y(P);
    for (long i = 0; i < M; ++i) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (int n = 0; n < N1; ++n) zmax = std::max(zmax, lp.z(i, n));
        x(i) = zmax + 1.0;
    }
    for (long i = 0; i < M; ++i)
        for (int n = 0; n < N1; ++n) s(i * N1 + n) = x(i) - lp.z(i, n);
    y.setConstant(1.0 / (static_cast<double>(M) * N1));

    const double inv_m = 1.0 / static_cast<double>(M);
    const double two_ridge = 2.0 * lp.ridge;

    Eigen::VectorXd fx(M), flam(C), fp(P), fc(P);
    Eigen::VectorXd alpha(M), gx(M);
    Eigen::MatrixXd B(M, C), Cmat(C, C);
    Eigen::VectorXd glam(C), dlam(C), dx(M), ds(P), dy(P), ds_aff(P), dy_aff(P);

    auto compute_residuals = [&] {
        for (long i = 0; i < M; ++i) {
            double sy = 0.0;
            for (int n = 0; n < N1; ++n) sy += y(i * N1 + n);
            fx(i) = sy - inv_m;
        }
        flam.setZero();
        for (long i = 0; i < M; ++i)
            for (int n = 0; n < N1; ++n) flam.noalias() += y(i * N1 + n) * row(i, n);
        flam -= two_ridge * lambda;
        for (long i = 0; i < M; ++i)
            for (int n = 0; n < N1; ++n) {
                const std::size_t k = static_cast<std::size_t>(i) * N1 + n;
                fp(k) = s(k) - (x(i) + row(i, n).dot(lambda) - lp.z(i, n));
            }
    };

    auto solve_newton = [&] {
        // Schur system on the lambda block.
        for (long i = 0; i < M; ++i) {
            double a = 0.0, g = 0.0;
            for (int n = 0; n < N1; ++n) {
                const std::size_t k = static_cast<std::size_t>(i) * N1 + n;
                const double w = y(k) / s(k);
                a += w;
                g += (fc(k) - y(k) * fp(k)) / s(k);
            }
            alpha(i) = a;
            gx(i) = fx(i) - g;
        }
        B.setZero();
        Cmat.setZero();
        glam = flam;
        for (long i = 0; i < M; ++i)
            for (int n = 0; n < N1; ++n) {
                const std::size_t k = static_cast<std::size_t>(i) * N1 + n;
                const double w = y(k) / s(k);
                const auto a = row(i, n);
                B.row(i).noalias() += w * a.transpose();
                Cmat.selfadjointView<Eigen::Lower>().rankUpdate(a, w);
                glam.noalias() -= ((fc(k) - y(k) * fp(k)) / s(k)) * a;
            }
        Cmat = Cmat.selfadjointView<Eigen::Lower>();
        Cmat.diagonal().array() += two_ridge;

        Eigen::MatrixXd schur = Cmat;
        Eigen::VectorXd rhs = glam;
        for (long i = 0; i < M; ++i) {
            schur.selfadjointView<Eigen::Lower>().rankUpdate(B.row(i).transpose(), -1.0 / alpha(i));
            rhs.noalias() -= (gx(i) / alpha(i)) * B.row(i).transpose();
        }
        schur = schur.selfadjointView<Eigen::Lower>();
        Eigen::LLT<Eigen::MatrixXd> llt(schur);
        if (llt.info() == Eigen::Success) {
            dlam = llt.solve(rhs);
        } else {
            schur.diagonal().array() += 1e-13 * (1.0 + schur.trace() / C);
            dlam = schur.ldlt().solve(rhs);
        }
        for (long i = 0; i < M; ++i) dx(i) = (gx(i) - B.row(i).dot(dlam)) / alpha(i);
        for (long i = 0; i < M; ++i)
            for (int n = 0; n < N1; ++n) {
                const std::size_t k = static_cast<std::size_t>(i) * N1 + n;
                ds(k) = dx(i) + row(i, n).dot(dlam) - fp(k);
                dy(k) = -(fc(k) + y(k) * ds(k)) / s(k);
            }
    };

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
        double a = 1.0;
        for (Eigen::Index k = 0; k < v.size(); ++k)
            if (dv(k) < 0.0) a = std::min(a, -v(k) / dv(k));
        return a;
    };

    double best_obj = lp_objective(lp, lambda);
    Eigen::VectorXd best_lambda = lambda;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        compute_residuals();
        const double mu = y.dot(s) / static_cast<double>(P);
        const double obj = inv_m * x.sum() + lp.ridge * lambda.squaredNorm();
        const double scale = 1.0 + std::abs(obj);
        const double gap = y.dot(s);
        const double feas = std::max({fp.lpNorm<Eigen::Infinity>(), fx.lpNorm<Eigen::Infinity>(),
                                      flam.lpNorm<Eigen::Infinity>()});
        if (gap <= tol * scale && feas <= std::sqrt(tol) * 1e-3 * scale) {
            out.gap = gap;
            converged = true;
            break;
        }

        // Affine (predictor) direction.
        for (std::size_t k = 0; k < P; ++k) fc(k) = y(k) * s(k);
        solve_newton();
        ds_aff = ds;
        dy_aff = dy;
        const double ap_aff = max_step(s, ds_aff);
        const double ad_aff = max_step(y, dy_aff);
        double mu_aff = 0.0;
        for (std::size_t k = 0; k < P; ++k)
            mu_aff += (y(k) + ad_aff * dy_aff(k)) * (s(k) + ap_aff * ds_aff(k));
        mu_aff /= static_cast<double>(P);
        const double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 1e-10, 1.0);

        // Corrector.
        for (std::size_t k = 0; k < P; ++k)
            fc(k) = y(k) * s(k) + ds_aff(k) * dy_aff(k) - sigma * mu;
        solve_newton();

        const double ap = std::min(1.0, 0.995 * max_step(s, ds));
        const double ad = std::min(1.0, 0.995 * max_step(y, dy));
        x += ap * dx;
        lambda += ap * dlam;
        s += ap * ds;
        y += ad * dy;

        if (lambda.lpNorm<Eigen::Infinity>() > 1e12 || !std::isfinite(obj))
            throw std::runtime_error(
                "solve_lp: apparent unboundedness; the martingale basis is malformed");

        const double cur = lp_objective(lp, lambda);
        if (cur < best_obj) {
            best_obj = cur;
            best_lambda = lambda;
        }
    }

    if (converged) {
        out.lambda = lambda;
        out.objective_train = lp_objective(lp, lambda);
    } else {
        out.lambda = best_lambda;
        out.objective_train = best_obj;
        out.gap = y.dot(s);
        out.converged = false;
    }
    out.iterations = it;
    return out;
}

void dump_lp_triplets(const LpInstance& lp, std::ostream& os) {
    lp.validate();
    char buf[64];
    os << "sigstop-lp v1\n" << lp.n_paths << ' ' << lp.n_dates << ' ' << lp.n_cols << '\n';
    for (long i = 0; i < lp.n_paths; ++i)
        for (int n = 0; n < lp.n_dates; ++n) {
            std::snprintf(buf, sizeof(buf), "%.17g", lp.z(i, n));
            os << "Z " << i << ' ' << n << ' ' << buf << '\n';
        }
    for (long i = 0; i < lp.n_paths; ++i)
        for (int n = 0; n < lp.n_dates; ++n)
            for (int r = 0; r < lp.n_cols; ++r) {
                const double v = lp.basis(i, n, r);
                if (v == 0.0) continue;
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << "A " << i << ' ' << n << ' ' << r << ' ' << buf << '\n';
            }
}

}  // namespace sigstop
