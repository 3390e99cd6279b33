#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>

namespace sigstop {

/// The sample-average dual problem in linear-program form:
///   min (1/M) sum_i x_i   s.t.   x_i + sum_r A[(i,n),r] lambda_r >= Z[i,n]
/// for i = 1..M and n = 0..N. Row (i,n) of A holds the discrete martingale
/// values; column n=0 is all zeros since martingales start at 0. A tiny ridge
/// on lambda breaks ties between degenerate optima.
struct LpInstance {
    long n_paths = 0;
    int n_dates = 0;
    int n_cols = 0;
    std::span<const double> basis_values;  // M x n_dates x n_cols
    std::span<const double> z_values;      // M x n_dates
    double ridge = 1e-10;

    double basis(long i, int n, int r) const {
        return basis_values[(static_cast<std::size_t>(i) * n_dates + n) * n_cols + r];
    }
    double z(long i, int n) const { return z_values[static_cast<std::size_t>(i) * n_dates + n]; }
    void validate() const;
};

LpInstance assemble_lp(std::span<const double> z_values, std::span<const double> basis_values,
                       long n_paths, int n_dates, int n_cols);

/// Coefficient vector over the martingale basis columns plus solve
/// diagnostics. objective_train is the exact SAA value attained at lambda.
struct DualCoefficients {
    Eigen::VectorXd lambda;
    double objective_train = 0.0;
    bool converged = true;
    int iterations = 0;
    double gap = 0.0;  // final complementarity gap (duality-gap certificate)
};

/// Exact SAA objective (1/M) sum_i max_n (Z[i,n] - (A lambda)[i,n]).
double lp_objective(const LpInstance& lp, const Eigen::VectorXd& lambda);

/// Dense primal-dual interior point solve (Mehrotra predictor-corrector).
/// Stops when the complementarity gap falls below tol*(1+|objective|) and the
/// KKT residuals are small; when the iteration budget runs out the best
/// feasible iterate is returned with converged = false. Apparent
/// unboundedness cannot occur for well-formed instances and raises an error.
DualCoefficients solve_lp(const LpInstance& lp, double tol = 1e-7, int max_iter = 200);

/// Sparse triplet text dump for external-solver cross-checks. Format:
///   sigstop-lp v1
///   <M> <n_dates> <n_cols>
///   Z <i> <n> <value>     one line per constraint row
///   A <i> <n> <r> <value> one line per structural nonzero of the lambda block
void dump_lp_triplets(const LpInstance& lp, std::ostream& os);

}  // namespace sigstop
