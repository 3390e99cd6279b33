#pragma once

#include <Eigen/Dense>

#include <span>

#include "sigstop/tensor.hpp"

namespace sigstop {

/// Regression feature family: all signature coordinates of degree <= sig_level
/// followed by Laguerre-polynomial features of the state coordinates.
struct BasisSpec {
    int sig_level = 1;               // K_p
    bool include_payoff_letter = false;  // alphabet e = 2 or 3
    int poly_degree = 0;             // max total Laguerre degree, 0 = none
    int state_arity = 0;             // state coordinates fed to the polynomials

    int alphabet_size(int state_letters = 1) const {
        return 1 + state_letters + (include_payoff_letter ? 1 : 0);
    }
    /// Signature coordinate count sum_{k<=K} e^k.
    std::size_t sig_feature_count(int alphabet) const;
    /// Laguerre-product feature count (total degree <= poly_degree).
    std::size_t poly_feature_count() const;
    std::size_t feature_count(int alphabet) const {
        return sig_feature_count(alphabet) + poly_feature_count();
    }
};

/// Laguerre polynomial L_k(x): L_0 = 1, L_1 = 1-x, standard recurrence.
double laguerre(int k, double x);

/// [all signature coordinates of degree <= sig_level ; Laguerre products of
/// the state coordinates with total degree <= poly_degree]. The tensor level
/// must be at least sig_level; state arity must match the spec.
void build_features(const TruncatedTensor& sig_at_t, std::span<const double> state_at_t,
                    const BasisSpec& basis, std::span<double> out);
Eigen::VectorXd build_features(const TruncatedTensor& sig_at_t, std::span<const double> state_at_t,
                               const BasisSpec& basis);

/// Minimum-norm least-squares solution of A beta ~ y via SVD; singular values
/// below tol * sigma_max are treated as zero, which discards linearly
/// dependent feature directions. An all-zero A yields the zero vector (the
/// caller is warned through the return flag).
struct LeastSquaresResult {
    Eigen::VectorXd beta;
    int rank = 0;
    bool degenerate = false;  // A was numerically zero
};
LeastSquaresResult least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double tol = 1e-10);

}  // namespace sigstop
