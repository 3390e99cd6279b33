#include "sigstop/regression.hpp"

#include <stdexcept>

namespace sigstop {

std::size_t BasisSpec::sig_feature_count(int alphabet) const {
    std::size_t n = 0, sz = 1;
    for (int k = 0; k <= sig_level; ++k) {
        n += sz;
        sz *= static_cast<std::size_t>(alphabet);
    }
    return n;
}

std::size_t BasisSpec::poly_feature_count() const {
    if (poly_degree <= 0 || state_arity <= 0) return 0;
    // multi-indices over state_arity coordinates with total degree <= poly_degree
    std::size_t n = 1;
    for (int i = 1; i <= state_arity; ++i)
        n = n * static_cast<std::size_t>(poly_degree + i) / static_cast<std::size_t>(i);
    return n;
}

double laguerre(int k, double x) {
    if (k < 0) throw std::invalid_argument("laguerre: negative degree");
    if (k == 0) return 1.0;
    double prev = 1.0, cur = 1.0 - x;
    for (int n = 1; n < k; ++n) {
        const double next = ((2.0 * n + 1.0 - x) * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

namespace {

// Appends the Laguerre products in a fixed recursive (lexicographic) order.
void emit_poly_products(std::span<const double> state, const BasisSpec& basis, int coord,
                        int degree_left, double acc, std::span<double> out, std::size_t& pos) {
    if (coord == basis.state_arity) {
        out[pos++] = acc;
        return;
    }
    for (int k = 0; k <= degree_left; ++k)
        emit_poly_products(state, basis, coord + 1, degree_left - k,
                           acc * laguerre(k, state[static_cast<std::size_t>(coord)]), out, pos);
}

}  // namespace

void build_features(const TruncatedTensor& sig_at_t, std::span<const double> state_at_t,
                    const BasisSpec& basis, std::span<double> out) {
    if (sig_at_t.level() < basis.sig_level)
        throw std::invalid_argument("build_features: tensor level below basis sig_level");
    if (static_cast<int>(state_at_t.size()) < basis.state_arity)
        throw std::invalid_argument("build_features: state arity mismatch");
    const int e = sig_at_t.alphabet_size();
    const std::size_t n_sig = basis.sig_feature_count(e);
    if (out.size() != basis.feature_count(e))
        throw std::invalid_argument("build_features: output span has wrong length");

    const auto coeffs = sig_at_t.coeffs();
    for (std::size_t i = 0; i < n_sig; ++i) out[i] = coeffs[i];

    if (basis.poly_feature_count() > 0) {
        std::size_t pos = n_sig;
        emit_poly_products(state_at_t, basis, 0, basis.poly_degree, 1.0, out, pos);
    }
}

Eigen::VectorXd build_features(const TruncatedTensor& sig_at_t, std::span<const double> state_at_t,
                               const BasisSpec& basis) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(basis.feature_count(sig_at_t.alphabet_size())));
    build_features(sig_at_t, state_at_t, basis, {f.data(), static_cast<std::size_t>(f.size())});
    return f;
}

LeastSquaresResult least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double tol) {
    if (A.rows() != y.size()) throw std::invalid_argument("least_squares: row count mismatch");
    LeastSquaresResult res;
    if (A.size() == 0 || A.lpNorm<Eigen::Infinity>() == 0.0) {
        res.beta = Eigen::VectorXd::Zero(A.cols());
        res.degenerate = true;
        return res;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(tol);
    res.beta = svd.solve(y);
    res.rank = static_cast<int>(svd.rank());
    return res;
}

}  // namespace sigstop
