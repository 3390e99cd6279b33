#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sigstop/words.hpp"

namespace sigstop {

/// Element of the step-K truncated tensor algebra over R^e, stored as one
/// dense coefficient block per level 0..K. Level-k coordinates are indexed
/// lexicographically by words i1...ik -> sum (i_j - 1) e^(k-j).
class TruncatedTensor {
public:
    TruncatedTensor() = default;
    TruncatedTensor(int alphabet_size, int level);

    /// (1, 0, ..., 0): the identity of the concatenation product.
    static TruncatedTensor unit(int alphabet_size, int level);

    int alphabet_size() const { return e_; }
    int level() const { return K_; }
    /// Total coordinate count sum_{k<=K} e^k.
    std::size_t dim() const { return coeffs_.size(); }

    std::size_t level_offset(int k) const { return offsets_[static_cast<std::size_t>(k)]; }
    std::size_t level_size(int k) const;
    std::span<double> block(int k);
    std::span<const double> block(int k) const;

    std::span<double> coeffs() { return coeffs_; }
    std::span<const double> coeffs() const { return coeffs_; }
    double& scalar() { return coeffs_[0]; }
    double scalar() const { return coeffs_[0]; }

    double coeff(const Word& w) const;
    void set_coeff(const Word& w, double value);

    TruncatedTensor& operator+=(const TruncatedTensor& other);
    TruncatedTensor& operator*=(double c);

private:
    int e_ = 0;
    int K_ = -1;
    std::vector<std::size_t> offsets_;  // offsets_[k] = start of block k, plus total at the end
    std::vector<double> coeffs_;
};

/// Graded concatenation product truncated at the common level:
/// c^(k) = sum_{i+j=k} a^(i) (x) b^(j). Throws on shape mismatch.
TruncatedTensor concat_product(const TruncatedTensor& a, const TruncatedTensor& b);

/// In-place variant: a <- a * b using the caller's scratch buffer
/// (resized as needed). Used by the signature stream hot loop.
void concat_product_inplace(TruncatedTensor& a, const TruncatedTensor& b,
                            std::vector<double>& scratch);

/// Pairing <a, l>. Throws if a term's degree exceeds a.level().
double inner(const TruncatedTensor& a, const Word& w);
double inner(const TruncatedTensor& a, const LinearFunctional& l);

/// Tensor exponential of a one-segment increment: block k = incr^(x k)/k!.
TruncatedTensor tensor_exp(std::span<const double> increment, int level);
void tensor_exp_into(TruncatedTensor& out, std::span<const double> increment);

/// Euclidean norm over all coordinates, level 0 included.
double tensor_norm(const TruncatedTensor& a);

/// Dilation delta_c: block k scaled by c^k.
TruncatedTensor dilate(const TruncatedTensor& a, double c);
void dilate_inplace(TruncatedTensor& a, double c);

/// Tensor normalization onto the ball of radius R (R > 1): group-like input
/// with norm above R is dilated by the unique c in (0,1) with
/// ||dilate(a,c)|| = R; inputs already inside the ball pass through.
/// Root-find is bisection, residual tolerance 1e-12, at most 200 iterations.
TruncatedTensor normalize(const TruncatedTensor& a, double R);
void normalize_inplace(TruncatedTensor& a, double R);

/// Debug dump: one CSV line "level,word,coefficient" per coordinate,
/// the empty word rendered as "e".
void dump_csv(const TruncatedTensor& a, std::ostream& os);

}  // namespace sigstop
