#include "sigstop/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace sigstop {

TruncatedTensor::TruncatedTensor(int alphabet_size, int level) : e_(alphabet_size), K_(level) {
    if (alphabet_size < 1) throw std::invalid_argument("TruncatedTensor: alphabet_size < 1");
    if (level < 0) throw std::invalid_argument("TruncatedTensor: level < 0");
    offsets_.resize(static_cast<std::size_t>(level) + 2);
    std::size_t off = 0, sz = 1;
    for (int k = 0; k <= level; ++k) {
        offsets_[static_cast<std::size_t>(k)] = off;
        off += sz;
        sz *= static_cast<std::size_t>(alphabet_size);
    }
    offsets_.back() = off;
    coeffs_.assign(off, 0.0);
}

TruncatedTensor TruncatedTensor::unit(int alphabet_size, int level) {
    TruncatedTensor t(alphabet_size, level);
    t.coeffs_[0] = 1.0;
    return t;
}

std::size_t TruncatedTensor::level_size(int k) const {
    return offsets_[static_cast<std::size_t>(k) + 1] - offsets_[static_cast<std::size_t>(k)];
}

std::span<double> TruncatedTensor::block(int k) {
    return {coeffs_.data() + level_offset(k), level_size(k)};
}

std::span<const double> TruncatedTensor::block(int k) const {
    return {coeffs_.data() + level_offset(k), level_size(k)};
}

double TruncatedTensor::coeff(const Word& w) const {
    if (w.degree() > K_) throw std::out_of_range("TruncatedTensor::coeff: word degree exceeds level");
    return coeffs_[level_offset(w.degree()) + w.lex_index(e_)];
}

void TruncatedTensor::set_coeff(const Word& w, double value) {
    if (w.degree() > K_) throw std::out_of_range("TruncatedTensor::set_coeff: word degree exceeds level");
    coeffs_[level_offset(w.degree()) + w.lex_index(e_)] = value;
}

TruncatedTensor& TruncatedTensor::operator+=(const TruncatedTensor& other) {
    if (e_ != other.e_ || K_ != other.K_)
        throw std::invalid_argument("TruncatedTensor::operator+=: shape mismatch");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
}

TruncatedTensor& TruncatedTensor::operator*=(double c) {
    for (double& v : coeffs_) v *= c;
    return *this;
}

namespace {

// c_k += a_i (x) b_j for all i+j = k, writing into `out` (preset to zero).
void accumulate_concat(std::span<const double> a, std::span<const double> b, const TruncatedTensor& shape,
                       std::vector<double>& out) {
    const int K = shape.level();
    for (int k = 0; k <= K; ++k) {
        double* ck = out.data() + shape.level_offset(k);
        for (int i = 0; i <= k; ++i) {
            const int j = k - i;
            const double* ai = a.data() + shape.level_offset(i);
            const double* bj = b.data() + shape.level_offset(j);
            const std::size_t ni = shape.level_size(i);
            const std::size_t nj = shape.level_size(j);
            for (std::size_t p = 0; p < ni; ++p) {
                const double ap = ai[p];
                if (ap == 0.0) continue;
                double* dst = ck + p * nj;
                for (std::size_t q = 0; q < nj; ++q) dst[q] += ap * bj[q];
            }
        }
    }
}

}  // namespace

TruncatedTensor concat_product(const TruncatedTensor& a, const TruncatedTensor& b) {
    if (a.alphabet_size() != b.alphabet_size() || a.level() != b.level())
        throw std::invalid_argument("concat_product: shape mismatch");
    TruncatedTensor c(a.alphabet_size(), a.level());
    std::vector<double> out(c.dim(), 0.0);
    accumulate_concat(a.coeffs(), b.coeffs(), a, out);
    std::copy(out.begin(), out.end(), c.coeffs().begin());
    return c;
}

void concat_product_inplace(TruncatedTensor& a, const TruncatedTensor& b, std::vector<double>& scratch) {
    if (a.alphabet_size() != b.alphabet_size() || a.level() != b.level())
        throw std::invalid_argument("concat_product_inplace: shape mismatch");
    scratch.assign(a.dim(), 0.0);
    accumulate_concat(a.coeffs(), b.coeffs(), a, scratch);
    std::copy(scratch.begin(), scratch.end(), a.coeffs().begin());
}

double inner(const TruncatedTensor& a, const Word& w) {
    if (w.degree() > a.level()) throw std::out_of_range("inner: word degree exceeds tensor level");
    if (w.max_letter() > a.alphabet_size()) throw std::out_of_range("inner: letter outside alphabet");
    return a.coeff(w);
}

double inner(const TruncatedTensor& a, const LinearFunctional& l) {
    double s = 0.0;
    for (const auto& [w, c] : l.terms()) s += c * inner(a, w);
    return s;
}

TruncatedTensor tensor_exp(std::span<const double> increment, int level) {
    TruncatedTensor t(static_cast<int>(increment.size()), level);
    tensor_exp_into(t, increment);
    return t;
}

void tensor_exp_into(TruncatedTensor& out, std::span<const double> increment) {
    const int e = out.alphabet_size();
    if (static_cast<int>(increment.size()) != e)
        throw std::invalid_argument("tensor_exp_into: increment dimension != alphabet size");
    out.scalar() = 1.0;
    const int K = out.level();
    for (int k = 1; k <= K; ++k) {
        const double* prev = out.coeffs().data() + out.level_offset(k - 1);
        double* cur = out.coeffs().data() + out.level_offset(k);
        const std::size_t np = out.level_size(k - 1);
        const double inv_k = 1.0 / static_cast<double>(k);
        for (std::size_t p = 0; p < np; ++p) {
            const double v = prev[p] * inv_k;
            double* dst = cur + p * static_cast<std::size_t>(e);
            for (int q = 0; q < e; ++q) dst[q] = v * increment[static_cast<std::size_t>(q)];
        }
    }
}

double tensor_norm(const TruncatedTensor& a) {
    double s = 0.0;
    for (double v : a.coeffs()) s += v * v;
    return std::sqrt(s);
}

TruncatedTensor dilate(const TruncatedTensor& a, double c) {
    TruncatedTensor out(a);
    dilate_inplace(out, c);
    return out;
}

void dilate_inplace(TruncatedTensor& a, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("dilate: scale must be positive");
    double ck = 1.0;
    for (int k = 1; k <= a.level(); ++k) {
        ck *= c;
        for (double& v : a.block(k)) v *= ck;
    }
}

namespace {

// ||dilate(a,c)||^2 = sum_k A_k c^(2k) with A_k = ||block k||^2.
double dilated_norm(const std::vector<double>& level_sq, double c) {
    const double c2 = c * c;
    double s = 0.0;
    for (std::size_t k = level_sq.size(); k-- > 0;) s = s * c2 + level_sq[k];
    return std::sqrt(s);
}

}  // namespace

void normalize_inplace(TruncatedTensor& a, double R) {
    if (!(R > 1.0)) throw std::invalid_argument("normalize: R must exceed 1");
    const double norm = tensor_norm(a);
    if (norm <= R) return;

    std::vector<double> level_sq(static_cast<std::size_t>(a.level()) + 1, 0.0);
    for (int k = 0; k <= a.level(); ++k) {
        double s = 0.0;
        for (double v : a.block(k)) s += v * v;
        level_sq[static_cast<std::size_t>(k)] = s;
    }

    // The norm is strictly increasing in c (level 0 contributes the constant 1,
    // and some higher block is nonzero here), so the root in (0,1) is unique.
    double lo = 0.0, hi = 1.0, c = 0.5;
    for (int it = 0; it < 200; ++it) {
        c = 0.5 * (lo + hi);
        const double r = dilated_norm(level_sq, c) - R;
        if (std::abs(r) <= 1e-12) break;
        (r > 0.0 ? hi : lo) = c;
    }
    dilate_inplace(a, c);
}

TruncatedTensor normalize(const TruncatedTensor& a, double R) {
    TruncatedTensor out(a);
    normalize_inplace(out, R);
    return out;
}

void dump_csv(const TruncatedTensor& a, std::ostream& os) {
    const auto words = enumerate_words(a.alphabet_size(), a.level());
    char buf[64];
    for (const auto& w : words) {
        std::snprintf(buf, sizeof(buf), "%.17g", a.coeff(w));
        os << w.degree() << ',' << w.str() << ',' << buf << '\n';
    }
}

}  // namespace sigstop
