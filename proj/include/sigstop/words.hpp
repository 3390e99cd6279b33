#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sigstop {

/// A word over the alphabet {1,...,e}: the index of one signature coordinate.
/// The empty word has degree 0 and names the constant coordinate.
class Word {
public:
    Word() = default;
    explicit Word(std::vector<std::uint8_t> letters) : letters_(std::move(letters)) {}
    Word(std::initializer_list<std::uint8_t> letters) : letters_(letters) {}

    static Word empty() { return Word(); }

    int degree() const { return static_cast<int>(letters_.size()); }
    bool is_empty() const { return letters_.empty(); }
    const std::vector<std::uint8_t>& letters() const { return letters_; }
    std::uint8_t letter(int i) const { return letters_[static_cast<std::size_t>(i)]; }
    std::uint8_t max_letter() const;

    /// Word with the last letter removed (precondition: non-empty).
    Word parent() const;
    /// Word extended by one letter on the right.
    Word append(std::uint8_t letter) const;

    /// Lexicographic index among the words of the same degree over {1..e}:
    /// i1...ik -> sum (i_j - 1) e^(k-j).
    std::size_t lex_index(int alphabet_size) const;

    /// Digit-string rendering; the empty word renders as "e".
    std::string str() const;

    friend bool operator==(const Word&, const Word&) = default;
    friend auto operator<=>(const Word& a, const Word& b) {
        return a.letters_ <=> b.letters_;
    }

private:
    std::vector<std::uint8_t> letters_;
};

/// Finite linear combination of words with real coefficients.
/// Zero coefficients are never stored.
class LinearFunctional {
public:
    LinearFunctional() = default;

    static LinearFunctional of(const Word& w, double coeff = 1.0);

    void add(const Word& w, double coeff);
    double coeff(const Word& w) const;
    int degree() const;
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    const std::map<Word, double>& terms() const { return terms_; }

    LinearFunctional& operator+=(const LinearFunctional& other);
    LinearFunctional& operator*=(double c);

    friend bool operator==(const LinearFunctional&, const LinearFunctional&) = default;

private:
    std::map<Word, double> terms_;
};

/// Shuffle product of two words: sum of interleavings, positive integer
/// coefficients, total coefficient mass binomial(deg w + deg v, deg w).
LinearFunctional shuffle(const Word& w, const Word& v);

/// Bilinear extension of the shuffle product to linear combinations.
LinearFunctional shuffle_lin(const LinearFunctional& l1, const LinearFunctional& l2);

/// All words of degree <= max_degree over {1..e}, graded then lexicographic.
/// This is the storage order of TruncatedTensor coordinates.
std::vector<Word> enumerate_words(int alphabet_size, int max_degree);

}  // namespace sigstop
