#include "sigstop/words.hpp"

#include <algorithm>
#include <stdexcept>

namespace sigstop {

std::uint8_t Word::max_letter() const {
    std::uint8_t m = 0;
    for (auto l : letters_) m = std::max(m, l);
    return m;
}

Word Word::parent() const {
    Word p(*this);
    p.letters_.pop_back();
    return p;
}

Word Word::append(std::uint8_t letter) const {
    Word w(*this);
    w.letters_.push_back(letter);
    return w;
}

std::size_t Word::lex_index(int alphabet_size) const {
    std::size_t idx = 0;
    for (auto l : letters_) {
        if (l < 1 || l > alphabet_size)
            throw std::out_of_range("Word::lex_index: letter outside alphabet");
        idx = idx * static_cast<std::size_t>(alphabet_size) + (l - 1);
    }
    return idx;
}

std::string Word::str() const {
    if (letters_.empty()) return "e";
    std::string s;
    for (auto l : letters_) s += static_cast<char>('0' + l);
    return s;
}

LinearFunctional LinearFunctional::of(const Word& w, double coeff) {
    LinearFunctional l;
    l.add(w, coeff);
    return l;
}

void LinearFunctional::add(const Word& w, double coeff) {
    if (coeff == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(w, coeff);
    if (!inserted) {
        it->second += coeff;
        if (it->second == 0.0) terms_.erase(it);
    }
}

double LinearFunctional::coeff(const Word& w) const {
    auto it = terms_.find(w);
    return it == terms_.end() ? 0.0 : it->second;
}

int LinearFunctional::degree() const {
    int d = 0;
    for (const auto& [w, c] : terms_) d = std::max(d, w.degree());
    return d;
}

LinearFunctional& LinearFunctional::operator+=(const LinearFunctional& other) {
    for (const auto& [w, c] : other.terms_) add(w, c);
    return *this;
}

LinearFunctional& LinearFunctional::operator*=(double c) {
    if (c == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [w, v] : terms_) v *= c;
    return *this;
}

LinearFunctional shuffle(const Word& w, const Word& v) {
    if (w.is_empty()) return LinearFunctional::of(v);
    if (v.is_empty()) return LinearFunctional::of(w);
    // wi ⧢ vj = (w ⧢ vj)i + (wi ⧢ v)j
    const std::uint8_t i = w.letter(w.degree() - 1);
    const std::uint8_t j = v.letter(v.degree() - 1);
    LinearFunctional out;
    for (const auto& [u, c] : shuffle(w.parent(), v).terms()) out.add(u.append(i), c);
    for (const auto& [u, c] : shuffle(w, v.parent()).terms()) out.add(u.append(j), c);
    return out;
}

LinearFunctional shuffle_lin(const LinearFunctional& l1, const LinearFunctional& l2) {
    LinearFunctional out;
    for (const auto& [w, cw] : l1.terms())
        for (const auto& [v, cv] : l2.terms()) {
            LinearFunctional s = shuffle(w, v);
            s *= cw * cv;
            out += s;
        }
    return out;
}

std::vector<Word> enumerate_words(int alphabet_size, int max_degree) {
    std::vector<Word> out;
    out.emplace_back();
    std::size_t level_begin = 0;
    for (int k = 1; k <= max_degree; ++k) {
        const std::size_t level_end = out.size();
        for (std::size_t i = level_begin; i < level_end; ++i)
            for (std::uint8_t l = 1; l <= alphabet_size; ++l)
                out.push_back(out[i].append(l));
        level_begin = level_end;
    }
    return out;
}

}  // namespace sigstop
