#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mixlab/alphabet.hpp"

namespace mixlab {

/// How a finite context word stands in for an infinite past beyond its depth:
/// either a designated padding symbol repeats forever, or the word itself does.
enum class Extension { Pad, Periodic };

/// Finite stand-in for an infinite history: a word (x_{-L},...,x_{-1}) stored
/// oldest-to-newest, plus a rule filling the past beyond depth L. Immutable.
class Context {
public:
    /// Largest agreement depth the library ever reports; beyond it, two
    /// histories are treated as identical.
    static constexpr std::int64_t agreement_cap = std::int64_t{1} << 16;

    Context(Alphabet alphabet, std::vector<int> word,
            Extension extension = Extension::Periodic, int pad_symbol = 0)
        : alphabet_(std::move(alphabet)),
          word_(std::move(word)),
          extension_(extension),
          pad_symbol_(pad_symbol) {
        for (int s : word_)
            if (s < 0 || static_cast<std::size_t>(s) >= alphabet_.size())
                throw std::invalid_argument("Context: symbol outside alphabet");
        if (pad_symbol_ < 0 || static_cast<std::size_t>(pad_symbol_) >= alphabet_.size())
            throw std::invalid_argument("Context: pad symbol outside alphabet");
        if (word_.empty() && extension_ == Extension::Periodic)
            extension_ = Extension::Pad; // nothing to repeat
    }

    static Context from_string(const Alphabet& alphabet, const std::string& word,
                               Extension extension = Extension::Periodic, int pad_symbol = 0) {
        std::vector<int> w;
        w.reserve(word.size());
        for (char c : word) w.push_back(alphabet.index_of(c));
        return Context(alphabet, std::move(w), extension, pad_symbol);
    }

    const Alphabet& alphabet() const { return alphabet_; }
    std::size_t length() const { return word_.size(); }
    const std::vector<int>& word() const { return word_; }
    Extension extension() const { return extension_; }
    int pad_symbol() const { return pad_symbol_; }

    /// Symbol at negative time j <= -1 (j = -1 is the most recent).
    int at(std::int64_t j) const {
        if (j > -1) throw std::invalid_argument("Context::at: time must be <= -1");
        const std::int64_t idx = static_cast<std::int64_t>(word_.size()) + j;
        if (idx >= 0) return word_[static_cast<std::size_t>(idx)];
        if (extension_ == Extension::Pad) return pad_symbol_;
        const std::int64_t L = static_cast<std::int64_t>(word_.size());
        return word_[static_cast<std::size_t>(((idx % L) + L) % L)];
    }

    /// Past with symbol a appended as the new most-recent symbol.
    Context extended(int a) const {
        std::vector<int> w = word_;
        w.push_back(a);
        if (a < 0 || static_cast<std::size_t>(a) >= alphabet_.size())
            throw std::invalid_argument("Context::extended: symbol outside alphabet");
        return Context(alphabet_, std::move(w), extension_, pad_symbol_);
    }

    std::string to_string() const {
        std::string s;
        s.reserve(word_.size());
        for (int a : word_) s.push_back(alphabet_.symbol(a));
        return s;
    }

    friend bool operator==(const Context& x, const Context& y) {
        return x.alphabet_ == y.alphabet_ && x.word_ == y.word_ &&
               x.extension_ == y.extension_ &&
               (x.extension_ == Extension::Periodic || x.pad_symbol_ == y.pad_symbol_);
    }

private:
    Alphabet alphabet_;
    std::vector<int> word_;
    Extension extension_;
    int pad_symbol_;
};

/// Largest m with x_j = y_j for all -m <= j <= -1, comparing the words and,
/// past them, the extension rules. Saturates at `cap` so downstream indexing
/// into modulus sequences stays total.
inline std::int64_t agreement_length(const Context& x, const Context& y,
                                     std::int64_t cap = Context::agreement_cap) {
    if (x.alphabet() != y.alphabet())
        throw std::invalid_argument("agreement_length: contexts over different alphabets");
    if (x == y) return cap;
    for (std::int64_t m = 0; m < cap; ++m) {
        if (x.at(-m - 1) != y.at(-m - 1)) return m;
    }
    return cap;
}

} // namespace mixlab
