#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixlab {

/// Finite ordered symbol set. Symbols are printable characters; everywhere
/// else in the library a symbol is its index into this set.
class Alphabet {
public:
    explicit Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
        if (symbols_.size() < 2)
            throw std::invalid_argument("Alphabet: need at least two symbols");
        for (std::size_t i = 0; i < symbols_.size(); ++i)
            for (std::size_t j = i + 1; j < symbols_.size(); ++j)
                if (symbols_[i] == symbols_[j])
                    throw std::invalid_argument("Alphabet: duplicate symbol");
    }

    std::size_t size() const { return symbols_.size(); }

    char symbol(int index) const {
        if (index < 0 || static_cast<std::size_t>(index) >= symbols_.size())
            throw std::out_of_range("Alphabet::symbol: index out of range");
        return symbols_[static_cast<std::size_t>(index)];
    }

    int index_of(char c) const {
        const auto pos = symbols_.find(c);
        if (pos == std::string::npos)
            throw std::invalid_argument(std::string("Alphabet: unknown symbol '") + c + "'");
        return static_cast<int>(pos);
    }

    const std::string& symbols() const { return symbols_; }

    friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }
    friend bool operator!=(const Alphabet& a, const Alphabet& b) { return !(a == b); }

private:
    std::string symbols_;
};

} // namespace mixlab
