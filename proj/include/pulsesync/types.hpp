#pragma once

#include <cstdint>
#include <vector>

namespace psync {

// All absolute times and time tags are integer picoseconds.
using TimeTagPs = std::int64_t;

// Pulse-position symbols. Early/Late occupy the first/second half of a
// symbol period; Plus/Minus are superposition symbols that detect in either
// half with equal probability.
enum class Symbol : std::uint8_t {
    Early = 0,
    Late = 1,
    Plus = 2,
    Minus = 3,
};

inline bool is_timing_basis(Symbol s) { return s == Symbol::Early || s == Symbol::Late; }

// Periodic symbol pattern shared by sender and receiver.
struct SymbolSequence {
    std::vector<Symbol> symbols;

    std::size_t size() const { return symbols.size(); }

    // Symbol of pulse `index` for an infinitely repeated pattern.
    Symbol at_pulse(std::uint64_t index) const {
        return symbols[static_cast<std::size_t>(index % symbols.size())];
    }

    // Deterministic pseudo-random sequence, balanced over the four symbols.
    static SymbolSequence from_seed(std::uint64_t seed, std::size_t length);
};

} // namespace psync
