#include "pulsesync/types.hpp"

#include <algorithm>
#include <random>

#include "pulsesync/errors.hpp"
#include "pulsesync/rng.hpp"

namespace psync {

SymbolSequence SymbolSequence::from_seed(std::uint64_t seed, std::size_t length) {
    if (length == 0) throw ValidationError("symbol sequence length must be positive");
    std::mt19937_64 gen(derive_seed(seed, 0x5e9));
    SymbolSequence seq;
    seq.symbols.reserve(length);
    // Equal shares of the four symbols (ragged lengths spread round-robin),
    // in shuffled order: the Early and Late correlation peaks come out the
    // same height and the error-rate dip search sees a maximally random
    // pattern.
    for (std::size_t i = 0; i < length; ++i)
        seq.symbols.push_back(static_cast<Symbol>(i % 4));
    std::shuffle(seq.symbols.begin(), seq.symbols.end(), gen);
    return seq;
}

} // namespace psync
