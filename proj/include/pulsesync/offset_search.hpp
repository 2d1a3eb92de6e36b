#pragma once

#include <cstdint>
#include <vector>

#include "pulsesync/types.hpp"

namespace psync {

// Decoded receiver symbol: which pulse period a tag belongs to and whether
// it landed in the Early or Late half. A tag at remainder r of the period
// decodes as Early of period q for r < P/4, Late of q for r < 3P/4 and
// Early of q+1 beyond that.
struct DecodedTag {
    std::int64_t period_index; // periods since the decode anchor
    bool late;                 // false: Early bin, true: Late bin
};

DecodedTag decode_tag(TimeTagPs tag, double anchor_ps, double period_ps);

struct OffsetSearchResult {
    std::int64_t best_shift = 0;        // symbols, minimizing QBER
    double min_qber = 1.0;
    double absolute_offset_ps = 0.0;    // relative_offset + best_shift * period
    std::uint64_t compared = 0;         // sifted comparisons at the best shift
    std::vector<std::int64_t> shifts;   // tested shifts
    std::vector<double> qber_curve;     // QBER per tested shift
};

// Finds the integer-period alignment between the received tag stream and the
// sent symbol sequence by scanning cyclic shifts and locating the error-rate
// dip. Tags are decoded against relative_offset_ps; only symbols sent in the
// timing basis (Early/Late) enter the error rate, mirroring basis sifting.
// The result is ambiguous modulo the sequence duration; shifts are reported
// in (-L/2, L/2]. Throws AlignmentFailedError when no dip (QBER <= 0.25)
// exists.
OffsetSearchResult absolute_offset_search(const std::vector<TimeTagPs>& tags,
                                          const SymbolSequence& seq, double relative_offset_ps,
                                          double f_c_hz, std::int64_t max_shift);

// QBER of one specific alignment: seq index of period q is (q + index0) mod L.
// Returns comparisons made via `compared`.
double qber_at_alignment(const std::vector<TimeTagPs>& tags, const SymbolSequence& seq,
                         double relative_offset_ps, double period_ps, std::int64_t index0,
                         std::uint64_t* compared = nullptr);

} // namespace psync
