#include "pulsesync/offset_search.hpp"

#include <cmath>

#include "pulsesync/errors.hpp"

namespace psync {

namespace {

inline std::size_t wrap_index(std::int64_t v, std::int64_t L) {
    return static_cast<std::size_t>(((v % L) + L) % L);
}

} // namespace

DecodedTag decode_tag(TimeTagPs tag, double anchor_ps, double period_ps) {
    const double d = static_cast<double>(tag) - anchor_ps;
    const auto m = static_cast<std::int64_t>(std::floor((d + period_ps / 4) / period_ps));
    const double r4 = d - static_cast<double>(m) * period_ps; // in [-P/4, 3P/4)
    return {m, r4 >= period_ps / 4};
}

OffsetSearchResult absolute_offset_search(const std::vector<TimeTagPs>& tags,
                                          const SymbolSequence& seq, double relative_offset_ps,
                                          double f_c_hz, std::int64_t max_shift) {
    if (seq.size() == 0) throw ValidationError("offset search needs a symbol sequence");
    if (!(f_c_hz > 0) || !std::isfinite(f_c_hz))
        throw ValidationError("offset search needs a positive clock rate");
    const double period = 1e12 / f_c_hz;
    const auto L = static_cast<std::int64_t>(seq.size());

    // Aggregate decoded tags into per-sequence-position bin counts; every
    // cyclic shift is then a cheap pass over the sequence instead of the tags.
    std::vector<std::uint64_t> early(seq.size(), 0), late(seq.size(), 0);
    for (TimeTagPs t : tags) {
        const DecodedTag d = decode_tag(t, relative_offset_ps, period);
        ++(d.late ? late : early)[wrap_index(d.period_index, L)];
    }

    std::int64_t lo, hi;
    if (max_shift >= 0 && 2 * max_shift + 1 < L) {
        lo = -max_shift;
        hi = max_shift;
    } else {
        lo = -(L / 2) + 1;
        hi = L / 2;
    }

    OffsetSearchResult res;
    res.shifts.reserve(static_cast<std::size_t>(hi - lo + 1));
    res.qber_curve.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t s = lo; s <= hi; ++s) {
        std::uint64_t errors = 0, compared = 0;
        for (std::int64_t q = 0; q < L; ++q) {
            const Symbol sent = seq.symbols[wrap_index(q - s, L)];
            if (!is_timing_basis(sent)) continue;
            const std::uint64_t e = early[static_cast<std::size_t>(q)];
            const std::uint64_t l = late[static_cast<std::size_t>(q)];
            compared += e + l;
            errors += sent == Symbol::Early ? l : e;
        }
        const double qber =
            compared ? static_cast<double>(errors) / static_cast<double>(compared) : 1.0;
        res.shifts.push_back(s);
        res.qber_curve.push_back(qber);
        if (qber < res.min_qber) {
            res.min_qber = qber;
            res.best_shift = s;
            res.compared = compared;
        }
    }

    if (res.min_qber > 0.25)
        throw AlignmentFailedError("no error-rate dip found over the tested shifts");
    res.absolute_offset_ps = relative_offset_ps + static_cast<double>(res.best_shift) * period;
    return res;
}

double qber_at_alignment(const std::vector<TimeTagPs>& tags, const SymbolSequence& seq,
                         double relative_offset_ps, double period_ps, std::int64_t index0,
                         std::uint64_t* compared_out) {
    const auto L = static_cast<std::int64_t>(seq.size());
    std::uint64_t errors = 0, compared = 0;
    for (TimeTagPs t : tags) {
        const DecodedTag d = decode_tag(t, relative_offset_ps, period_ps);
        const Symbol sent = seq.symbols[wrap_index(d.period_index + index0, L)];
        if (!is_timing_basis(sent)) continue;
        ++compared;
        if (d.late != (sent == Symbol::Late)) ++errors;
    }
    if (compared_out) *compared_out = compared;
    return compared ? static_cast<double>(errors) / static_cast<double>(compared) : 1.0;
}

} // namespace psync
