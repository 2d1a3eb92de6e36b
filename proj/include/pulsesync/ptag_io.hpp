#pragma once

#include "pulsesync/photon_sim.hpp"
#include "pulsesync/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psync {

// Binary time-tag container. Little-endian layout:
//   "PTAG"  magic            4 bytes
//   u16     format version   (currently 1)
//   u32     resolution_ps
//   u64     nominal clock frequency in mHz
//   u64     tag count
//   u64[]   tags, picoseconds, non-decreasing
struct PtagHeader {
    std::uint16_t version = 1;
    std::uint32_t resolution_ps = 1;
    std::uint64_t f_c_mhz = 0;
    std::uint64_t tag_count = 0;
};

struct PtagFile {
    PtagHeader header;
    std::vector<TimeTagPs> tags;
};

void write_ptag(std::ostream& out, const PtagHeader& header,
                const std::vector<TimeTagPs>& tags);
void write_ptag_file(const std::string& path, const PtagHeader& header,
                     const std::vector<TimeTagPs>& tags);
PtagFile read_ptag(std::istream& in);
PtagFile read_ptag_file(const std::string& path);

// Truth sidecar: one CSV row per signal detection with columns
// pulse_index,symbol,true_time_ps. Background counts have no provenance and
// are absent.
void write_truth_csv(std::ostream& out, const std::vector<TruthRecord>& truth);
void write_truth_csv_file(const std::string& path, const std::vector<TruthRecord>& truth);
std::vector<TruthRecord> read_truth_csv(std::istream& in);

char symbol_letter(Symbol s);
Symbol symbol_from_letter(char c);

} // namespace psync
