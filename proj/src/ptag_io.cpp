#include "pulsesync/ptag_io.hpp"

#include "pulsesync/errors.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace psync {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'A', 'G'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 8 + 8;

template <typename T>
void put_le(std::string& buf, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

} // namespace

char symbol_letter(Symbol s) {
    switch (s) {
    case Symbol::Early: return 'E';
    case Symbol::Late: return 'L';
    case Symbol::Plus: return 'P';
    case Symbol::Minus: return 'M';
    }
    return '?';
}

Symbol symbol_from_letter(char c) {
    switch (c) {
    case 'E': return Symbol::Early;
    case 'L': return Symbol::Late;
    case 'P': return Symbol::Plus;
    case 'M': return Symbol::Minus;
    default: throw ValidationError("unknown symbol letter");
    }
}

void write_ptag(std::ostream& out, const PtagHeader& header,
                const std::vector<TimeTagPs>& tags) {
    if (header.resolution_ps == 0)
        throw ValidationError("tag file resolution must be at least 1 ps");
    for (std::size_t i = 1; i < tags.size(); ++i)
        if (tags[i] < tags[i - 1])
            throw ValidationError("tags must be non-decreasing");

    std::string buf;
    buf.reserve(kHeaderBytes + tags.size() * 8);
    buf.append(kMagic, 4);
    put_le<std::uint16_t>(buf, header.version);
    put_le<std::uint32_t>(buf, header.resolution_ps);
    put_le<std::uint64_t>(buf, header.f_c_mhz);
    put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(tags.size()));
    for (TimeTagPs t : tags)
        put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(t));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw IoError("failed to write tag file");
}

void write_ptag_file(const std::string& path, const PtagHeader& header,
                     const std::vector<TimeTagPs>& tags) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    write_ptag(f, header, tags);
}

PtagFile read_ptag(std::istream& in) {
    unsigned char head[kHeaderBytes];
    in.read(reinterpret_cast<char*>(head), kHeaderBytes);
    if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
        throw IoError("tag file truncated in header");
    if (std::memcmp(head, kMagic, 4) != 0)
        throw IoError("not a PTAG file");

    PtagFile file;
    file.header.version = get_le<std::uint16_t>(head + 4);
    file.header.resolution_ps = get_le<std::uint32_t>(head + 6);
    file.header.f_c_mhz = get_le<std::uint64_t>(head + 10);
    file.header.tag_count = get_le<std::uint64_t>(head + 18);
    if (file.header.version != 1)
        throw IoError("unsupported tag file version");
    if (file.header.tag_count > (1ull << 40))
        throw IoError("tag file claims an implausible tag count");

    file.tags.resize(file.header.tag_count);
    std::vector<unsigned char> raw(file.header.tag_count * 8);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError("tag file truncated in payload");
    for (std::size_t i = 0; i < file.tags.size(); ++i)
        file.tags[i] = static_cast<TimeTagPs>(get_le<std::uint64_t>(raw.data() + 8 * i));
    for (std::size_t i = 1; i < file.tags.size(); ++i)
        if (file.tags[i] < file.tags[i - 1])
            throw IoError("tag file is not sorted");
    return file;
}

PtagFile read_ptag_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path);
    return read_ptag(f);
}

void write_truth_csv(std::ostream& out, const std::vector<TruthRecord>& truth) {
    out << "pulse_index,symbol,true_time_ps\n";
    char line[64];
    for (const auto& r : truth) {
        std::snprintf(line, sizeof line, "%llu,%c,%lld\n",
                      static_cast<unsigned long long>(r.pulse_index), symbol_letter(r.symbol),
                      static_cast<long long>(r.true_emit_ps));
        out << line;
    }
    if (!out)
        throw IoError("failed to write truth CSV");
}

void write_truth_csv_file(const std::string& path, const std::vector<TruthRecord>& truth) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    write_truth_csv(f, truth);
}

std::vector<TruthRecord> read_truth_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("pulse_index,", 0) != 0)
        throw IoError("truth CSV missing header");
    std::vector<TruthRecord> truth;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        unsigned long long idx = 0;
        char sym = 0;
        long long t = 0;
        if (std::sscanf(line.c_str(), "%llu,%c,%lld", &idx, &sym, &t) != 3)
            throw IoError("truth CSV row malformed");
        truth.push_back({idx, symbol_from_letter(sym), static_cast<TimeTagPs>(t)});
    }
    return truth;
}

} // namespace psync
