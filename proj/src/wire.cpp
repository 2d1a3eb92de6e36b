#include "pulsesync/wire.hpp"

#include <bit>
#include <cstring>

namespace psync {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'Y', 'N'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::string& buf, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double value) {
    put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(value));
}

template <typename T>
T get_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

double get_f64(const unsigned char* p) {
    return std::bit_cast<double>(get_le<std::uint64_t>(p));
}

std::string encode_payload(const Message& msg) {
    std::string p;
    switch (message_type(msg)) {
    case MsgType::Tags: {
        const auto& m = std::get<TagsMsg>(msg);
        if (m.tags.size() > kMaxTagsPerFrame)
            throw DecodeError(DecodeFault::Oversize, "tag batch exceeds one frame");
        for (std::size_t i = 1; i < m.tags.size(); ++i)
            if (m.tags[i] <= m.tags[i - 1])
                throw DecodeError(DecodeFault::Malformed, "tags must be strictly increasing");
        p.reserve(8 + m.tags.size() * 8);
        put_le<std::uint64_t>(p, m.tags.size());
        for (TimeTagPs t : m.tags)
            put_le<std::uint64_t>(p, static_cast<std::uint64_t>(t));
        break;
    }
    case MsgType::SeqRequest:
        break;
    case MsgType::SeqReveal: {
        const auto& m = std::get<SeqRevealMsg>(msg);
        const std::size_t n = m.symbols.size();
        p.reserve(4 + (n + 3) / 4);
        put_le<std::uint32_t>(p, static_cast<std::uint32_t>(n));
        std::uint8_t byte = 0;
        for (std::size_t i = 0; i < n; ++i) {
            byte |= static_cast<std::uint8_t>(static_cast<int>(m.symbols[i]) & 0x3)
                    << (2 * (i % 4));
            if (i % 4 == 3) {
                p.push_back(static_cast<char>(byte));
                byte = 0;
            }
        }
        if (n % 4 != 0)
            p.push_back(static_cast<char>(byte));
        break;
    }
    case MsgType::InitDone: {
        const auto& m = std::get<InitDoneMsg>(msg);
        put_le<std::uint64_t>(p, static_cast<std::uint64_t>(m.absolute_offset_ps));
        put_f64(p, m.freq_diff);
        break;
    }
    case MsgType::Status: {
        const auto& m = std::get<StatusMsg>(msg);
        put_f64(p, m.qber);
        put_f64(p, m.a_posteriori_jitter_ps);
        break;
    }
    case MsgType::Error: {
        const auto& m = std::get<ErrorMsg>(msg);
        put_le<std::uint16_t>(p, m.code);
        p.append(m.text);
        break;
    }
    }
    return p;
}

Message parse_payload(std::uint8_t type, const unsigned char* p, std::size_t len) {
    switch (static_cast<MsgType>(type)) {
    case MsgType::Tags: {
        if (len < 8)
            throw DecodeError(DecodeFault::Malformed, "TAGS payload shorter than count word");
        const auto count = get_le<std::uint64_t>(p);
        if (len != 8 + count * 8)
            throw DecodeError(DecodeFault::Malformed, "TAGS count disagrees with length");
        TagsMsg m;
        m.tags.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            m.tags[i] = static_cast<TimeTagPs>(get_le<std::uint64_t>(p + 8 + 8 * i));
            if (i > 0 && m.tags[i] <= m.tags[i - 1])
                throw DecodeError(DecodeFault::Malformed, "TAGS not strictly increasing");
        }
        return m;
    }
    case MsgType::SeqRequest:
        if (len != 0)
            throw DecodeError(DecodeFault::Malformed, "SEQ_REQUEST carries no payload");
        return SeqRequestMsg{};
    case MsgType::SeqReveal: {
        if (len < 4)
            throw DecodeError(DecodeFault::Malformed, "SEQ_REVEAL payload shorter than count");
        const auto count = get_le<std::uint32_t>(p);
        if (len != 4 + (static_cast<std::size_t>(count) + 3) / 4)
            throw DecodeError(DecodeFault::Malformed, "SEQ_REVEAL count disagrees with length");
        SeqRevealMsg m;
        m.symbols.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint8_t bits = (p[4 + i / 4] >> (2 * (i % 4))) & 0x3;
            m.symbols.push_back(static_cast<Symbol>(bits));
        }
        return m;
    }
    case MsgType::InitDone: {
        if (len != 16)
            throw DecodeError(DecodeFault::Malformed, "INIT_DONE payload must be 16 bytes");
        InitDoneMsg m;
        m.absolute_offset_ps = static_cast<std::int64_t>(get_le<std::uint64_t>(p));
        m.freq_diff = get_f64(p + 8);
        return m;
    }
    case MsgType::Status: {
        if (len != 16)
            throw DecodeError(DecodeFault::Malformed, "STATUS payload must be 16 bytes");
        return StatusMsg{get_f64(p), get_f64(p + 8)};
    }
    case MsgType::Error: {
        if (len < 2)
            throw DecodeError(DecodeFault::Malformed, "ERROR payload shorter than code");
        ErrorMsg m;
        m.code = get_le<std::uint16_t>(p);
        m.text.assign(reinterpret_cast<const char*>(p + 2), len - 2);
        return m;
    }
    default:
        throw DecodeError(DecodeFault::UnknownType, "unknown message type");
    }
}

// Header validation shared by the one-shot and streaming decoders. Returns
// the payload length.
std::size_t check_header(const unsigned char* p) {
    if (std::memcmp(p, kMagic, 4) != 0)
        throw DecodeError(DecodeFault::BadMagic, "frame magic is not PSYN");
    if (p[4] != kVersion)
        throw DecodeError(DecodeFault::BadVersion, "unsupported protocol version");
    const auto len = get_le<std::uint32_t>(p + 6);
    if (len > kMaxPayloadBytes)
        throw DecodeError(DecodeFault::Oversize, "payload exceeds 16 MiB limit");
    return len;
}

} // namespace

MsgType message_type(const Message& msg) {
    struct Visitor {
        MsgType operator()(const TagsMsg&) const { return MsgType::Tags; }
        MsgType operator()(const SeqRequestMsg&) const { return MsgType::SeqRequest; }
        MsgType operator()(const SeqRevealMsg&) const { return MsgType::SeqReveal; }
        MsgType operator()(const InitDoneMsg&) const { return MsgType::InitDone; }
        MsgType operator()(const StatusMsg&) const { return MsgType::Status; }
        MsgType operator()(const ErrorMsg&) const { return MsgType::Error; }
    };
    return std::visit(Visitor{}, msg);
}

std::string encode_frame(const Message& msg) {
    std::string payload = encode_payload(msg);
    if (payload.size() > kMaxPayloadBytes)
        throw DecodeError(DecodeFault::Oversize, "payload exceeds 16 MiB limit");
    std::string frame;
    frame.reserve(kFrameHeaderBytes + payload.size());
    frame.append(kMagic, 4);
    frame.push_back(static_cast<char>(kVersion));
    frame.push_back(static_cast<char>(message_type(msg)));
    put_le<std::uint32_t>(frame, static_cast<std::uint32_t>(payload.size()));
    frame.append(payload);
    return frame;
}

Message decode_frame(const void* data, std::size_t size, std::size_t* consumed) {
    const auto* p = static_cast<const unsigned char*>(data);
    if (size < kFrameHeaderBytes)
        throw DecodeError(DecodeFault::Truncated, "buffer shorter than frame header");
    const std::size_t len = check_header(p);
    if (size < kFrameHeaderBytes + len)
        throw DecodeError(DecodeFault::Truncated, "buffer shorter than declared payload");
    Message m = parse_payload(p[5], p + kFrameHeaderBytes, len);
    if (consumed)
        *consumed = kFrameHeaderBytes + len;
    return m;
}

void FrameDecoder::feed(const void* data, std::size_t size) {
    // Drop consumed bytes before they accumulate.
    if (pos_ > 0 && (pos_ >= buf_.size() || pos_ > kMaxPayloadBytes)) {
        buf_.erase(0, pos_);
        pos_ = 0;
    }
    buf_.append(static_cast<const char*>(data), size);
}

std::optional<Message> FrameDecoder::next() {
    const std::size_t avail = buf_.size() - pos_;
    if (avail < kFrameHeaderBytes)
        return std::nullopt;
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data()) + pos_;
    const std::size_t len = check_header(p);
    if (avail < kFrameHeaderBytes + len)
        return std::nullopt;
    Message m = parse_payload(p[5], p + kFrameHeaderBytes, len);
    pos_ += kFrameHeaderBytes + len;
    return m;
}

const char* session_state_name(SessionState s) {
    switch (s) {
    case SessionState::Handshake: return "handshake";
    case SessionState::Sweeping: return "sweeping";
    case SessionState::OffsetSearch: return "offset-search";
    case SessionState::Tracking: return "tracking";
    case SessionState::Failed: return "failed";
    }
    return "?";
}

SessionStateMachine::Action SessionStateMachine::fail(std::uint16_t code, std::string text) {
    state_ = SessionState::Failed;
    Action a;
    a.send_error = true;
    a.error_code = code;
    a.error_text = std::move(text);
    return a;
}

SessionStateMachine::Action SessionStateMachine::on_message(const Message& msg) {
    Action none;
    if (state_ == SessionState::Failed)
        return none;
    // A peer-reported error ends the session quietly.
    if (std::holds_alternative<ErrorMsg>(msg)) {
        state_ = SessionState::Failed;
        return none;
    }

    const MsgType type = message_type(msg);
    switch (state_) {
    case SessionState::Handshake:
        if (type == MsgType::SeqRequest) {
            state_ = SessionState::Sweeping;
            return none;
        }
        if (type == MsgType::Tags)
            return fail(kErrTagsBeforeHandshake, "tags before handshake completed");
        return fail(kErrOutOfOrder, "expected SEQ_REQUEST to open the session");

    case SessionState::Sweeping:
        if (type == MsgType::Tags)
            return none;
        if (type == MsgType::SeqRequest) {
            // Second request is the ask for the one-time disclosure.
            state_ = SessionState::OffsetSearch;
            Action a;
            a.reveal_sequence = true;
            return a;
        }
        return fail(kErrOutOfOrder, "unexpected message while sweeping");

    case SessionState::OffsetSearch:
        if (type == MsgType::Tags)
            return none;
        if (type == MsgType::SeqReveal) {
            if (reveals_ > 0)
                return fail(kErrRepeatedReveal, "sequence already revealed");
            ++reveals_;
            return none;
        }
        if (type == MsgType::InitDone) {
            state_ = SessionState::Tracking;
            return none;
        }
        return fail(kErrOutOfOrder, "unexpected message during offset search");

    case SessionState::Tracking:
        if (type == MsgType::Tags || type == MsgType::Status)
            return none;
        if (type == MsgType::SeqReveal)
            return fail(kErrRepeatedReveal, "sequence disclosure after initialization");
        return fail(kErrOutOfOrder, "unexpected message while tracking");

    case SessionState::Failed:
        break;
    }
    return none;
}

} // namespace psync
