#pragma once

#include "pulsesync/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace psync {

// Framed stream protocol between sender and receiver processes. Every frame
// is little-endian:
//   "PSYN"  magic        4 bytes
//   u8      version      (currently 1)
//   u8      message type
//   u32     payload length (max 16 MiB)
//   ...     payload
enum class MsgType : std::uint8_t {
    Tags = 0x01,       // u64 count + count x u64 ps timestamps, strictly increasing
    SeqRequest = 0x02, // empty; only valid before initialization completes
    SeqReveal = 0x03,  // u32 symbol count + symbols packed 2 bits each
    InitDone = 0x04,   // i64 absolute_offset_ps + f64 freq_diff
    Status = 0x05,     // f64 qber + f64 a_posteriori_jitter_ps
    Error = 0x7F,      // u16 code + UTF-8 text
};

struct TagsMsg {
    std::vector<TimeTagPs> tags;
    bool operator==(const TagsMsg&) const = default;
};
struct SeqRequestMsg {
    bool operator==(const SeqRequestMsg&) const = default;
};
struct SeqRevealMsg {
    std::vector<Symbol> symbols;
    bool operator==(const SeqRevealMsg&) const = default;
};
struct InitDoneMsg {
    std::int64_t absolute_offset_ps = 0;
    double freq_diff = 0.0;
    bool operator==(const InitDoneMsg&) const = default;
};
struct StatusMsg {
    double qber = 0.0;
    double a_posteriori_jitter_ps = 0.0;
    bool operator==(const StatusMsg&) const = default;
};
struct ErrorMsg {
    std::uint16_t code = 0;
    std::string text;
    bool operator==(const ErrorMsg&) const = default;
};

using Message = std::variant<TagsMsg, SeqRequestMsg, SeqRevealMsg, InitDoneMsg, StatusMsg, ErrorMsg>;

constexpr std::size_t kFrameHeaderBytes = 10;
constexpr std::size_t kMaxPayloadBytes = 16u * 1024 * 1024;
// Largest tag batch that still fits one frame (count word + 8 bytes per tag).
constexpr std::size_t kMaxTagsPerFrame = (kMaxPayloadBytes - 8) / 8;

enum class DecodeFault {
    BadMagic,
    BadVersion,
    Truncated,
    Oversize,
    UnknownType,
    Malformed,
};

class DecodeError : public std::runtime_error {
  public:
    DecodeError(DecodeFault fault, const std::string& what)
        : std::runtime_error(what), fault_(fault) {}
    DecodeFault fault() const { return fault_; }

  private:
    DecodeFault fault_;
};

MsgType message_type(const Message& msg);

std::string encode_frame(const Message& msg);

// Decodes exactly one frame from a contiguous buffer. A short buffer is a
// Truncated fault; use FrameDecoder for stream reassembly instead.
Message decode_frame(const void* data, std::size_t size, std::size_t* consumed = nullptr);

// Incremental reassembly over arbitrary byte splits. next() yields nothing
// until a whole frame is buffered; protocol faults throw and poison the
// decoder (connection-fatal by design).
class FrameDecoder {
  public:
    void feed(const void* data, std::size_t size);
    std::optional<Message> next();
    std::size_t buffered() const { return buf_.size() - pos_; }

  private:
    std::string buf_;
    std::size_t pos_ = 0;
};

// Protocol session progress for one connection, as seen by the sequence
// owner. Tracks every message on the session (either direction) so recorded
// traces can be replayed through it for auditing.
enum class SessionState { Handshake, Sweeping, OffsetSearch, Tracking, Failed };

const char* session_state_name(SessionState s);

class SessionStateMachine {
  public:
    struct Action {
        bool send_error = false;
        std::uint16_t error_code = 0;
        std::string error_text;
        bool reveal_sequence = false; // owner must answer with the one-time SEQ_REVEAL
    };

    SessionState state() const { return state_; }
    int reveal_count() const { return reveals_; }

    // Consumes one protocol event. Out-of-order messages yield an error
    // action and move the session to Failed.
    Action on_message(const Message& msg);

  private:
    Action fail(std::uint16_t code, std::string text);

    SessionState state_ = SessionState::Handshake;
    int reveals_ = 0;
};

// Error codes carried in ERROR frames.
constexpr std::uint16_t kErrTagsBeforeHandshake = 0x0001;
constexpr std::uint16_t kErrOutOfOrder = 0x0002;
constexpr std::uint16_t kErrRepeatedReveal = 0x0003;

} // namespace psync
