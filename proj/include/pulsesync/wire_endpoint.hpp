#pragma once

#include "pulsesync/photon_sim.hpp"
#include "pulsesync/types.hpp"
#include "pulsesync/wire.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace psync {

// Blocking TCP transport for the framed protocol. One session per
// connection; no shared state between connections.
class TcpConnection {
  public:
    TcpConnection() = default;
    explicit TcpConnection(int fd) : fd_(fd) {}
    TcpConnection(TcpConnection&& other) noexcept;
    TcpConnection& operator=(TcpConnection&& other) noexcept;
    TcpConnection(const TcpConnection&) = delete;
    TcpConnection& operator=(const TcpConnection&) = delete;
    ~TcpConnection();

    static TcpConnection connect_to(const std::string& host, std::uint16_t port);

    void send_message(const Message& msg);
    // Blocks for the next whole frame. Returns nothing on an orderly close
    // between frames; a close mid-frame is an IoError.
    std::optional<Message> receive();

    bool valid() const { return fd_ >= 0; }
    void close();

  private:
    int fd_ = -1;
    FrameDecoder decoder_;
};

class TcpListener {
  public:
    explicit TcpListener(std::uint16_t port); // 0 picks an ephemeral port
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener();

    std::uint16_t port() const { return port_; }
    TcpConnection accept_one();

  private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// Everything the sequence owner learned from one session, for logging and
// for auditing the exactly-once disclosure rule.
struct SenderSessionStats {
    SessionState final_state = SessionState::Handshake;
    std::uint64_t tag_frames = 0;
    std::uint64_t tags_received = 0;
    std::uint64_t status_frames = 0;
    int reveals = 0;
    bool init_received = false;
    InitDoneMsg init;
    StatusMsg last_status;
};

// Sender daemon: owns the symbol sequence and answers one client session,
// enforcing the protocol state machine. Returns when the peer closes or the
// session fails.
SenderSessionStats serve_sender_session(TcpConnection& conn, const SymbolSequence& seq);

// Receiver daemon: plays a time tagger, streaming each simulation block as
// one or more TAGS frames, then closes.
void serve_receiver_session(TcpConnection& conn, const PhotonSimulator& sim);

// Splits a sorted tag batch into protocol-sized TAGS frames and sends them.
void send_tag_batch(TcpConnection& conn, const std::vector<TimeTagPs>& tags);

// Client side of the sender daemon: drives the two-stage initialization
// handshake and the post-init status stream.
class SenderClient {
  public:
    SenderClient(const std::string& host, std::uint16_t port);

    void begin();                                        // opens the session
    void send_tags(const std::vector<TimeTagPs>& tags);  // chunked TAGS frames
    SymbolSequence request_sequence();                   // the one-time disclosure
    void init_done(std::int64_t absolute_offset_ps, double freq_diff);
    void send_status(double qber, double a_posteriori_jitter_ps);
    void close();

  private:
    TcpConnection conn_;
};

// Drains a receiver daemon: collects TAGS frames until the peer closes.
std::vector<TimeTagPs> fetch_remote_tags(const std::string& host, std::uint16_t port);

} // namespace psync
