#include "pulsesync/wire_endpoint.hpp"

#include "pulsesync/errors.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace psync {

namespace {

[[noreturn]] void throw_errno(const char* what) {
    throw IoError(std::string(what) + ": " + std::strerror(errno));
}

void send_all(int fd, const char* data, std::size_t size) {
    while (size > 0) {
        ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("send");
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

} // namespace

TcpConnection::TcpConnection(TcpConnection&& other) noexcept
    : fd_(other.fd_), decoder_(std::move(other.decoder_)) {
    other.fd_ = -1;
}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        decoder_ = std::move(other.decoder_);
        other.fd_ = -1;
    }
    return *this;
}

TcpConnection::~TcpConnection() { close(); }

void TcpConnection::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpConnection TcpConnection::connect_to(const std::string& host, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0)
        throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw IoError("cannot parse address " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        int e = errno;
        ::close(fd);
        throw IoError("connect to " + host + " failed: " + std::strerror(e));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return TcpConnection(fd);
}

void TcpConnection::send_message(const Message& msg) {
    if (fd_ < 0)
        throw IoError("send on closed connection");
    const std::string frame = encode_frame(msg);
    send_all(fd_, frame.data(), frame.size());
}

std::optional<Message> TcpConnection::receive() {
    if (fd_ < 0)
        throw IoError("receive on closed connection");
    char buf[64 * 1024];
    while (true) {
        if (auto msg = decoder_.next())
            return msg;
        ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("recv");
        }
        if (n == 0) {
            if (decoder_.buffered() > 0)
                throw IoError("peer closed mid-frame");
            return std::nullopt;
        }
        decoder_.feed(buf, static_cast<std::size_t>(n));
    }
}

TcpListener::TcpListener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0)
        throw_errno("socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw IoError(std::string("bind failed: ") + std::strerror(e));
    }
    if (::listen(fd_, 4) != 0) {
        int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw IoError(std::string("listen failed: ") + std::strerror(e));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) != 0)
        throw_errno("getsockname");
    port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0)
        ::close(fd_);
}

TcpConnection TcpListener::accept_one() {
    while (true) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("accept");
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return TcpConnection(fd);
    }
}

SenderSessionStats serve_sender_session(TcpConnection& conn, const SymbolSequence& seq) {
    SenderSessionStats stats;
    SessionStateMachine machine;
    while (auto msg = conn.receive()) {
        auto action = machine.on_message(*msg);
        if (action.send_error) {
            conn.send_message(ErrorMsg{action.error_code, action.error_text});
            break;
        }
        if (action.reveal_sequence) {
            SeqRevealMsg reveal{seq.symbols};
            // The disclosure goes through the state machine too so the full
            // trace, both directions, is audited by one instance.
            machine.on_message(reveal);
            conn.send_message(reveal);
        }
        if (const auto* tags = std::get_if<TagsMsg>(&*msg)) {
            ++stats.tag_frames;
            stats.tags_received += tags->tags.size();
        } else if (const auto* init = std::get_if<InitDoneMsg>(&*msg)) {
            stats.init_received = true;
            stats.init = *init;
        } else if (const auto* status = std::get_if<StatusMsg>(&*msg)) {
            ++stats.status_frames;
            stats.last_status = *status;
        }
        if (machine.state() == SessionState::Failed)
            break;
    }
    stats.final_state = machine.state();
    stats.reveals = machine.reveal_count();
    return stats;
}

void send_tag_batch(TcpConnection& conn, const std::vector<TimeTagPs>& tags) {
    std::size_t sent = 0;
    while (sent < tags.size()) {
        const std::size_t n = std::min(tags.size() - sent, kMaxTagsPerFrame);
        TagsMsg msg;
        msg.tags.assign(tags.begin() + static_cast<std::ptrdiff_t>(sent),
                        tags.begin() + static_cast<std::ptrdiff_t>(sent + n));
        conn.send_message(msg);
        sent += n;
    }
}

void serve_receiver_session(TcpConnection& conn, const PhotonSimulator& sim) {
    for (std::uint64_t b = 0; b < sim.block_count(); ++b)
        send_tag_batch(conn, sim.block(b).tags);
    conn.close();
}

SenderClient::SenderClient(const std::string& host, std::uint16_t port)
    : conn_(TcpConnection::connect_to(host, port)) {}

void SenderClient::begin() { conn_.send_message(SeqRequestMsg{}); }

void SenderClient::send_tags(const std::vector<TimeTagPs>& tags) {
    send_tag_batch(conn_, tags);
}

SymbolSequence SenderClient::request_sequence() {
    conn_.send_message(SeqRequestMsg{});
    auto msg = conn_.receive();
    if (!msg)
        throw IoError("sender closed before revealing the sequence");
    if (const auto* err = std::get_if<ErrorMsg>(&*msg))
        throw IoError("sender refused: " + err->text);
    const auto* reveal = std::get_if<SeqRevealMsg>(&*msg);
    if (!reveal)
        throw IoError("expected SEQ_REVEAL from sender");
    SymbolSequence seq;
    seq.symbols = reveal->symbols;
    return seq;
}

void SenderClient::init_done(std::int64_t absolute_offset_ps, double freq_diff) {
    conn_.send_message(InitDoneMsg{absolute_offset_ps, freq_diff});
}

void SenderClient::send_status(double qber, double a_posteriori_jitter_ps) {
    conn_.send_message(StatusMsg{qber, a_posteriori_jitter_ps});
}

void SenderClient::close() { conn_.close(); }

std::vector<TimeTagPs> fetch_remote_tags(const std::string& host, std::uint16_t port) {
    TcpConnection conn = TcpConnection::connect_to(host, port);
    std::vector<TimeTagPs> tags;
    while (auto msg = conn.receive()) {
        const auto* batch = std::get_if<TagsMsg>(&*msg);
        if (!batch)
            throw IoError("receiver daemon sent a non-TAGS frame");
        tags.insert(tags.end(), batch->tags.begin(), batch->tags.end());
    }
    return tags;
}

} // namespace psync
