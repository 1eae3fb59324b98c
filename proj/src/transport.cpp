#include "neuroarm/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <thread>

namespace neuroarm::net {

std::string encode_frame(const FeatureFrame& frame) {
    std::string payload = std::to_string(frame.index);
    for (double v : frame.values) {
        if (!std::isfinite(v)) throw TransportError("cannot encode non-finite feature value");
        payload += ',';
        payload += format_sig9(v);
    }
    return payload;
}

namespace {

bool parse_double_field(std::string_view field, double& out) {
    if (field.empty()) return false;
    // std::from_chars<double> handles the full field with no locale surprises.
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_index_field(std::string_view field, std::uint64_t& out) {
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace

std::optional<FeatureFrame> decode_frame(std::string_view payload, FrameError* err) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = payload.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(payload.substr(pos));
            break;
        }
        fields.push_back(payload.substr(pos, comma - pos));
        pos = comma + 1;
    }
    if (fields.size() != 1 + kFeatureDim) {
        if (err) *err = FrameError::FieldCount;
        return std::nullopt;
    }
    FeatureFrame frame;
    if (!parse_index_field(fields[0], frame.index)) {
        if (err) *err = FrameError::BadIndex;
        return std::nullopt;
    }
    for (int i = 0; i < kFeatureDim; ++i) {
        if (!parse_double_field(fields[static_cast<std::size_t>(i) + 1],
                                frame.values[static_cast<std::size_t>(i)])) {
            if (err) *err = FrameError::BadNumber;
            return std::nullopt;
        }
    }
    return frame;
}

FeatureFrame frame_of(const dsp::FeatureVector& fv) {
    FeatureFrame f;
    f.index = fv.index;
    f.values = fv.values;
    return f;
}

// ---- UDP ----

namespace {

sockaddr_in loopback_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw TransportError("bad address: " + host);
    return addr;
}

}  // namespace

UdpSender::UdpSender(const std::string& host, std::uint16_t port) {
    fd_ = socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
    const sockaddr_in addr = loopback_addr(host, port);
    if (connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw TransportError(std::string("connect: ") + std::strerror(e));
    }
}

UdpSender::~UdpSender() {
    if (fd_ >= 0) ::close(fd_);
}

UdpSender::UdpSender(UdpSender&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSender& UdpSender::operator=(UdpSender&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void UdpSender::send(std::string_view payload) {
    if (payload.size() > kMaxDatagram)
        throw TransportError("datagram exceeds the 1024-byte buffer limit");
    const ssize_t n = ::send(fd_, payload.data(), payload.size(), 0);
    if (n < 0 || static_cast<std::size_t>(n) != payload.size())
        throw TransportError(std::string("send: ") + std::strerror(errno));
}

UdpReceiver::UdpReceiver(std::uint16_t port, const std::string& host) {
    fd_ = socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
    const int rcvbuf = 1 << 20;
    setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
    sockaddr_in addr = loopback_addr(host, port);
    if (bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw TransportError(std::string("bind: ") + std::strerror(e));
    }
    socklen_t len = sizeof addr;
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        const int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw TransportError(std::string("getsockname: ") + std::strerror(e));
    }
    port_ = ntohs(addr.sin_port);
}

UdpReceiver::~UdpReceiver() {
    if (fd_ >= 0) ::close(fd_);
}

UdpReceiver::UdpReceiver(UdpReceiver&& other) noexcept : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
}

UdpReceiver& UdpReceiver::operator=(UdpReceiver&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

std::optional<std::string> UdpReceiver::recv(std::chrono::milliseconds timeout) {
    pollfd pfd{fd_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (r <= 0) return std::nullopt;
    char buf[kMaxDatagram + 1];
    const ssize_t n = ::recvfrom(fd_, buf, sizeof buf, 0, nullptr, nullptr);
    if (n < 0) return std::nullopt;
    return std::string(buf, static_cast<std::size_t>(n));
}

std::optional<FeatureFrame> FrameConsumer::poll(std::chrono::milliseconds timeout) {
    const auto payload = rx_.recv(timeout);
    if (!payload) return std::nullopt;
    const auto frame = decode_frame(*payload);
    if (!frame) {
        ++stats_.format_errors;
        return std::nullopt;
    }
    ++stats_.received;
    if (!seen_any_) {
        seen_any_ = true;
        next_expected_ = frame->index + 1;
        return frame;
    }
    if (frame->index >= next_expected_) {
        stats_.gaps += frame->index - next_expected_;
        next_expected_ = frame->index + 1;
    } else {
        // Late arrival: it was provisionally counted as missing.
        ++stats_.reorders;
        if (stats_.gaps > 0) --stats_.gaps;
    }
    return frame;
}

void stream_producer(UdpSender& tx, const std::vector<dsp::FeatureVector>& features,
                     double frames_per_s, double time_scale) {
    const bool paced = time_scale > 0.0 && frames_per_s > 0.0;
    const double wall_dt = paced ? 1.0 / (frames_per_s * time_scale) : 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t sent = 0;
    for (const auto& fv : features) {
        tx.send(encode_frame(frame_of(fv)));
        ++sent;
        // Sleep in batches; per-frame sleeps would dominate at high scale.
        if (paced && sent % 16 == 0) {
            const auto target =
                t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(wall_dt * static_cast<double>(sent)));
            std::this_thread::sleep_until(target);
        }
    }
}

// ---- serial ----

void SerialChannel::send(char byte) {
    const auto ready = clock::now() + std::chrono::duration_cast<clock::duration>(
                                          std::chrono::duration<double>(latency_s_));
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (closed_) throw TransportError("serial channel is closed");
        queue_.emplace_back(ready, byte);
    }
    cv_.notify_all();
}

std::optional<char> SerialChannel::recv(std::chrono::milliseconds timeout) {
    const auto deadline = clock::now() + timeout;
    std::unique_lock<std::mutex> lock(mu_);
    while (true) {
        if (!queue_.empty()) {
            const auto [ready, byte] = queue_.front();
            if (ready <= clock::now()) {
                queue_.pop_front();
                return byte;
            }
            const auto until = std::min(ready, deadline);
            cv_.wait_until(lock, until);
        } else {
            if (closed_) return std::nullopt;
            if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && queue_.empty())
                return std::nullopt;
        }
        if (clock::now() >= deadline && (queue_.empty() || queue_.front().first > deadline))
            return std::nullopt;
    }
}

void SerialChannel::close() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool SerialChannel::closed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return closed_;
}

char action_to_byte(ActionLabel a) { return static_cast<char>('0' + static_cast<int>(a)); }

std::optional<ActionLabel> byte_to_action(char b) {
    if (b < '0' || b > '2') return std::nullopt;
    return static_cast<ActionLabel>(b - '0');
}

void send_action(SerialChannel& ch, ActionLabel a) { ch.send(action_to_byte(a)); }

std::optional<ActionLabel> recv_action(SerialChannel& ch, std::chrono::milliseconds timeout,
                                       std::uint64_t* protocol_errors) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        const auto now = std::chrono::steady_clock::now();
        const auto remain = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - now);
        const auto byte = ch.recv(remain.count() > 0 ? remain : std::chrono::milliseconds(0));
        if (!byte) return std::nullopt;
        const auto action = byte_to_action(*byte);
        if (action) return action;
        if (protocol_errors) ++(*protocol_errors);
        if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    }
}

}  // namespace neuroarm::net
