#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neuroarm/dsp.hpp"
#include "neuroarm/types.hpp"

namespace neuroarm::net {

/// One feature frame as carried in a single datagram.
struct FeatureFrame {
    std::uint64_t index = 0;
    std::array<double, kFeatureDim> values{};
};

inline constexpr std::size_t kMaxDatagram = 1024;

/// ASCII payload "i,v1,...,v20"; values are printed with 9 significant
/// digits ("%.8e") so the worst-case payload stays far below 1024 bytes.
/// Throws TransportError on non-finite values.
std::string encode_frame(const FeatureFrame& frame);

enum class FrameError { FieldCount, BadNumber, BadIndex };

/// Inverse of encode_frame on its image. Malformed payloads yield nullopt
/// and set *err; no partial frames are produced.
std::optional<FeatureFrame> decode_frame(std::string_view payload, FrameError* err = nullptr);

FeatureFrame frame_of(const dsp::FeatureVector& fv);

/// Arrival-order delivery accounting. gaps counts frames never seen at
/// their expected slot (a late arrival cancels one gap and counts as a
/// reorder); format_errors counts dropped malformed datagrams.
struct LossStats {
    std::uint64_t received = 0;
    std::uint64_t gaps = 0;
    std::uint64_t reorders = 0;
    std::uint64_t format_errors = 0;
};

/// Fire-and-forget datagram sender bound to one destination.
class UdpSender {
  public:
    UdpSender(const std::string& host, std::uint16_t port);
    ~UdpSender();
    UdpSender(UdpSender&&) noexcept;
    UdpSender& operator=(UdpSender&&) noexcept;
    UdpSender(const UdpSender&) = delete;
    UdpSender& operator=(const UdpSender&) = delete;

    void send(std::string_view payload);

  private:
    int fd_ = -1;
};

/// Bound datagram receiver; port 0 asks the OS for an ephemeral port.
class UdpReceiver {
  public:
    explicit UdpReceiver(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
    ~UdpReceiver();
    UdpReceiver(UdpReceiver&&) noexcept;
    UdpReceiver& operator=(UdpReceiver&&) noexcept;
    UdpReceiver(const UdpReceiver&) = delete;
    UdpReceiver& operator=(const UdpReceiver&) = delete;

    std::uint16_t port() const { return port_; }

    /// One datagram, or nullopt on timeout.
    std::optional<std::string> recv(std::chrono::milliseconds timeout);

  private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Decodes datagrams from a receiver and tracks delivery statistics by
/// frame index. Never throws on malformed input.
class FrameConsumer {
  public:
    explicit FrameConsumer(UdpReceiver& rx) : rx_(rx) {}

    std::optional<FeatureFrame> poll(std::chrono::milliseconds timeout);
    const LossStats& stats() const { return stats_; }

  private:
    UdpReceiver& rx_;
    LossStats stats_;
    std::uint64_t next_expected_ = 0;
    bool seen_any_ = false;
};

/// Sends a prepared feature stream at `frames_per_s` stream cadence,
/// compressed by `time_scale` (0 = no pacing). Frame indices come from the
/// feature vectors.
void stream_producer(UdpSender& tx, const std::vector<dsp::FeatureVector>& features,
                     double frames_per_s, double time_scale = 1.0);

/// In-process stand-in for a serial line: ordered bytes, optional per-byte
/// latency, single writer and single reader.
class SerialChannel {
  public:
    explicit SerialChannel(double byte_latency_s = 0.0) : latency_s_(byte_latency_s) {}

    void send(char byte);
    std::optional<char> recv(std::chrono::milliseconds timeout);
    void close();
    bool closed() const;

  private:
    using clock = std::chrono::steady_clock;
    double latency_s_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::pair<clock::time_point, char>> queue_;
    bool closed_ = false;
};

char action_to_byte(ActionLabel a);
std::optional<ActionLabel> byte_to_action(char b);

void send_action(SerialChannel& ch, ActionLabel a);

/// Next valid action from the channel. Unknown bytes are skipped and
/// counted in *protocol_errors.
std::optional<ActionLabel> recv_action(SerialChannel& ch, std::chrono::milliseconds timeout,
                                       std::uint64_t* protocol_errors = nullptr);

}  // namespace neuroarm::net
