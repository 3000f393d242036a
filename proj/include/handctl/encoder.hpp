#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "handctl/hand_model.hpp"

namespace handctl {

// Host wire protocol: [0xA5][channel][raw lo][raw hi][seq][xor of bytes 0..4].
inline constexpr std::uint8_t kFrameMagic = 0xA5;
inline constexpr std::size_t kFrameSize = 6;
inline constexpr int kEncoderChannels = 8;
inline constexpr std::uint32_t kEncoderCounts = 4096;
inline constexpr double kDegreesPerCount = 360.0 / kEncoderCounts;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

struct EncoderFrame {
  std::uint8_t channel = 0;
  std::uint16_t raw = 0;
  std::uint8_t seq = 0;
  std::uint32_t timestamp_ms = 0;  // host receive time; not on the wire

  friend bool operator==(const EncoderFrame&, const EncoderFrame&) = default;
};

std::uint8_t frame_checksum(std::span<const std::uint8_t> header5);

/// Parses exactly one 6-byte frame. Throws FramingError (bad magic or size),
/// CorruptFrameError (checksum), or RangeError (raw >= 4096, channel >= 8).
EncoderFrame decode_frame(std::span<const std::uint8_t> bytes, std::uint32_t timestamp_ms = 0);

/// Throws RangeError for out-of-range channel/raw.
FrameBytes encode_frame(const EncoderFrame& frame);

/// raw * 360 / 4096. Throws RangeError for raw >= 4096.
double raw_to_degrees(std::uint32_t raw);

/// Continuous angle nearest `prev` that is congruent to `deg` mod 360.
double unwrap_degrees(double prev, double deg);

struct EncoderCalibration {
  double offset = 0.0;  // degrees, subtracted after direction
  int direction = 1;    // +1 or -1
  JointId joint = joints::kIndexMcp;

  void validate() const;
};

/// direction * unwrap(prev, deg) - offset.
double apply_encoder_calibration(double deg, double prev, const EncoderCalibration& cal);

/// Streaming decoder that tolerates garbage: scans for the magic byte, and on
/// a bad frame drops one byte and rescans.
class FrameParser {
 public:
  /// Appends bytes and returns every complete valid frame found.
  std::vector<EncoderFrame> feed(std::span<const std::uint8_t> bytes, std::uint32_t timestamp_ms = 0);

  std::size_t frames_ok() const { return frames_ok_; }
  std::size_t bytes_skipped() const { return bytes_skipped_; }
  std::size_t corrupt_frames() const { return corrupt_frames_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::deque<std::uint8_t> buffer_;
  std::size_t frames_ok_ = 0;
  std::size_t bytes_skipped_ = 0;
  std::size_t corrupt_frames_ = 0;
};

/// Instrumented joints and their multiplexer channels.
struct ChannelMap {
  std::array<std::optional<JointId>, kEncoderChannels> joint_of_channel{};

  std::optional<int> channel_of(JointId joint) const;

  /// Index abduction/MCP/PIP/DIP and thumb CMC/MCP/IP on channels 0..6.
  static ChannelMap Default();
};

/// Unwraps one channel's stream and applies its calibration.
class ChannelTracker {
 public:
  explicit ChannelTracker(EncoderCalibration cal) : cal_(cal) { cal_.validate(); }

  /// Calibrated continuous joint angle for the next sample (degrees).
  double update(double deg);

  double continuous() const { return prev_.value_or(0.0); }
  const EncoderCalibration& calibration() const { return cal_; }

 private:
  EncoderCalibration cal_;
  std::optional<double> prev_;
};

/// Device-side model of a mounted sensor: the magnet sits at an arbitrary
/// pole angle, so readings carry a mounting offset.
struct SimulatedEncoder {
  double mount_offset_deg = 0.0;
  int direction = 1;

  std::uint16_t read_raw(double joint_deg) const;
};

// Byte sources. A serial port and a replay file look the same to readers.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Reads up to out.size() bytes; returns 0 at end of stream.
  virtual std::size_t read(std::span<std::uint8_t> out) = 0;
};

class ReplayFileSource final : public ByteSource {
 public:
  explicit ReplayFileSource(const std::string& path);
  ~ReplayFileSource() override;
  std::size_t read(std::span<std::uint8_t> out) override;

 private:
  std::FILE* file_ = nullptr;
};

class SerialPortSource final : public ByteSource {
 public:
  SerialPortSource(const std::string& device, int baud);
  ~SerialPortSource() override;
  SerialPortSource(const SerialPortSource&) = delete;
  SerialPortSource& operator=(const SerialPortSource&) = delete;
  std::size_t read(std::span<std::uint8_t> out) override;

 private:
  int fd_ = -1;
};

template <typename T>
class BlockingQueue {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  /// Blocks until an item is available; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }
  std::optional<T> try_pop() {
    std::lock_guard lock(mutex_);
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Owns a ByteSource on a background thread and delivers parsed frames.
class EncoderReader {
 public:
  explicit EncoderReader(std::unique_ptr<ByteSource> source);
  ~EncoderReader();

  /// Next frame, or nullopt once the source is exhausted.
  std::optional<EncoderFrame> next() { return frames_.pop(); }

 private:
  std::unique_ptr<ByteSource> source_;
  BlockingQueue<EncoderFrame> frames_;
  std::jthread worker_;
};

/// CSV header: timestamp_ms,channel,raw,degrees,calibrated
void write_encoder_csv_header(std::ostream& out);
void write_encoder_csv_row(std::ostream& out, const EncoderFrame& frame, double calibrated);

}  // namespace handctl
