#include "handctl/encoder.hpp"

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>

#include "handctl/errors.hpp"

namespace handctl {

std::uint8_t frame_checksum(std::span<const std::uint8_t> header5) {
  std::uint8_t x = 0;
  for (std::size_t i = 0; i < 5 && i < header5.size(); ++i) x ^= header5[i];
  return x;
}

EncoderFrame decode_frame(std::span<const std::uint8_t> bytes, std::uint32_t timestamp_ms) {
  if (bytes.size() != kFrameSize) {
    throw FramingError("encoder frame must be 6 bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[0] != kFrameMagic) throw FramingError("bad frame magic");
  if (frame_checksum(bytes.first(5)) != bytes[5]) throw CorruptFrameError("encoder frame checksum mismatch");

  EncoderFrame f;
  f.channel = bytes[1];
  f.raw = static_cast<std::uint16_t>(bytes[2] | (bytes[3] << 8));
  f.seq = bytes[4];
  f.timestamp_ms = timestamp_ms;
  if (f.raw >= kEncoderCounts) throw RangeError("encoder raw value out of range: " + std::to_string(f.raw));
  if (f.channel >= kEncoderChannels) throw RangeError("encoder channel out of range: " + std::to_string(f.channel));
  return f;
}

FrameBytes encode_frame(const EncoderFrame& frame) {
  if (frame.raw >= kEncoderCounts) throw RangeError("encoder raw value out of range");
  if (frame.channel >= kEncoderChannels) throw RangeError("encoder channel out of range");
  FrameBytes b{kFrameMagic,
               frame.channel,
               static_cast<std::uint8_t>(frame.raw & 0xFF),
               static_cast<std::uint8_t>(frame.raw >> 8),
               frame.seq,
               0};
  b[5] = frame_checksum(std::span<const std::uint8_t>(b).first(5));
  return b;
}

double raw_to_degrees(std::uint32_t raw) {
  if (raw >= kEncoderCounts) throw RangeError("encoder raw value out of range: " + std::to_string(raw));
  return static_cast<double>(raw) * 360.0 / static_cast<double>(kEncoderCounts);
}

double unwrap_degrees(double prev, double deg) {
  const double turns = std::round((prev - deg) / 360.0);
  return deg + 360.0 * turns;
}

void EncoderCalibration::validate() const {
  if (direction != 1 && direction != -1) throw ConfigError("encoder direction must be +1 or -1");
  if (!std::isfinite(offset)) throw ConfigError("encoder offset must be finite");
}

double apply_encoder_calibration(double deg, double prev, const EncoderCalibration& cal) {
  return cal.direction * unwrap_degrees(prev, deg) - cal.offset;
}

std::vector<EncoderFrame> FrameParser::feed(std::span<const std::uint8_t> bytes, std::uint32_t timestamp_ms) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  std::vector<EncoderFrame> out;
  FrameBytes candidate{};
  while (!buffer_.empty()) {
    if (buffer_.front() != kFrameMagic) {
      buffer_.pop_front();
      ++bytes_skipped_;
      continue;
    }
    if (buffer_.size() < kFrameSize) break;
    std::copy_n(buffer_.begin(), kFrameSize, candidate.begin());
    try {
      out.push_back(decode_frame(candidate, timestamp_ms));
      buffer_.erase(buffer_.begin(), buffer_.begin() + kFrameSize);
      ++frames_ok_;
    } catch (const Error&) {
      // Magic byte inside payload or a damaged frame: slide by one and rescan.
      buffer_.pop_front();
      ++bytes_skipped_;
      ++corrupt_frames_;
    }
  }
  return out;
}

std::optional<int> ChannelMap::channel_of(JointId joint) const {
  for (int ch = 0; ch < kEncoderChannels; ++ch) {
    if (joint_of_channel[ch] == joint) return ch;
  }
  return std::nullopt;
}

ChannelMap ChannelMap::Default() {
  using namespace joints;
  ChannelMap map;
  const JointId order[] = {kIndexAbd, kIndexMcp, kIndexPip, kIndexDip, kThumbCmc, kThumbMcp, kThumbIp};
  for (int ch = 0; ch < 7; ++ch) map.joint_of_channel[ch] = order[ch];
  return map;
}

double ChannelTracker::update(double deg) {
  const double continuous = prev_ ? unwrap_degrees(*prev_, deg) : deg;
  const double calibrated = apply_encoder_calibration(deg, prev_.value_or(deg), cal_);
  prev_ = continuous;
  return calibrated;
}

std::uint16_t SimulatedEncoder::read_raw(double joint_deg) const {
  double field = std::fmod(direction * joint_deg + mount_offset_deg, 360.0);
  if (field < 0) field += 360.0;
  const long counts = std::lround(field / kDegreesPerCount);
  return static_cast<std::uint16_t>(counts % static_cast<long>(kEncoderCounts));
}

ReplayFileSource::ReplayFileSource(const std::string& path) : file_(std::fopen(path.c_str(), "rb")) {
  if (!file_) throw IoError("cannot open replay file " + path + ": " + std::strerror(errno));
}

ReplayFileSource::~ReplayFileSource() {
  if (file_) std::fclose(file_);
}

std::size_t ReplayFileSource::read(std::span<std::uint8_t> out) {
  return std::fread(out.data(), 1, out.size(), file_);
}

namespace {

speed_t baud_constant(int baud) {
  switch (baud) {
    case 9600: return B9600;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    case 460800: return B460800;
    case 921600: return B921600;
    default: throw ConfigError("unsupported baud rate " + std::to_string(baud));
  }
}

}  // namespace

SerialPortSource::SerialPortSource(const std::string& device, int baud) {
  fd_ = ::open(device.c_str(), O_RDONLY | O_NOCTTY);
  if (fd_ < 0) throw IoError("cannot open serial device " + device + ": " + std::strerror(errno));
  termios tio{};
  if (tcgetattr(fd_, &tio) != 0) {
    ::close(fd_);
    throw IoError("tcgetattr failed on " + device);
  }
  cfmakeraw(&tio);
  cfsetispeed(&tio, baud_constant(baud));
  tio.c_cc[VMIN] = 1;
  tio.c_cc[VTIME] = 0;
  if (tcsetattr(fd_, TCSANOW, &tio) != 0) {
    ::close(fd_);
    throw IoError("tcsetattr failed on " + device);
  }
}

SerialPortSource::~SerialPortSource() {
  if (fd_ >= 0) ::close(fd_);
}

std::size_t SerialPortSource::read(std::span<std::uint8_t> out) {
  const ssize_t n = ::read(fd_, out.data(), out.size());
  if (n < 0) throw IoError(std::string("serial read failed: ") + std::strerror(errno));
  return static_cast<std::size_t>(n);
}

EncoderReader::EncoderReader(std::unique_ptr<ByteSource> source) : source_(std::move(source)) {
  worker_ = std::jthread([this](std::stop_token stop) {
    FrameParser parser;
    std::array<std::uint8_t, 256> chunk{};
    const auto start = std::chrono::steady_clock::now();
    while (!stop.stop_requested()) {
      const std::size_t n = source_->read(chunk);
      if (n == 0) break;
      const auto now_ms = static_cast<std::uint32_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
      for (auto& f : parser.feed(std::span(chunk).first(n), now_ms)) frames_.push(f);
    }
    frames_.close();
  });
}

EncoderReader::~EncoderReader() {
  worker_.request_stop();
  if (worker_.joinable()) worker_.join();
}

void write_encoder_csv_header(std::ostream& out) { out << "timestamp_ms,channel,raw,degrees,calibrated\n"; }

void write_encoder_csv_row(std::ostream& out, const EncoderFrame& frame, double calibrated) {
  out << frame.timestamp_ms << ',' << static_cast<int>(frame.channel) << ',' << frame.raw << ','
      << std::setprecision(12) << raw_to_degrees(frame.raw) << ',' << calibrated << '\n';
}

}  // namespace handctl
