#pragma once

#include <atomic>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "handctl/hand_model.hpp"
#include "handctl/motor_map.hpp"
#include "handctl/plant.hpp"
#include "handctl/retarget.hpp"

namespace handctl {

inline constexpr int kTeleopSchemaVersion = 1;
inline constexpr int kDemoSchemaVersion = 1;

enum class MessageType : std::uint8_t { Pose, WristCmd, ConfigUpdate, State, RecordStart, RecordStop, Error };

const char* to_string(MessageType type);
MessageType message_type_from_string(const std::string& name);

struct PosePayload {
  KeypointSet keypoints = KeypointSet::Zero();  // meters
  friend bool operator==(const PosePayload&, const PosePayload&) = default;
};

struct WristCmdPayload {
  double alpha = 0.0;  // flexion/extension, degrees
  double beta = 0.0;   // radial/ulnar deviation, degrees
  friend bool operator==(const WristCmdPayload&, const WristCmdPayload&) = default;
};

struct ConfigUpdatePayload {
  std::map<int, double> c;  // motor -> scaling factor
  std::optional<double> smoothing_lambda;
  friend bool operator==(const ConfigUpdatePayload&, const ConfigUpdatePayload&) = default;
};

struct StatePayload {
  JointState joints;      // measured plant angles
  JointState commanded;   // joint command after smoothing, clamping, coupling
  MotorVector motors = MotorVector::Zero();  // motor positions, ticks
  MotorVector temps = MotorVector::Zero();   // degC
  double residual = 0.0;
  bool recording = false;
  friend bool operator==(const StatePayload&, const StatePayload&) = default;
};

struct RecordStartPayload {
  double noise_sigma = 0.0;  // degrees
  friend bool operator==(const RecordStartPayload&, const RecordStartPayload&) = default;
};

struct RecordStopPayload {
  friend bool operator==(const RecordStopPayload&, const RecordStopPayload&) = default;
};

struct ErrorPayload {
  std::string code;
  std::string message;
  std::optional<std::uint64_t> ref_seq;  // sequence number of the offending message
  friend bool operator==(const ErrorPayload&, const ErrorPayload&) = default;
};

using MessagePayload = std::variant<PosePayload, WristCmdPayload, ConfigUpdatePayload, StatePayload,
                                    RecordStartPayload, RecordStopPayload, ErrorPayload>;

struct TeleopMessage {
  std::uint64_t seq = 0;
  double timestamp = 0.0;  // seconds
  MessagePayload payload;

  MessageType type() const { return static_cast<MessageType>(payload.index()); }
  friend bool operator==(const TeleopMessage&, const TeleopMessage&) = default;
};

/// {"v":1,"type":"pose","seq":N,"t":seconds,"payload":{...}}
nlohmann::json to_json(const TeleopMessage& msg);
/// Throws ValidationError on any schema violation.
TeleopMessage message_from_json(const nlohmann::json& j);
std::string encode_message(const TeleopMessage& msg);
TeleopMessage decode_message(const std::string& text);

struct DemonstrationRecord {
  double timestamp = 0.0;
  std::array<double, kNumJoints> proprio{};  // 18 hand joints then wrist FE, RUD
  std::array<double, kNumMotors> motor{};     // commanded ticks
  std::array<double, kNumJoints> action{};    // commanded joint state
  std::array<double, kNumJoints> noise_applied{};
  friend bool operator==(const DemonstrationRecord&, const DemonstrationRecord&) = default;
};

/// One line of the demonstration file; "arm" is reserved and written as null.
nlohmann::json to_json(const DemonstrationRecord& rec);
DemonstrationRecord demonstration_from_json(const nlohmann::json& j);

struct TeleopConfig {
  double rate_hz = 50.0;
  RetargetConfig retarget;
  std::uint64_t seed = 0;  // noise injection RNG

  double dt() const { return 1.0 / rate_hz; }
  void validate() const;
};

/// Control-loop state. Single owner; not thread-safe.
class TeleopSession {
 public:
  TeleopSession(HandModel model, CalibrationSet cals, PlantConfig plant_cfg, TeleopConfig cfg);

  /// Applies one inbound message. Returns outbound replies (Error only; State comes from ticks).
  std::vector<TeleopMessage> handle(const TeleopMessage& msg);
  /// Parses then handles; schema violations become Error replies.
  std::vector<TeleopMessage> handle_text(const std::string& text);

  /// Advances the plant by one period and returns the State broadcast. While
  /// recording, also writes one DemonstrationRecord to the demo sink.
  std::vector<TeleopMessage> control_tick();

  /// Destination for demonstration records. Must outlive the session or be reset.
  void set_demo_sink(std::ostream* out) { demo_out_ = out; }

  const Plant& plant() const { return plant_; }
  const TeleopConfig& config() const { return cfg_; }
  const JointState& commanded() const { return commanded_; }
  const CalibrationSet& calibrations() const { return cals_; }
  double smoothing_lambda() const { return cfg_.retarget.smoothing_lambda; }
  double time() const { return time_; }
  std::uint64_t ticks() const { return ticks_; }
  bool recording() const { return recording_; }
  double last_residual() const { return residual_; }

 private:
  TeleopMessage make(MessagePayload payload);
  TeleopMessage error(std::string code, std::string message, std::optional<std::uint64_t> ref);
  void handle_pose(const PosePayload& p);
  void handle_config(const ConfigUpdatePayload& p);

  HandModel model_;
  CalibrationSet cals_;
  TeleopConfig cfg_;
  Plant plant_;
  std::mt19937_64 noise_rng_;

  JointState retargeted_;  // last solver output, warm start for the next pose
  JointState commanded_;
  double residual_ = 0.0;
  std::optional<std::uint64_t> last_in_seq_;
  std::uint64_t out_seq_ = 0;
  std::uint64_t ticks_ = 0;
  double time_ = 0.0;

  bool recording_ = false;
  double noise_sigma_ = 0.0;
  std::ostream* demo_out_ = nullptr;
  std::optional<double> last_record_time_;
};

/// Input log: header line {"handctl_input_log":1,"seed":..,"rate_hz":..,"ticks":N}
/// followed by {"tick":k,"msg":{...}} lines; each message is applied before tick k.
struct InputLogEntry {
  std::uint64_t tick = 0;
  std::string message;  // raw JSON text as received
};

struct InputLog {
  std::uint64_t seed = 0;
  double rate_hz = 50.0;
  std::uint64_t ticks = 0;
  std::vector<InputLogEntry> entries;
};

void write_input_log(std::ostream& out, const InputLog& log);
InputLog read_input_log(std::istream& in);

/// Re-runs a logged session, writing every outbound message (one JSON per line)
/// to `messages_out` and the demonstration records to `demo_out`.
void replay_session(const HandModel& model, const CalibrationSet& cals, const PlantConfig& plant_cfg,
                    TeleopConfig cfg, const InputLog& log, std::ostream& messages_out, std::ostream& demo_out);

/// Length-prefixed framing: 4-byte big-endian payload length, then UTF-8 JSON.
inline constexpr std::uint32_t kMaxMessageBytes = 1u << 20;
std::string frame_message(const std::string& json_text);

/// Incremental decoder for the framing above. Throws FramingError on oversize frames.
class MessageFramer {
 public:
  void feed(const char* data, std::size_t n);
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

struct ServeOptions {
  std::uint16_t port = 7600;
  double max_seconds = 0.0;     // 0 runs until stop is requested
  std::string input_log_path;   // optional: record inbound messages for replay
  std::string demo_path = "demonstrations.ndjson";
  std::string messages_log_path;  // optional: every outbound message, one JSON per line
};

struct ServeStats {
  std::uint64_t ticks = 0;
  std::uint64_t overruns = 0;
  std::uint64_t messages_in = 0;
  std::uint64_t messages_out = 0;
};

/// Fixed-rate TCP service for one client at a time. Network ingress enqueues
/// messages; the control loop owns the session and writes replies.
ServeStats serve(TeleopSession& session, const ServeOptions& opts, const std::atomic<bool>& stop);

}  // namespace handctl
