#include "handctl/teleop.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "handctl/encoder.hpp"
#include "handctl/errors.hpp"

namespace handctl {

using nlohmann::json;

namespace {

constexpr const char* kTypeNames[] = {"pose", "wrist_cmd", "config_update", "state", "record_start", "record_stop",
                                      "error"};

double finite_number(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(std::string("field '") + key + "' must be finite");
  return x;
}

template <int N>
json array_of(const Eigen::Matrix<double, N, 1>& v) {
  json out = json::array();
  for (int i = 0; i < N; ++i) out.push_back(v[i]);
  return out;
}

template <int N>
Eigen::Matrix<double, N, 1> vector_from(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != static_cast<std::size_t>(N)) {
    throw ValidationError(std::string("field '") + key + "' must hold " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!a[i].is_number()) throw ValidationError(std::string("field '") + key + "' must hold numbers");
    v[i] = a[i].get<double>();
  }
  return v;
}

template <std::size_t N>
std::array<double, N> std_array_from(const json& j, const char* key) {
  const auto v = vector_from<static_cast<int>(N)>(j, key);
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[static_cast<int>(i)];
  return out;
}

json payload_json(const MessagePayload& payload) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PosePayload>) {
          json kps = json::array();
          for (int i = 0; i < kNumKeypoints; ++i) kps.push_back({p.keypoints(0, i), p.keypoints(1, i), p.keypoints(2, i)});
          return {{"keypoints", kps}};
        } else if constexpr (std::is_same_v<T, WristCmdPayload>) {
          return {{"alpha", p.alpha}, {"beta", p.beta}};
        } else if constexpr (std::is_same_v<T, ConfigUpdatePayload>) {
          json out = json::object();
          if (!p.c.empty()) {
            json c = json::object();
            for (const auto& [m, v] : p.c) c[std::to_string(m)] = v;
            out["c"] = c;
          }
          if (p.smoothing_lambda) out["smoothing_lambda"] = *p.smoothing_lambda;
          return out;
        } else if constexpr (std::is_same_v<T, StatePayload>) {
          return {{"joints", array_of(p.joints.angles)},
                  {"commanded", array_of(p.commanded.angles)},
                  {"motors", array_of(p.motors)},
                  {"temps", array_of(p.temps)},
                  {"residual", p.residual},
                  {"recording", p.recording}};
        } else if constexpr (std::is_same_v<T, RecordStartPayload>) {
          return {{"noise_sigma", p.noise_sigma}};
        } else if constexpr (std::is_same_v<T, RecordStopPayload>) {
          return json::object();
        } else {
          json out = {{"code", p.code}, {"message", p.message}};
          if (p.ref_seq) out["ref_seq"] = *p.ref_seq;
          return out;
        }
      },
      payload);
}

MessagePayload payload_from(MessageType type, const json& j) {
  if (!j.is_object()) throw ValidationError("payload must be an object");
  switch (type) {
    case MessageType::Pose: {
      const auto& kps = j.at("keypoints");
      if (!kps.is_array() || kps.size() != static_cast<std::size_t>(kNumKeypoints)) {
        throw ValidationError("pose payload must hold 21 keypoints, got " +
                              std::to_string(kps.is_array() ? kps.size() : 0));
      }
      PosePayload p;
      for (int i = 0; i < kNumKeypoints; ++i) {
        if (!kps[i].is_array() || kps[i].size() != 3) throw ValidationError("keypoint must be [x, y, z]");
        for (int a = 0; a < 3; ++a) {
          if (!kps[i][a].is_number()) throw ValidationError("keypoint coordinates must be numbers");
          p.keypoints(a, i) = kps[i][a].get<double>();
        }
      }
      return p;
    }
    case MessageType::WristCmd:
      return WristCmdPayload{finite_number(j, "alpha"), finite_number(j, "beta")};
    case MessageType::ConfigUpdate: {
      ConfigUpdatePayload p;
      if (j.contains("c")) {
        if (!j["c"].is_object()) throw ValidationError("'c' must map motor index to scaling factor");
        for (const auto& [key, value] : j["c"].items()) {
          int motor = -1;
          try {
            std::size_t used = 0;
            motor = std::stoi(key, &used);
            if (used != key.size()) motor = -1;
          } catch (const std::exception&) {
          }
          if (motor < 0 || motor >= kNumMotors) throw ValidationError("unknown motor '" + key + "'");
          if (!value.is_number()) throw ValidationError("scaling factor must be a number");
          p.c[motor] = value.get<double>();
        }
      }
      if (j.contains("smoothing_lambda")) p.smoothing_lambda = finite_number(j, "smoothing_lambda");
      return p;
    }
    case MessageType::State: {
      StatePayload p;
      p.joints.angles = vector_from<kNumJoints>(j, "joints");
      p.commanded.angles = vector_from<kNumJoints>(j, "commanded");
      p.motors = vector_from<kNumMotors>(j, "motors");
      p.temps = vector_from<kNumMotors>(j, "temps");
      p.residual = finite_number(j, "residual");
      p.recording = j.at("recording").get<bool>();
      return p;
    }
    case MessageType::RecordStart:
      return RecordStartPayload{finite_number(j, "noise_sigma")};
    case MessageType::RecordStop:
      return RecordStopPayload{};
    case MessageType::Error: {
      ErrorPayload p{j.at("code").get<std::string>(), j.at("message").get<std::string>(), std::nullopt};
      if (j.contains("ref_seq")) p.ref_seq = j["ref_seq"].get<std::uint64_t>();
      return p;
    }
  }
  throw ValidationError("unknown message type");
}

}  // namespace

const char* to_string(MessageType type) { return kTypeNames[static_cast<int>(type)]; }

MessageType message_type_from_string(const std::string& name) {
  for (int i = 0; i < 7; ++i) {
    if (name == kTypeNames[i]) return static_cast<MessageType>(i);
  }
  throw ValidationError("unknown message type '" + name + "'");
}

json to_json(const TeleopMessage& msg) {
  return {{"v", kTeleopSchemaVersion},
          {"type", to_string(msg.type())},
          {"seq", msg.seq},
          {"t", msg.timestamp},
          {"payload", payload_json(msg.payload)}};
}

TeleopMessage message_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ValidationError("message must be a JSON object");
    if (j.at("v").get<int>() != kTeleopSchemaVersion) throw ValidationError("unsupported message version");
    const auto& seq = j.at("seq");
    if (!seq.is_number_unsigned()) throw ValidationError("'seq' must be a non-negative integer");
    TeleopMessage msg;
    msg.seq = seq.get<std::uint64_t>();
    msg.timestamp = finite_number(j, "t");
    msg.payload = payload_from(message_type_from_string(j.at("type").get<std::string>()), j.at("payload"));
    return msg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed message: ") + e.what());
  }
}

std::string encode_message(const TeleopMessage& msg) { return to_json(msg).dump(); }

TeleopMessage decode_message(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("message is not valid JSON: ") + e.what());
  }
  return message_from_json(j);
}

json to_json(const DemonstrationRecord& rec) {
  return {{"v", kDemoSchemaVersion}, {"t", rec.timestamp},          {"proprio", rec.proprio}, {"motor", rec.motor},
          {"action", rec.action},    {"noise_applied", rec.noise_applied}, {"arm", nullptr}};
}

DemonstrationRecord demonstration_from_json(const json& j) {
  try {
    if (j.at("v").get<int>() != kDemoSchemaVersion) throw ValidationError("unsupported demonstration version");
    DemonstrationRecord rec;
    rec.timestamp = finite_number(j, "t");
    rec.proprio = std_array_from<kNumJoints>(j, "proprio");
    rec.motor = std_array_from<kNumMotors>(j, "motor");
    rec.action = std_array_from<kNumJoints>(j, "action");
    rec.noise_applied = std_array_from<kNumJoints>(j, "noise_applied");
    return rec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed demonstration record: ") + e.what());
  }
}

void TeleopConfig::validate() const {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ConfigError("teleop rate must be > 0");
  retarget.validate();
}

// Session.

TeleopSession::TeleopSession(HandModel model, CalibrationSet cals, PlantConfig plant_cfg, TeleopConfig cfg)
    : model_(std::move(model)),
      cals_(std::move(cals)),
      cfg_(std::move(cfg)),
      plant_(model_, std::move(plant_cfg)),
      noise_rng_(cfg_.seed) {
  cfg_.validate();
  require_complete(cals_);
  for (const auto& c : cals_) c->validate();
  commanded_ = apply_coupling(model_, clamp_to_limits(model_, JointState::Zero()), CouplingMode::Rigid);
  retargeted_ = commanded_;
}

TeleopMessage TeleopSession::make(MessagePayload payload) {
  return TeleopMessage{out_seq_++, time_, std::move(payload)};
}

TeleopMessage TeleopSession::error(std::string code, std::string message, std::optional<std::uint64_t> ref) {
  return make(ErrorPayload{std::move(code), std::move(message), ref});
}

std::vector<TeleopMessage> TeleopSession::handle_text(const std::string& text) {
  TeleopMessage msg;
  try {
    msg = decode_message(text);
  } catch (const ValidationError& e) {
    std::optional<std::uint64_t> ref;
    const json j = json::parse(text, nullptr, false);
    if (j.is_object() && j.contains("seq") && j["seq"].is_number_unsigned()) ref = j["seq"].get<std::uint64_t>();
    return {error("invalid_message", e.what(), ref)};
  }
  return handle(msg);
}

std::vector<TeleopMessage> TeleopSession::handle(const TeleopMessage& msg) {
  if (last_in_seq_ && msg.seq <= *last_in_seq_) {
    return {error("seq_not_monotone", "sequence number must increase", msg.seq)};
  }
  last_in_seq_ = msg.seq;

  try {
    switch (msg.type()) {
      case MessageType::Pose:
        handle_pose(std::get<PosePayload>(msg.payload));
        break;
      case MessageType::WristCmd: {
        const auto& w = std::get<WristCmdPayload>(msg.payload);
        if (!std::isfinite(w.alpha) || !std::isfinite(w.beta)) throw ValidationError("wrist command must be finite");
        commanded_[joints::kWristFe] = model_.limits_of(joints::kWristFe).clamp(w.alpha);
        commanded_[joints::kWristRud] = model_.limits_of(joints::kWristRud).clamp(w.beta);
        retargeted_[joints::kWristFe] = commanded_[joints::kWristFe];
        retargeted_[joints::kWristRud] = commanded_[joints::kWristRud];
        break;
      }
      case MessageType::ConfigUpdate:
        handle_config(std::get<ConfigUpdatePayload>(msg.payload));
        break;
      case MessageType::RecordStart: {
        const double sigma = std::get<RecordStartPayload>(msg.payload).noise_sigma;
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("noise_sigma must be finite and >= 0");
        if (!demo_out_) return {error("no_demo_sink", "recording has no destination", msg.seq)};
        recording_ = true;
        noise_sigma_ = sigma;
        break;
      }
      case MessageType::RecordStop:
        recording_ = false;
        break;
      default:
        return {error("unexpected_type", std::string("clients may not send ") + to_string(msg.type()), msg.seq)};
    }
  } catch (const DegeneratePoseError& e) {
    return {error("degenerate_pose", e.what(), msg.seq)};
  } catch (const Error& e) {
    return {error("invalid_message", e.what(), msg.seq)};
  }
  return {};
}

void TeleopSession::handle_pose(const PosePayload& p) {
  const RetargetResult result = solve_retarget({p.keypoints, time_}, model_, retargeted_, cfg_.retarget);
  JointState target = result.theta;
  target[joints::kWristFe] = commanded_[joints::kWristFe];
  target[joints::kWristRud] = commanded_[joints::kWristRud];
  retargeted_ = target;
  const JointState smoothed = smooth_step(target, commanded_, cfg_.retarget.smoothing_lambda);
  commanded_ = apply_coupling(model_, clamp_to_limits(model_, smoothed), CouplingMode::Rigid);
  residual_ = result.residual;
}

void TeleopSession::handle_config(const ConfigUpdatePayload& p) {
  CalibrationSet next = cals_;
  for (const auto& [motor, c] : p.c) {
    if (motor < 0 || motor >= kNumMotors || !next[motor]) {
      throw ValidationError("config update names unknown motor " + std::to_string(motor));
    }
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw ValidationError("scaling factor for motor " + std::to_string(motor) + " must be > 0");
    }
    next[motor]->c = c;
  }
  RetargetConfig rc = cfg_.retarget;
  if (p.smoothing_lambda) rc.smoothing_lambda = *p.smoothing_lambda;
  rc.validate();
  cals_ = next;
  cfg_.retarget = rc;
}

std::vector<TeleopMessage> TeleopSession::control_tick() {
  std::vector<TeleopMessage> out;
  JointState action = commanded_;
  std::array<double, kNumJoints> noise{};
  if (recording_ && noise_sigma_ > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise_sigma_);
    for (int i = 0; i < kNumJoints; ++i) noise[i] = gauss(noise_rng_);
    for (int i = 0; i < kNumJoints; ++i) action.angles[i] += noise[i];
    action = clamp_to_limits(model_, action);
  }
  const MotorVector cmd =
      state_to_motor_vector(model_, apply_coupling(model_, action, CouplingMode::Rigid), cals_);

  plant_.step(cmd, cfg_.dt());
  ++ticks_;
  time_ = static_cast<double>(ticks_) * cfg_.dt();

  const PlantState& ps = plant_.state();
  out.push_back(make(StatePayload{ps.measured, commanded_, ps.motor_pos, ps.temps, residual_, recording_}));

  if (recording_) {
    DemonstrationRecord rec;
    rec.timestamp = time_;
    for (int i = 0; i < kNumJoints; ++i) {
      rec.proprio[i] = ps.measured.angles[i];
      rec.action[i] = action.angles[i];
      rec.noise_applied[i] = noise[i];
    }
    for (int m = 0; m < kNumMotors; ++m) rec.motor[m] = cmd[m];
    if (last_record_time_ && !(rec.timestamp > *last_record_time_)) {
      throw Error("demonstration timestamps must increase");
    }
    last_record_time_ = rec.timestamp;
    *demo_out_ << to_json(rec).dump() << '\n';
    if (!*demo_out_) {
      recording_ = false;
      out.push_back(error("storage_failure", "could not write demonstration record; recording stopped", std::nullopt));
    }
  }
  return out;
}

// Replay.

void write_input_log(std::ostream& out, const InputLog& log) {
  out << json{{"handctl_input_log", 1}, {"seed", log.seed}, {"rate_hz", log.rate_hz}, {"ticks", log.ticks}}.dump()
      << '\n';
  for (const auto& e : log.entries) out << json{{"tick", e.tick}, {"msg", e.message}}.dump() << '\n';
}

InputLog read_input_log(std::istream& in) {
  InputLog log;
  std::string line;
  bool header = false;
  try {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line);
      if (!header) {
        if (j.at("handctl_input_log").get<int>() != 1) throw ConfigError("unsupported input log version");
        log.seed = j.at("seed").get<std::uint64_t>();
        log.rate_hz = j.at("rate_hz").get<double>();
        log.ticks = j.at("ticks").get<std::uint64_t>();
        header = true;
        continue;
      }
      log.entries.push_back({j.at("tick").get<std::uint64_t>(), j.at("msg").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed input log: ") + e.what());
  }
  if (!header) throw ConfigError("input log is empty");
  return log;
}

void replay_session(const HandModel& model, const CalibrationSet& cals, const PlantConfig& plant_cfg,
                    TeleopConfig cfg, const InputLog& log, std::ostream& messages_out, std::ostream& demo_out) {
  cfg.seed = log.seed;
  cfg.rate_hz = log.rate_hz;
  TeleopSession session(model, cals, plant_cfg, cfg);
  session.set_demo_sink(&demo_out);

  auto emit = [&](const std::vector<TeleopMessage>& msgs) {
    for (const auto& m : msgs) messages_out << encode_message(m) << '\n';
  };
  std::size_t next = 0;
  for (std::uint64_t tick = 0; tick <= log.ticks; ++tick) {
    while (next < log.entries.size() && log.entries[next].tick == tick) {
      emit(session.handle_text(log.entries[next].message));
      ++next;
    }
    if (tick < log.ticks) emit(session.control_tick());
  }
  if (next != log.entries.size()) throw ConfigError("input log entries out of order or past the last tick");
}

// Framing and transport.

std::string frame_message(const std::string& json_text) {
  if (json_text.size() > kMaxMessageBytes) throw FramingError("message exceeds maximum frame size");
  const auto n = static_cast<std::uint32_t>(json_text.size());
  std::string out;
  out.reserve(4 + json_text.size());
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out += json_text;
  return out;
}

void MessageFramer::feed(const char* data, std::size_t n) { buffer_.append(data, n); }

std::optional<std::string> MessageFramer::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (n > kMaxMessageBytes) throw FramingError("incoming frame of " + std::to_string(n) + " bytes exceeds limit");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string msg = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return msg;
}

namespace {

struct Inbound {
  std::string text;
};

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

ServeStats serve(TeleopSession& session, const ServeOptions& opts, const std::atomic<bool>& stop) {
  const int listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(opts.port);
  if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listen_fd, 1) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd);
    throw IoError("cannot listen on port " + std::to_string(opts.port) + ": " + why);
  }

  std::ofstream demo(opts.demo_path, std::ios::app);
  if (!demo) {
    ::close(listen_fd);
    throw IoError("cannot open demonstration file " + opts.demo_path);
  }
  session.set_demo_sink(&demo);

  BlockingQueue<Inbound> inbox;
  std::atomic<int> client_fd{-1};
  std::atomic<bool> ingress_stop{false};

  std::jthread ingress([&] {
    while (!stop && !ingress_stop) {
      pollfd lp{listen_fd, POLLIN, 0};
      if (::poll(&lp, 1, 100) <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      client_fd = fd;
      MessageFramer framer;
      char buf[4096];
      while (!stop && !ingress_stop) {
        pollfd cp{fd, POLLIN, 0};
        if (::poll(&cp, 1, 100) <= 0) continue;
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        try {
          framer.feed(buf, static_cast<std::size_t>(n));
          while (auto text = framer.next()) inbox.push({std::move(*text)});
        } catch (const FramingError&) {
          break;
        }
      }
      client_fd = -1;
      ::close(fd);
    }
  });

  ServeStats stats;
  InputLog log;
  log.seed = session.config().seed;
  log.rate_hz = session.config().rate_hz;
  std::ofstream messages_log;
  if (!opts.messages_log_path.empty()) {
    messages_log.open(opts.messages_log_path);
    if (!messages_log) throw IoError("cannot open message log " + opts.messages_log_path);
  }

  auto emit = [&](const std::vector<TeleopMessage>& msgs) {
    for (const auto& m : msgs) {
      const std::string text = encode_message(m);
      if (messages_log.is_open()) messages_log << text << '\n';
      const int fd = client_fd.load();
      if (fd >= 0 && send_all(fd, frame_message(text))) ++stats.messages_out;
    }
  };

  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(session.config().dt()));
  const auto max_ticks = opts.max_seconds > 0.0
                             ? static_cast<std::uint64_t>(std::llround(opts.max_seconds * session.config().rate_hz))
                             : 0;
  auto deadline = Clock::now() + period;
  while (!stop && (max_ticks == 0 || stats.ticks < max_ticks)) {
    while (auto in = inbox.try_pop()) {
      ++stats.messages_in;
      log.entries.push_back({session.ticks(), in->text});
      emit(session.handle_text(in->text));
    }
    emit(session.control_tick());
    ++stats.ticks;
    // A late tick still advances plant time by exactly one period.
    if (Clock::now() > deadline) {
      ++stats.overruns;
    } else {
      std::this_thread::sleep_until(deadline);
    }
    deadline += period;
  }

  ingress_stop = true;
  inbox.close();
  ingress.join();
  ::close(listen_fd);
  session.set_demo_sink(nullptr);

  log.ticks = session.ticks();
  if (!opts.input_log_path.empty()) {
    std::ofstream out(opts.input_log_path);
    if (!out) throw IoError("cannot write input log " + opts.input_log_path);
    write_input_log(out, log);
  }
  return stats;
}

}  // namespace handctl
