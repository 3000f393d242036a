#include "handctl/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "handctl/errors.hpp"

namespace handctl {

using nlohmann::json;

namespace {

void check_schema(const json& j, const char* name, int version) {
  if (!j.is_object() || j.value("schema", std::string()) != name) {
    throw ConfigError(std::string("expected schema '") + name + "'");
  }
  if (j.value("version", 0) != version) {
    throw ConfigError(std::string("unsupported ") + name + " version " + std::to_string(j.value("version", 0)));
  }
}

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json record_json(const CalibrationRecord& r) {
  return {{"p_min", r.p_min}, {"p_max", r.p_max}, {"theta_min", r.theta_min}, {"theta_max", r.theta_max}, {"c", r.c}};
}

CalibrationRecord record_from(const json& j) {
  CalibrationRecord r{j.at("p_min").get<double>(), j.at("p_max").get<double>(), j.at("theta_min").get<double>(),
                      j.at("theta_max").get<double>(), j.value("c", 1.0)};
  r.validate();
  return r;
}

const char* coupling_name(PlantCoupling c) {
  return c == PlantCoupling::RigidCoupled ? "rigid_coupled" : "free_uncoupled";
}

template <typename F>
auto wrap_json_errors(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace

json to_json(const HandModel& model) {
  json digits = json::object();
  for (int d = 0; d < kNumDigits; ++d) {
    const DigitGeometry& g = model.digits[d];
    json dj = {{"base_mm", vec3(g.base_mm)},
               {"yaw_deg", g.yaw_deg},
               {"pitch_deg", g.pitch_deg},
               {"links_mm", g.links_mm},
               {"abduction_sign", g.abduction_sign}};
    digits[std::string(to_string(static_cast<Finger>(d)))] = dj;
  }
  json limits = json::object();
  json actuation = json::object();
  for (const auto& j : all_joints()) {
    limits[to_string(j)] = {model.limits_of(j).theta_min, model.limits_of(j).theta_max};
    actuation[to_string(j)] = model.motor_of(j);
  }
  json coupling = json::array();
  for (const auto& [pip, dip] : model.coupling) coupling.push_back({to_string(pip), to_string(dip)});
  return {{"schema", "handctl.hand_model"},
          {"version", kHandModelSchemaVersion},
          {"wrist_pivot_mm", vec3(model.wrist_pivot_mm)},
          {"thumb_cmc_axis", vec3(model.thumb_cmc_axis)},
          {"digits", digits},
          {"limits_deg", limits},
          {"actuation_map", actuation},
          {"coupling", coupling}};
}

HandModel hand_model_from_json(const json& j) {
  return wrap_json_errors([&] {
    check_schema(j, "handctl.hand_model", kHandModelSchemaVersion);
    HandModel m;
    m.wrist_pivot_mm = vec3_from(j.at("wrist_pivot_mm"));
    m.thumb_cmc_axis = vec3_from(j.at("thumb_cmc_axis"));
    for (int d = 0; d < kNumDigits; ++d) {
      const json& dj = j.at("digits").at(std::string(to_string(static_cast<Finger>(d))));
      DigitGeometry& g = m.digits[d];
      g.base_mm = vec3_from(dj.at("base_mm"));
      g.yaw_deg = dj.value("yaw_deg", 0.0);
      g.pitch_deg = dj.value("pitch_deg", 0.0);
      g.links_mm = dj.at("links_mm").get<std::array<double, 3>>();
      g.abduction_sign = dj.value("abduction_sign", 1.0);
    }
    for (const auto& jt : all_joints()) {
      const json& lim = j.at("limits_deg").at(to_string(jt));
      m.limits[jt.index()] = {lim.at(0).get<double>(), lim.at(1).get<double>()};
      m.actuation_map[jt.index()] = j.at("actuation_map").at(to_string(jt)).get<int>();
    }
    for (const auto& pair : j.at("coupling")) {
      m.coupling.emplace_back(joint_from_string(pair.at(0).get<std::string>()),
                              joint_from_string(pair.at(1).get<std::string>()));
    }
    m.validate();
    return m;
  });
}

json to_json(const CalibrationFile& cal) {
  json motors = json::array();
  for (int m = 0; m < kNumMotors; ++m) {
    if (!cal.motors[m]) continue;
    json r = record_json(*cal.motors[m]);
    r["motor"] = m;
    motors.push_back(r);
  }
  json encoders = json::array();
  for (const auto& [channel, ec] : cal.encoders) {
    encoders.push_back(
        {{"channel", channel}, {"joint", to_string(ec.joint)}, {"offset", ec.offset}, {"direction", ec.direction}});
  }
  return {{"schema", "handctl.calibration"},
          {"version", kCalibrationSchemaVersion},
          {"motors", motors},
          {"encoders", encoders}};
}

CalibrationFile calibration_from_json(const json& j) {
  return wrap_json_errors([&] {
    check_schema(j, "handctl.calibration", kCalibrationSchemaVersion);
    CalibrationFile cal;
    for (const auto& r : j.at("motors")) {
      const int m = r.at("motor").get<int>();
      if (m < 0 || m >= kNumMotors) throw ConfigError("calibration motor index out of range");
      if (cal.motors[m]) throw ConfigError("duplicate calibration for motor " + std::to_string(m));
      cal.motors[m] = record_from(r);
    }
    if (j.contains("encoders")) {
      for (const auto& e : j.at("encoders")) {
        EncoderCalibration ec{e.at("offset").get<double>(), e.at("direction").get<int>(),
                              joint_from_string(e.at("joint").get<std::string>())};
        ec.validate();
        const int ch = e.at("channel").get<int>();
        if (ch < 0 || ch >= kEncoderChannels) throw ConfigError("encoder channel out of range");
        cal.encoders.emplace_back(ch, ec);
      }
    }
    return cal;
  });
}

json to_json(const PlantConfig& cfg) {
  json motors = json::array();
  for (int m = 0; m < kNumMotors; ++m) {
    const auto& mp = cfg.motors[m];
    motors.push_back(
        {{"motor", m}, {"truth", record_json(mp.truth)}, {"slack", mp.slack}, {"coulomb_band", mp.coulomb_band}});
  }
  json thermal = json::object();
  for (int g = 0; g < kNumMotorGroups; ++g) {
    const auto& t = cfg.thermal[g];
    thermal[to_string(static_cast<MotorGroup>(g))] = {{"ambient_c", t.ambient_c}, {"r_th", t.r_th},
                                                      {"c_th", t.c_th},           {"p_active", t.p_active},
                                                      {"p_idle", t.p_idle}};
  }
  return {{"schema", "handctl.plant"},
          {"version", kPlantSchemaVersion},
          {"motors", motors},
          {"noise_sigma", cfg.noise_sigma},
          {"coupling_mode", coupling_name(cfg.coupling_mode)},
          {"uncoupled_ratio_jitter", cfg.uncoupled_ratio_jitter},
          {"uncoupled_dip_band", cfg.uncoupled_dip_band},
          {"thermal", thermal},
          {"max_speed", cfg.max_speed},
          {"tension_stiffness", cfg.tension_stiffness},
          {"stop_stiffness", cfg.stop_stiffness},
          {"load_noise_sigma", cfg.load_noise_sigma},
          {"travel", {cfg.travel_min, cfg.travel_max}},
          {"seed", cfg.seed}};
}

PlantConfig plant_config_from_json(const json& j) {
  return wrap_json_errors([&] {
    check_schema(j, "handctl.plant", kPlantSchemaVersion);
    PlantConfig cfg;
    const auto& motors = j.at("motors");
    if (motors.size() != static_cast<std::size_t>(kNumMotors)) throw ConfigError("plant config needs 16 motors");
    for (const auto& mj : motors) {
      const int m = mj.at("motor").get<int>();
      if (m < 0 || m >= kNumMotors) throw ConfigError("plant motor index out of range");
      cfg.motors[m] = {record_from(mj.at("truth")), mj.value("slack", 0.0), mj.value("coulomb_band", 0.0)};
    }
    cfg.noise_sigma = j.value("noise_sigma", 0.0);
    const std::string mode = j.value("coupling_mode", std::string("rigid_coupled"));
    if (mode == "rigid_coupled") {
      cfg.coupling_mode = PlantCoupling::RigidCoupled;
    } else if (mode == "free_uncoupled") {
      cfg.coupling_mode = PlantCoupling::FreeUncoupled;
    } else {
      throw ConfigError("unknown coupling_mode " + mode);
    }
    cfg.uncoupled_ratio_jitter = j.value("uncoupled_ratio_jitter", 0.0);
    cfg.uncoupled_dip_band = j.value("uncoupled_dip_band", 0.0);
    for (int g = 0; g < kNumMotorGroups; ++g) {
      const json& t = j.at("thermal").at(to_string(static_cast<MotorGroup>(g)));
      cfg.thermal[g] = {t.at("ambient_c").get<double>(), t.at("r_th").get<double>(), t.at("c_th").get<double>(),
                        t.at("p_active").get<double>(), t.at("p_idle").get<double>()};
    }
    cfg.max_speed = j.value("max_speed", cfg.max_speed);
    cfg.tension_stiffness = j.value("tension_stiffness", cfg.tension_stiffness);
    cfg.stop_stiffness = j.value("stop_stiffness", cfg.stop_stiffness);
    cfg.load_noise_sigma = j.value("load_noise_sigma", 0.0);
    if (j.contains("travel")) {
      cfg.travel_min = j.at("travel").at(0).get<double>();
      cfg.travel_max = j.at("travel").at(1).get<double>();
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.validate();
    return cfg;
  });
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

HandModel load_hand_model(const std::string& path) { return hand_model_from_json(read_json_file(path)); }
CalibrationFile load_calibration(const std::string& path) { return calibration_from_json(read_json_file(path)); }
void save_calibration(const std::string& path, const CalibrationFile& cal) { write_json_file(path, to_json(cal)); }
PlantConfig load_plant_config(const std::string& path) { return plant_config_from_json(read_json_file(path)); }

std::uint64_t config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace handctl
