#include "splatdrop/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace splatdrop {

namespace {

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InputError("invalid number for " + key + ": '" + s + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InputError("invalid integer for " + key + ": '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InputError("invalid seed for " + key + ": '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw InputError("invalid boolean for " + key + ": '" + s + "'");
}

Eigen::Vector3d parse_color(const std::string& key, const std::string& s) {
  std::string t;
  for (char c : s) {
    if (c != '[' && c != ']' && c != ' ') t += c;
  }
  std::stringstream ss(t);
  std::string part;
  Eigen::Vector3d out;
  int k = 0;
  while (std::getline(ss, part, ',')) {
    if (k >= 3) throw InputError(key + " needs three components");
    out[k++] = parse_double(key, part);
  }
  if (k == 1) out = Eigen::Vector3d::Constant(out[0]);
  else if (k != 3) throw InputError(key + " needs three components");
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter real(T TrainConfig::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_double(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"iterations", [](TrainConfig& c, auto& k, auto& v) { c.iterations = static_cast<int>(parse_int(k, v)); }},
      {"seed", [](TrainConfig& c, auto& k, auto& v) { c.seed = parse_u64(k, v); }},
      {"precision", [](TrainConfig& c, auto&, auto& v) { c.precision = parse_precision(v); }},
      {"eval_precision", [](TrainConfig& c, auto&, auto& v) { c.eval_precision = parse_precision(v); }},
      {"background", [](TrainConfig& c, auto& k, auto& v) { c.background = parse_color(k, v); }},
      {"sh_degree", [](TrainConfig& c, auto& k, auto& v) { c.sh_degree = static_cast<int>(parse_int(k, v)); }},
      {"sh_increase_interval", [](TrainConfig& c, auto& k, auto& v) { c.sh_increase_interval = static_cast<int>(parse_int(k, v)); }},
      {"init_points", [](TrainConfig& c, auto& k, auto& v) { c.init_points = static_cast<int>(parse_int(k, v)); }},
      {"lambda_depth", real(&TrainConfig::lambda_depth)},
      {"eval_interval", [](TrainConfig& c, auto& k, auto& v) { c.eval_interval = static_cast<int>(parse_int(k, v)); }},
      {"checkpoint_interval", [](TrainConfig& c, auto& k, auto& v) { c.checkpoint_interval = static_cast<int>(parse_int(k, v)); }},
      {"lr.position_init", [](TrainConfig& c, auto& k, auto& v) { c.lr.position_init = parse_double(k, v); }},
      {"lr.position_final", [](TrainConfig& c, auto& k, auto& v) { c.lr.position_final = parse_double(k, v); }},
      {"lr.sh_dc", [](TrainConfig& c, auto& k, auto& v) { c.lr.sh_dc = parse_double(k, v); }},
      {"lr.sh_rest", [](TrainConfig& c, auto& k, auto& v) { c.lr.sh_rest = parse_double(k, v); }},
      {"lr.opacity", [](TrainConfig& c, auto& k, auto& v) { c.lr.opacity = parse_double(k, v); }},
      {"lr.scaling", [](TrainConfig& c, auto& k, auto& v) { c.lr.scaling = parse_double(k, v); }},
      {"lr.rotation", [](TrainConfig& c, auto& k, auto& v) { c.lr.rotation = parse_double(k, v); }},
      {"densify.enabled", [](TrainConfig& c, auto& k, auto& v) { c.densify.enabled = parse_bool(k, v); }},
      {"densify.interval", [](TrainConfig& c, auto& k, auto& v) { c.densify.interval = static_cast<int>(parse_int(k, v)); }},
      {"densify.start", [](TrainConfig& c, auto& k, auto& v) { c.densify.start = static_cast<int>(parse_int(k, v)); }},
      {"densify.end", [](TrainConfig& c, auto& k, auto& v) { c.densify.end = static_cast<int>(parse_int(k, v)); }},
      {"densify.grad_threshold", [](TrainConfig& c, auto& k, auto& v) { c.densify.grad_threshold = parse_double(k, v); }},
      {"densify.percent_dense", [](TrainConfig& c, auto& k, auto& v) { c.densify.percent_dense = parse_double(k, v); }},
      {"densify.prune_opacity", [](TrainConfig& c, auto& k, auto& v) { c.densify.prune_opacity = parse_double(k, v); }},
      {"densify.opacity_reset_interval", [](TrainConfig& c, auto& k, auto& v) { c.densify.opacity_reset_interval = static_cast<int>(parse_int(k, v)); }},
      {"densify.max_world_scale", [](TrainConfig& c, auto& k, auto& v) { c.densify.max_world_scale = parse_double(k, v); }},
      {"rdr.enabled", [](TrainConfig& c, auto& k, auto& v) { c.rdr.enabled = parse_bool(k, v); }},
      {"rdr.rate", [](TrainConfig& c, auto& k, auto& v) { c.rdr.rate = parse_double(k, v); }},
      {"rdr.lambda", [](TrainConfig& c, auto& k, auto& v) { c.rdr.lambda = parse_double(k, v); }},
      {"ess.enabled", [](TrainConfig& c, auto& k, auto& v) { c.ess.enabled = parse_bool(k, v); }},
      {"ess.edge_threshold", [](TrainConfig& c, auto& k, auto& v) { c.ess.edge_threshold = parse_double(k, v); }},
      {"ess.scale_multiplier", [](TrainConfig& c, auto& k, auto& v) { c.ess.scale_multiplier = parse_double(k, v); }},
      {"ess.interval", [](TrainConfig& c, auto& k, auto& v) { c.ess.interval = static_cast<int>(parse_int(k, v)); }},
      {"ess.start", [](TrainConfig& c, auto& k, auto& v) { c.ess.start = static_cast<int>(parse_int(k, v)); }},
      {"ess.end", [](TrainConfig& c, auto& k, auto& v) { c.ess.end = static_cast<int>(parse_int(k, v)); }},
  };
  return table;
}

void flatten(const nlohmann::json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const nlohmann::json& v = it.value();
    if (v.is_object()) {
      flatten(v, key, out);
    } else if (v.is_string()) {
      out.emplace_back(key, v.get<std::string>());
    } else if (v.is_array()) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw InputError("config key " + key + " must hold numbers");
        s += (i ? "," : "") + v[i].dump();
      }
      out.emplace_back(key, s);
    } else if (v.is_boolean() || v.is_number()) {
      out.emplace_back(key, v.dump());
    } else {
      throw InputError("config key " + key + " has an unsupported value");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 1) throw InputError("iterations must be >= 1");
  if (sh_degree < 0 || sh_degree > 3) throw InputError("sh_degree must lie in [0, 3]");
  if (sh_increase_interval <= 0) throw InputError("sh_increase_interval must be > 0");
  if (init_points < 1) throw InputError("init_points must be >= 1");
  if (eval_interval <= 0) throw InputError("eval_interval must be > 0");
  if (checkpoint_interval < 0) throw InputError("checkpoint_interval must be >= 0");
  if (!(lambda_depth >= 0.0)) throw InputError("lambda_depth must be >= 0");
  if (!background.allFinite()) throw InputError("background must be finite");
  for (double r : {lr.position_init, lr.position_final, lr.sh_dc, lr.sh_rest, lr.opacity,
                   lr.scaling, lr.rotation}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("learning rates must be finite and >= 0");
  }
  if (lr.position_init > 0.0 && !(lr.position_final > 0.0)) {
    throw InputError("lr.position_final must be > 0 for the exponential decay");
  }
  if (densify.interval <= 0) throw InputError("densify.interval must be > 0");
  if (densify.opacity_reset_interval <= 0) throw InputError("densify.opacity_reset_interval must be > 0");
  if (densify.start < 0 || densify.end < densify.start) {
    throw InputError("densify.start/densify.end must satisfy 0 <= start <= end");
  }
  if (!(densify.grad_threshold >= 0.0)) throw InputError("densify.grad_threshold must be >= 0");
  if (!(densify.percent_dense > 0.0)) throw InputError("densify.percent_dense must be > 0");
  rdr.validate();
  ess.validate();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    apply_preset(value);
    return;
  }
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw InputError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  TrainConfig c;
  std::vector<std::pair<std::string, std::string>> entries;
  flatten(j, "", entries);
  // The preset goes first so explicit keys override it.
  for (const auto& [k, v] : entries) {
    if (k == "preset") c.apply_preset(v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") c.set(k, v);
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["precision"] = to_string(precision);
  j["eval_precision"] = to_string(eval_precision);
  j["background"] = {background[0], background[1], background[2]};
  j["sh_degree"] = sh_degree;
  j["sh_increase_interval"] = sh_increase_interval;
  j["init_points"] = init_points;
  j["lambda_depth"] = lambda_depth;
  j["eval_interval"] = eval_interval;
  j["checkpoint_interval"] = checkpoint_interval;
  j["lr"] = {{"position_init", lr.position_init}, {"position_final", lr.position_final},
             {"sh_dc", lr.sh_dc},                 {"sh_rest", lr.sh_rest},
             {"opacity", lr.opacity},             {"scaling", lr.scaling},
             {"rotation", lr.rotation}};
  j["densify"] = {{"enabled", densify.enabled},
                  {"interval", densify.interval},
                  {"start", densify.start},
                  {"end", densify.end},
                  {"grad_threshold", densify.grad_threshold},
                  {"percent_dense", densify.percent_dense},
                  {"prune_opacity", densify.prune_opacity},
                  {"opacity_reset_interval", densify.opacity_reset_interval},
                  {"max_world_scale", densify.max_world_scale}};
  j["rdr"] = {{"enabled", rdr.enabled}, {"rate", rdr.rate}, {"lambda", rdr.lambda}};
  j["ess"] = {{"enabled", ess.enabled},
              {"edge_threshold", ess.edge_threshold},
              {"scale_multiplier", ess.scale_multiplier},
              {"interval", ess.interval},
              {"start", ess.start},
              {"end", ess.end}};
  return j;
}

void TrainConfig::apply_preset(const std::string& name) {
  if (name == "llff") {
    rdr.rate = 0.4;
    rdr.lambda = 0.2;
    ess.edge_threshold = 1e-3;
    ess.scale_multiplier = 50.0;
  } else if (name == "dtu") {
    rdr.rate = 0.3;
    rdr.lambda = 0.5;
    ess.edge_threshold = 5e-2;
    ess.scale_multiplier = 1.0;
  } else {
    throw InputError("unknown preset '" + name + "' (expected llff or dtu)");
  }
}

}  // namespace splatdrop
