#include "tagclip/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tagclip {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest exact round trip
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::inductive:
      return "inductive";
    case Protocol::transductive:
      return "transductive";
    case Protocol::supervised:
      return "supervised";
  }
  return "?";
}

Protocol parse_protocol(const std::string& s) {
  if (s == "inductive") return Protocol::inductive;
  if (s == "transductive") return Protocol::transductive;
  if (s == "supervised") return Protocol::supervised;
  throw ConfigError("unknown protocol '" + s + "'");
}

void RunConfig::validate() const {
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (unseen >= classes) throw ConfigError("at least one class must be seen");
  if (dim < 4) throw ConfigError("dim must be at least 4");
  if (heads == 0 || dim % heads != 0) throw ConfigError("heads must divide dim");
  if (layers < 1 || layers > 3) throw ConfigError("layers must be 1..3");
  if (grid_rows == 0 || grid_cols == 0) throw ConfigError("grid must be non-empty");
  if (samples < 2) throw ConfigError("need at least 2 samples for a train/test split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0,1)");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (weighted_map && !trusty_token) throw ConfigError("weighted_map needs trusty_token");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must be in (0,1)");
  }
  if (!(st_threshold >= 0.0 && st_threshold <= 1.0)) throw ConfigError("st_threshold must be in [0,1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch == 0) throw ConfigError("batch must be at least 1");
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (protocol == Protocol::transductive && unseen == 0) {
    throw ConfigError("transductive protocol needs unseen classes");
  }
}

HeadConfig RunConfig::head_config() const {
  HeadConfig h;
  h.dim = dim;
  h.heads = heads;
  h.layers = layers;
  h.trusty_token = trusty_token;
  h.trusty_learner = trusty_learner;
  h.variant = variant;
  h.aligned_init = aligned_init;
  return h;
}

ToyDataConfig RunConfig::data_config() const {
  ToyDataConfig d;
  d.seed = seed;
  d.classes = classes;
  d.unseen = unseen;
  d.dim = dim;
  d.grid = {grid_rows, grid_cols};
  d.samples = samples;
  d.noise = noise;
  return d;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  auto b = [](bool v) { return v ? "1" : "0"; };
  os << "seed=" << c.seed << "\n"
     << "classes=" << c.classes << "\n"
     << "unseen=" << c.unseen << "\n"
     << "dim=" << c.dim << "\n"
     << "grid_rows=" << c.grid_rows << "\n"
     << "grid_cols=" << c.grid_cols << "\n"
     << "samples=" << c.samples << "\n"
     << "test_fraction=" << fmt_double(c.test_fraction) << "\n"
     << "noise=" << fmt_double(c.noise) << "\n"
     << "protocol=" << to_string(c.protocol) << "\n"
     << "trusty_token=" << b(c.trusty_token) << "\n"
     << "trusty_learner=" << b(c.trusty_learner) << "\n"
     << "weighted_map=" << b(c.weighted_map) << "\n"
     << "variant=" << to_string(c.variant) << "\n"
     << "aligned_init=" << b(c.aligned_init) << "\n"
     << "heads=" << c.heads << "\n"
     << "layers=" << c.layers << "\n"
     << "alpha=" << fmt_double(c.weights.alpha) << "\n"
     << "beta=" << fmt_double(c.weights.beta) << "\n"
     << "gamma=" << fmt_double(c.weights.gamma) << "\n"
     << "trusty_supervision=" << b(c.trusty_supervision) << "\n"
     << "learning_rate=" << fmt_double(c.learning_rate) << "\n"
     << "adam_beta1=" << fmt_double(c.adam_beta1) << "\n"
     << "adam_beta2=" << fmt_double(c.adam_beta2) << "\n"
     << "adam_eps=" << fmt_double(c.adam_eps) << "\n"
     << "steps=" << c.steps << "\n"
     << "batch=" << c.batch << "\n"
     << "warmup_fraction=" << fmt_double(c.warmup_fraction) << "\n"
     << "st_threshold=" << fmt_double(c.st_threshold) << "\n";
  return os.str();
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  auto sz = [&] { return static_cast<std::size_t>(to_u64(key, v)); };
  if (key == "seed") c.seed = to_u64(key, v);
  else if (key == "classes") c.classes = sz();
  else if (key == "unseen") c.unseen = sz();
  else if (key == "dim") c.dim = sz();
  else if (key == "grid_rows") c.grid_rows = sz();
  else if (key == "grid_cols") c.grid_cols = sz();
  else if (key == "samples") c.samples = sz();
  else if (key == "test_fraction") c.test_fraction = to_double(key, v);
  else if (key == "noise") c.noise = to_double(key, v);
  else if (key == "protocol") c.protocol = parse_protocol(v);
  else if (key == "trusty_token") c.trusty_token = to_bool(key, v);
  else if (key == "trusty_learner") c.trusty_learner = to_bool(key, v);
  else if (key == "weighted_map") c.weighted_map = to_bool(key, v);
  else if (key == "variant") {
    try {
      c.variant = parse_learner_variant(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  else if (key == "aligned_init") c.aligned_init = to_bool(key, v);
  else if (key == "heads") c.heads = sz();
  else if (key == "layers") c.layers = sz();
  else if (key == "alpha") c.weights.alpha = to_double(key, v);
  else if (key == "beta") c.weights.beta = to_double(key, v);
  else if (key == "gamma") c.weights.gamma = to_double(key, v);
  else if (key == "trusty_supervision") c.trusty_supervision = to_bool(key, v);
  else if (key == "learning_rate") c.learning_rate = to_double(key, v);
  else if (key == "adam_beta1") c.adam_beta1 = to_double(key, v);
  else if (key == "adam_beta2") c.adam_beta2 = to_double(key, v);
  else if (key == "adam_eps") c.adam_eps = to_double(key, v);
  else if (key == "steps") c.steps = sz();
  else if (key == "batch") c.batch = sz();
  else if (key == "warmup_fraction") c.warmup_fraction = to_double(key, v);
  else if (key == "st_threshold") c.st_threshold = to_double(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << serialize_config(c);
}

}  // namespace tagclip
