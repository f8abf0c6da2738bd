#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "tagclip/embeddings.hpp"
#include "tagclip/head.hpp"
#include "tagclip/losses.hpp"

namespace tagclip {

enum class Protocol { inductive, transductive, supervised };

std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything that determines a run. Serialized as key=value lines.
struct RunConfig {
  std::uint64_t seed = 0;

  // data
  std::size_t classes = 8;
  std::size_t unseen = 2;
  std::size_t dim = 32;
  std::size_t grid_rows = 16;
  std::size_t grid_cols = 16;
  std::size_t samples = 300;
  double test_fraction = 0.2;
  double noise = 0.1;

  // model
  Protocol protocol = Protocol::inductive;
  bool trusty_token = true;
  bool trusty_learner = true;
  bool weighted_map = true;
  LearnerVariant variant;
  bool aligned_init = true;
  std::size_t heads = 4;
  std::size_t layers = 3;

  // objective
  LossWeights weights;
  bool trusty_supervision = true;  // false drops the trusty-map term

  // optimizer
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 500;
  std::size_t batch = 4;

  // self-training
  double warmup_fraction = 0.5;
  double st_threshold = 0.8;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  HeadConfig head_config() const;
  ToyDataConfig data_config() const;
};

std::string serialize_config(const RunConfig& c);
/// Parses key=value lines on top of `base`. Blank lines and '#' comments are skipped;
/// unknown keys and malformed values throw ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
/// Applies a single key=value override.
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& c);

}  // namespace tagclip
