#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "superedge/homography.hpp"
#include "superedge/pseudo_label.hpp"
#include "superedge/training.hpp"

namespace superedge {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Config {
  std::uint64_t seed = 0;

  struct {
    int count = 2000;
    int height = 120;
    int width = 160;
    std::filesystem::path out = "data/synthetic";
  } synth;

  struct {
    std::filesystem::path dataset = "data/real";
    std::filesystem::path checkpoint = "runs/synth/checkpoint.sedg";
    LabelConfig labels;
  } annotate;

  struct {
    float lr = 1e-3F;
    int epochs = 100;
    int batch = 16;
    float lambda = 1.1F;
    int object_dilation = 1;
    std::filesystem::path synth_out = "runs/synth";
    std::filesystem::path real_out = "runs/real";
    std::filesystem::path init_checkpoint;  // train-real starts from these weights when set
  } train;

  struct {
    std::filesystem::path checkpoint = "runs/real/checkpoint.sedg";
    std::filesystem::path input = "data/real/images";
    std::filesystem::path out = "runs/infer";
    float pixel_threshold = 0.005F;
    float object_threshold = 0.005F;
  } infer;

  struct {
    std::filesystem::path predictions = "runs/infer/fused";
    std::filesystem::path ground_truth = "data/real/edges";
    std::filesystem::path out = "runs/eval";
    double tolerance = 0.0075;
    int n_thresholds = 99;
  } eval;

  TrainOptions train_options() const;
  void validate() const;
};

// `key = value` lines; '#' starts a comment. Overrides ("key=value") are
// applied after the file. Unknown keys, malformed lines and unparsable values
// raise ConfigError naming the offending line.
Config load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});
Config parse_config(const std::string& text, std::span<const std::string> overrides = {},
                    const std::string& source = "<config>");

// Every key with its current value, one per line, in load order.
std::string dump_config(const Config& cfg);

}  // namespace superedge
