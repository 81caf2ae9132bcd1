#include "superedge/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include "superedge/errors.hpp"

namespace superedge {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Shortest text that parses back to the same value.
template <class T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<bool(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <class T, class Access>
Field number(Access access) {
  return {[access](Config& c, const std::string& v) { return parse_number(v, access(c)); },
          [access](const Config& c) { return format_number(access(const_cast<Config&>(c))); }};
}

template <class Access>
Field path(Access access) {
  return {[access](Config& c, const std::string& v) {
            access(c) = v;
            return true;
          },
          [access](const Config& c) { return access(const_cast<Config&>(c)).string(); }};
}

#define SE_NUM(key, member) {key, number<decltype(Config{}.member)>([](Config& c) -> auto& { return c.member; })}
#define SE_PATH(key, member) {key, path([](Config& c) -> auto& { return c.member; })}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SE_NUM("seed", seed),
      SE_NUM("synth.count", synth.count),
      SE_NUM("synth.height", synth.height),
      SE_NUM("synth.width", synth.width),
      SE_PATH("synth.out", synth.out),
      SE_PATH("annotate.dataset", annotate.dataset),
      SE_PATH("annotate.checkpoint", annotate.checkpoint),
      SE_NUM("annotate.n_homographies", annotate.labels.annotator.n_homographies),
      SE_NUM("annotate.rotation_max_deg", annotate.labels.annotator.rotation_max_deg),
      SE_NUM("annotate.scale_min", annotate.labels.annotator.scale_min),
      SE_NUM("annotate.scale_max", annotate.labels.annotator.scale_max),
      SE_NUM("annotate.perspective_amp", annotate.labels.annotator.perspective_amp),
      SE_NUM("annotate.translation_frac", annotate.labels.annotator.translation_frac),
      SE_NUM("annotate.pixel_threshold", annotate.labels.pixel_threshold),
      SE_NUM("annotate.blur_sigma", annotate.labels.object.blur_sigma),
      SE_NUM("annotate.l0_lambda", annotate.labels.object.l0_lambda),
      SE_NUM("annotate.canny_low", annotate.labels.object.canny.low),
      SE_NUM("annotate.canny_high", annotate.labels.object.canny.high),
      SE_NUM("annotate.dilate_radius", annotate.labels.object.dilate_radius),
      SE_NUM("train.lr", train.lr),
      SE_NUM("train.epochs", train.epochs),
      SE_NUM("train.batch", train.batch),
      SE_NUM("train.lambda", train.lambda),
      SE_NUM("train.object_dilation", train.object_dilation),
      SE_PATH("train.synth_out", train.synth_out),
      SE_PATH("train.real_out", train.real_out),
      SE_PATH("train.init_checkpoint", train.init_checkpoint),
      SE_PATH("infer.checkpoint", infer.checkpoint),
      SE_PATH("infer.input", infer.input),
      SE_PATH("infer.out", infer.out),
      SE_NUM("infer.pixel_threshold", infer.pixel_threshold),
      SE_NUM("infer.object_threshold", infer.object_threshold),
      SE_PATH("eval.predictions", eval.predictions),
      SE_PATH("eval.ground_truth", eval.ground_truth),
      SE_PATH("eval.out", eval.out),
      SE_NUM("eval.tolerance", eval.tolerance),
      SE_NUM("eval.n_thresholds", eval.n_thresholds),
  };
  return table;
}

#undef SE_NUM
#undef SE_PATH

void apply_line(Config& cfg, const std::string& raw, const std::string& where) {
  std::string line = raw;
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected `key = value`, got `" + trim(raw) + "`");
  const std::string key = trim(std::string_view(line).substr(0, eq));
  const std::string value = trim(std::string_view(line).substr(eq + 1));
  for (const auto& [name, field] : fields()) {
    if (name != key) continue;
    if (!field.set(cfg, value)) throw ConfigError(where + ": cannot parse value `" + value + "` for key " + key);
    return;
  }
  throw ConfigError(where + ": unknown key `" + key + "`");
}

}  // namespace

TrainOptions Config::train_options() const {
  TrainOptions o;
  o.epochs = train.epochs;
  o.batch_size = train.batch;
  o.lr = train.lr;
  o.loss.lambda = train.lambda;
  o.seed = seed;
  return o;
}

void Config::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid configuration: " + m); };
  if (synth.count < 1) fail("synth.count must be >= 1");
  if (synth.height < 32 || synth.width < 32) fail("synth.height and synth.width must be >= 32");
  try {
    annotate.labels.annotator.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  const auto& ob = annotate.labels.object;
  if (!(ob.canny.low >= 0.0F && ob.canny.low <= ob.canny.high && ob.canny.high <= 1.0F)) {
    fail("annotate.canny_low/high must satisfy 0 <= low <= high <= 1");
  }
  if (!(ob.l0_lambda > 0.0F)) fail("annotate.l0_lambda must be positive");
  if (ob.blur_sigma < 0.0F) fail("annotate.blur_sigma must be >= 0");
  if (ob.dilate_radius < 0) fail("annotate.dilate_radius must be >= 0");
  const float pt = annotate.labels.pixel_threshold;
  if (!(pt > 0.0F && pt < 1.0F)) fail("annotate.pixel_threshold must lie in (0, 1)");
  if (!(train.lr >= 0.0F)) fail("train.lr must be >= 0");
  if (train.epochs < 0) fail("train.epochs must be >= 0");
  if (train.batch < 1) fail("train.batch must be >= 1");
  if (!(train.lambda > 0.0F)) fail("train.lambda must be positive");
  if (train.object_dilation < 0) fail("train.object_dilation must be >= 0");
  if (!(infer.pixel_threshold > 0.0F && infer.pixel_threshold < 1.0F)) fail("infer.pixel_threshold must lie in (0, 1)");
  if (!(infer.object_threshold > 0.0F && infer.object_threshold < 1.0F)) fail("infer.object_threshold must lie in (0, 1)");
  if (!(eval.tolerance > 0.0)) fail("eval.tolerance must be positive");
  if (eval.n_thresholds < 2) fail("eval.n_thresholds must be >= 2");
}

Config parse_config(const std::string& text, std::span<const std::string> overrides, const std::string& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    apply_line(cfg, line, source + ":" + std::to_string(number));
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    if (overrides[i].find('=') == std::string::npos) {
      throw ConfigError("--set " + overrides[i] + ": expected key=value");
    }
    apply_line(cfg, overrides[i], "--set #" + std::to_string(i + 1));
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, overrides, path.string());
}

std::string dump_config(const Config& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace superedge
