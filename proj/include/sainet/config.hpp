#pragma once

// Run configuration: a flat key = value text file with a schema line.
// Every field round-trips exactly (doubles are written with 17 digits).

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sainet/dataio.hpp"
#include "sainet/losses.hpp"
#include "sainet/metrics.hpp"

namespace sainet {

inline constexpr const char* kConfigSchema = "sainet-run/1";

struct RunConfig {
  std::uint64_t seed = 0;
  int crop_size = 256;
  int batch_size = 8;
  double learning_rate = 2e-4;  // the 0.1 figure from the training protocol is accepted too
  int epochs = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool deterministic = false;
  int threads = 0;  // 0 = SAINET_THREADS or hardware

  LossWeights weights;
  DisparityLossConfig disparity_loss;
  bool stereo_inputs = true;  // false zeroes the right-view channels (ablation)

  UNetConfig unet;
  std::uint64_t feature_seed = 7;

  MaskBankParams mask;
  BlockMatchParams blockmatch;
  CannyParams canny;
  DispEConfig dispe;

  std::size_t sample_count = 200;
  int max_retries = 10;
  int occluder_margin = 0;
  bool square_masks = false;

  std::string dataset_root;
  std::string dataset_layout = "synthetic";
  std::string dataset_split;  // comma-separated sub-directories
  std::size_t synthetic_count = 10;
  std::uint64_t synthetic_seed = 0;
  int synthetic_height = 64;
  int synthetic_width = 64;

  std::string bank_dir = "bank";
  std::string train_dir = "train";
  std::string test_dir = "test";
  std::string run_dir = "run";
  std::string output_dir = "out";
  std::string checkpoint;  // explicit checkpoint for infer/eval/resume
  std::string scope = "full";

  RunConfig() {
    unet.depth = 4;
    unet.base_channels = 32;
  }

  DatagenParams datagen_params() const {
    DatagenParams p;
    p.crop_size = crop_size;
    p.max_retries = max_retries;
    p.occluder_margin = occluder_margin;
    p.square_masks = square_masks;
    p.canny = canny;
    p.blockmatch = blockmatch;
    return p;
  }

  DatasetDescriptor dataset() const {
    DatasetDescriptor d;
    d.root = dataset_root;
    d.layout = parse_layout(dataset_layout);
    std::stringstream ss(dataset_split);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty()) d.split.push_back(part);
    d.synthetic_count = synthetic_count;
    d.synthetic_seed = synthetic_seed;
    d.synthetic.height = synthetic_height;
    d.synthetic.width = synthetic_width;
    return d;
  }

  void validate() const {
    require(crop_size >= 1, "crop_size must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be finite and >= 0");
    require(epochs >= 0, "epochs must be >= 0");
    weights.validate();
    unet.validate();
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline std::string cfg_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T cfg_parse(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ContractViolation("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

template <>
inline double cfg_parse<double>(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw ContractViolation("config key '" + key + "': cannot parse '" + text + "'");
  }
}

template <>
inline bool cfg_parse<bool>(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ContractViolation("config key '" + key + "': expected true or false, got '" + text + "'");
}

template <typename T>
std::string cfg_format(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, double>) {
    return cfg_str(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    return std::to_string(v);
  }
}

template <typename T>
ConfigField field(std::string key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return cfg_format(c.*member); },
          [member, key](RunConfig& c, const std::string& s) {
            if constexpr (std::is_same_v<T, std::string>)
              c.*member = s;
            else
              c.*member = cfg_parse<T>(key, s);
          }};
}

template <typename S, typename T>
ConfigField nested(std::string key, S RunConfig::*outer, T S::*inner) {
  return {key, [outer, inner](const RunConfig& c) { return cfg_format(c.*outer.*inner); },
          [outer, inner, key](RunConfig& c, const std::string& s) { c.*outer.*inner = cfg_parse<T>(key, s); }};
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields{
      field("seed", &RunConfig::seed),
      field("crop_size", &RunConfig::crop_size),
      field("batch_size", &RunConfig::batch_size),
      field("learning_rate", &RunConfig::learning_rate),
      field("epochs", &RunConfig::epochs),
      field("adam_beta1", &RunConfig::adam_beta1),
      field("adam_beta2", &RunConfig::adam_beta2),
      field("adam_epsilon", &RunConfig::adam_epsilon),
      field("deterministic", &RunConfig::deterministic),
      field("threads", &RunConfig::threads),
      nested("weight_synthesis", &RunConfig::weights, &LossWeights::synthesis),
      nested("weight_context", &RunConfig::weights, &LossWeights::context),
      nested("weight_perceptual", &RunConfig::weights, &LossWeights::perceptual),
      nested("weight_style", &RunConfig::weights, &LossWeights::style),
      nested("weight_tv", &RunConfig::weights, &LossWeights::tv),
      nested("weight_disparity", &RunConfig::weights, &LossWeights::disparity),
      nested("disparity_patch_size", &RunConfig::disparity_loss, &DisparityLossConfig::patch_size),
      nested("disparity_stride", &RunConfig::disparity_loss, &DisparityLossConfig::stride),
      field("stereo_inputs", &RunConfig::stereo_inputs),
      nested("unet_depth", &RunConfig::unet, &UNetConfig::depth),
      nested("unet_base_channels", &RunConfig::unet, &UNetConfig::base_channels),
      nested("unet_growth", &RunConfig::unet, &UNetConfig::growth),
      nested("unet_max_channels", &RunConfig::unet, &UNetConfig::max_channels),
      nested("unet_leaky_slope", &RunConfig::unet, &UNetConfig::leaky_slope),
      nested("unet_seed", &RunConfig::unet, &UNetConfig::seed),
      field("feature_seed", &RunConfig::feature_seed),
      nested("mask_threshold", &RunConfig::mask, &MaskBankParams::threshold),
      nested("mask_context_width", &RunConfig::mask, &MaskBankParams::context_width),
      nested("mask_synthesis_width", &RunConfig::mask, &MaskBankParams::synthesis_width),
      nested("mask_min_synthesis_pixels", &RunConfig::mask, &MaskBankParams::min_synthesis_pixels),
      nested("blockmatch_max_disparity", &RunConfig::blockmatch, &BlockMatchParams::max_disparity),
      nested("blockmatch_block", &RunConfig::blockmatch, &BlockMatchParams::block),
      nested("blockmatch_lr_tolerance", &RunConfig::blockmatch, &BlockMatchParams::lr_tolerance),
      nested("blockmatch_min_variance", &RunConfig::blockmatch, &BlockMatchParams::min_variance),
      nested("canny_low", &RunConfig::canny, &CannyParams::low_threshold),
      nested("canny_high", &RunConfig::canny, &CannyParams::high_threshold),
      nested("canny_sigma", &RunConfig::canny, &CannyParams::sigma),
      nested("dispe_p1", &RunConfig::dispe, &DispEConfig::p1),
      nested("dispe_p2", &RunConfig::dispe, &DispEConfig::p2),
      field("sample_count", &RunConfig::sample_count),
      field("max_retries", &RunConfig::max_retries),
      field("occluder_margin", &RunConfig::occluder_margin),
      field("square_masks", &RunConfig::square_masks),
      field("dataset_root", &RunConfig::dataset_root),
      field("dataset_layout", &RunConfig::dataset_layout),
      field("dataset_split", &RunConfig::dataset_split),
      field("synthetic_count", &RunConfig::synthetic_count),
      field("synthetic_seed", &RunConfig::synthetic_seed),
      field("synthetic_height", &RunConfig::synthetic_height),
      field("synthetic_width", &RunConfig::synthetic_width),
      field("bank_dir", &RunConfig::bank_dir),
      field("train_dir", &RunConfig::train_dir),
      field("test_dir", &RunConfig::test_dir),
      field("run_dir", &RunConfig::run_dir),
      field("output_dir", &RunConfig::output_dir),
      field("checkpoint", &RunConfig::checkpoint),
      field("scope", &RunConfig::scope),
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "schema = " << kConfigSchema << "\n";
  for (const auto& f : detail::config_fields()) os << f.key << " = " << f.get(c) << "\n";
  return os.str();
}

/// Unknown keys and schema mismatches are errors; missing keys keep defaults.
inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool schema_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ContractViolation(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq)), value = detail::trim(t.substr(eq + 1));
    if (key == "schema") {
      if (value != kConfigSchema)
        throw ContractViolation(origin + ": unsupported schema '" + value + "' (expected " + kConfigSchema + ")");
      schema_seen = true;
      continue;
    }
    const auto& fields = detail::config_fields();
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.key == key; });
    if (it == fields.end()) throw ContractViolation(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->set(c, value);
  }
  if (!schema_seen) throw ContractViolation(origin + ": missing 'schema = " + std::string(kConfigSchema) + "' line");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string());
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write config " + path.string());
  f << serialize_config(c);
}

}  // namespace sainet
