#pragma once

// File formats and dataset layouts: PFM disparities, 8-bit PNG images and
// masks, tab-separated manifests, mask-bank and training-set directories.

#include <png.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "sainet/datagen.hpp"
#include "sainet/synthetic.hpp"

namespace sainet {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Next whitespace-delimited header token; `pos` ends on the delimiter.
inline std::string pfm_token(const std::string& bytes, std::size_t& pos, const std::string& path) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw FormatError(path + ": truncated PFM header");
  return bytes.substr(start, pos - start);
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

}  // namespace detail

/// Grayscale "Pf" only. Negative scale = little-endian. Rows are stored
/// bottom-to-top. Values are returned as |v|; non-finite entries are invalid.
inline DisparityMap read_pfm(const fs::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  const std::string p = path.string();
  std::size_t pos = 0;
  const std::string magic = detail::pfm_token(bytes, pos, p);
  if (magic == "PF") throw FormatError(p + ": colour PFM (PF) is not a disparity map");
  if (magic != "Pf") throw FormatError(p + ": bad PFM magic '" + magic.substr(0, 8) + "'");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::pfm_token(bytes, pos, p));
    h = std::stoi(detail::pfm_token(bytes, pos, p));
    scale = std::stod(detail::pfm_token(bytes, pos, p));
  } catch (const std::logic_error&) {
    throw FormatError(p + ": malformed PFM header");
  }
  if (w <= 0 || h <= 0) throw FormatError(p + ": PFM dimensions must be positive");
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError(p + ": PFM scale must be non-zero");
  if (pos >= bytes.size()) throw FormatError(p + ": truncated PFM header");
  ++pos;  // single whitespace byte ends the header
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos < n * 4) throw FormatError(p + ": truncated PFM payload");
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);

  DisparityMap map(h, w, 0.0);
  for (int row = 0; row < h; ++row)
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + pos + (static_cast<std::size_t>(row) * w + x) * 4, 4);
      if (swap) bits = detail::byteswap32(bits);
      const float v = std::bit_cast<float>(bits);
      const int y = h - 1 - row;
      map.at(y, x) = std::abs(static_cast<double>(v));
      map.valid[map.index(y, x)] = std::isfinite(v) ? 1 : 0;
    }
  return map;
}

/// Little-endian "Pf", scale -1, bottom-to-top rows. Values are stored as f32.
inline void write_pfm(const DisparityMap& map, const fs::path& path) {
  require(!map.empty() && map.width > 0 && map.height > 0, "write_pfm: empty disparity map");
  for (double v : map.values) require(std::isfinite(v), "write_pfm: non-finite disparity value");
  std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0000\n";
  const std::size_t header = out.size();
  out.resize(header + map.values.size() * 4);
  for (int row = 0; row < map.height; ++row)
    for (int x = 0; x < map.width; ++x) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map.at(map.height - 1 - row, x)));
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      std::memcpy(out.data() + header + (static_cast<std::size_t>(row) * map.width + x) * 4, &bits, 4);
    }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG (libpng simplified API)
// ---------------------------------------------------------------------------

/// 8-bit quantization with round-half-to-even.
inline std::uint8_t quantize_u8(double v) {
  const double s = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::nearbyint(s));
}

/// Loads a PNG as [0,1] floats: grayscale files give 1 channel, everything else 3.
inline ImageBuffer read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!fs::exists(path)) throw DataError("missing file " + path.string());
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw FormatError(path.string() + ": " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int c = color ? 3 : 1;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError(path.string() + ": " + msg);
  }
  ImageBuffer out(static_cast<int>(img.height), static_cast<int>(img.width), c);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buf[i] / 255.0;
  return out;
}

inline void write_png(const ImageBuffer& image, const fs::path& path) {
  require(!image.empty(), "write_png: empty image");
  std::vector<std::uint8_t> buf(image.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize_u8(image.data[i]);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("cannot write " + path.string() + ": " + img.message);
}

/// Binary mask as 0/255 grayscale.
inline void write_mask_png(const Mask& mask, const fs::path& path) {
  ImageBuffer img(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 1.0 : 0.0;
  write_png(img, path);
}

inline Mask read_mask_png(const fs::path& path) {
  const ImageBuffer img = read_png(path);
  Mask m(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) m.at(y, x) = img.at(y, x, 0) > 0.5 ? 1 : 0;
  return m;
}

/// Integer labels from an 8-bit grayscale PNG (0 = background).
inline LabelMap read_label_png(const fs::path& path) {
  const ImageBuffer img = read_png(path);
  LabelMap labels(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) labels.at(y, x) = static_cast<int>(std::lround(img.at(y, x, 0) * 255.0));
  return labels;
}

inline void write_label_png(const LabelMap& labels, const fs::path& path) {
  ImageBuffer img(labels.height, labels.width, 1);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    require(labels.labels[i] >= 0 && labels.labels[i] <= 255, "label png supports labels 0..255");
    img.data[i] = labels.labels[i] / 255.0;
  }
  write_png(img, path);
}

// ---------------------------------------------------------------------------
// Manifests: header line + tab-separated records
// ---------------------------------------------------------------------------

struct Manifest {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw FormatError("manifest has no column '" + name + "'");
  }
  const std::string& get(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.columns.size(); ++i) f << (i ? "\t" : "") << m.columns[i];
  f << '\n';
  for (const auto& row : m.rows) {
    require(row.size() == m.columns.size(), "manifest row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "\t" : "") << row[i];
    f << '\n';
  }
  if (!f) throw DataError("write failed: " + path.string());
}

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
  };
  Manifest m;
  std::string line;
  if (!std::getline(f, line)) throw FormatError(path.string() + ": empty manifest");
  m.columns = split(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != m.columns.size()) throw FormatError(path.string() + ": malformed manifest record");
    m.rows.push_back(std::move(row));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

enum class DatasetLayout { flat_pairs, sceneflow_like, synthetic };

inline std::string to_string(DatasetLayout l) {
  switch (l) {
    case DatasetLayout::flat_pairs:
      return "flat_pairs";
    case DatasetLayout::sceneflow_like:
      return "sceneflow_like";
    case DatasetLayout::synthetic:
      return "synthetic";
  }
  return "?";
}

inline DatasetLayout parse_layout(const std::string& s) {
  if (s == "flat_pairs") return DatasetLayout::flat_pairs;
  if (s == "sceneflow_like") return DatasetLayout::sceneflow_like;
  if (s == "synthetic") return DatasetLayout::synthetic;
  throw ContractViolation("unknown dataset layout '" + s + "'");
}

/// flat_pairs:      root/left/<id>.png, root/right/<id>.png, optional
///                  root/disparity/<id>.pfm and root/labels/<id>.png
/// sceneflow_like:  root/frames_cleanpass/<split>/.../left/<f>.png with the
///                  matching right/ file and root/disparity/<split>/.../left/<f>.pfm
/// synthetic:       procedural scenes, no files
struct DatasetDescriptor {
  fs::path root;
  DatasetLayout layout = DatasetLayout::flat_pairs;
  std::vector<std::string> split;  // sceneflow_like: sub-directories to include; empty = all
  std::size_t synthetic_count = 10;
  std::uint64_t synthetic_seed = 0;
  SyntheticSceneParams synthetic;
};

struct DatasetEntry {
  std::string id;
  fs::path left, right, disparity, labels;  // empty paths when absent
  std::size_t synthetic_index = 0;
};

struct LoadRecord {
  std::string id;
  std::optional<StereoSample> sample;
  std::optional<LabelMap> labels;
  std::string error;  // set when sample is empty
};

/// Iterates a dataset in lexicographic id order, loading one sample per next().
class DatasetStream {
 public:
  explicit DatasetStream(DatasetDescriptor descriptor) : desc_(std::move(descriptor)) { index(); }

  std::size_t size() const { return entries_.size(); }
  const std::vector<DatasetEntry>& entries() const { return entries_; }

  std::optional<LoadRecord> next() {
    if (cursor_ >= entries_.size()) return std::nullopt;
    return load(entries_[cursor_++]);
  }

  LoadRecord load(const DatasetEntry& e) const {
    LoadRecord rec;
    rec.id = e.id;
    if (desc_.layout == DatasetLayout::synthetic) {
      auto scene = make_synthetic_scene(desc_.synthetic, derive_seed(desc_.synthetic_seed, e.synthetic_index), e.id);
      rec.sample = std::move(scene.sample);
      rec.labels = std::move(scene.labels);
      return rec;
    }
    try {
      if (!fs::exists(e.right)) throw DataError("missing right image " + e.right.string());
      StereoSample s;
      s.id = e.id;
      s.left = read_png(e.left);
      s.right = read_png(e.right);
      if (!s.left.same_shape(s.right))
        throw DataError(e.id + ": left/right images differ in size or channels (" + e.left.string() + ")");
      if (!e.disparity.empty() && fs::exists(e.disparity)) {
        s.gt_disparity = read_pfm(e.disparity);
        if (s.gt_disparity->height != s.left.height || s.gt_disparity->width != s.left.width)
          throw DataError(e.disparity.string() + ": disparity size does not match the images");
      }
      if (!e.labels.empty() && fs::exists(e.labels)) rec.labels = read_label_png(e.labels);
      rec.sample = std::move(s);
    } catch (const std::exception& ex) {
      rec.sample.reset();
      rec.error = ex.what();
    }
    return rec;
  }

 private:
  void index() {
    if (desc_.layout == DatasetLayout::synthetic) {
      for (std::size_t i = 0; i < desc_.synthetic_count; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "scene_%04zu", i);
        entries_.push_back({id, {}, {}, {}, {}, i});
      }
      return;
    }
    if (!fs::is_directory(desc_.root)) throw DataError("dataset root not found: " + desc_.root.string());
    if (desc_.layout == DatasetLayout::flat_pairs) {
      const fs::path left_dir = desc_.root / "left";
      if (!fs::is_directory(left_dir)) throw DataError("dataset has no left/ directory: " + left_dir.string());
      for (const auto& f : fs::directory_iterator(left_dir)) {
        if (!f.is_regular_file() || f.path().extension() != ".png") continue;
        const std::string stem = f.path().stem().string();
        entries_.push_back({stem, f.path(), desc_.root / "right" / f.path().filename(),
                            desc_.root / "disparity" / (stem + ".pfm"), desc_.root / "labels" / (stem + ".png"), 0});
      }
    } else {
      fs::path frames = desc_.root / "frames_cleanpass";
      if (!fs::is_directory(frames)) frames = desc_.root / "frames_finalpass";
      if (!fs::is_directory(frames)) throw DataError("no frames_cleanpass/ under " + desc_.root.string());
      for (const auto& f : fs::recursive_directory_iterator(frames)) {
        if (!f.is_regular_file() || f.path().extension() != ".png") continue;
        if (f.path().parent_path().filename() != "left") continue;
        const fs::path rel_dir = fs::relative(f.path().parent_path().parent_path(), frames);
        if (!desc_.split.empty()) {
          const std::string top = rel_dir.begin() == rel_dir.end() ? "" : rel_dir.begin()->string();
          if (std::find(desc_.split.begin(), desc_.split.end(), top) == desc_.split.end()) continue;
        }
        const std::string stem = f.path().stem().string();
        entries_.push_back({(rel_dir / stem).generic_string(), f.path(),
                            f.path().parent_path().parent_path() / "right" / f.path().filename(),
                            desc_.root / "disparity" / rel_dir / "left" / (stem + ".pfm"), {}, 0});
      }
    }
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }

  DatasetDescriptor desc_;
  std::vector<DatasetEntry> entries_;
  std::size_t cursor_ = 0;
};

inline DatasetStream load_dataset(const DatasetDescriptor& descriptor) { return DatasetStream(descriptor); }

struct LoadedDataset {
  std::vector<StereoSample> samples;
  std::vector<std::optional<LabelMap>> labels;
  std::vector<std::string> errors;
};

inline LoadedDataset load_all(const DatasetDescriptor& descriptor) {
  DatasetStream stream(descriptor);
  LoadedDataset out;
  while (auto rec = stream.next()) {
    if (rec->sample) {
      out.samples.push_back(std::move(*rec->sample));
      out.labels.push_back(std::move(rec->labels));
    } else {
      out.errors.push_back(rec->id + ": " + rec->error);
    }
  }
  return out;
}

/// Writes scenes in the flat_pairs layout.
inline void write_flat_pairs(const std::vector<SyntheticScene>& scenes, const fs::path& root) {
  for (const char* d : {"left", "right", "disparity", "labels"}) fs::create_directories(root / d);
  for (const auto& s : scenes) {
    write_png(s.sample.left, root / "left" / (s.sample.id + ".png"));
    write_png(s.sample.right, root / "right" / (s.sample.id + ".png"));
    if (s.sample.gt_disparity) write_pfm(*s.sample.gt_disparity, root / "disparity" / (s.sample.id + ".pfm"));
    write_label_png(s.labels, root / "labels" / (s.sample.id + ".png"));
  }
}

// ---------------------------------------------------------------------------
// Mask bank on disk
// ---------------------------------------------------------------------------

inline void save_bank(const MaskBank& bank, const fs::path& dir) {
  fs::create_directories(dir / "masks");
  Manifest m;
  m.columns = {"index", "source_id", "anchor_x", "anchor_y", "width", "height", "context_file", "synthesis_file",
               "context_pixels", "synthesis_pixels"};
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const auto& e = bank.entries[i];
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06zu", i);
    const std::string cf = std::string("masks/") + stem + "_context.png";
    const std::string sf = std::string("masks/") + stem + "_synthesis.png";
    write_mask_png(e.context, dir / cf);
    write_mask_png(e.synthesis, dir / sf);
    m.rows.push_back({std::to_string(i), e.source_id, std::to_string(e.anchor.x), std::to_string(e.anchor.y),
                      std::to_string(e.context.width), std::to_string(e.context.height), cf, sf,
                      std::to_string(e.context.count()), std::to_string(e.synthesis.count())});
  }
  write_manifest(m, dir / "manifest.tsv");
}

inline MaskBank load_bank(const fs::path& dir) {
  const Manifest m = read_manifest(dir / "manifest.tsv");
  MaskBank bank;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    MaskPair p;
    p.source_id = m.get(r, "source_id");
    p.anchor = {std::stoi(m.get(r, "anchor_x")), std::stoi(m.get(r, "anchor_y"))};
    p.context = read_mask_png(dir / m.get(r, "context_file"));
    p.synthesis = read_mask_png(dir / m.get(r, "synthesis_file"));
    bank.entries.push_back(std::move(p));
  }
  if (bank.empty()) throw DataError("mask bank at " + dir.string() + " is empty");
  return bank;
}

// ---------------------------------------------------------------------------
// Training set on disk
// ---------------------------------------------------------------------------

namespace detail {

inline void write_validity(const DisparityMap& d, const fs::path& path) {
  Mask m(d.height, d.width);
  m.data = d.valid;
  write_mask_png(m, path);
}

inline DisparityMap read_disparity_with_validity(const fs::path& pfm, const fs::path& valid_png) {
  DisparityMap d = read_pfm(pfm);
  const Mask m = read_mask_png(valid_png);
  require(m.height == d.height && m.width == d.width, "validity mask size mismatch for " + pfm.string());
  d.valid = m.data;
  return d;
}

}  // namespace detail

inline void save_training_sample(const TrainingSample& s, const fs::path& dir) {
  fs::create_directories(dir);
  write_png(s.cc_left, dir / "cc_left.png");
  write_png(s.cs_left, dir / "cs_left.png");
  write_png(s.edges, dir / "edges.png");
  write_png(s.cc_right_warped, dir / "cc_right_warped.png");
  write_mask_png(s.context_mask, dir / "context_mask.png");
  write_mask_png(s.synthesis_mask, dir / "synthesis_mask.png");
  write_mask_png(s.stereo_support, dir / "stereo_support.png");
  write_png(s.left_gt, dir / "left_gt.png");
  write_png(s.right_gt, dir / "right_gt.png");
  write_pfm(s.scene_disparity, dir / "scene_disparity.pfm");
  detail::write_validity(s.scene_disparity, dir / "scene_disparity_valid.png");
  if (s.gt_disparity) {
    write_pfm(*s.gt_disparity, dir / "gt_disparity.pfm");
    detail::write_validity(*s.gt_disparity, dir / "gt_disparity_valid.png");
  }
}

inline const std::vector<std::string>& training_manifest_columns() {
  static const std::vector<std::string> cols{"id",       "scene_id", "mask_index", "seed",     "object_disparity",
                                             "crop_x",   "crop_y",   "mask_x",     "mask_y",   "has_gt_disparity",
                                             "dir"};
  return cols;
}

inline void save_training_set(const std::vector<TrainingSample>& samples, const fs::path& dir) {
  fs::create_directories(dir / "samples");
  Manifest m;
  m.columns = training_manifest_columns();
  for (const auto& s : samples) {
    const std::string rel = "samples/" + s.id;
    save_training_sample(s, dir / rel);
    m.rows.push_back({s.id, s.scene_id, std::to_string(s.mask_index), std::to_string(s.seed),
                      format_double(s.object_disparity), std::to_string(s.crop_origin.x),
                      std::to_string(s.crop_origin.y), std::to_string(s.mask_origin.x), std::to_string(s.mask_origin.y),
                      s.gt_disparity ? "1" : "0", rel});
  }
  write_manifest(m, dir / "manifest.tsv");
}

/// Missing edges.png is regenerated with Canny from cc_left + cs_left (`notice` set).
inline TrainingSample load_training_sample(const fs::path& dir, const CannyParams& canny_params = {},
                                           bool* edges_regenerated = nullptr) {
  if (!fs::is_directory(dir)) throw DataError("sample directory not found: " + dir.string());
  TrainingSample s;
  s.cc_left = read_png(dir / "cc_left.png");
  s.cs_left = read_png(dir / "cs_left.png");
  s.cc_right_warped = read_png(dir / "cc_right_warped.png");
  s.context_mask = read_mask_png(dir / "context_mask.png");
  s.synthesis_mask = read_mask_png(dir / "synthesis_mask.png");
  s.stereo_support = fs::exists(dir / "stereo_support.png") ? read_mask_png(dir / "stereo_support.png")
                                                             : Mask(s.cc_left.height, s.cc_left.width, 0);
  s.left_gt = fs::exists(dir / "left_gt.png") ? read_png(dir / "left_gt.png") : s.cc_left;
  if (!fs::exists(dir / "left_gt.png"))
    for (std::size_t i = 0; i < s.left_gt.data.size(); ++i) s.left_gt.data[i] += s.cs_left.data[i];
  if (fs::exists(dir / "right_gt.png")) s.right_gt = read_png(dir / "right_gt.png");
  if (fs::exists(dir / "scene_disparity.pfm"))
    s.scene_disparity =
        detail::read_disparity_with_validity(dir / "scene_disparity.pfm", dir / "scene_disparity_valid.png");
  if (fs::exists(dir / "gt_disparity.pfm"))
    s.gt_disparity = detail::read_disparity_with_validity(dir / "gt_disparity.pfm", dir / "gt_disparity_valid.png");
  if (fs::exists(dir / "edges.png")) {
    s.edges = read_png(dir / "edges.png");
    if (edges_regenerated) *edges_regenerated = false;
  } else {
    ImageBuffer visible = s.cc_left;
    for (std::size_t i = 0; i < visible.data.size(); ++i) visible.data[i] += s.cs_left.data[i];
    s.edges = canny(visible, canny_params);
    if (edges_regenerated) *edges_regenerated = true;
  }
  return s;
}

struct LoadedTrainingSet {
  std::vector<TrainingSample> samples;
  std::vector<std::string> notices;
};

inline LoadedTrainingSet load_training_set(const fs::path& dir, const CannyParams& canny_params = {}) {
  const Manifest m = read_manifest(dir / "manifest.tsv");
  LoadedTrainingSet out;
  out.samples.resize(m.rows.size());
  std::vector<char> regenerated(m.rows.size(), 0);
  parallel_for(m.rows.size(), [&](std::size_t r) {
    bool regen = false;
    auto s = load_training_sample(dir / m.get(r, "dir"), canny_params, &regen);
    s.id = m.get(r, "id");
    s.scene_id = m.get(r, "scene_id");
    s.mask_index = std::stoull(m.get(r, "mask_index"));
    s.seed = std::stoull(m.get(r, "seed"));
    s.object_disparity = std::stod(m.get(r, "object_disparity"));
    s.crop_origin = {std::stoi(m.get(r, "crop_x")), std::stoi(m.get(r, "crop_y"))};
    s.mask_origin = {std::stoi(m.get(r, "mask_x")), std::stoi(m.get(r, "mask_y"))};
    out.samples[r] = std::move(s);
    regenerated[r] = regen;
  });
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    if (regenerated[r]) out.notices.push_back(m.get(r, "id") + ": edge map missing, regenerated with Canny");
  if (out.samples.empty()) throw DataError("training set at " + dir.string() + " has no samples");
  return out;
}

}  // namespace sainet
