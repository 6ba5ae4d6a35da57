#include "ltnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "ltnn/binary_io.hpp"
#include "ltnn/errors.hpp"
#include "ltnn/random.hpp"

namespace ltnn {

namespace {

using Color = std::array<double, 3>;

constexpr char kMagic[4] = {'L', 'T', 'N', 'D'};

struct Vec2 {
  double x, y;
};

// A two-tone body (ellipse or jittered polygon) with a contrasting disc that
// marks the object's orientation. Coordinates are in pixels, object-local,
// centred on the image centre.
struct ObjectSpec {
  bool ellipse = true;
  double rx = 0, ry = 0;
  std::vector<Vec2> polygon;
  double body_rotation = 0;
  Color body{}, shade{};
  Vec2 marker{};
  double marker_radius = 0;
  Color marker_color{};
};

Color to_color(const std::array<std::uint8_t, 3>& c) {
  return {c[0] / 255.0, c[1] / 255.0, c[2] / 255.0};
}

ObjectSpec make_object(const DatasetConfig& config, std::uint32_t object_id) {
  Rng rng(config.seed, object_id);
  const double S = config.image_size;
  const auto palette = config.palette_colors();
  ObjectSpec spec;
  spec.ellipse = rng.uniform() < 0.5;
  spec.body_rotation = rng.uniform(0.0, 2 * std::numbers::pi);
  if (spec.ellipse) {
    spec.rx = rng.uniform(0.22, 0.34) * S;
    spec.ry = rng.uniform(0.12, 0.24) * S;
  } else {
    const int sides = 3 + static_cast<int>(rng.below(4));
    const double radius = rng.uniform(0.22, 0.32) * S;
    for (int i = 0; i < sides; ++i) {
      const double a = 2 * std::numbers::pi * i / sides;
      const double r = radius * rng.uniform(0.8, 1.05);
      spec.polygon.push_back({r * std::cos(a), r * std::sin(a)});
    }
  }
  const std::size_t body_index = rng.below(palette.size());
  spec.body = to_color(palette[body_index]);
  const double darken = rng.uniform(0.55, 0.75);
  spec.shade = {spec.body[0] * darken, spec.body[1] * darken, spec.body[2] * darken};
  std::size_t marker_index = rng.below(palette.size());
  if (palette.size() > 1 && marker_index == body_index) marker_index = (marker_index + 1) % palette.size();
  spec.marker_color = palette.size() > 1 ? to_color(palette[marker_index]) : Color{1.0, 1.0, 1.0};
  const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
  const double dist = rng.uniform(0.12, 0.2) * S;
  spec.marker = {dist * std::cos(angle), dist * std::sin(angle)};
  spec.marker_radius = rng.uniform(0.06, 0.09) * S;
  return spec;
}

bool inside_polygon(const std::vector<Vec2>& poly, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

// Colour of the object at object-local point p, or nothing for background.
bool shade_point(const ObjectSpec& spec, Vec2 p, Color& out) {
  const double dx = p.x - spec.marker.x, dy = p.y - spec.marker.y;
  if (dx * dx + dy * dy <= spec.marker_radius * spec.marker_radius) {
    out = spec.marker_color;
    return true;
  }
  const double c = std::cos(-spec.body_rotation), s = std::sin(-spec.body_rotation);
  const Vec2 q{c * p.x - s * p.y, s * p.x + c * p.y};
  bool hit;
  if (spec.ellipse) {
    hit = (q.x * q.x) / (spec.rx * spec.rx) + (q.y * q.y) / (spec.ry * spec.ry) <= 1.0;
  } else {
    hit = inside_polygon(spec.polygon, q);
  }
  if (!hit) return false;
  out = q.y > 0 ? spec.shade : spec.body;
  return true;
}

std::array<std::uint8_t, 3> quantize(const Color& c) {
  std::array<std::uint8_t, 3> out;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(c[i], 0.0, 1.0) * 255.0));
  }
  // Foreground must never collide with the reserved background colour.
  if (out == kBackground) out[0] = 129;
  return out;
}

void render_into(const DatasetConfig& config, const ObjectSpec& spec, int k, std::uint8_t* rgb,
                 std::uint8_t* mask_bits) {
  const int S = config.image_size;
  const double centre = S / 2.0;
  const bool rotation = config.transform_family() == TransformFamily::kRotation;
  const double t = k <= 0 ? 0.0 : 2 * std::numbers::pi * k / config.conditions;
  const double c = std::cos(-t), s = std::sin(-t);
  const double light_x = std::cos(t), light_y = std::sin(t);
  if (mask_bits) std::fill_n(mask_bits, (static_cast<std::size_t>(S) * S + 7) / 8, 0);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const Vec2 p{x + 0.5 - centre, y + 0.5 - centre};
      Vec2 local = p;
      if (rotation) local = {c * p.x - s * p.y, s * p.x + c * p.y};
      Color color;
      std::uint8_t* dst = rgb + (static_cast<std::size_t>(y) * S + x) * 3;
      if (!shade_point(spec, local, color)) {
        std::copy(kBackground.begin(), kBackground.end(), dst);
        continue;
      }
      if (!rotation && k > 0) {
        const double f = 1.0 + 0.45 * (p.x * light_x + p.y * light_y) / (0.35 * S);
        for (auto& ch : color) ch *= f;
      }
      const auto q = quantize(color);
      std::copy(q.begin(), q.end(), dst);
      if (mask_bits) {
        const std::size_t bit = static_cast<std::size_t>(y) * S + x;
        mask_bits[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
      }
    }
  }
}

std::uint8_t parse_hex_byte(std::string_view s) {
  int v = 0;
  for (char ch : s) {
    v *= 16;
    if (ch >= '0' && ch <= '9') {
      v += ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v += ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      v += ch - 'A' + 10;
    } else {
      throw ConfigError("invalid hex colour digit '" + std::string(1, ch) + "' in palette");
    }
  }
  return static_cast<std::uint8_t>(v);
}

}  // namespace

void DatasetConfig::bind(ConfigBinder& b) {
  b.bind("objects", objects);
  b.bind("image_size", image_size);
  b.bind("conditions", conditions);
  b.bind_choice("family", family, {"rotation", "illumination"});
  b.bind("palette", palette);
  b.bind("split", split);
  b.bind("seed", seed);
}

void DatasetConfig::validate() const {
  if (objects < 2) throw std::invalid_argument("dataset: need at least 2 objects for a split");
  if (image_size < 4) throw std::invalid_argument("dataset: image_size must be >= 4");
  if (conditions < 1) throw std::invalid_argument("dataset: conditions must be positive");
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("dataset: split must lie in (0, 1)");
  transform_family();
  if (palette_colors().empty()) throw std::invalid_argument("dataset: palette is empty");
}

TransformFamily DatasetConfig::transform_family() const {
  if (family == "rotation") return TransformFamily::kRotation;
  if (family == "illumination") return TransformFamily::kIllumination;
  throw std::invalid_argument("dataset: unknown family '" + family + "'");
}

std::vector<std::array<std::uint8_t, 3>> DatasetConfig::palette_colors() const {
  std::vector<std::array<std::uint8_t, 3>> colors;
  std::size_t pos = 0;
  while (pos < palette.size()) {
    auto comma = palette.find(',', pos);
    if (comma == std::string::npos) comma = palette.size();
    std::string_view item(palette.data() + pos, comma - pos);
    while (!item.empty() && (item.front() == ' ' || item.front() == '#')) item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.size() != 6) throw ConfigError("palette entries must be RRGGBB, got '" + std::string(item) + "'");
    std::array<std::uint8_t, 3> c{parse_hex_byte(item.substr(0, 2)), parse_hex_byte(item.substr(2, 2)),
                                  parse_hex_byte(item.substr(4, 2))};
    if (c == kBackground) throw ConfigError("palette may not contain the background colour 808080");
    colors.push_back(c);
    pos = comma + 1;
  }
  return colors;
}

int DatasetConfig::train_objects() const {
  const auto n = static_cast<int>(std::lround(split * objects));
  return std::clamp(n, 1, objects - 1);
}

std::span<const std::uint8_t> Dataset::view(std::size_t sample, std::size_t v) const {
  if (sample >= size() || v >= views()) throw std::out_of_range("dataset view out of range");
  return std::span<const std::uint8_t>(pixels).subspan((sample * views() + v) * image_bytes(),
                                                       image_bytes());
}

bool Dataset::mask_at(std::size_t sample, std::size_t k, std::size_t y, std::size_t x) const {
  const std::size_t bit = y * width + x;
  const std::uint8_t byte = masks[(sample * conditions + k) * mask_bytes() + bit / 8];
  return (byte >> (bit % 8)) & 1u;
}

Image Dataset::view_image(std::size_t sample, std::size_t v) const {
  Image img(static_cast<int>(width), static_cast<int>(height));
  const auto src = view(sample, v);
  std::copy(src.begin(), src.end(), img.rgb.begin());
  return img;
}

Image render_view(const DatasetConfig& config, std::uint32_t object_id, int k) {
  const ObjectSpec spec = make_object(config, object_id);
  Image img(config.image_size, config.image_size);
  render_into(config, spec, k, img.rgb.data(), nullptr);
  return img;
}

DatasetSplits generate_dataset(const DatasetConfig& config) {
  config.validate();
  const auto objects = static_cast<std::size_t>(config.objects);
  const auto K = static_cast<std::size_t>(config.conditions);
  const auto S = static_cast<std::size_t>(config.image_size);
  const std::size_t image_bytes = S * S * 3;
  const std::size_t mask_bytes = (S * S + 7) / 8;

  // Each object has its own RNG stream, so rendering order is irrelevant.
  std::vector<std::vector<std::uint8_t>> pixels(objects), masks(objects);
  auto render_object = [&](std::size_t id) {
    const ObjectSpec spec = make_object(config, static_cast<std::uint32_t>(id));
    pixels[id].resize((K + 1) * image_bytes);
    masks[id].resize(K * mask_bytes);
    render_into(config, spec, 0, pixels[id].data(), nullptr);
    for (std::size_t k = 0; k < K; ++k) {
      render_into(config, spec, static_cast<int>(k), pixels[id].data() + (k + 1) * image_bytes,
                  masks[id].data() + k * mask_bytes);
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, objects);
  if (workers == 1) {
    for (std::size_t id = 0; id < objects; ++id) render_object(id);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t id = w; id < objects; id += workers) render_object(id);
      });
    }
  }

  std::vector<std::uint32_t> ids(objects);
  for (std::size_t i = 0; i < objects; ++i) ids[i] = static_cast<std::uint32_t>(i);
  Rng split_rng(config.seed, 0xFFFFFFFFull);
  shuffle_indices(ids, split_rng);
  const auto n_train = static_cast<std::size_t>(config.train_objects());
  std::sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());

  DatasetSplits splits;
  for (Dataset* ds : {&splits.train, &splits.test}) {
    ds->height = ds->width = static_cast<std::uint32_t>(S);
    ds->conditions = static_cast<std::uint32_t>(K);
    ds->family = config.transform_family();
    ds->seed = config.seed;
  }
  for (std::size_t i = 0; i < objects; ++i) {
    Dataset& ds = i < n_train ? splits.train : splits.test;
    const auto id = ids[i];
    ds.object_ids.push_back(id);
    ds.pixels.insert(ds.pixels.end(), pixels[id].begin(), pixels[id].end());
    ds.masks.insert(ds.masks.end(), masks[id].begin(), masks[id].end());
  }
  return splits;
}

std::uint64_t dataset_file_size(std::uint64_t samples, std::uint64_t height, std::uint64_t width,
                                std::uint64_t conditions) {
  const std::uint64_t image = height * width * 3;
  const std::uint64_t mask = (height * width + 7) / 8;
  return kDatasetHeaderBytes + 4 * samples + samples * (conditions + 1) * image +
         samples * conditions * mask;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  ByteWriter w;
  w.text(std::string_view(kMagic, 4));
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(ds.height);
  w.u32(ds.width);
  w.u32(ds.conditions);
  w.u32(static_cast<std::uint32_t>(ds.family));
  w.u64(ds.seed);
  for (auto id : ds.object_ids) w.u32(id);
  w.bytes(ds.pixels);
  w.bytes(ds.masks);
  return w.release();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.text(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not an LTND dataset (bad magic)", 0);
  }
  const auto version_at = r.offset();
  if (const auto v = r.u32("version"); v != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(v), version_at);
  }
  Dataset ds;
  const auto samples = r.u32("sample count");
  ds.height = r.u32("height");
  ds.width = r.u32("width");
  ds.conditions = r.u32("conditions");
  const auto family_at = r.offset();
  const auto family = r.u32("family");
  if (family > 1) throw FormatError("unknown transform family " + std::to_string(family), family_at);
  ds.family = static_cast<TransformFamily>(family);
  ds.seed = r.u64("seed");
  if (ds.height == 0 || ds.width == 0 || ds.conditions == 0) {
    throw FormatError("dataset header has a zero dimension", 8);
  }
  const auto expected = dataset_file_size(samples, ds.height, ds.width, ds.conditions);
  if (bytes.size() != expected) {
    throw FormatError("dataset file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                          std::to_string(expected),
                      std::min<std::uint64_t>(bytes.size(), expected));
  }
  ds.object_ids.resize(samples);
  for (auto& id : ds.object_ids) id = r.u32("object id");
  const auto pixels_at = r.offset();
  auto px = r.bytes(samples * ds.views() * ds.image_bytes(), "pixels");
  ds.pixels.assign(px.begin(), px.end());
  const auto masks_at = r.offset();
  auto mk = r.bytes(samples * ds.conditions * ds.mask_bytes(), "masks");
  ds.masks.assign(mk.begin(), mk.end());

  for (std::size_t s = 0; s < ds.size(); ++s) {
    for (std::size_t k = 0; k < ds.conditions; ++k) {
      const auto target = ds.target(s, k);
      bool any = false;
      for (std::size_t y = 0; y < ds.height; ++y) {
        for (std::size_t x = 0; x < ds.width; ++x) {
          const std::size_t p = (y * ds.width + x) * 3;
          const bool fg = !(target[p] == kBackground[0] && target[p + 1] == kBackground[1] &&
                            target[p + 2] == kBackground[2]);
          any = any || fg;
          if (fg != ds.mask_at(s, k, y, x)) {
            const std::size_t bit = y * ds.width + x;
            throw FormatError("corrupt record: mask of sample " + std::to_string(s) + " view " +
                                  std::to_string(k) + " disagrees with its pixels",
                              masks_at + (s * ds.conditions + k) * ds.mask_bytes() + bit / 8);
          }
        }
      }
      if (!any) {
        throw FormatError("corrupt record: target " + std::to_string(k) + " of sample " +
                              std::to_string(s) + " has no foreground",
                          pixels_at + (s * ds.views() + k + 1) * ds.image_bytes());
      }
    }
  }
  return ds;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  write_file_bytes(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

Image dataset_grid(const Dataset& dataset, std::size_t max_samples) {
  std::vector<std::vector<Image>> rows;
  for (std::size_t s = 0; s < std::min(max_samples, dataset.size()); ++s) {
    std::vector<Image> row;
    for (std::size_t v = 0; v < dataset.views(); ++v) row.push_back(dataset.view_image(s, v));
    rows.push_back(std::move(row));
  }
  return compose_grid(rows);
}

Batch load_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("load_batch: empty index list");
  const std::size_t N = indices.size(), H = dataset.height, W = dataset.width, plane = H * W;
  for (auto i : indices) {
    if (i >= dataset.size()) {
      throw std::out_of_range("load_batch: index " + std::to_string(i) + " outside dataset of " +
                              std::to_string(dataset.size()));
    }
  }
  auto image_tensor = [&](std::size_t view) {
    std::vector<Real> values(N * 3 * plane);
    for (std::size_t n = 0; n < N; ++n) {
      const auto src = dataset.view(indices[n], view);
      Real* dst = values.data() + n * 3 * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) dst[c * plane + p] = Real(src[p * 3 + c]) / Real(255);
      }
    }
    return Tensor::from({N, 3, H, W}, std::move(values));
  };
  Batch batch;
  batch.indices.assign(indices.begin(), indices.end());
  batch.input = image_tensor(0);
  for (std::size_t k = 0; k < dataset.conditions; ++k) {
    batch.targets.push_back(image_tensor(k + 1));
    std::vector<Real> mask(N * plane);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          mask[n * plane + y * W + x] = dataset.mask_at(indices[n], k, y, x) ? Real(1) : Real(0);
        }
      }
    }
    batch.masks.push_back(Tensor::from({N, 1, H, W}, std::move(mask)));
  }
  for (auto i : indices) batch.object_ids.push_back(dataset.object_ids[i]);
  return batch;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, 0x5EED0000ull + epoch);
  shuffle_indices(order, rng);
  return order;
}

}  // namespace ltnn
