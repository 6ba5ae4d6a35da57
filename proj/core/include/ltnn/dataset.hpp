#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltnn/config.hpp"
#include "ltnn/image.hpp"
#include "ltnn/tensor.hpp"

namespace ltnn {

enum class TransformFamily : std::uint32_t {
  kRotation = 0,      // view k rotates the object by 360 * k / |T| degrees
  kIllumination = 1,  // view k lights the object from azimuth 360 * k / |T|
};

/// Reserved background colour; every other pixel is foreground.
inline constexpr std::array<std::uint8_t, 3> kBackground{128, 128, 128};

struct DatasetConfig {
  int objects = 100;
  int image_size = 64;
  int conditions = 9;
  std::string family = "rotation";
  /// Comma-separated RRGGBB hex colours used for object bodies and markers.
  std::string palette = "d62728,1f77b4,2ca02c,ff7f0e,9467bd,e377c2,17becf,bcbd22";
  double split = 0.8;
  std::uint64_t seed = 1;

  void bind(ConfigBinder& binder);
  void validate() const;
  TransformFamily transform_family() const;
  std::vector<std::array<std::uint8_t, 3>> palette_colors() const;
  /// Objects assigned to the training split (at least one object per split).
  int train_objects() const;
};

/// One split held in memory. Sample s stores its input x followed by the
/// |T| targets y_0..y_{|T|-1}, each as interleaved RGB bytes, and one
/// foreground bitmap per target.
struct Dataset {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t conditions = 0;
  TransformFamily family = TransformFamily::kRotation;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> object_ids;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> masks;

  std::size_t size() const { return object_ids.size(); }
  std::size_t image_bytes() const { return std::size_t{height} * width * 3; }
  std::size_t mask_bytes() const { return (std::size_t{height} * width + 7) / 8; }
  std::size_t views() const { return std::size_t{conditions} + 1; }

  /// view 0 is the input x, view k + 1 is target y_k.
  std::span<const std::uint8_t> view(std::size_t sample, std::size_t view) const;
  std::span<const std::uint8_t> input(std::size_t sample) const { return view(sample, 0); }
  std::span<const std::uint8_t> target(std::size_t sample, std::size_t k) const {
    return view(sample, k + 1);
  }
  bool mask_at(std::size_t sample, std::size_t k, std::size_t y, std::size_t x) const;
  Image view_image(std::size_t sample, std::size_t view) const;

  bool operator==(const Dataset&) const = default;
};

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

/// Renders `object_id` at view k (k = -1 for the canonical input pose).
/// Deterministic in (config.seed, object_id, k).
Image render_view(const DatasetConfig& config, std::uint32_t object_id, int k);

/// Renders every object; objects are split into train/test by identity.
DatasetSplits generate_dataset(const DatasetConfig& config);

/// LTND file layout (little-endian):
///
///   "LTND" | u32 version | u32 samples | u32 height | u32 width
///   | u32 conditions | u32 family | u64 seed             (36 bytes)
///   | u32 object_id[samples]
///   | per sample: (conditions + 1) RGB images, height * width * 3 bytes each
///   | per sample: conditions mask bitmaps, ceil(height * width / 8) bytes
///     each, row-major, least significant bit first
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 36;
std::uint64_t dataset_file_size(std::uint64_t samples, std::uint64_t height, std::uint64_t width,
                                std::uint64_t conditions);

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
/// Validates the header, the size arithmetic and every mask against its
/// target's pixels; failures raise FormatError with the offending offset.
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

/// Rows of [x, y_0, ..., y_{|T|-1}] for the first `max_samples` samples.
Image dataset_grid(const Dataset& dataset, std::size_t max_samples);

struct Batch {
  Tensor input;                  // N x 3 x H x W in [0, 1]
  std::vector<Tensor> targets;   // per condition, N x 3 x H x W
  std::vector<Tensor> masks;     // per condition, N x 1 x H x W in {0, 1}
  std::vector<std::uint32_t> object_ids;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

Batch load_batch(const Dataset& dataset, std::span<const std::size_t> indices);

/// Permutation of 0..n-1 for `epoch`, fixed by `seed`.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

}  // namespace ltnn
