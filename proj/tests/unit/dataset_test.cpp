#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "ltnn/binary_io.hpp"
#include "ltnn/dataset.hpp"
#include "ltnn/errors.hpp"
#include "test_support.hpp"

namespace ltnn {
namespace {

DatasetConfig tiny(int objects = 6, int conditions = 3, int size = 32) {
  DatasetConfig c;
  c.objects = objects;
  c.conditions = conditions;
  c.image_size = size;
  return c;
}

TEST(Dataset, SplitIsDisjointByObject) {
  const auto splits = generate_dataset(tiny(10));
  EXPECT_EQ(splits.train.size(), 8u);
  EXPECT_EQ(splits.test.size(), 2u);
  std::set<std::uint32_t> ids(splits.train.object_ids.begin(), splits.train.object_ids.end());
  for (auto id : splits.test.object_ids) EXPECT_FALSE(ids.count(id)) << id;
  ids.insert(splits.test.object_ids.begin(), splits.test.object_ids.end());
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(tiny(8).train_objects(), 6);
  EXPECT_EQ(tiny(2).train_objects(), 1);
}

TEST(Dataset, IdentityViewEqualsInput) {
  for (const char* family : {"rotation", "illumination"}) {
    DatasetConfig c = tiny();
    c.family = family;
    const auto splits = generate_dataset(c);
    for (std::size_t s = 0; s < splits.train.size(); ++s) {
      const auto x = splits.train.input(s), y0 = splits.train.target(s, 0);
      EXPECT_TRUE(std::equal(x.begin(), x.end(), y0.begin())) << family << " sample " << s;
      const auto y1 = splits.train.target(s, 1);
      EXPECT_FALSE(std::equal(x.begin(), x.end(), y1.begin())) << family << " sample " << s;
    }
  }
}

TEST(Dataset, ViewsAreDeterministicFunctionsOfObjectAndCondition) {
  const DatasetConfig c = tiny();
  const auto a = generate_dataset(c), b = generate_dataset(c);
  EXPECT_EQ(encode_dataset(a.train), encode_dataset(b.train));
  EXPECT_EQ(encode_dataset(a.test), encode_dataset(b.test));
  for (std::size_t s = 0; s < a.train.size(); ++s) {
    for (int k = 0; k < c.conditions; ++k) {
      const Image rendered = render_view(c, a.train.object_ids[s], k);
      const auto stored = a.train.target(s, static_cast<std::size_t>(k));
      EXPECT_TRUE(std::equal(stored.begin(), stored.end(), rendered.rgb.begin()));
    }
  }
  DatasetConfig other = c;
  other.seed = 2;
  EXPECT_NE(encode_dataset(generate_dataset(other).train), encode_dataset(a.train));
}

TEST(Dataset, MasksAreExactlyNonBackgroundPixels) {
  const auto splits = generate_dataset(tiny());
  const Dataset& d = splits.train;
  for (std::size_t s = 0; s < d.size(); ++s) {
    for (std::size_t k = 0; k < d.conditions; ++k) {
      const auto y = d.target(s, k);
      std::size_t fg = 0;
      for (std::size_t r = 0; r < d.height; ++r) {
        for (std::size_t q = 0; q < d.width; ++q) {
          const std::size_t p = (r * d.width + q) * 3;
          const bool background = y[p] == 128 && y[p + 1] == 128 && y[p + 2] == 128;
          EXPECT_EQ(d.mask_at(s, k, r, q), !background);
          fg += !background;
        }
      }
      EXPECT_GT(fg, 0u);
      EXPECT_LT(fg, std::size_t{d.height} * d.width);
    }
  }
}

TEST(Dataset, FileSizeArithmetic) {
  // 100 objects, 9 conditions, 64x64: every sample holds 10 images.
  EXPECT_EQ(dataset_file_size(100, 64, 64, 9),
            36u + 4 * 100 + 100 * 10 * 64 * 64 * 3 + 100 * 9 * 512);
  DatasetConfig c = tiny(100, 9, 64);
  const auto splits = generate_dataset(c);
  ASSERT_EQ(splits.train.size() + splits.test.size(), 100u);
  std::uint64_t total = 0;
  for (const Dataset* d : {&splits.train, &splits.test}) {
    EXPECT_EQ(d->views(), 10u);
    const auto bytes = encode_dataset(*d);
    EXPECT_EQ(bytes.size(), dataset_file_size(d->size(), 64, 64, 9));
    total += d->size() * d->views();
  }
  EXPECT_EQ(total, 1000u);
}

TEST(Dataset, FileRoundTripAndHeader) {
  testing::TempDir dir("ds");
  const auto splits = generate_dataset(tiny());
  write_dataset(dir / "train.ltnd", splits.train);
  EXPECT_EQ(read_dataset(dir / "train.ltnd"), splits.train);
  const auto bytes = read_file_bytes(dir / "train.ltnd");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LTND");
  EXPECT_EQ(bytes[4], kDatasetVersion);
  EXPECT_EQ(bytes[8], splits.train.size());
}

TEST(Dataset, CorruptRecordsReportOffsets) {
  const auto splits = generate_dataset(tiny());
  const auto bytes = encode_dataset(splits.train);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  EXPECT_THROW(decode_dataset(truncated), FormatError);

  // Flip one mask bit of sample 1, target 2.
  const Dataset& d = splits.train;
  const std::size_t masks_at =
      kDatasetHeaderBytes + 4 * d.size() + d.size() * d.views() * d.image_bytes();
  const std::size_t at = masks_at + (1 * d.conditions + 2) * d.mask_bytes() + 10;
  auto flipped = bytes;
  flipped[at] ^= 0x4;
  try {
    decode_dataset(flipped);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), at);
  }

  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    decode_dataset(bad_version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Dataset, LoadBatchShapesAndValues) {
  const auto splits = generate_dataset(tiny());
  const Dataset& d = splits.train;
  const std::vector<std::size_t> one{2};
  const Batch b = load_batch(d, one);
  EXPECT_EQ(b.input.shape(), (Shape{1, 3, 32, 32}));
  ASSERT_EQ(b.targets.size(), 3u);
  EXPECT_EQ(b.masks[1].shape(), (Shape{1, 1, 32, 32}));
  // Pixel (r, q) channel c of target k.
  const std::size_t r = 16, q = 15, k = 1;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::uint8_t byte = d.target(2, k)[(r * 32 + q) * 3 + c];
    EXPECT_EQ(b.targets[k].at({0, c, r, q}), Real(byte) / Real(255));
    EXPECT_EQ(std::lround(b.targets[k].at({0, c, r, q}) * 255), byte);
  }
  EXPECT_EQ(b.masks[k].at({0, 0, r, q}), d.mask_at(2, k, r, q) ? 1 : 0);
  for (Real v : b.input.data()) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
  const std::vector<std::size_t> bad{d.size()};
  EXPECT_THROW(load_batch(d, bad), std::out_of_range);
}

TEST(Dataset, EpochOrderIsPermutation) {
  for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
    auto order = epoch_order(37, 4, epoch);
    EXPECT_EQ(order, epoch_order(37, 4, epoch));
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(order[i], i);
  }
  EXPECT_NE(epoch_order(37, 4, 0), epoch_order(37, 4, 1));
}

TEST(Dataset, ConfigValidation) {
  DatasetConfig c = tiny();
  c.split = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny();
  c.palette = "808080";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny();
  c.family = "shear";
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Dataset, GridExport) {
  const auto splits = generate_dataset(tiny());
  const Image grid = dataset_grid(splits.train, 2);
  EXPECT_EQ(grid.width, 4 * 32 + 5 * 2);
  EXPECT_EQ(grid.height, 2 * 32 + 3 * 2);
}

}  // namespace
}  // namespace ltnn
