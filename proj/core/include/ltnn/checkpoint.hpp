#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnn/model.hpp"
#include "ltnn/tensor.hpp"

namespace ltnn {

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1 };

struct ParameterRecord {
  std::string name;
  DType dtype = DType::kF64;
  Shape shape;
  std::vector<double> values;  // exact for both dtypes
};

/// Contents of an "LTNN" checkpoint file:
///
///   "LTNN" | u32 version | u32 config_len | config text (key=value lines)
///   | u32 record_count | records...
///
/// Each record is u32 name_len | name | u8 dtype | u32 rank | u64 dims[rank]
/// | raw little-endian values. Everything is little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_text;
  std::vector<ParameterRecord> records;

  const ParameterRecord* find(std::string_view name) const;
  void put(std::string name, const Shape& shape, std::span<const Real> values);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

/// Parameters of `model` as records (names from LtnnModel::parameters()).
void store_model(Checkpoint& checkpoint, const LtnnModel& model);
/// Copies matching records into `model`; every model parameter must be
/// present with the same shape.
void load_model_parameters(const Checkpoint& checkpoint, const LtnnModel& model);

/// Model-only checkpoint: config text is the model config.
Checkpoint make_model_checkpoint(const LtnnModel& model);
/// Rebuilds a model from the config block (model keys only; other keys are
/// ignored) and loads its parameters.
LtnnModel restore_model(const Checkpoint& checkpoint);

/// Extracts the model keys from a config block that may also hold other
/// settings (e.g. a full training config).
ModelConfig model_config_from_block(std::string_view config_text);

}  // namespace ltnn
