#include "ltnn/checkpoint.hpp"

#include <stdexcept>

#include "ltnn/binary_io.hpp"
#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'N', 'N'};

constexpr DType native_dtype() {
  return sizeof(Real) == 8 ? DType::kF64 : DType::kF32;
}

}  // namespace

const ParameterRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

void Checkpoint::put(std::string name, const Shape& shape, std::span<const Real> values) {
  ParameterRecord r;
  r.name = std::move(name);
  r.dtype = native_dtype();
  r.shape = shape;
  r.values.assign(values.begin(), values.end());
  records.push_back(std::move(r));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  ByteWriter w;
  w.text(std::string_view(kMagic, 4));
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(checkpoint.config_text.size()));
  w.text(checkpoint.config_text);
  w.u32(static_cast<std::uint32_t>(checkpoint.records.size()));
  for (const auto& r : checkpoint.records) {
    if (numel(r.shape) != r.values.size()) {
      throw DimensionError("checkpoint record " + r.name + " has shape " + to_string(r.shape) +
                           " but " + std::to_string(r.values.size()) + " values");
    }
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.text(r.name);
    w.u8(static_cast<std::uint8_t>(r.dtype));
    w.u32(static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) w.u64(d);
    for (double v : r.values) {
      if (r.dtype == DType::kF64) {
        w.f64(v);
      } else {
        w.f32(static_cast<float>(v));
      }
    }
  }
  return w.release();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.text(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not an LTNN checkpoint (bad magic)", 0);
  }
  const auto version_at = r.offset();
  const auto version = r.u32("version");
  if (version != Checkpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  Checkpoint ck;
  ck.config_text = r.text(r.u32("config length"), "config block");
  const auto count = r.u32("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ParameterRecord rec;
    rec.name = r.text(r.u32("record name length"), "record name");
    const auto dtype_at = r.offset();
    const auto tag = r.u8("dtype");
    if (tag > 1) throw FormatError("unknown dtype tag " + std::to_string(tag), dtype_at);
    rec.dtype = static_cast<DType>(tag);
    const auto rank = r.u32("rank");
    for (std::uint32_t d = 0; d < rank; ++d) rec.shape.push_back(r.u64("dimension"));
    const std::size_t n = numel(rec.shape);
    const std::size_t width = rec.dtype == DType::kF64 ? 8 : 4;
    if (n > r.remaining() / width) {
      throw FormatError("record " + rec.name + " of shape " + to_string(rec.shape) +
                            " exceeds remaining file size",
                        r.offset());
    }
    rec.values.resize(n);
    for (auto& v : rec.values) {
      v = rec.dtype == DType::kF64 ? r.f64("value") : static_cast<double>(r.f32("value"));
    }
    ck.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after last record", r.offset());
  }
  return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  write_file_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

void store_model(Checkpoint& checkpoint, const LtnnModel& model) {
  for (const auto& p : model.parameters()) checkpoint.put(p.name, p.tensor.shape(), p.tensor.data());
}

void load_model_parameters(const Checkpoint& checkpoint, const LtnnModel& model) {
  for (auto p : model.parameters()) {
    const ParameterRecord* rec = checkpoint.find(p.name);
    if (!rec) throw std::runtime_error("checkpoint is missing parameter " + p.name);
    if (rec->shape != p.tensor.shape()) {
      throw DimensionError("checkpoint parameter " + p.name + " has shape " +
                           to_string(rec->shape) + ", model expects " + to_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(rec->values[i]);
  }
}

ModelConfig model_config_from_block(std::string_view config_text) {
  ModelConfig config;
  ConfigBinder binder;
  config.bind(binder);
  std::size_t pos = 0;
  while (pos < config_text.size()) {
    const auto nl = config_text.find('\n', pos);
    const auto line =
        config_text.substr(pos, nl == std::string_view::npos ? config_text.size() - pos : nl - pos);
    const auto eq = line.find('=');
    if (eq != std::string_view::npos && binder.has(line.substr(0, eq))) {
      binder.set(line.substr(0, eq), line.substr(eq + 1));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return config;
}

Checkpoint make_model_checkpoint(const LtnnModel& model) {
  Checkpoint ck;
  ck.config_text = model.config().to_text();
  store_model(ck, model);
  return ck;
}

LtnnModel restore_model(const Checkpoint& checkpoint) {
  LtnnModel model(model_config_from_block(checkpoint.config_text), 0);
  load_model_parameters(checkpoint, model);
  return model;
}

}  // namespace ltnn
