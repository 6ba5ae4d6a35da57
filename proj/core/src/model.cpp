#include "ltnn/model.hpp"

#include <stdexcept>

#include "ltnn/errors.hpp"
#include "ltnn/ops.hpp"

namespace ltnn {

namespace {

Tensor random_normal(Shape shape, Rng& rng, double stddev) {
  std::vector<Real> values(numel(shape));
  for (auto& v : values) v = static_cast<Real>(rng.normal(0.0, stddev));
  Tensor t = Tensor::from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor parameter(Shape shape, Real value) {
  Tensor t = Tensor::filled(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

int conv_out(int size, int kernel, int stride, int padding) {
  return (size + 2 * padding - kernel) / stride + 1;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("model config: " + message);
}

}  // namespace

std::string to_string(Conditioning mode) {
  return mode == Conditioning::kCtu ? "ctu" : "ch-concat";
}

Conditioning parse_conditioning(std::string_view text) {
  if (text == "ctu") return Conditioning::kCtu;
  if (text == "ch-concat") return Conditioning::kChannelConcat;
  throw ConfigError("unknown conditioning mode '" + std::string(text) + "' (expected ctu|ch-concat)");
}

void ModelConfig::bind(ConfigBinder& b) {
  b.bind("image_size", image_size);
  b.bind("conditions", conditions);
  b.bind_custom(
      "conditioning", [this](std::string_view v) { conditioning = parse_conditioning(v); },
      [this] { return to_string(conditioning); });
  b.bind("kernel_size", kernel_size);
  b.bind("encoder_channels", encoder_channels);
  b.bind("encoder_strides", encoder_strides);
  b.bind("ctu_layers", ctu_layers);
  b.bind("decoder_channels", decoder_channels);
  b.bind("decoder_upsample", decoder_upsample);
  b.bind("head_kernel", head_kernel);
  b.bind("head_stride", head_stride);
  b.bind("head_padding", head_padding);
  b.bind("task_divided", task_divided);
  b.bind("disc_channels", disc_channels);
  b.bind("cdu_layer", cdu_layer);
  b.bind("conditional_discriminator", conditional_discriminator);
  b.bind("init_std", init_std);
}

int ModelConfig::latent_size() const {
  int s = image_size;
  for (int stride : encoder_strides) s = conv_out(s, kernel_size, stride, kernel_size / 2);
  return s;
}

int ModelConfig::head_input_size() const {
  int s = latent_size();
  for (int f : decoder_upsample) s *= f;
  return s;
}

int ModelConfig::decoded_size() const {
  return (head_input_size() - 1) * head_stride - 2 * head_padding + head_kernel;
}

void ModelConfig::validate() const {
  require(image_size >= 1, "image_size must be positive");
  require(conditions >= 1, "conditions must be positive");
  require(kernel_size >= 1 && kernel_size % 2 == 1, "kernel_size must be odd");
  require(!encoder_channels.empty(), "encoder needs at least one layer");
  require(encoder_channels.size() == encoder_strides.size(),
          "encoder_channels and encoder_strides differ in length");
  for (int c : encoder_channels) require(c >= 1, "encoder channels must be positive");
  for (int s : encoder_strides) require(s >= 1, "encoder strides must be positive");
  require(ctu_layers >= 1, "ctu_layers must be positive");
  require(decoder_channels.size() == decoder_upsample.size(),
          "decoder_channels and decoder_upsample differ in length");
  for (int c : decoder_channels) require(c >= 1, "decoder channels must be positive");
  for (int f : decoder_upsample) require(f >= 1, "decoder upsample factors must be positive");
  require(head_kernel >= 1 && head_stride >= 1 && head_padding >= 0, "invalid head geometry");
  require(latent_size() >= kernel_size,
          "latent size " + std::to_string(latent_size()) + " smaller than kernel");
  require(decoded_size() == image_size,
          "decoder produces " + std::to_string(decoded_size()) + "x" +
              std::to_string(decoded_size()) + " images, expected " + std::to_string(image_size));
  require(!disc_channels.empty(), "discriminator needs at least one layer");
  for (int c : disc_channels) require(c >= 1, "discriminator channels must be positive");
  require(cdu_layer >= 0 && cdu_layer < static_cast<int>(disc_channels.size()),
          "cdu_layer out of range");
  require(init_std > 0, "init_std must be positive");
}

std::string ModelConfig::to_text() const {
  ModelConfig copy = *this;
  ConfigBinder b;
  copy.bind(b);
  return b.to_text();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig config;
  ConfigBinder b;
  config.bind(b);
  b.load_text(text, "model config");
  return config;
}

ConvLayer ConvLayer::make(int in_channels, int out_channels, int kernel, int stride, int padding,
                          Rng& rng, double init_std, bool transposed) {
  ConvLayer layer;
  const auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(out_channels);
  const auto k = static_cast<std::size_t>(kernel);
  layer.weight = random_normal(transposed ? Shape{in, out, k, k} : Shape{out, in, k, k}, rng,
                               init_std);
  layer.bias = parameter({out}, Real(0));
  layer.stride = stride;
  layer.padding = padding;
  layer.transposed = transposed;
  return layer;
}

Tensor ConvLayer::forward(const Tensor& x) const {
  return transposed ? conv2d_transpose(x, weight, bias, stride, padding)
                    : conv2d(x, weight, bias, stride, padding);
}

void ConvLayer::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

SwishConv SwishConv::make(int in_channels, int out_channels, int kernel, int stride, int padding,
                          Rng& rng, double init_std) {
  return SwishConv{ConvLayer::make(in_channels, out_channels, kernel, stride, padding, rng, init_std),
                   parameter({1}, Real(1))};
}

Tensor SwishConv::forward(const Tensor& x) const { return swish(conv.forward(x), beta); }

void SwishConv::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  conv.collect(out, prefix);
  out.push_back({prefix + ".beta", beta});
}

Encoder::Encoder(const ModelConfig& config, Rng& rng) {
  int in = 3;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    layers_.push_back(SwishConv::make(in, config.encoder_channels[i], config.kernel_size,
                                      config.encoder_strides[i], config.kernel_size / 2, rng,
                                      config.init_std));
    in = config.encoder_channels[i];
  }
}

Tensor Encoder::forward(const Tensor& image) const {
  Tensor h = image;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

void Encoder::collect(std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, "encoder." + std::to_string(i));
  }
}

CtuBank::CtuBank(const ModelConfig& config, Rng& rng) {
  const int c = config.latent_channels();
  maps_.resize(static_cast<std::size_t>(config.conditions));
  for (auto& mapping : maps_) {
    for (int l = 0; l < config.ctu_layers; ++l) {
      mapping.push_back(
          SwishConv::make(c, c, config.kernel_size, 1, config.kernel_size / 2, rng, config.init_std));
    }
  }
}

Tensor CtuBank::apply(const Tensor& latent, int k) const {
  Tensor h = latent;
  for (const auto& layer : maps_.at(static_cast<std::size_t>(k))) h = layer.forward(h);
  return h;
}

void CtuBank::collect_mapping(std::vector<NamedTensor>& out, int k) const {
  const auto& mapping = maps_.at(static_cast<std::size_t>(k));
  for (std::size_t l = 0; l < mapping.size(); ++l) {
    mapping[l].collect(out, "ctu." + std::to_string(k) + "." + std::to_string(l));
  }
}

void CtuBank::collect(std::vector<NamedTensor>& out) const {
  for (std::size_t k = 0; k < maps_.size(); ++k) collect_mapping(out, static_cast<int>(k));
}

ConcatConditioner::ConcatConditioner(const ModelConfig& config, Rng& rng)
    : conditions_(config.conditions),
      mixer_(SwishConv::make(config.latent_channels() + config.conditions, config.latent_channels(),
                             config.kernel_size, 1, config.kernel_size / 2, rng, config.init_std)) {}

Tensor ConcatConditioner::condition_planes(std::size_t batch, std::size_t height,
                                           std::size_t width, int k) const {
  const auto K = static_cast<std::size_t>(conditions_);
  const std::size_t plane = height * width;
  std::vector<Real> values(batch * K * plane, Real(0));
  for (std::size_t n = 0; n < batch; ++n) {
    std::fill_n(values.begin() + static_cast<std::ptrdiff_t>((n * K + static_cast<std::size_t>(k)) * plane),
                plane, Real(1));
  }
  return Tensor::from({batch, K, height, width}, std::move(values));
}

Tensor ConcatConditioner::apply(const Tensor& latent, int k) const {
  const Tensor planes = condition_planes(latent.dim(0), latent.dim(2), latent.dim(3), k);
  return mixer_.forward(concat_channels(latent, planes));
}

void ConcatConditioner::collect(std::vector<NamedTensor>& out) const {
  mixer_.collect(out, "concat");
}

Decoder::Decoder(const ModelConfig& config, Rng& rng)
    : upsample_(config.decoder_upsample), task_divided_(config.task_divided) {
  int in = config.latent_channels();
  for (int c : config.decoder_channels) {
    blocks_.push_back(
        SwishConv::make(in, c, config.kernel_size, 1, config.kernel_size / 2, rng, config.init_std));
    in = c;
  }
  value_head_ = ConvLayer::make(in, 3, config.head_kernel, config.head_stride, config.head_padding,
                                rng, config.init_std, true);
  if (task_divided_) {
    refine_head_ = ConvLayer::make(in, 3, config.head_kernel, config.head_stride,
                                   config.head_padding, rng, config.init_std, true);
    rgb_ = parameter({3}, Real(1));
  }
}

DecoderOutput Decoder::forward(const Tensor& latent) const {
  Tensor h = latent;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i].forward(h);
    if (upsample_[i] > 1) h = bilinear_upsample(h, upsample_[i]);
  }
  DecoderOutput out;
  out.value = value_head_.forward(h);
  if (task_divided_) out.refine = sigmoid(refine_head_.forward(h));
  return out;
}

Tensor Decoder::assemble(const DecoderOutput& maps) const {
  if (!task_divided_) return maps.value;
  if (maps.value.shape() != maps.refine.shape()) {
    throw DimensionError("assemble: value map " + to_string(maps.value.shape()) +
                         " and refinement map " + to_string(maps.refine.shape()) + " differ");
  }
  return mul(channel_scale(maps.value, rgb_), maps.refine);
}

void Decoder::collect(std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(out, "decoder." + std::to_string(i));
  }
  value_head_.collect(out, "decoder.value");
  if (task_divided_) {
    refine_head_.collect(out, "decoder.refine");
    out.push_back({"decoder.rgb", rgb_});
  }
}

Discriminator::Discriminator(const ModelConfig& config, Rng& rng) {
  int in = 3;
  const int k = config.kernel_size;
  for (std::size_t i = 0; i < config.disc_channels.size(); ++i) {
    const int c = config.disc_channels[i];
    const bool conditional =
        config.conditional_discriminator && static_cast<int>(i) == config.cdu_layer;
    if (conditional) {
      cdu_layer_ = static_cast<int>(i);
      layers_.emplace_back();
      for (int j = 0; j < config.conditions; ++j) {
        bank_.push_back(SwishConv::make(in, c, k, 2, k / 2, rng, config.init_std));
      }
    } else {
      layers_.push_back(SwishConv::make(in, c, k, 2, k / 2, rng, config.init_std));
    }
    in = c;
  }
  head_ = ConvLayer::make(in, 1, 1, 1, 0, rng, config.init_std);
}

Tensor Discriminator::forward(const Tensor& image, int k) const {
  Tensor h = image;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (static_cast<int>(i) == cdu_layer_) {
      h = bank_.at(static_cast<std::size_t>(k)).forward(h);
    } else {
      h = layers_[i].forward(h);
    }
  }
  return sigmoid(head_.forward(global_avg_pool(h)));
}

void Discriminator::collect_shared(std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (static_cast<int>(i) == cdu_layer_) continue;
    layers_[i].collect(out, "disc." + std::to_string(i));
  }
  head_.collect(out, "disc.head");
}

void Discriminator::collect_conditional(std::vector<NamedTensor>& out, int k) const {
  if (bank_.empty()) return;
  bank_.at(static_cast<std::size_t>(k)).collect(out, "disc.cdu." + std::to_string(k));
}

void Discriminator::collect(std::vector<NamedTensor>& out) const {
  collect_shared(out);
  for (std::size_t j = 0; j < bank_.size(); ++j) collect_conditional(out, static_cast<int>(j));
}

LtnnModel::LtnnModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng encoder_rng(seed, 1);
  Rng conditioning_rng(seed, 2);
  Rng decoder_rng(seed, 3);
  Rng discriminator_rng(seed, 4);
  encoder_ = Encoder(config_, encoder_rng);
  if (config_.conditioning == Conditioning::kCtu) {
    ctu_ = CtuBank(config_, conditioning_rng);
  } else {
    concat_ = ConcatConditioner(config_, conditioning_rng);
  }
  decoder_ = Decoder(config_, decoder_rng);
  discriminator_ = Discriminator(config_, discriminator_rng);
}

void LtnnModel::check_condition(int k) const {
  if (k < 0 || k >= config_.conditions) {
    throw std::out_of_range("unknown condition " + std::to_string(k) + " (model has " +
                            std::to_string(config_.conditions) + ")");
  }
}

Tensor LtnnModel::encode(const Tensor& image) const {
  const auto s = static_cast<std::size_t>(config_.image_size);
  if (!image.defined() || image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != s ||
      image.dim(3) != s) {
    throw DimensionError("encode: expected N x 3 x " + std::to_string(s) + " x " +
                         std::to_string(s) + " image, got " +
                         (image.defined() ? to_string(image.shape()) : "<undefined>"));
  }
  return encoder_.forward(image);
}

Tensor LtnnModel::transform(const Tensor& latent, int k) const {
  check_condition(k);
  const auto c = static_cast<std::size_t>(config_.latent_channels());
  const auto s = static_cast<std::size_t>(config_.latent_size());
  if (latent.rank() != 4 || latent.dim(1) != c || latent.dim(2) != s || latent.dim(3) != s) {
    throw DimensionError("transform: latent " + to_string(latent.shape()) +
                         " does not match configured " + std::to_string(c) + "x" +
                         std::to_string(s) + "x" + std::to_string(s));
  }
  return config_.conditioning == Conditioning::kCtu ? ctu_.apply(latent, k)
                                                    : concat_.apply(latent, k);
}

DecoderOutput LtnnModel::decode(const Tensor& latent) const {
  const auto c = static_cast<std::size_t>(config_.latent_channels());
  if (latent.rank() != 4 || latent.dim(1) != c) {
    throw DimensionError("decode: latent " + to_string(latent.shape()) + " must have " +
                         std::to_string(c) + " channels");
  }
  return decoder_.forward(latent);
}

Prediction LtnnModel::predict(const Tensor& image, int k) const {
  Prediction p;
  p.latent = encode(image);
  p.transformed = transform(p.latent, k);
  p.maps = decode(p.transformed);
  p.image = assemble(p.maps);
  return p;
}

Tensor LtnnModel::discriminate(const Tensor& image, int k) const {
  check_condition(k);
  return discriminator_.forward(image, config_.conditional_discriminator ? k : 0);
}

std::vector<NamedTensor> LtnnModel::parameters() const {
  std::vector<NamedTensor> out;
  encoder_.collect(out);
  if (config_.conditioning == Conditioning::kCtu) {
    ctu_.collect(out);
  } else {
    concat_.collect(out);
  }
  decoder_.collect(out);
  discriminator_.collect(out);
  return out;
}

std::vector<NamedTensor> LtnnModel::generator_parameters(int k) const {
  check_condition(k);
  std::vector<NamedTensor> out;
  encoder_.collect(out);
  if (config_.conditioning == Conditioning::kCtu) {
    ctu_.collect_mapping(out, k);
  } else {
    concat_.collect(out);
  }
  decoder_.collect(out);
  return out;
}

std::vector<NamedTensor> LtnnModel::discriminator_parameters(int k) const {
  check_condition(k);
  std::vector<NamedTensor> out;
  discriminator_.collect_shared(out);
  if (config_.conditional_discriminator) discriminator_.collect_conditional(out, k);
  return out;
}

std::vector<NamedTensor> LtnnModel::conditional_parameters(int j) const {
  check_condition(j);
  std::vector<NamedTensor> out;
  if (config_.conditioning == Conditioning::kCtu) ctu_.collect_mapping(out, j);
  return out;
}

std::vector<NamedTensor> LtnnModel::discriminator_conditional_parameters(int j) const {
  check_condition(j);
  std::vector<NamedTensor> out;
  if (config_.conditional_discriminator) discriminator_.collect_conditional(out, j);
  return out;
}

std::size_t LtnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

void set_requires_grad(const std::vector<NamedTensor>& params, bool on) {
  for (auto p : params) p.tensor.set_requires_grad(on);
}

}  // namespace ltnn
