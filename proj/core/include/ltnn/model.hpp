#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnn/config.hpp"
#include "ltnn/random.hpp"
#include "ltnn/tensor.hpp"

namespace ltnn {

enum class Conditioning {
  kCtu,           // per-condition latent convolutions
  kChannelConcat  // one-hot planes concatenated to the latent, shared conv (ablation)
};

std::string to_string(Conditioning mode);
Conditioning parse_conditioning(std::string_view text);

/// Architecture of the generator and discriminator. The defaults give a
/// 64x64x3 -> 128x8x8 latent network.
struct ModelConfig {
  int image_size = 64;
  int conditions = 9;
  Conditioning conditioning = Conditioning::kCtu;

  int kernel_size = 3;
  std::vector<int> encoder_channels{32, 64, 128, 128};
  std::vector<int> encoder_strides{1, 2, 2, 2};
  int ctu_layers = 2;

  // Each decoder block is conv(kernel_size, same padding) + Swish, followed
  // by bilinear upsampling by the block's factor.
  std::vector<int> decoder_channels{128, 64, 32};
  std::vector<int> decoder_upsample{2, 2, 1};
  int head_kernel = 4;
  int head_stride = 2;
  int head_padding = 1;
  bool task_divided = true;

  // Discriminator convs all use stride 2; layer `cdu_layer` is the
  // conditional one when conditional_discriminator is set.
  std::vector<int> disc_channels{32, 64, 128, 128};
  int cdu_layer = 2;
  bool conditional_discriminator = true;

  double init_std = 0.02;

  void bind(ConfigBinder& binder);
  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;

  int latent_channels() const { return encoder_channels.back(); }
  int latent_size() const;
  /// Spatial size entering the decoder heads.
  int head_input_size() const;
  int decoded_size() const;
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Convolution with bias; `transposed` selects conv2d_transpose.
struct ConvLayer {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;
  bool transposed = false;

  static ConvLayer make(int in_channels, int out_channels, int kernel, int stride, int padding,
                        Rng& rng, double init_std, bool transposed = false);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

/// Conv followed by Swish with its own trainable beta.
struct SwishConv {
  ConvLayer conv;
  Tensor beta;

  static SwishConv make(int in_channels, int out_channels, int kernel, int stride, int padding,
                        Rng& rng, double init_std);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, Rng& rng);
  /// Fully convolutional: accepts any spatial size the strides can reduce.
  Tensor forward(const Tensor& image) const;
  void collect(std::vector<NamedTensor>& out) const;

 private:
  std::vector<SwishConv> layers_;
};

/// One stack of same-padded Swish convolutions per condition. Selecting k
/// puts only mapping k's tensors into the graph.
class CtuBank {
 public:
  CtuBank() = default;
  CtuBank(const ModelConfig& config, Rng& rng);
  Tensor apply(const Tensor& latent, int k) const;
  std::size_t size() const { return maps_.size(); }
  void collect(std::vector<NamedTensor>& out) const;
  void collect_mapping(std::vector<NamedTensor>& out, int k) const;

 private:
  std::vector<std::vector<SwishConv>> maps_;
};

/// Channel-concatenation conditioning: one-hot condition planes appended to
/// the latent, then one shared Swish conv back to the latent width.
class ConcatConditioner {
 public:
  ConcatConditioner() = default;
  ConcatConditioner(const ModelConfig& config, Rng& rng);
  Tensor apply(const Tensor& latent, int k) const;
  /// N x |T| x H x W planes with plane k set to one.
  Tensor condition_planes(std::size_t batch, std::size_t height, std::size_t width, int k) const;
  void collect(std::vector<NamedTensor>& out) const;

 private:
  int conditions_ = 0;
  SwishConv mixer_;
};

struct DecoderOutput {
  Tensor value;   // linear head, unbounded
  Tensor refine;  // sigmoid head, in (0, 1); undefined when not task-divided
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelConfig& config, Rng& rng);
  DecoderOutput forward(const Tensor& latent) const;
  /// y_C = theta_C * value_C (.) refine_C, or `value` when not task-divided.
  Tensor assemble(const DecoderOutput& maps) const;
  const Tensor& rgb_balance() const { return rgb_; }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  std::vector<SwishConv> blocks_;
  std::vector<int> upsample_;
  ConvLayer value_head_;
  ConvLayer refine_head_;
  Tensor rgb_;
  bool task_divided_ = true;
};

/// Convolutional discriminator whose layer `cdu_layer` is drawn from a
/// per-condition bank; global average pool, 1x1 conv and sigmoid give one
/// probability per batch item.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const ModelConfig& config, Rng& rng);
  /// N x 1 x 1 x 1 probabilities.
  Tensor forward(const Tensor& image, int k) const;
  void collect(std::vector<NamedTensor>& out) const;
  void collect_shared(std::vector<NamedTensor>& out) const;
  void collect_conditional(std::vector<NamedTensor>& out, int k) const;
  std::size_t bank_size() const { return bank_.size(); }

 private:
  std::vector<SwishConv> layers_;  // layers_[cdu_layer_] unused when the bank is active
  std::vector<SwishConv> bank_;
  int cdu_layer_ = -1;
  ConvLayer head_;
};

struct Prediction {
  Tensor latent;       // l_x
  Tensor transformed;  // l^_{y_k}
  DecoderOutput maps;
  Tensor image;        // y^_k
};

/// Generator (encoder, conditioning, task-divided decoder, RGB balance) and
/// conditional discriminator.
class LtnnModel {
 public:
  LtnnModel() = default;
  LtnnModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Requires N x 3 x image_size x image_size.
  Tensor encode(const Tensor& image) const;
  Tensor transform(const Tensor& latent, int k) const;
  DecoderOutput decode(const Tensor& latent) const;
  Tensor assemble(const DecoderOutput& maps) const { return decoder_.assemble(maps); }
  Prediction predict(const Tensor& image, int k) const;
  Tensor discriminate(const Tensor& image, int k) const;

  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }

  /// Every parameter, in a fixed order.
  std::vector<NamedTensor> parameters() const;
  /// theta_E, theta_D, RGB balance, and the conditioning weights selected by k.
  std::vector<NamedTensor> generator_parameters(int k) const;
  /// theta_Dis and the CDU weights selected by k.
  std::vector<NamedTensor> discriminator_parameters(int k) const;
  /// Conditioning weights owned by condition j (empty for ch-concat).
  std::vector<NamedTensor> conditional_parameters(int j) const;
  std::vector<NamedTensor> discriminator_conditional_parameters(int j) const;

  std::size_t parameter_count() const;

 private:
  void check_condition(int k) const;

  ModelConfig config_;
  Encoder encoder_;
  CtuBank ctu_;
  ConcatConditioner concat_;
  Decoder decoder_;
  Discriminator discriminator_;
};

void set_requires_grad(const std::vector<NamedTensor>& params, bool on);

}  // namespace ltnn
