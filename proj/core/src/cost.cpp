#include "ltnn/cost.hpp"

#include <iomanip>
#include <sstream>

namespace ltnn {

LayerCost conv_cost(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t kernel,
                    std::uint64_t out_h, std::uint64_t out_w) {
  const std::uint64_t taps = in_channels * kernel * kernel;
  return {out_channels * taps + out_channels, out_h * out_w * out_channels * taps};
}

LayerCost transpose_conv_cost(std::uint64_t in_channels, std::uint64_t out_channels,
                              std::uint64_t kernel, std::uint64_t in_h, std::uint64_t in_w) {
  const std::uint64_t taps = out_channels * kernel * kernel;
  return {in_channels * taps + out_channels, in_h * in_w * in_channels * taps};
}

CostReport count_params_flops(const ModelConfig& config) {
  config.validate();
  CostReport report;
  auto add = [&report](std::string name, LayerCost cost, bool inference) {
    report.lines.push_back({std::move(name), cost.params, cost.macs, inference});
  };
  const std::uint64_t k = static_cast<std::uint64_t>(config.kernel_size);
  const std::uint64_t K = static_cast<std::uint64_t>(config.conditions);
  const int pad = config.kernel_size / 2;

  std::uint64_t in = 3;
  int size = config.image_size;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    size = (size + 2 * pad - config.kernel_size) / config.encoder_strides[i] + 1;
    const auto out = static_cast<std::uint64_t>(config.encoder_channels[i]);
    LayerCost c = conv_cost(in, out, k, size, size);
    c.params += 1;  // swish beta
    add("encoder." + std::to_string(i), c, true);
    in = out;
  }

  const std::uint64_t latent = static_cast<std::uint64_t>(config.latent_channels());
  const auto ls = static_cast<std::uint64_t>(config.latent_size());
  if (config.conditioning == Conditioning::kCtu) {
    LayerCost mapping;
    for (int l = 0; l < config.ctu_layers; ++l) {
      const LayerCost c = conv_cost(latent, latent, k, ls, ls);
      mapping.params += c.params + 1;
      mapping.macs += c.macs;
    }
    add("ctu (selected mapping)", mapping, true);
    if (K > 1) add("ctu (other mappings)", {mapping.params * (K - 1), 0}, false);
  } else {
    LayerCost c = conv_cost(latent + K, latent, k, ls, ls);
    c.params += 1;
    add("concat", c, true);
  }

  in = latent;
  size = static_cast<int>(ls);
  for (std::size_t i = 0; i < config.decoder_channels.size(); ++i) {
    const auto out = static_cast<std::uint64_t>(config.decoder_channels[i]);
    LayerCost c = conv_cost(in, out, k, size, size);
    c.params += 1;
    add("decoder." + std::to_string(i), c, true);
    size *= config.decoder_upsample[i];
    in = out;
  }
  const auto hk = static_cast<std::uint64_t>(config.head_kernel);
  add("decoder.value", transpose_conv_cost(in, 3, hk, size, size), true);
  if (config.task_divided) {
    add("decoder.refine", transpose_conv_cost(in, 3, hk, size, size), true);
    add("decoder.rgb", {3, 0}, true);
  }

  in = 3;
  size = config.image_size;
  for (std::size_t i = 0; i < config.disc_channels.size(); ++i) {
    size = (size + 2 * pad - config.kernel_size) / 2 + 1;
    const auto out = static_cast<std::uint64_t>(config.disc_channels[i]);
    LayerCost c = conv_cost(in, out, k, size, size);
    c.params += 1;
    const bool bank = config.conditional_discriminator && static_cast<int>(i) == config.cdu_layer;
    if (bank) {
      add("disc.cdu (x" + std::to_string(K) + ")", {c.params * K, c.macs}, false);
    } else {
      add("disc." + std::to_string(i), c, false);
    }
    in = out;
  }
  add("disc.head", conv_cost(in, 1, 1, 1, 1), false);

  for (const auto& line : report.lines) {
    report.train_params += line.params;
    if (line.inference) {
      report.infer_params += line.params;
      report.macs += line.macs;
    }
  }
  return report;
}

std::string CostReport::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "component" << std::right << std::setw(14) << "params"
     << std::setw(16) << "MACs/image" << "  used at inference\n";
  for (const auto& line : lines) {
    os << std::left << std::setw(28) << line.component << std::right << std::setw(14)
       << line.params << std::setw(16) << line.macs << "  " << (line.inference ? "yes" : "no")
       << '\n';
  }
  os << "parameters (train):      " << train_params << '\n'
     << "parameters (inference):  " << infer_params << '\n'
     << "MACs per image:          " << macs << '\n'
     << "FLOPs per image:         " << flops() << "  (1 MAC = 2 FLOPs)\n"
     << "GFLOPs per image:        " << std::fixed << std::setprecision(4)
     << static_cast<double>(flops()) / 1e9 << '\n';
  return os.str();
}

}  // namespace ltnn
