#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnn/model.hpp"

namespace ltnn {

struct LayerCost {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

/// Weights plus bias of a kh x kw convolution and its multiply-accumulates
/// over an out_h x out_w output grid.
LayerCost conv_cost(std::uint64_t in_channels, std::uint64_t out_channels, std::uint64_t kernel,
                    std::uint64_t out_h, std::uint64_t out_w);
/// Transposed convolution: one MAC per (input pixel, in channel, out channel, tap).
LayerCost transpose_conv_cost(std::uint64_t in_channels, std::uint64_t out_channels,
                              std::uint64_t kernel, std::uint64_t in_h, std::uint64_t in_w);

/// Parameter and compute totals derived from layer geometry alone.
///
/// Training parameters cover everything that is optimised: the full CTU bank
/// and the discriminator with its CDU bank. Inference parameters keep the
/// encoder, a single conditioning mapping, the decoder and the RGB balance.
/// MACs are per image for one inference pass (one condition); only
/// convolutions are counted. FLOPs use the 1 MAC = 2 FLOPs convention.
struct CostReport {
  struct Line {
    std::string component;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    bool inference = true;
  };

  std::uint64_t train_params = 0;
  std::uint64_t infer_params = 0;
  std::uint64_t macs = 0;
  std::vector<Line> lines;

  std::uint64_t flops() const { return 2 * macs; }
  std::string to_text() const;
};

CostReport count_params_flops(const ModelConfig& config);

}  // namespace ltnn
