#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "pansharp/autodiff.hpp"
#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/rng.hpp"
#include "pansharp/tensor.hpp"

// Declarative construction of the two-stream fusion networks (TFNet and its
// residual variant) with the three decoder skip-connection modes, plus
// parameter initialization and forward execution.

namespace pansharp {

enum class Variant { kTFNet, kResTFNet };
enum class SkipMode { kNone, kPan, kPanMs };

inline const char* variant_name(Variant v) {
  return v == Variant::kTFNet ? "tfnet" : "restfnet";
}

inline const char* skip_mode_name(SkipMode s) {
  switch (s) {
    case SkipMode::kNone: return "none";
    case SkipMode::kPan: return "pan";
    default: return "pan+ms";
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "tfnet") return Variant::kTFNet;
  if (s == "restfnet") return Variant::kResTFNet;
  throw ContractError("unknown variant '" + s + "' (tfnet|restfnet)");
}

inline SkipMode parse_skip_mode(const std::string& s) {
  if (s == "none") return SkipMode::kNone;
  if (s == "pan") return SkipMode::kPan;
  if (s == "pan+ms") return SkipMode::kPanMs;
  throw ContractError("unknown skip mode '" + s + "' (none|pan|pan+ms)");
}

enum class LayerKind { kConv, kTransposedConv, kPRelu, kConcat, kResidualAdd };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int kernel_h = 0, kernel_w = 0;
  int stride = 1, padding = 0;
  int in_channels = 0, out_channels = 0;
  std::vector<std::string> inputs;  // producer layer names, or "pan"/"ms"
};

struct NetworkSpec {
  Variant variant = Variant::kTFNet;
  SkipMode skip = SkipMode::kPanMs;
  int width_scale = 1;
  int pan_bands = 1;
  int ms_bands = 4;
  std::vector<LayerSpec> layers;

  const LayerSpec* find(const std::string& name) const {
    for (const auto& l : layers)
      if (l.name == name) return &l;
    return nullptr;
  }
};

// Channels and spatial extents of one layer's output.
struct LayerShape {
  std::string name;
  int channels = 0, height = 0, width = 0;
};

namespace detail {

class NetBuilder {
 public:
  NetBuilder(NetworkSpec& spec) : spec_(spec) {}

  void conv(const std::string& name, const std::string& in, int cin, int cout,
            int k, int stride, int padding, bool activated = true) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kConv;
    l.kernel_h = l.kernel_w = k;
    l.stride = stride;
    l.padding = padding;
    l.in_channels = cin;
    l.out_channels = cout;
    l.inputs = {in};
    spec_.layers.push_back(l);
    if (activated) prelu(name);
  }

  void tconv(const std::string& name, const std::string& in, int cin,
             int cout) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kTransposedConv;
    l.kernel_h = l.kernel_w = 2;
    l.stride = 2;
    l.in_channels = cin;
    l.out_channels = cout;
    l.inputs = {in};
    spec_.layers.push_back(l);
    prelu(name);
  }

  void concat(const std::string& name, std::vector<std::string> ins,
              int total_channels) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kConcat;
    l.in_channels = total_channels;
    l.out_channels = total_channels;
    l.inputs = std::move(ins);
    spec_.layers.push_back(l);
  }

  // Two successive 3x3 convolutions from `in`; in the residual variant the
  // pair becomes a unit with identity shortcut and post-add activation.
  void conv_pair(const std::string& first, const std::string& second,
                 const std::string& in, int cin, int c, bool residual) {
    conv(first, in, cin, c, 3, 1, 1);
    conv(second, first + "_prelu", c, c, 3, 1, 1, /*activated=*/false);
    std::string pre_act = second;
    if (residual) {
      LayerSpec add;
      add.name = second + "_add";
      add.kind = LayerKind::kResidualAdd;
      add.in_channels = add.out_channels = c;
      add.inputs = {in, second};
      spec_.layers.push_back(add);
      pre_act = add.name;
    }
    prelu(second, pre_act);
  }

  std::string activated(const std::string& conv_name) const {
    return conv_name + "_prelu";
  }

 private:
  void prelu(const std::string& conv_name) { prelu(conv_name, conv_name); }

  void prelu(const std::string& conv_name, const std::string& in) {
    const LayerSpec& src = spec_.layers.back();
    LayerSpec l;
    l.name = conv_name + "_prelu";
    l.kind = LayerKind::kPRelu;
    l.in_channels = l.out_channels = src.out_channels;
    l.inputs = {in};
    spec_.layers.push_back(l);
  }

  NetworkSpec& spec_;
};

inline int scaled(int channels, int width_scale) {
  return channels / width_scale;
}

}  // namespace detail

// Builds the layer graph shared by both variants. The published layer table
// has three internal inconsistencies that are corrected here: Conv1_P runs
// at stride 1 (its listed output is full size, matching Conv1_M), UpConv12
// emits 64 channels (its listed output says 64), and Conv15 is a 3x3,
// 4-channel, stride-1 output layer.
inline NetworkSpec build_network(Variant variant, SkipMode skip,
                                 int width_scale = 1) {
  if (width_scale < 1 || 32 % width_scale != 0)
    throw ContractError("width_scale must divide 32, got " +
                        std::to_string(width_scale));
  NetworkSpec spec;
  spec.variant = variant;
  spec.skip = skip;
  spec.width_scale = width_scale;
  const bool residual = variant == Variant::kResTFNet;
  const int c32 = detail::scaled(32, width_scale);
  const int c64 = detail::scaled(64, width_scale);
  const int c128 = detail::scaled(128, width_scale);
  const int c256 = detail::scaled(256, width_scale);
  detail::NetBuilder b(spec);

  // Feature extraction. The leading pairs map 4 or 1 bands up to c32, so an
  // identity shortcut cannot close around them; they stay plain in both
  // variants.
  b.conv("Conv1_M", "ms", spec.ms_bands, c32, 3, 1, 1);
  b.conv("Conv2_M", b.activated("Conv1_M"), c32, c32, 3, 1, 1);
  b.conv("Conv3_M", b.activated("Conv2_M"), c32, c64, 2, 2, 0);
  b.conv("Conv1_P", "pan", spec.pan_bands, c32, 3, 1, 1);
  b.conv("Conv2_P", b.activated("Conv1_P"), c32, c32, 3, 1, 1);
  b.conv("Conv3_P", b.activated("Conv2_P"), c32, c64, 2, 2, 0);

  // Feature fusion.
  b.concat("Concat1", {b.activated("Conv3_P"), b.activated("Conv3_M")},
           c64 + c64);
  b.conv_pair("Conv4", "Conv5", "Concat1", c128, c128, residual);
  b.conv("DownConv6", b.activated("Conv5"), c128, c256, 2, 2, 0);

  // Image reconstruction.
  b.conv_pair("Conv7", "Conv8", b.activated("DownConv6"), c256, c256,
              residual);
  b.tconv("UpConv9", b.activated("Conv8"), c256, c128);

  std::string stage = b.activated("UpConv9");
  int stage_c = c128;
  if (skip != SkipMode::kNone) {
    // The decoder re-reads the fused 64x64 feature map after the first
    // up-sampling step in both compensated modes.
    b.concat("Concat2", {stage, b.activated("Conv5")}, c128 + c128);
    stage = "Concat2";
    stage_c = c256;
  }
  if (residual) {
    b.conv("ResConv1", stage, stage_c, c128, 1, 1, 0);
    stage = b.activated("ResConv1");
    stage_c = c128;
  }
  b.conv_pair("Conv10", "Conv11", stage, stage_c, c128, residual);
  b.tconv("UpConv12", b.activated("Conv11"), c128, c64);

  stage = b.activated("UpConv12");
  stage_c = c64;
  if (skip == SkipMode::kPan) {
    b.concat("Concat3", {stage, b.activated("Conv2_P")}, c64 + c32);
    stage = "Concat3";
    stage_c = c64 + c32;
  } else if (skip == SkipMode::kPanMs) {
    b.concat("Concat3",
             {stage, b.activated("Conv2_P"), b.activated("Conv2_M")},
             c64 + c32 + c32);
    stage = "Concat3";
    stage_c = c128;
  }
  if (residual) {
    b.conv("ResConv2", stage, stage_c, c64, 1, 1, 0);
    stage = b.activated("ResConv2");
    stage_c = c64;
  }
  b.conv_pair("Conv13", "Conv14", stage, stage_c, c64, residual);
  b.conv("Conv15", b.activated("Conv14"), c64, spec.ms_bands, 3, 1, 1,
         /*activated=*/false);
  return spec;
}

inline NetworkSpec build_tfnet(SkipMode skip, int width_scale = 1) {
  return build_network(Variant::kTFNet, skip, width_scale);
}

inline NetworkSpec build_restfnet(SkipMode skip, int width_scale = 1) {
  return build_network(Variant::kResTFNet, skip, width_scale);
}

// Symbolic shape propagation from (height, width) inputs. Validates the
// wiring: names unique, producers precede consumers, channel arithmetic
// consistent.
inline std::vector<LayerShape> propagate_shapes(const NetworkSpec& spec,
                                                int height, int width) {
  std::unordered_map<std::string, LayerShape> known;
  known["pan"] = {"pan", spec.pan_bands, height, width};
  known["ms"] = {"ms", spec.ms_bands, height, width};
  std::vector<LayerShape> out;
  out.reserve(spec.layers.size());
  for (const auto& l : spec.layers) {
    if (known.count(l.name))
      throw ContractError("network: duplicate layer name " + l.name);
    std::vector<LayerShape> ins;
    for (const auto& in : l.inputs) {
      auto it = known.find(in);
      if (it == known.end())
        throw ContractError("network: layer " + l.name +
                            " reads undefined input " + in);
      ins.push_back(it->second);
    }
    LayerShape s;
    s.name = l.name;
    switch (l.kind) {
      case LayerKind::kConv: {
        if (ins[0].channels != l.in_channels)
          throw ContractError("network: " + l.name + " expects " +
                              std::to_string(l.in_channels) +
                              " channels, producer has " +
                              std::to_string(ins[0].channels));
        s.channels = l.out_channels;
        s.height = (ins[0].height + 2 * l.padding - l.kernel_h) / l.stride + 1;
        s.width = (ins[0].width + 2 * l.padding - l.kernel_w) / l.stride + 1;
        break;
      }
      case LayerKind::kTransposedConv: {
        if (ins[0].channels != l.in_channels)
          throw ContractError("network: " + l.name + " channel mismatch");
        s.channels = l.out_channels;
        s.height = ins[0].height * l.stride;
        s.width = ins[0].width * l.stride;
        break;
      }
      case LayerKind::kPRelu: {
        s = ins[0];
        s.name = l.name;
        break;
      }
      case LayerKind::kConcat: {
        int total = 0;
        for (const auto& in : ins) {
          if (in.height != ins[0].height || in.width != ins[0].width)
            throw ContractError("network: " + l.name + " spatial mismatch");
          total += in.channels;
        }
        if (total != l.out_channels)
          throw ContractError("network: " + l.name + " declares " +
                              std::to_string(l.out_channels) +
                              " channels, inputs sum to " +
                              std::to_string(total));
        s.channels = total;
        s.height = ins[0].height;
        s.width = ins[0].width;
        break;
      }
      case LayerKind::kResidualAdd: {
        if (ins[0].channels != ins[1].channels ||
            ins[0].height != ins[1].height || ins[0].width != ins[1].width)
          throw ContractError("network: " + l.name +
                              " shortcut/branch shape mismatch");
        s = ins[0];
        s.name = l.name;
        break;
      }
    }
    known[l.name] = s;
    out.push_back(s);
  }
  return out;
}

// Learnable tensors, in layer order: weight and bias per convolution kind,
// one slope vector per PReLU.
template <typename T>
struct ParamSet {
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };
  std::vector<Entry> entries;
  uint64_t seed = 0;

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name == name) return static_cast<int>(i);
    return -1;
  }

  const Tensor<T>& at(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw ContractError("params: no tensor named " + name);
    return entries[static_cast<size_t>(i)].tensor;
  }

  Tensor<T>& at(const std::string& name) {
    return const_cast<Tensor<T>&>(
        static_cast<const ParamSet*>(this)->at(name));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.seed = seed;
    for (const auto& e : entries)
      out.entries.push_back({e.name, e.tensor.template cast<U>()});
    return out;
  }
};

// He-normal weights (variance 2/fan-in), zero biases, slopes 0.25; fully
// determined by the seed.
template <typename T = float>
ParamSet<T> init_params(const NetworkSpec& spec, uint64_t seed) {
  ParamSet<T> params;
  params.seed = seed;
  Rng rng(seed);
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kTransposedConv) {
      const Shape wshape =
          l.kind == LayerKind::kConv
              ? Shape{l.out_channels, l.in_channels, l.kernel_h, l.kernel_w}
              : Shape{l.in_channels, l.out_channels, l.kernel_h, l.kernel_w};
      Tensor<T> w(wshape);
      const double stddev =
          std::sqrt(2.0 / (double(l.in_channels) * l.kernel_h * l.kernel_w));
      for (int64_t i = 0; i < w.size(); ++i)
        w[i] = static_cast<T>(rng.normal() * stddev);
      params.entries.push_back({l.name + ".weight", std::move(w)});
      params.entries.push_back({l.name + ".bias", Tensor<T>({l.out_channels})});
    } else if (l.kind == LayerKind::kPRelu) {
      params.entries.push_back(
          {l.name + ".slope", Tensor<T>::full({l.out_channels}, T(0.25))});
    }
  }
  return params;
}

// Total learnable element count (weights, biases, slopes).
inline int64_t param_count(const NetworkSpec& spec) {
  int64_t n = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kTransposedConv)
      n += int64_t(l.out_channels) * l.in_channels * l.kernel_h * l.kernel_w +
           l.out_channels;
    else if (l.kind == LayerKind::kPRelu)
      n += l.out_channels;
  }
  return n;
}

inline int conv_layer_count(const NetworkSpec& spec) {
  int n = 0;
  for (const auto& l : spec.layers)
    n += l.kind == LayerKind::kConv || l.kind == LayerKind::kTransposedConv;
  return n;
}

namespace detail {

template <typename T>
void check_forward_inputs(const NetworkSpec& spec, const Tensor<T>& pan,
                          const Tensor<T>& ms_up) {
  if (pan.ndim() != 4 || ms_up.ndim() != 4)
    throw ContractError("forward: inputs must be 4-D");
  if (pan.extent(1) != spec.pan_bands || ms_up.extent(1) != spec.ms_bands)
    throw ContractError("forward: expected " + std::to_string(spec.pan_bands) +
                        "-band pan and " + std::to_string(spec.ms_bands) +
                        "-band ms, got " + pan.shape().str() + " and " +
                        ms_up.shape().str());
  if (pan.extent(0) != ms_up.extent(0) || pan.extent(2) != ms_up.extent(2) ||
      pan.extent(3) != ms_up.extent(3))
    throw ContractError("forward: pan " + pan.shape().str() +
                        " and ms " + ms_up.shape().str() + " do not align");
  if (pan.extent(2) % 4 != 0 || pan.extent(3) % 4 != 0)
    throw ContractError(
        "forward: spatial extents must be divisible by 4 (two stride-2 "
        "stages), got " +
        pan.shape().str());
}

}  // namespace detail

// Inference path: executes the layer graph directly on tensors, no tape.
// When `shapes` is non-null it receives every layer's output shape.
template <typename T>
Tensor<T> forward(const NetworkSpec& spec, const ParamSet<T>& params,
                  const Tensor<T>& pan, const Tensor<T>& ms_up,
                  std::vector<LayerShape>* shapes = nullptr) {
  detail::check_forward_inputs(spec, pan, ms_up);
  std::unordered_map<std::string, Tensor<T>> values;
  values.emplace("pan", pan);
  values.emplace("ms", ms_up);
  const Tensor<T>* last = nullptr;
  for (const auto& l : spec.layers) {
    auto in = [&](int i) -> const Tensor<T>& {
      auto it = values.find(l.inputs[static_cast<size_t>(i)]);
      if (it == values.end())
        throw ContractError("forward: layer " + l.name +
                            " reads undefined input " + l.inputs[i]);
      return it->second;
    };
    Tensor<T> out;
    switch (l.kind) {
      case LayerKind::kConv:
        out = ops::conv2d(in(0), params.at(l.name + ".weight"),
                          params.at(l.name + ".bias"), l.stride, l.padding);
        break;
      case LayerKind::kTransposedConv:
        out = ops::conv2d_transpose(in(0), params.at(l.name + ".weight"),
                                    params.at(l.name + ".bias"), l.stride);
        break;
      case LayerKind::kPRelu:
        out = ops::prelu(in(0), params.at(l.name + ".slope"));
        break;
      case LayerKind::kConcat: {
        out = in(0);
        for (size_t i = 1; i < l.inputs.size(); ++i)
          out = ops::concat_channels(out, in(static_cast<int>(i)));
        break;
      }
      case LayerKind::kResidualAdd:
        out = ops::add_elementwise(in(0), in(1));
        break;
    }
    if (shapes != nullptr)
      shapes->push_back({l.name, out.extent(1), out.extent(2), out.extent(3)});
    last = &(values[l.name] = std::move(out));
  }
  return *last;
}

// Training path: records the same program on a tape. param_nodes must align
// with params.entries (one input node per entry).
template <typename T>
int forward_on_graph(Graph<T>& g, const NetworkSpec& spec,
                     const ParamSet<T>& params,
                     const std::vector<int>& param_nodes, int pan_node,
                     int ms_node) {
  detail::check_forward_inputs(spec, g.value(pan_node), g.value(ms_node));
  auto pnode = [&](const std::string& name) {
    const int i = params.index_of(name);
    if (i < 0) throw ContractError("forward: no param node for " + name);
    return param_nodes[static_cast<size_t>(i)];
  };
  std::unordered_map<std::string, int> ids;
  ids["pan"] = pan_node;
  ids["ms"] = ms_node;
  int last = -1;
  for (const auto& l : spec.layers) {
    auto in = [&](int i) { return ids.at(l.inputs[static_cast<size_t>(i)]); };
    int out = -1;
    switch (l.kind) {
      case LayerKind::kConv:
        out = g.conv2d(in(0), pnode(l.name + ".weight"),
                       pnode(l.name + ".bias"), l.stride, l.padding);
        break;
      case LayerKind::kTransposedConv:
        out = g.conv2d_transpose(in(0), pnode(l.name + ".weight"),
                                 pnode(l.name + ".bias"), l.stride);
        break;
      case LayerKind::kPRelu:
        out = g.prelu(in(0), pnode(l.name + ".slope"));
        break;
      case LayerKind::kConcat: {
        out = in(0);
        for (size_t i = 1; i < l.inputs.size(); ++i)
          out = g.concat_channels(out, in(static_cast<int>(i)));
        break;
      }
      case LayerKind::kResidualAdd:
        out = g.add(in(0), in(1));
        break;
    }
    ids[l.name] = out;
    last = out;
  }
  return last;
}

}  // namespace pansharp
