#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Parallel U-Net: two identical encoder/decoder branches (pressure and
// saturation) reading the same control image. Each branch is
//   [conv3x3 -> norm -> GELU] x2 per level, 2x2 max-pool down with channel
//   doubling, 2x2 stride-2 transposed conv up with channel halving, skip
//   concatenation, and a 1x1 conv + sigmoid head.
// Normalization uses per-channel statistics of the single input image.

namespace porflow::nn {

struct NetworkSpec {
  int input_channels = 2;
  int depth = 3;
  int base_channels = 32;

  // Spatial sizes must be multiples of this.
  int size_multiple() const { return 1 << depth; }
  std::string canonical() const;
  std::uint64_t hash() const;
  void validate() const;
};

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::vector<int> shape;
};

template <class T>
class ParallelUNet {
 public:
  explicit ParallelUNet(const NetworkSpec& spec);
  ~ParallelUNet();
  ParallelUNet(ParallelUNet&&) noexcept;
  ParallelUNet& operator=(ParallelUNet&&) noexcept;
  ParallelUNet(const ParallelUNet&) = delete;
  ParallelUNet& operator=(const ParallelUNet&) = delete;

  const NetworkSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<TensorInfo>& layout() const { return layout_; }

  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }
  std::span<T> gradients() { return grads_; }
  std::span<const T> gradients() const { return grads_; }
  void zero_grad();

  // Variance-scaled normal init (std = sqrt(2 / fan_in)); biases and
  // normalization shifts zero, normalization scales one.
  void init_kaiming(std::uint64_t seed);

  struct Output {
    int height = 0;
    int width = 0;
    std::vector<T> pressure;    // sigmoid outputs in [0, 1]
    std::vector<T> saturation;
  };

  // input: input_channels x height x width, row-major. With keep_cache the
  // activations needed by backward() are retained.
  Output forward(std::span<const T> input, int height, int width, bool keep_cache = true);

  // Accumulates parameter gradients given d(loss)/d(sigmoid output).
  void backward(std::span<const T> d_pressure, std::span<const T> d_saturation);

 private:
  struct Branch;

  NetworkSpec spec_;
  std::vector<T> params_;
  std::vector<T> grads_;
  std::vector<TensorInfo> layout_;
  std::vector<std::unique_ptr<Branch>> branches_;
};

extern template class ParallelUNet<float>;
extern template class ParallelUNet<double>;

// Count implied by a NetworkSpec alone (independent of the image size).
std::size_t parameter_count(const NetworkSpec& spec);

}  // namespace porflow::nn
