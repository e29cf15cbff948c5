#include "porflow/nn/unet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "porflow/core/error.hpp"
#include "porflow/simd/kernels.hpp"

namespace porflow::nn {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string NetworkSpec::canonical() const {
  std::ostringstream os;
  os << "parallel-unet/v1;in=" << input_channels << ";depth=" << depth << ";base=" << base_channels
     << ";conv=3x3p1;norm=instance-stats;act=gelu;down=maxpool2;up=convT2;head=1x1-sigmoid";
  return os.str();
}

std::uint64_t NetworkSpec::hash() const {
  const std::string s = canonical();
  return fnv1a64(s.data(), s.size());
}

void NetworkSpec::validate() const {
  if (input_channels < 1) raise(ErrorKind::ValidationError, "network: input_channels must be >= 1");
  if (depth < 0 || depth > 8) raise(ErrorKind::ValidationError, "network: depth must be in [0, 8]");
  if (base_channels < 1) raise(ErrorKind::ValidationError, "network: base_channels must be >= 1");
}

namespace {

template <class T>
using Ops = simd::Ops<T>;

constexpr double kNormEps = 1e-5;

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2.0)));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2.0)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <class T>
void im2col3x3(const T* x, int c, int h, int w, T* col) {
  const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    const T* xc = x + ci * hw;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (static_cast<std::ptrdiff_t>(ci) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          T* row = dst + static_cast<std::ptrdiff_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::ptrdiff_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            row[xx] = (sx < 0 || sx >= w) ? T(0) : src[sx];
          }
        }
      }
  }
}

template <class T>
void col2im3x3(const T* col, int c, int h, int w, T* dx) {
  const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(h) * w;
  std::fill(dx, dx + c * hw, T(0));
  for (int ci = 0; ci < c; ++ci) {
    T* dxc = dx + ci * hw;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (static_cast<std::ptrdiff_t>(ci) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::ptrdiff_t>(y) * w;
          T* drow = dxc + static_cast<std::ptrdiff_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            if (sx >= 0 && sx < w) drow[sx] += row[xx];
          }
        }
      }
  }
}

struct LayoutBuilder {
  std::vector<TensorInfo>* layout;
  std::size_t offset = 0;
  std::size_t add(const std::string& name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    layout->push_back({name, offset, size, std::move(shape)});
    const std::size_t at = offset;
    offset += size;
    return at;
  }
};

// 3x3 conv (no bias) -> per-channel normalization -> GELU.
template <class T>
struct ConvNormAct {
  int cin = 0, cout = 0;
  std::size_t w_off = 0, gamma_off = 0, beta_off = 0;
  int h = 0, w = 0;
  std::vector<T> col, xhat, z, inv_std;

  void declare(LayoutBuilder& lb, const std::string& name, int in, int out) {
    cin = in;
    cout = out;
    w_off = lb.add(name + ".conv.weight", {out, in, 3, 3});
    gamma_off = lb.add(name + ".norm.weight", {out});
    beta_off = lb.add(name + ".norm.bias", {out});
  }

  std::vector<T> forward(const T* params, const std::vector<T>& x, int hh, int ww, bool cache) {
    h = hh;
    w = ww;
    const int hw = h * w;
    // Inference shares one per-thread buffer; reallocating it every pass costs
    // page faults that grow faster than the image.
    thread_local std::vector<T> scratch_col;
    std::vector<T>& c = cache ? col : scratch_col;
    c.resize(static_cast<std::size_t>(cin) * 9 * hw);
    im2col3x3(x.data(), cin, h, w, c.data());
    std::vector<T> y(static_cast<std::size_t>(cout) * hw);
    Ops<T>::gemm_nn(cout, hw, cin * 9, params + w_off, cin * 9, c.data(), hw, y.data(), hw, false);

    if (cache) {
      xhat.resize(y.size());
      z.resize(y.size());
      inv_std.resize(static_cast<std::size_t>(cout));
    }
    const T* gamma = params + gamma_off;
    const T* beta = params + beta_off;
    for (int ch = 0; ch < cout; ++ch) {
      T* yc = y.data() + static_cast<std::ptrdiff_t>(ch) * hw;
      const T mean = Ops<T>::sum(static_cast<std::size_t>(hw), yc) / T(hw);
      T var = T(0);
      for (int i = 0; i < hw; ++i) var += (yc[i] - mean) * (yc[i] - mean);
      var /= T(hw);
      const T is = T(1) / std::sqrt(var + T(kNormEps));
      if (cache) inv_std[static_cast<std::size_t>(ch)] = is;
      for (int i = 0; i < hw; ++i) {
        const T xh = (yc[i] - mean) * is;
        const T zz = gamma[ch] * xh + beta[ch];
        if (cache) {
          xhat[static_cast<std::size_t>(ch) * hw + i] = xh;
          z[static_cast<std::size_t>(ch) * hw + i] = zz;
        }
        yc[i] = gelu(zz);
      }
    }
    return y;
  }

  std::vector<T> backward(const T* params, T* grads, const std::vector<T>& dout, bool need_dx) {
    const int hw = h * w;
    std::vector<T> dy(dout.size());
    for (int ch = 0; ch < cout; ++ch) {
      const std::size_t base = static_cast<std::size_t>(ch) * hw;
      T* dyc = dy.data() + base;
      for (int i = 0; i < hw; ++i) dyc[i] = dout[base + i] * gelu_grad(z[base + i]);
      const T sum_dz = Ops<T>::sum(static_cast<std::size_t>(hw), dyc);
      const T sum_dz_xhat = Ops<T>::dot(static_cast<std::size_t>(hw), dyc, xhat.data() + base);
      grads[gamma_off + ch] += sum_dz_xhat;
      grads[beta_off + ch] += sum_dz;
      const T k = params[gamma_off + ch] * inv_std[static_cast<std::size_t>(ch)] / T(hw);
      for (int i = 0; i < hw; ++i)
        dyc[i] = k * (T(hw) * dyc[i] - sum_dz - xhat[base + i] * sum_dz_xhat);
    }
    Ops<T>::gemm_nt(cout, cin * 9, hw, dy.data(), hw, col.data(), hw, grads + w_off, cin * 9, true);
    if (!need_dx) return {};
    std::vector<T> dcol(static_cast<std::size_t>(cin) * 9 * hw);
    Ops<T>::gemm_tn(cin * 9, hw, cout, params + w_off, cin * 9, dy.data(), hw, dcol.data(), hw, false);
    std::vector<T> dx(static_cast<std::size_t>(cin) * hw);
    col2im3x3(dcol.data(), cin, h, w, dx.data());
    return dx;
  }
};

template <class T>
struct MaxPool2 {
  int c = 0, h = 0, w = 0;
  std::vector<int> argmax;

  std::vector<T> forward(const std::vector<T>& x, int ch, int hh, int ww, bool cache) {
    c = ch;
    h = hh;
    w = ww;
    const int oh = h / 2, ow = w / 2;
    std::vector<T> y(static_cast<std::size_t>(c) * oh * ow);
    if (cache) argmax.resize(y.size());
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          int best = (ci * h + 2 * oy) * w + 2 * ox;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int idx = (ci * h + 2 * oy + dy) * w + 2 * ox + dx;
              if (x[static_cast<std::size_t>(idx)] > x[static_cast<std::size_t>(best)]) best = idx;
            }
          const std::size_t o = (static_cast<std::size_t>(ci) * oh + oy) * ow + ox;
          y[o] = x[static_cast<std::size_t>(best)];
          if (cache) argmax[o] = best;
        }
    return y;
  }

  std::vector<T> backward(const std::vector<T>& dout) const {
    std::vector<T> dx(static_cast<std::size_t>(c) * h * w, T(0));
    for (std::size_t o = 0; o < dout.size(); ++o) dx[static_cast<std::size_t>(argmax[o])] += dout[o];
    return dx;
  }
};

// 2x2 stride-2 transposed convolution, weight layout [cin, cout, 2, 2].
template <class T>
struct UpConv2 {
  int cin = 0, cout = 0, h = 0, w = 0;
  std::size_t w_off = 0, b_off = 0;
  std::vector<T> input;

  void declare(LayoutBuilder& lb, const std::string& name, int in, int out) {
    cin = in;
    cout = out;
    w_off = lb.add(name + ".weight", {in, out, 2, 2});
    b_off = lb.add(name + ".bias", {out});
  }

  std::vector<T> forward(const T* params, const std::vector<T>& x, int hh, int ww, bool cache) {
    h = hh;
    w = ww;
    const int hw = h * w;
    if (cache) input = x;
    std::vector<T> zbuf(static_cast<std::size_t>(cout) * 4 * hw);
    Ops<T>::gemm_tn(cout * 4, hw, cin, params + w_off, cout * 4, x.data(), hw, zbuf.data(), hw, false);
    const int oh = 2 * h, ow = 2 * w;
    std::vector<T> y(static_cast<std::size_t>(cout) * oh * ow);
    const T* bias = params + b_off;
    for (int co = 0; co < cout; ++co)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const T* zr = zbuf.data() + static_cast<std::ptrdiff_t>((co * 4 + a * 2 + b)) * hw;
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
              y[(static_cast<std::size_t>(co) * oh + 2 * i + a) * ow + 2 * j + b] = zr[i * w + j] + bias[co];
        }
    return y;
  }

  std::vector<T> backward(const T* params, T* grads, const std::vector<T>& dout) {
    const int hw = h * w;
    const int oh = 2 * h, ow = 2 * w;
    std::vector<T> dz(static_cast<std::size_t>(cout) * 4 * hw);
    for (int co = 0; co < cout; ++co) {
      T bsum = T(0);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          T* zr = dz.data() + static_cast<std::ptrdiff_t>((co * 4 + a * 2 + b)) * hw;
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
              const T g = dout[(static_cast<std::size_t>(co) * oh + 2 * i + a) * ow + 2 * j + b];
              zr[i * w + j] = g;
              bsum += g;
            }
        }
      grads[b_off + co] += bsum;
    }
    Ops<T>::gemm_nt(cin, cout * 4, hw, input.data(), hw, dz.data(), hw, grads + w_off, cout * 4, true);
    std::vector<T> dx(static_cast<std::size_t>(cin) * hw);
    Ops<T>::gemm_nn(cin, hw, cout * 4, params + w_off, cout * 4, dz.data(), hw, dx.data(), hw, false);
    return dx;
  }
};

// 1x1 convolution to one channel with bias, followed by a sigmoid.
template <class T>
struct SigmoidHead {
  int cin = 0, hw = 0;
  std::size_t w_off = 0, b_off = 0;
  std::vector<T> input, out;

  void declare(LayoutBuilder& lb, const std::string& name, int in) {
    cin = in;
    w_off = lb.add(name + ".weight", {1, in, 1, 1});
    b_off = lb.add(name + ".bias", {1});
  }

  std::vector<T> forward(const T* params, const std::vector<T>& x, int n, bool cache) {
    hw = n;
    std::vector<T> y(static_cast<std::size_t>(hw));
    Ops<T>::gemm_nn(1, hw, cin, params + w_off, cin, x.data(), hw, y.data(), hw, false);
    for (T& v : y) v = T(1) / (T(1) + std::exp(-(v + params[b_off])));
    if (cache) {
      input = x;
      out = y;
    }
    return y;
  }

  std::vector<T> backward(const T* params, T* grads, std::span<const T> dout) {
    std::vector<T> dpre(static_cast<std::size_t>(hw));
    T bsum = T(0);
    for (int i = 0; i < hw; ++i) {
      const T s = out[static_cast<std::size_t>(i)];
      dpre[static_cast<std::size_t>(i)] = dout[static_cast<std::size_t>(i)] * s * (T(1) - s);
      bsum += dpre[static_cast<std::size_t>(i)];
    }
    grads[b_off] += bsum;
    Ops<T>::gemm_nt(1, cin, hw, dpre.data(), hw, input.data(), hw, grads + w_off, cin, true);
    std::vector<T> dx(static_cast<std::size_t>(cin) * hw);
    Ops<T>::gemm_tn(cin, hw, 1, params + w_off, cin, dpre.data(), hw, dx.data(), hw, false);
    return dx;
  }
};

}  // namespace

template <class T>
struct ParallelUNet<T>::Branch {
  int depth = 0;
  std::vector<int> channels;  // per level
  std::vector<ConvNormAct<T>> enc_a, enc_b, dec_a, dec_b;
  std::vector<MaxPool2<T>> pools;
  std::vector<UpConv2<T>> ups;
  SigmoidHead<T> head;
  // Cached level sizes.
  std::vector<int> hs, ws;

  void declare(LayoutBuilder& lb, const std::string& prefix, const NetworkSpec& spec) {
    depth = spec.depth;
    channels.resize(static_cast<std::size_t>(depth) + 1);
    for (int l = 0; l <= depth; ++l) channels[static_cast<std::size_t>(l)] = spec.base_channels << l;
    enc_a.resize(channels.size());
    enc_b.resize(channels.size());
    pools.resize(static_cast<std::size_t>(depth));
    ups.resize(static_cast<std::size_t>(depth));
    dec_a.resize(static_cast<std::size_t>(depth));
    dec_b.resize(static_cast<std::size_t>(depth));
    for (int l = 0; l <= depth; ++l) {
      const auto L = static_cast<std::size_t>(l);
      const int in = l == 0 ? spec.input_channels : channels[L - 1];
      const std::string n = prefix + ".enc" + std::to_string(l);
      enc_a[L].declare(lb, n + ".a", in, channels[L]);
      enc_b[L].declare(lb, n + ".b", channels[L], channels[L]);
    }
    for (int l = depth - 1; l >= 0; --l) {
      const auto L = static_cast<std::size_t>(l);
      const std::string n = prefix + ".dec" + std::to_string(l);
      ups[L].declare(lb, n + ".up", channels[L + 1], channels[L]);
      dec_a[L].declare(lb, n + ".a", 2 * channels[L], channels[L]);
      dec_b[L].declare(lb, n + ".b", channels[L], channels[L]);
    }
    head.declare(lb, prefix + ".head", channels[0]);
  }

  std::vector<T> forward(const T* p, const std::vector<T>& input, int h, int w, bool cache) {
    hs.assign(channels.size(), 0);
    ws.assign(channels.size(), 0);
    std::vector<std::vector<T>> skips(static_cast<std::size_t>(depth));
    std::vector<T> x = input;
    for (int l = 0; l <= depth; ++l) {
      const auto L = static_cast<std::size_t>(l);
      hs[L] = h;
      ws[L] = w;
      x = enc_a[L].forward(p, x, h, w, cache);
      x = enc_b[L].forward(p, x, h, w, cache);
      if (l < depth) {
        skips[L] = x;
        x = pools[L].forward(x, channels[L], h, w, cache);
        h /= 2;
        w /= 2;
      }
    }
    for (int l = depth - 1; l >= 0; --l) {
      const auto L = static_cast<std::size_t>(l);
      std::vector<T> up = ups[L].forward(p, x, h, w, cache);
      h *= 2;
      w *= 2;
      std::vector<T> cat(skips[L].size() + up.size());
      std::copy(skips[L].begin(), skips[L].end(), cat.begin());
      std::copy(up.begin(), up.end(), cat.begin() + static_cast<std::ptrdiff_t>(skips[L].size()));
      x = dec_a[L].forward(p, cat, h, w, cache);
      x = dec_b[L].forward(p, x, h, w, cache);
    }
    return head.forward(p, x, h * w, cache);
  }

  void backward(const T* p, T* g, std::span<const T> dout) {
    std::vector<T> dx = head.backward(p, g, dout);
    std::vector<std::vector<T>> dskips(static_cast<std::size_t>(depth));
    for (int l = 0; l < depth; ++l) {
      const auto L = static_cast<std::size_t>(l);
      dx = dec_b[L].backward(p, g, dx, true);
      dx = dec_a[L].backward(p, g, dx, true);
      const std::size_t skip_size = static_cast<std::size_t>(channels[L]) * hs[L] * ws[L];
      dskips[L].assign(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(skip_size));
      std::vector<T> dup(dx.begin() + static_cast<std::ptrdiff_t>(skip_size), dx.end());
      dx = ups[L].backward(p, g, dup);
    }
    for (int l = depth; l >= 0; --l) {
      const auto L = static_cast<std::size_t>(l);
      if (l < depth) {
        dx = pools[L].backward(dx);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskips[L][i];
      }
      dx = enc_b[L].backward(p, g, dx, true);
      dx = enc_a[L].backward(p, g, dx, l > 0);
    }
  }
};

template <class T>
ParallelUNet<T>::ParallelUNet(const NetworkSpec& spec) : spec_(spec) {
  spec_.validate();
  LayoutBuilder lb{&layout_};
  for (const char* name : {"pressure", "saturation"}) {
    auto b = std::make_unique<Branch>();
    b->declare(lb, name, spec_);
    branches_.push_back(std::move(b));
  }
  params_.assign(lb.offset, T(0));
  grads_.assign(lb.offset, T(0));
  for (const TensorInfo& t : layout_)
    if (t.name.ends_with(".norm.weight")) std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size, T(1));
}

template <class T>
ParallelUNet<T>::~ParallelUNet() = default;
template <class T>
ParallelUNet<T>::ParallelUNet(ParallelUNet&&) noexcept = default;
template <class T>
ParallelUNet<T>& ParallelUNet<T>::operator=(ParallelUNet&&) noexcept = default;

template <class T>
void ParallelUNet<T>::zero_grad() {
  std::fill(grads_.begin(), grads_.end(), T(0));
}

template <class T>
void ParallelUNet<T>::init_kaiming(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const TensorInfo& t : layout_) {
    T* dst = params_.data() + t.offset;
    if (t.name.ends_with(".norm.weight")) {
      std::fill_n(dst, t.size, T(1));
    } else if (t.name.ends_with(".bias")) {
      std::fill_n(dst, t.size, T(0));
    } else {
      // Conv weights [out, in, k, k] use fan_in = in*k*k; transposed convs
      // [in, out, k, k] use out*k*k, matching the usual framework convention.
      const int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      for (std::size_t i = 0; i < t.size; ++i) dst[i] = static_cast<T>(normal(rng));
    }
  }
}

template <class T>
typename ParallelUNet<T>::Output ParallelUNet<T>::forward(std::span<const T> input, int height,
                                                          int width, bool keep_cache) {
  const int m = spec_.size_multiple();
  if (height < m || width < m || height % m != 0 || width % m != 0)
    raise(ErrorKind::ShapeMismatch, "input size must be a positive multiple of 2^depth");
  if (input.size() != static_cast<std::size_t>(spec_.input_channels) * height * width)
    raise(ErrorKind::ShapeMismatch, "input tensor does not match input_channels x height x width");
  const std::vector<T> x(input.begin(), input.end());
  Output out;
  out.height = height;
  out.width = width;
  out.pressure = branches_[0]->forward(params_.data(), x, height, width, keep_cache);
  out.saturation = branches_[1]->forward(params_.data(), x, height, width, keep_cache);
  return out;
}

template <class T>
void ParallelUNet<T>::backward(std::span<const T> d_pressure, std::span<const T> d_saturation) {
  branches_[0]->backward(params_.data(), grads_.data(), d_pressure);
  branches_[1]->backward(params_.data(), grads_.data(), d_saturation);
}

template class ParallelUNet<float>;
template class ParallelUNet<double>;

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  auto conv = [&](int in, int out) { total += static_cast<std::size_t>(out) * in * 9 + 2 * out; };
  for (int branch = 0; branch < 2; ++branch) {
    for (int l = 0; l <= spec.depth; ++l) {
      const int c = spec.base_channels << l;
      conv(l == 0 ? spec.input_channels : c / 2, c);
      conv(c, c);
    }
    for (int l = 0; l < spec.depth; ++l) {
      const int c = spec.base_channels << l;
      total += static_cast<std::size_t>(2 * c) * c * 4 + c;  // transposed conv
      conv(2 * c, c);
      conv(c, c);
    }
    total += static_cast<std::size_t>(spec.base_channels) + 1;  // head
  }
  return total;
}

}  // namespace porflow::nn
