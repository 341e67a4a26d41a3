#include "crossres/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace crossres {

std::uint64_t hash_doubles(const std::vector<double>& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
  const std::size_t n = v.size() * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min<std::size_t>(jobs, n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

void Model::build_layout() {
  convs_.clear();
  std::size_t off = 0;
  int h = spec_.input_size, w = spec_.input_size, in_c = spec_.in_channels;
  for (std::size_t li = 0; li < spec_.conv_channels.size(); ++li) {
    ConvLayer cl;
    cl.in_c = in_c;
    cl.out_c = spec_.conv_channels[li];
    cl.k = (li == 0) ? 7 : 3;
    cl.stride = (li == 0) ? 4 : 2;
    cl.pad = (li == 0) ? 3 : 1;
    cl.in_h = h;
    cl.in_w = w;
    cl.out_h = (h + 2 * cl.pad - cl.k) / cl.stride + 1;
    cl.out_w = (w + 2 * cl.pad - cl.k) / cl.stride + 1;
    if (cl.out_h < 1 || cl.out_w < 1)
      throw std::invalid_argument("ModelSpec: input_size too small for conv stack");
    cl.w_off = off;
    off += static_cast<std::size_t>(cl.out_c) * cl.in_c * cl.k * cl.k;
    cl.b_off = off;
    off += cl.out_c;
    convs_.push_back(cl);
    h = cl.out_h;
    w = cl.out_w;
    in_c = cl.out_c;
  }
  embed_w_off_ = off;
  off += static_cast<std::size_t>(spec_.embedding_dim) * in_c;
  embed_b_off_ = off;
  off += spec_.embedding_dim;
  cls_w_off_ = off;
  off += static_cast<std::size_t>(spec_.num_classes) * spec_.embedding_dim;
  cls_b_off_ = off;
  off += spec_.num_classes;
  total_params_ = off;
}

Model Model::init(const ModelSpec& spec, Rng& rng) {
  if (spec.embedding_dim < 2) throw std::invalid_argument("ModelSpec: embedding_dim must be >= 2");
  if (spec.num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
  Model m;
  m.spec_ = spec;
  m.build_layout();
  m.params_.assign(m.total_params_, 0.0);

  // He-normal for convs and the embedding projection, zero classifier head.
  for (const auto& cl : m.convs_) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cl.in_c) * cl.k * cl.k));
    const std::size_t nw = static_cast<std::size_t>(cl.out_c) * cl.in_c * cl.k * cl.k;
    for (std::size_t i = 0; i < nw; ++i) m.params_[cl.w_off + i] = stddev * rng.normal();
  }
  const int last_c = m.convs_.back().out_c;
  const double stddev = std::sqrt(2.0 / last_c);
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.embedding_dim) * last_c; ++i)
    m.params_[m.embed_w_off_ + i] = stddev * rng.normal();
  return m;
}

Model Model::from_parts(const ModelSpec& spec, std::vector<double> params, bool frozen) {
  Model m;
  m.spec_ = spec;
  m.build_layout();
  if (params.size() != m.total_params_)
    throw std::invalid_argument("Model::from_parts: parameter count mismatch");
  m.params_ = std::move(params);
  m.frozen_ = frozen;
  return m;
}

Model Model::freeze() const {
  Model m = *this;
  m.frozen_ = true;
  return m;
}

std::vector<double>& Model::params() {
  if (frozen_) throw std::logic_error("Model: mutable parameter access on a frozen model");
  return params_;
}

std::uint64_t Model::param_hash() const { return hash_doubles(params_); }

namespace {

Tensor image_to_tensor(const Image& img) {
  Tensor t(img.c, img.h, img.w);
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) t.at(ch, y, x) = img.at(y, x, ch);
  return t;
}

}  // namespace

void Model::check_batch(const std::vector<Image>& batch) const {
  for (const auto& img : batch) {
    if (img.h != spec_.input_size || img.w != spec_.input_size || img.c != spec_.in_channels)
      throw std::invalid_argument("Model: input shape mismatch");
  }
}

Activations Model::forward(const Image& img) const {
  if (img.h != spec_.input_size || img.w != spec_.input_size || img.c != spec_.in_channels)
    throw std::invalid_argument("Model: input shape mismatch");

  Activations acts;
  acts.input = image_to_tensor(img);
  const Tensor* in = &acts.input;
  acts.conv_out.reserve(convs_.size());

  for (const auto& cl : convs_) {
    Tensor out(cl.out_c, cl.out_h, cl.out_w);
    const double* W = params_.data() + cl.w_off;
    const double* B = params_.data() + cl.b_off;
    for (int oc = 0; oc < cl.out_c; ++oc) {
      for (int oy = 0; oy < cl.out_h; ++oy) {
        const int iy0 = oy * cl.stride - cl.pad;
        for (int ox = 0; ox < cl.out_w; ++ox) {
          const int ix0 = ox * cl.stride - cl.pad;
          double acc = B[oc];
          for (int ic = 0; ic < cl.in_c; ++ic) {
            const double* Wrow = W + ((static_cast<std::size_t>(oc) * cl.in_c + ic) * cl.k) * cl.k;
            for (int ky = 0; ky < cl.k; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= cl.in_h) continue;
              const double* irow = in->d.data() + (static_cast<std::size_t>(ic) * cl.in_h + iy) * cl.in_w;
              const double* wrow = Wrow + static_cast<std::size_t>(ky) * cl.k;
              for (int kx = 0; kx < cl.k; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= cl.in_w) continue;
                acc += wrow[kx] * irow[ix];
              }
            }
          }
          out.at(oc, oy, ox) = acc > 0.0 ? acc : 0.0;  // ReLU
        }
      }
    }
    acts.conv_out.push_back(std::move(out));
    in = &acts.conv_out.back();
  }

  // Global average pool.
  const Tensor& last = acts.conv_out.back();
  const double inv_hw = 1.0 / (static_cast<double>(last.h) * last.w);
  acts.gap.assign(last.c, 0.0);
  for (int ch = 0; ch < last.c; ++ch) {
    double s = 0.0;
    const double* base = last.d.data() + static_cast<std::size_t>(ch) * last.h * last.w;
    for (int i = 0; i < last.h * last.w; ++i) s += base[i];
    acts.gap[ch] = s * inv_hw;
  }

  // Embedding projection (linear, no activation).
  const int ed = spec_.embedding_dim;
  const int last_c = last.c;
  acts.embedding.assign(ed, 0.0);
  for (int e = 0; e < ed; ++e) {
    double s = params_[embed_b_off_ + e];
    const double* w = params_.data() + embed_w_off_ + static_cast<std::size_t>(e) * last_c;
    for (int ch = 0; ch < last_c; ++ch) s += w[ch] * acts.gap[ch];
    acts.embedding[e] = s;
  }

  // Classifier head.
  const int nc = spec_.num_classes;
  acts.logits.assign(nc, 0.0);
  for (int k = 0; k < nc; ++k) {
    double s = params_[cls_b_off_ + k];
    const double* w = params_.data() + cls_w_off_ + static_cast<std::size_t>(k) * ed;
    for (int e = 0; e < ed; ++e) s += w[e] * acts.embedding[e];
    acts.logits[k] = s;
  }
  return acts;
}

void Model::backward(const Activations& acts, const std::vector<double>& d_embedding,
                     const std::vector<double>& d_logits, std::vector<double>& grad) const {
  if (grad.size() != total_params_) throw std::invalid_argument("Model::backward: grad size mismatch");
  const int ed = spec_.embedding_dim;
  const int nc = spec_.num_classes;
  const int last_c = convs_.back().out_c;

  // Classifier head.
  std::vector<double> demb(ed, 0.0);
  if (!d_embedding.empty()) {
    if (static_cast<int>(d_embedding.size()) != ed)
      throw std::invalid_argument("Model::backward: d_embedding size mismatch");
    demb = d_embedding;
  }
  if (!d_logits.empty()) {
    if (static_cast<int>(d_logits.size()) != nc)
      throw std::invalid_argument("Model::backward: d_logits size mismatch");
    for (int k = 0; k < nc; ++k) {
      const double dl = d_logits[k];
      grad[cls_b_off_ + k] += dl;
      const double* w = params_.data() + cls_w_off_ + static_cast<std::size_t>(k) * ed;
      double* gw = grad.data() + cls_w_off_ + static_cast<std::size_t>(k) * ed;
      for (int e = 0; e < ed; ++e) {
        gw[e] += dl * acts.embedding[e];
        demb[e] += dl * w[e];
      }
    }
  }

  // Embedding projection.
  std::vector<double> dgap(last_c, 0.0);
  for (int e = 0; e < ed; ++e) {
    const double de = demb[e];
    grad[embed_b_off_ + e] += de;
    const double* w = params_.data() + embed_w_off_ + static_cast<std::size_t>(e) * last_c;
    double* gw = grad.data() + embed_w_off_ + static_cast<std::size_t>(e) * last_c;
    for (int ch = 0; ch < last_c; ++ch) {
      gw[ch] += de * acts.gap[ch];
      dgap[ch] += de * w[ch];
    }
  }

  // GAP backward into the last conv map, then conv stack backward.
  const Tensor& last = acts.conv_out.back();
  Tensor dout(last.c, last.h, last.w);
  const double inv_hw = 1.0 / (static_cast<double>(last.h) * last.w);
  for (int ch = 0; ch < last.c; ++ch) {
    const double v = dgap[ch] * inv_hw;
    double* base = dout.d.data() + static_cast<std::size_t>(ch) * last.h * last.w;
    for (int i = 0; i < last.h * last.w; ++i) base[i] = v;
  }

  for (int li = static_cast<int>(convs_.size()) - 1; li >= 0; --li) {
    const auto& cl = convs_[li];
    const Tensor& out = acts.conv_out[li];
    const Tensor& in = (li == 0) ? acts.input : acts.conv_out[li - 1];
    const double* W = params_.data() + cl.w_off;
    double* gW = grad.data() + cl.w_off;
    double* gB = grad.data() + cl.b_off;
    Tensor din;
    const bool need_din = li > 0;
    if (need_din) din = Tensor(cl.in_c, cl.in_h, cl.in_w);

    for (int oc = 0; oc < cl.out_c; ++oc) {
      for (int oy = 0; oy < cl.out_h; ++oy) {
        const int iy0 = oy * cl.stride - cl.pad;
        for (int ox = 0; ox < cl.out_w; ++ox) {
          if (out.at(oc, oy, ox) <= 0.0) continue;  // ReLU mask
          const double g = dout.at(oc, oy, ox);
          if (g == 0.0) continue;
          const int ix0 = ox * cl.stride - cl.pad;
          gB[oc] += g;
          for (int ic = 0; ic < cl.in_c; ++ic) {
            const double* Wrow = W + ((static_cast<std::size_t>(oc) * cl.in_c + ic) * cl.k) * cl.k;
            double* gWrow = gW + ((static_cast<std::size_t>(oc) * cl.in_c + ic) * cl.k) * cl.k;
            for (int ky = 0; ky < cl.k; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= cl.in_h) continue;
              const double* irow = in.d.data() + (static_cast<std::size_t>(ic) * cl.in_h + iy) * cl.in_w;
              for (int kx = 0; kx < cl.k; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= cl.in_w) continue;
                gWrow[static_cast<std::size_t>(ky) * cl.k + kx] += g * irow[ix];
                if (need_din)
                  din.at(ic, iy, ix) += g * Wrow[static_cast<std::size_t>(ky) * cl.k + kx];
              }
            }
          }
        }
      }
    }
    if (need_din) dout = std::move(din);
  }
}

std::vector<Embedding> Model::extract_features(const std::vector<Image>& batch, int jobs) const {
  check_batch(batch);
  std::vector<Embedding> out(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    Activations acts = forward(batch[i]);
    out[i].vector = std::move(acts.embedding);
    out[i].source_role = frozen_ ? SourceRole::teacher : SourceRole::student;
  });
  return out;
}

std::vector<std::vector<double>> Model::classify(const std::vector<Image>& batch, int jobs) const {
  check_batch(batch);
  std::vector<std::vector<double>> out(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    Activations acts = forward(batch[i]);
    out[i] = std::move(acts.logits);
  });
  return out;
}

}  // namespace crossres
