#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crossres/image.hpp"
#include "crossres/rng.hpp"

namespace crossres {

/// Fixed architectural parameters of a backbone instance.
struct ModelSpec {
  int input_size = kNetInputSide;
  int in_channels = 1;
  std::vector<int> conv_channels = {8, 16, 32, 64};
  int embedding_dim = 128;
  int num_classes = 2;
  std::string architecture_id = "tinyconv-v1";

  bool operator==(const ModelSpec&) const = default;
};

enum class SourceRole { teacher, student };

/// Penultimate-layer feature vector.
struct Embedding {
  std::vector<double> vector;
  SourceRole source_role = SourceRole::student;
  std::optional<int> source_resolution;
};

/// Channel-major feature map (index (ch*h + y)*w + x).
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> d;

  Tensor() = default;
  Tensor(int c, int h, int w) : c(c), h(h), w(w), d(static_cast<std::size_t>(c) * h * w, 0.0) {}
  double& at(int ch, int y, int x) { return d[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return d[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
};

/// Per-image forward cache reused by the backward pass.
struct Activations {
  Tensor input;
  std::vector<Tensor> conv_out;  // post-ReLU, one per conv layer
  std::vector<double> gap;
  std::vector<double> embedding;
  std::vector<double> logits;
};

/// Strided convolutional stack -> global average pool -> linear embedding
/// projection (the "penultimate layer") -> linear classifier. Parameters
/// live in one flat vector; gradients use the same layout.
///
/// Layer 0 is kernel 7 / stride 4 / pad 3, the rest kernel 3 / stride 2 /
/// pad 1, ReLU after every conv. The embedding projection is linear (no
/// activation) and the classifier head is zero-initialized.
class Model {
 public:
  Model() = default;
  static Model init(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  bool frozen() const { return frozen_; }
  Model freeze() const;

  std::vector<double>& params();
  const std::vector<double>& params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }
  std::uint64_t param_hash() const;

  /// Inference: embeddings for a batch. Throws std::invalid_argument on a
  /// spatial-shape mismatch. `jobs` threads, bit-identical for any jobs.
  std::vector<Embedding> extract_features(const std::vector<Image>& batch, int jobs = 1) const;

  /// Inference: raw logit rows for a batch.
  std::vector<std::vector<double>> classify(const std::vector<Image>& batch, int jobs = 1) const;

  /// Training-mode forward for one image, caching activations.
  Activations forward(const Image& img) const;

  /// Accumulate d(loss)/d(params) into `grad` given upstream gradients at
  /// the embedding and at the logits.
  void backward(const Activations& acts, const std::vector<double>& d_embedding,
                const std::vector<double>& d_logits, std::vector<double>& grad) const;

  /// Internal layout handles (used by checkpointing and tests).
  struct ConvLayer {
    int in_c, out_c, k, stride, pad;
    int in_h, in_w, out_h, out_w;
    std::size_t w_off, b_off;
  };
  const std::vector<ConvLayer>& conv_layers() const { return convs_; }

  static Model from_parts(const ModelSpec& spec, std::vector<double> params, bool frozen);

 private:
  void build_layout();
  void check_batch(const std::vector<Image>& batch) const;

  ModelSpec spec_;
  std::vector<double> params_;
  bool frozen_ = false;

  std::vector<ConvLayer> convs_;
  std::size_t embed_w_off_ = 0, embed_b_off_ = 0;
  std::size_t cls_w_off_ = 0, cls_b_off_ = 0;
  std::size_t total_params_ = 0;
};

/// FNV-1a over the raw bytes of a double vector.
std::uint64_t hash_doubles(const std::vector<double>& v);

/// Run `fn(i)` for i in [0, n) across `jobs` threads. Results must be
/// written to per-index slots; the caller reduces in index order.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace crossres
