#pragma once

#include "routeseq/astar.hpp"
#include "routeseq/cells.hpp"
#include "routeseq/diffusion.hpp"
#include "routeseq/graph.hpp"
#include "routeseq/ndmath.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace routeseq {

enum class Variant { Lstm2Rnn, Gru2Rnn, DualEncoder };

std::string to_string(Variant v);
// Accepts `lstm2rnn`, `gru2rnn`, `dual`.
Variant parse_variant(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::DualEncoder;
  int num_nodes = 0;
  int hidden = 256;     // per-encoder hidden size
  int embed_dim = 0;    // 0 = same as hidden
  // Ablation: the LSTM contributes [h; c] instead of h alone.
  bool lstm_context_with_cell = false;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

// Embedding + encoder(s) + RNN decoder. The vocabulary is every graph node
// plus one reserved GO token (id num_nodes) that decoding never emits.
struct Seq2SeqModel {
  ModelConfig config;
  Embedding embedding;
  std::optional<LstmParams> lstm;
  std::optional<GruParams> gru;
  RnnDecoderParams decoder;

  // Parameters drawn uniformly from [-init_scale, init_scale] with config.seed.
  static Seq2SeqModel create(const ModelConfig& config);
  // Same structure, every tensor zero. Used as a gradient accumulator.
  Seq2SeqModel zeros_like() const;

  int num_nodes() const { return config.num_nodes; }
  int vocab() const { return config.num_nodes + 1; }
  int go_token() const { return config.num_nodes; }
  int embed_dim() const { return static_cast<int>(embedding.dim()); }
  int context_dim() const { return static_cast<int>(decoder.hidden()); }
  std::size_t parameter_count() const;

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void set_zero();

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    visit_tensors(self.embedding, "emb.", f);
    if (self.gru) visit_tensors(*self.gru, "enc.gru.", f);
    if (self.lstm) visit_tensors(*self.lstm, "enc.lstm.", f);
    visit_tensors(self.decoder, "dec.rnn.", f);
  }
};

// Per-encoder and stacked context dimensions implied by a config.
int context_dim_for(const ModelConfig& config);

struct ContextVector {
  Vector w;
};

// Each encoder runs two steps from a zero state (embed(src), then
// embed(dst)). The dual model stacks [gru_h ; lstm_h].
ContextVector encode(const Seq2SeqModel& m, NodeId src, NodeId dst);

// Loss-side smoothing. sigma = 0 is the plain log-softmax NLL.
struct LossOptions {
  double sigma = 0.0;
  bool diffuse_decoder_tanh = false;
};

DecoderActivation decoder_activation(const LossOptions& opts);

// Teacher-forced mean NLL over the route's hops. When `grads` is given,
// gradients of that loss are accumulated into it (BPTT through decoder,
// context, encoders and embedding).
double step_loss(const Seq2SeqModel& m, std::span<const NodeId> target, const LossOptions& opts,
                 Seq2SeqModel* grads = nullptr);

struct EpochLoss {
  int epoch;  // 1-based
  double sigma;
  double mean_nll;
};

struct TrainConfig {
  int epochs = 400;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double grad_clip_norm = 5.0;
  std::optional<DiffusionSchedule> schedule;  // overrides `epochs` when set
  bool diffuse_decoder_tanh = false;
  std::function<void(const EpochLoss&)> on_epoch;
};

// Per-epoch seeded shuffle, then one Adam step per route (batch size 1) after
// clipping the global gradient norm. Throws NumericalError naming the epoch
// and route when a loss turns non-finite.
std::vector<EpochLoss> train(Seq2SeqModel& m, std::span<const RoutePath> routes, const TrainConfig& cfg);

// Greedy decode from the context of (src, dst), feeding back each emission.
// The argmax skips the previous emission and the GO token. Stops on dst or
// when the output reaches max_len nodes. Returns [src, emissions...].
std::vector<NodeId> decode_greedy(const Seq2SeqModel& m, NodeId src, NodeId dst, std::size_t max_len);

// Candidate routes from a forward decode and a backward (dst -> src) decode:
// the forward list, the reversed backward list, and every splice
// forward[..i] + reversed_backward[j..] where forward[i] == reversed_backward[j].
std::vector<std::vector<NodeId>> splice_candidates(std::span<const NodeId> forward,
                                                   std::span<const NodeId> backward);

// Cheapest candidate that is a valid src -> dst path in g, if any.
std::optional<RoutePath> bidirectional_predict(const Seq2SeqModel& m, const Graph& g, NodeId src, NodeId dst,
                                               std::size_t max_len);

// Default decode cap: 4 x mean training hop count, at least 2.
std::size_t default_max_len(std::span<const RoutePath> train_routes);

// Checkpoint = tensor container whose metadata records variant, sizes, seed
// and any caller-supplied `extra` key=value lines.
void save_model(const std::string& path, const Seq2SeqModel& m, const std::string& extra = "");
Seq2SeqModel load_model(const std::string& path);
TensorContainer to_container(const Seq2SeqModel& m, const std::string& extra = "");
Seq2SeqModel from_container(const TensorContainer& c);

}  // namespace routeseq
