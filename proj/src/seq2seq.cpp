#include "routeseq/seq2seq.hpp"

#include "routeseq/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace routeseq {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Lstm2Rnn: return "lstm2rnn";
    case Variant::Gru2Rnn: return "gru2rnn";
    case Variant::DualEncoder: return "dual";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "lstm2rnn") return Variant::Lstm2Rnn;
  if (s == "gru2rnn") return Variant::Gru2Rnn;
  if (s == "dual") return Variant::DualEncoder;
  throw DomainError("unknown variant `" + s + "` (expected lstm2rnn, gru2rnn or dual)");
}

namespace {

bool uses_lstm(Variant v) { return v != Variant::Gru2Rnn; }
bool uses_gru(Variant v) { return v != Variant::Lstm2Rnn; }

template <typename T>
std::span<double> flat(T& t) {
  return {t.data(), static_cast<std::size_t>(t.size())};
}

void require_node(const Seq2SeqModel& m, NodeId u) {
  if (u < 0 || u >= m.num_nodes()) throw DomainError("node id " + std::to_string(u) + " outside the model vocabulary");
}

struct EncoderTrace {
  Vector x_src, x_dst;
  GruCache gru_first, gru_second;
  LstmCache lstm_first, lstm_second;
  Vector context;
};

EncoderTrace run_encoders(const Seq2SeqModel& m, NodeId src, NodeId dst) {
  require_node(m, src);
  require_node(m, dst);
  EncoderTrace tr;
  tr.x_src = embed(m.embedding, src);
  tr.x_dst = embed(m.embedding, dst);
  tr.context.resize(m.context_dim());
  Eigen::Index offset = 0;
  if (m.gru) {
    const Eigen::Index d = m.gru->hidden();
    auto first = gru_step(tr.x_src, Vector::Zero(d), *m.gru);
    auto second = gru_step(tr.x_dst, first.h, *m.gru);
    tr.context.segment(offset, d) = second.h;
    offset += d;
    tr.gru_first = std::move(first.cache);
    tr.gru_second = std::move(second.cache);
  }
  if (m.lstm) {
    const Eigen::Index d = m.lstm->hidden();
    auto first = lstm_step(tr.x_src, Vector::Zero(d), Vector::Zero(d), *m.lstm);
    auto second = lstm_step(tr.x_dst, first.h, first.c, *m.lstm);
    tr.context.segment(offset, d) = second.h;
    offset += d;
    if (m.config.lstm_context_with_cell) {
      tr.context.segment(offset, d) = second.c;
      offset += d;
    }
    tr.lstm_first = std::move(first.cache);
    tr.lstm_second = std::move(second.cache);
  }
  return tr;
}

void backward_encoders(const Seq2SeqModel& m, const EncoderTrace& tr, NodeId src, NodeId dst,
                       const Vector& dcontext, Seq2SeqModel& grads) {
  Eigen::Index offset = 0;
  if (m.gru) {
    const Eigen::Index d = m.gru->hidden();
    const auto second = gru_backward(tr.gru_second, dcontext.segment(offset, d), *m.gru, *grads.gru);
    const auto first = gru_backward(tr.gru_first, second.dh_prev, *m.gru, *grads.gru);
    embed_backward(grads.embedding.table, dst, second.dx);
    embed_backward(grads.embedding.table, src, first.dx);
    offset += d;
  }
  if (m.lstm) {
    const Eigen::Index d = m.lstm->hidden();
    const Vector dh = dcontext.segment(offset, d);
    offset += d;
    Vector dc = Vector::Zero(d);
    if (m.config.lstm_context_with_cell) {
      dc = dcontext.segment(offset, d);
      offset += d;
    }
    const auto second = lstm_backward(tr.lstm_second, dh, dc, *m.lstm, *grads.lstm);
    const auto first = lstm_backward(tr.lstm_first, second.dh_prev, second.dc_prev, *m.lstm, *grads.lstm);
    embed_backward(grads.embedding.table, dst, second.dx);
    embed_backward(grads.embedding.table, src, first.dx);
  }
}

std::string shortest_repr(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

// ---------------------------------------------------------------------------

int context_dim_for(const ModelConfig& c) {
  const int lstm_part = c.lstm_context_with_cell ? 2 * c.hidden : c.hidden;
  switch (c.variant) {
    case Variant::Lstm2Rnn: return lstm_part;
    case Variant::Gru2Rnn: return c.hidden;
    case Variant::DualEncoder: return c.hidden + lstm_part;
  }
  return 0;
}

Seq2SeqModel Seq2SeqModel::create(const ModelConfig& config) {
  if (config.num_nodes < 2) throw DomainError("model needs at least 2 nodes");
  if (config.hidden < 1) throw DomainError("hidden size must be positive");
  if (config.embed_dim < 0) throw DomainError("embedding size must be non-negative");
  if (!(config.init_scale > 0.0)) throw DomainError("init scale must be positive");

  Seq2SeqModel m;
  m.config = config;
  if (m.config.embed_dim == 0) m.config.embed_dim = config.hidden;
  const int d_emb = m.config.embed_dim;
  m.embedding.table = Matrix::Zero(config.num_nodes + 1, d_emb);
  if (uses_gru(config.variant)) m.gru = GruParams::zeros(d_emb, config.hidden);
  if (uses_lstm(config.variant)) m.lstm = LstmParams::zeros(d_emb, config.hidden);
  m.decoder = RnnDecoderParams::zeros(d_emb, context_dim_for(config), config.num_nodes + 1);

  Rng rng(config.seed);
  m.visit([&](const std::string&, auto& t) { fill_uniform(flat(t), config.init_scale, rng); });
  return m;
}

Seq2SeqModel Seq2SeqModel::zeros_like() const {
  Seq2SeqModel z = *this;
  z.set_zero();
  return z;
}

void Seq2SeqModel::set_zero() {
  visit([](const std::string&, auto& t) { t.setZero(); });
}

std::size_t Seq2SeqModel::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

ContextVector encode(const Seq2SeqModel& m, NodeId src, NodeId dst) {
  return {run_encoders(m, src, dst).context};
}

DecoderActivation decoder_activation(const LossOptions& opts) {
  DecoderActivation act;
  act.logit_scale = logsoftmax_kappa(opts.sigma);
  if (opts.diffuse_decoder_tanh) act.tanh_scale = tanh_slope(opts.sigma);
  return act;
}

double step_loss(const Seq2SeqModel& m, std::span<const NodeId> target, const LossOptions& opts,
                 Seq2SeqModel* grads) {
  if (target.size() < 2) throw DomainError("step_loss: target route needs at least 2 nodes");
  for (NodeId u : target) require_node(m, u);
  const NodeId src = target.front();
  const NodeId dst = target.back();
  const auto steps = static_cast<Eigen::Index>(target.size() - 1);

  const auto enc = run_encoders(m, src, dst);
  Eigen::MatrixXd inputs(m.embed_dim(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) inputs.col(t) = m.embedding.table.row(target[t]).transpose();

  const auto act = decoder_activation(opts);
  const auto trace = rnn_forward_sequence(m.decoder, inputs, enc.context, act);
  double nll = 0.0;
  for (Eigen::Index t = 0; t < steps; ++t) nll -= trace.logprob(target[t + 1], t);
  const double inv_steps = 1.0 / static_cast<double>(steps);
  nll *= inv_steps;

  if (grads != nullptr) {
    // d(nll)/dz = (softmax - kappa * onehot) / L
    Eigen::MatrixXd dlogits = trace.softmax * inv_steps;
    for (Eigen::Index t = 0; t < steps; ++t) dlogits(target[t + 1], t) -= act.logit_scale * inv_steps;
    const auto back = rnn_backward_sequence(trace, dlogits, m.decoder, act, grads->decoder);
    for (Eigen::Index t = 0; t < steps; ++t) {
      grads->embedding.table.row(target[t]) += back.dinputs.col(t).transpose();
    }
    backward_encoders(m, enc, src, dst, back.dh0, *grads);
  }
  return nll;
}

// ---------------------------------------------------------------------------

std::vector<EpochLoss> train(Seq2SeqModel& m, std::span<const RoutePath> routes, const TrainConfig& cfg) {
  if (routes.empty()) throw DomainError("train: empty training split");
  if (!(cfg.grad_clip_norm > 0.0)) throw DomainError("train: clip norm must be positive");
  if (!(cfg.adam.learning_rate > 0.0)) throw DomainError("train: learning rate must be positive");

  std::vector<DiffusionStage> stages;
  if (cfg.schedule) {
    stages = cfg.schedule->stages();
  } else {
    if (cfg.epochs < 1) throw DomainError("train: epochs must be >= 1");
    stages.push_back({0.0, cfg.epochs});
  }

  Seq2SeqModel grads = m.zeros_like();
  std::vector<ParamSlot> slots;
  {
    std::vector<std::pair<std::string, std::span<double>>> values, derivs;
    m.visit([&](const std::string& name, auto& t) { values.emplace_back(name, flat(t)); });
    grads.visit([&](const std::string& name, auto& t) { derivs.emplace_back(name, flat(t)); });
    for (std::size_t k = 0; k < values.size(); ++k) {
      slots.push_back({values[k].first, values[k].second, derivs[k].second});
    }
  }

  AdamState adam;
  adam.config = cfg.adam;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(routes.size());
  std::vector<EpochLoss> curve;
  int epoch = 0;

  for (const auto& stage : stages) {
    const LossOptions opts{stage.sigma, cfg.diffuse_decoder_tanh};
    for (int e = 0; e < stage.epochs; ++e) {
      ++epoch;
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(std::span<std::size_t>(order), rng);
      double total = 0.0;
      for (std::size_t k = 0; k < order.size(); ++k) {
        grads.set_zero();
        const double loss = step_loss(m, routes[order[k]].nodes, opts, &grads);
        if (!std::isfinite(loss)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", route " +
                               std::to_string(order[k]));
        }
        total += loss;

        double sq = 0.0;
        for (const auto& s : slots) {
          for (double g : s.grad) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip_norm) {
          const double scale = cfg.grad_clip_norm / norm;
          grads.visit([&](const std::string&, auto& t) { t *= scale; });
        }
        adam_step(slots, adam);
      }
      curve.push_back({epoch, stage.sigma, total / static_cast<double>(routes.size())});
      if (cfg.on_epoch) cfg.on_epoch(curve.back());
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------

std::vector<NodeId> decode_greedy(const Seq2SeqModel& m, NodeId src, NodeId dst, std::size_t max_len) {
  if (max_len < 2) throw DomainError("decode_greedy: max_len must be >= 2");
  require_node(m, src);
  require_node(m, dst);
  std::vector<NodeId> out{src};
  if (src == dst) return out;

  Vector h = encode(m, src, dst).w;
  NodeId prev = src;
  while (out.size() < max_len) {
    const auto step = rnn_step(embed(m.embedding, prev), h, m.decoder);
    NodeId best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId k = 0; k < m.num_nodes(); ++k) {
      if (k == prev) continue;
      if (step.y[k] > best_score) {
        best_score = step.y[k];
        best = k;
      }
    }
    out.push_back(best);
    if (best == dst) break;
    h = step.h;
    prev = best;
  }
  return out;
}

std::vector<std::vector<NodeId>> splice_candidates(std::span<const NodeId> forward,
                                                   std::span<const NodeId> backward) {
  std::vector<NodeId> reversed(backward.rbegin(), backward.rend());
  std::vector<std::vector<NodeId>> out;
  out.emplace_back(forward.begin(), forward.end());
  out.push_back(reversed);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    for (std::size_t j = 0; j < reversed.size(); ++j) {
      if (forward[i] != reversed[j]) continue;
      std::vector<NodeId> spliced(forward.begin(), forward.begin() + static_cast<std::ptrdiff_t>(i));
      spliced.insert(spliced.end(), reversed.begin() + static_cast<std::ptrdiff_t>(j), reversed.end());
      out.push_back(std::move(spliced));
    }
  }
  return out;
}

std::optional<RoutePath> bidirectional_predict(const Seq2SeqModel& m, const Graph& g, NodeId src, NodeId dst,
                                               std::size_t max_len) {
  const auto forward = decode_greedy(m, src, dst, max_len);
  const auto backward = decode_greedy(m, dst, src, max_len);
  std::optional<RoutePath> best;
  for (auto& candidate : splice_candidates(forward, backward)) {
    if (candidate.empty() || candidate.front() != src || candidate.back() != dst) continue;
    const auto cost = path_cost(g, candidate);
    if (!cost) continue;
    if (!best || *cost < best->cost) best = RoutePath{std::move(candidate), *cost};
  }
  return best;
}

std::size_t default_max_len(std::span<const RoutePath> train_routes) {
  const double cap = std::ceil(4.0 * mean_hops(train_routes));
  return std::max<std::size_t>(2, static_cast<std::size_t>(cap));
}

// ---------------------------------------------------------------------------

TensorContainer to_container(const Seq2SeqModel& m, const std::string& extra) {
  std::ostringstream meta;
  meta << "format=routeseq-seq2seq-1\n"
       << "variant=" << to_string(m.config.variant) << '\n'
       << "num_nodes=" << m.config.num_nodes << '\n'
       << "vocab=" << m.vocab() << '\n'
       << "hidden=" << m.config.hidden << '\n'
       << "embed=" << m.config.embed_dim << '\n'
       << "context=" << m.context_dim() << '\n'
       << "lstm_context_with_cell=" << (m.config.lstm_context_with_cell ? 1 : 0) << '\n'
       << "init_scale=" << shortest_repr(m.config.init_scale) << '\n'
       << "seed=" << m.config.seed << '\n';
  meta << extra;
  if (!extra.empty() && extra.back() != '\n') meta << '\n';

  TensorContainer c;
  c.metadata = meta.str();
  m.visit([&](const std::string& name, const auto& t) {
    NamedTensor nt;
    nt.name = name;
    nt.rows = static_cast<std::uint64_t>(t.rows());
    nt.cols = static_cast<std::uint64_t>(t.cols());
    nt.data.assign(t.data(), t.data() + t.size());
    c.tensors.push_back(std::move(nt));
  });
  return c;
}

Seq2SeqModel from_container(const TensorContainer& c) {
  std::map<std::string, std::string> meta;
  std::istringstream lines(c.metadata);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw StructuralError("checkpoint metadata lacks `" + key + "`");
    return it->second;
  };
  if (field("format") != "routeseq-seq2seq-1") throw StructuralError("unsupported checkpoint format");

  ModelConfig cfg;
  try {
    cfg.variant = parse_variant(field("variant"));
    cfg.num_nodes = std::stoi(field("num_nodes"));
    cfg.hidden = std::stoi(field("hidden"));
    cfg.embed_dim = std::stoi(field("embed"));
    cfg.lstm_context_with_cell = field("lstm_context_with_cell") == "1";
    cfg.init_scale = std::stod(field("init_scale"));
    cfg.seed = std::stoull(field("seed"));
  } catch (const StructuralError&) {
    throw;
  } catch (const std::exception& e) {
    throw StructuralError(std::string("checkpoint metadata: ") + e.what());
  }

  Seq2SeqModel m = Seq2SeqModel::create(cfg);
  if (std::to_string(m.vocab()) != field("vocab") || std::to_string(m.context_dim()) != field("context")) {
    throw StructuralError("checkpoint metadata is inconsistent with its sizes");
  }
  std::size_t matched = 0;
  m.visit([&](const std::string& name, auto& t) {
    const auto* nt = c.find(name);
    if (nt == nullptr) throw StructuralError("checkpoint lacks tensor " + name);
    if (nt->rows != static_cast<std::uint64_t>(t.rows()) || nt->cols != static_cast<std::uint64_t>(t.cols())) {
      throw StructuralError("checkpoint tensor " + name + " has the wrong shape");
    }
    std::copy(nt->data.begin(), nt->data.end(), t.data());
    ++matched;
  });
  if (matched != c.tensors.size()) throw StructuralError("checkpoint holds unexpected tensors");
  return m;
}

void save_model(const std::string& path, const Seq2SeqModel& m, const std::string& extra) {
  save_container(path, to_container(m, extra));
}

Seq2SeqModel load_model(const std::string& path) { return from_container(load_container(path)); }

}  // namespace routeseq
