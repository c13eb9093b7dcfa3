#pragma once

// Small recurrent-cell fixtures with hand-written BPTT drivers, shared by the
// unit tests and the acceptance run.

#include "support.hpp"

#include "routeseq/cells.hpp"

#include <map>
#include <string>
#include <vector>

namespace routeseq::testing {

inline constexpr int kIn = 5;
inline constexpr int kHidden = 8;
inline constexpr int kVocab = 7;
inline constexpr int kSteps = 4;

template <typename P>
void randomize(P& p, double scale, Rng& rng) {
  visit_tensors(p, "", [&](const std::string&, auto& t) { fill_uniform({t.data(), static_cast<std::size_t>(t.size())}, scale, rng); });
}

template <typename P>
std::map<std::string, std::vector<double>> flat_grads(P& grads) {
  std::map<std::string, std::vector<double>> out;
  visit_tensors(grads, "", [&](const std::string& name, auto& t) { out[name] = flatten(t); });
  return out;
}

// A random linear readout turns the state sequence into a scalar loss.
struct Readout {
  std::vector<Vector> wh;
  Vector wc;
  explicit Readout(Rng& rng) {
    for (int t = 0; t < kSteps; ++t) wh.push_back(random_vector(kHidden, 1.0, rng));
    wc = random_vector(kHidden, 1.0, rng);
  }
};

struct SeqInputs {
  std::vector<Vector> xs;
  Vector h0, c0;
  explicit SeqInputs(Rng& rng) {
    for (int t = 0; t < kSteps; ++t) xs.push_back(random_vector(kIn, 1.0, rng));
    h0 = random_vector(kHidden, 0.5, rng);
    c0 = random_vector(kHidden, 0.5, rng);
  }
  template <typename F>
  void visit(F&& f) {
    for (int t = 0; t < kSteps; ++t) f("x" + std::to_string(t), xs[t]);
    f("h0", h0);
    f("c0", c0);
  }
};

inline double lstm_loss(const LstmParams& p, const SeqInputs& in, const Readout& r) {
  Vector h = in.h0, c = in.c0;
  double loss = 0.0;
  for (int t = 0; t < kSteps; ++t) {
    auto s = lstm_step(in.xs[t], h, c, p);
    h = s.h;
    c = s.c;
    loss += r.wh[t].dot(h);
  }
  return loss + r.wc.dot(c);
}

// Returns input grads keyed like SeqInputs::visit.
inline std::map<std::string, std::vector<double>> lstm_grads(const LstmParams& p, const SeqInputs& in, const Readout& r,
                                                      LstmParams& grads) {
  std::vector<LstmCache> caches;
  Vector h = in.h0, c = in.c0;
  for (int t = 0; t < kSteps; ++t) {
    auto s = lstm_step(in.xs[t], h, c, p);
    h = s.h;
    c = s.c;
    caches.push_back(s.cache);
  }
  std::map<std::string, std::vector<double>> out;
  Vector dh = Vector::Zero(kHidden), dc = r.wc;
  for (int t = kSteps - 1; t >= 0; --t) {
    dh += r.wh[t];
    const auto g = lstm_backward(caches[t], dh, dc, p, grads);
    out["x" + std::to_string(t)] = flatten(g.dx);
    dh = g.dh_prev;
    dc = g.dc_prev;
  }
  out["h0"] = flatten(dh);
  out["c0"] = flatten(dc);
  return out;
}

inline double gru_loss(const GruParams& p, const SeqInputs& in, const Readout& r) {
  Vector h = in.h0;
  double loss = 0.0;
  for (int t = 0; t < kSteps; ++t) {
    h = gru_step(in.xs[t], h, p).h;
    loss += r.wh[t].dot(h);
  }
  return loss;
}

inline std::map<std::string, std::vector<double>> gru_grads(const GruParams& p, const SeqInputs& in, const Readout& r,
                                                     GruParams& grads) {
  std::vector<GruCache> caches;
  Vector h = in.h0;
  for (int t = 0; t < kSteps; ++t) {
    auto s = gru_step(in.xs[t], h, p);
    h = s.h;
    caches.push_back(s.cache);
  }
  std::map<std::string, std::vector<double>> out;
  Vector dh = Vector::Zero(kHidden);
  for (int t = kSteps - 1; t >= 0; --t) {
    dh += r.wh[t];
    const auto g = gru_backward(caches[t], dh, p, grads);
    out["x" + std::to_string(t)] = flatten(g.dx);
    dh = g.dh_prev;
  }
  out["h0"] = flatten(dh);
  out["c0"] = std::vector<double>(kHidden, 0.0);
  return out;
}

inline const std::vector<int> kTargets{3, 0, 6, 3};

inline double rnn_nll(const RnnDecoderParams& p, const SeqInputs& in, const DecoderActivation& act) {
  Vector h = in.h0;
  double loss = 0.0;
  for (int t = 0; t < kSteps; ++t) {
    auto s = rnn_step(in.xs[t], h, p, act);
    h = s.h;
    loss -= s.y[kTargets[t]];
  }
  return loss;
}

inline std::map<std::string, std::vector<double>> rnn_grads(const RnnDecoderParams& p, const SeqInputs& in,
                                                     const DecoderActivation& act, RnnDecoderParams& grads) {
  std::vector<RnnCache> caches;
  Vector h = in.h0;
  for (int t = 0; t < kSteps; ++t) {
    auto s = rnn_step(in.xs[t], h, p, act);
    h = s.h;
    caches.push_back(s.cache);
  }
  std::map<std::string, std::vector<double>> out;
  Vector dh = Vector::Zero(kHidden);
  for (int t = kSteps - 1; t >= 0; --t) {
    Vector dy = Vector::Zero(kVocab);
    dy[kTargets[t]] = -1.0;
    const auto g = rnn_backward(caches[t], dy, dh, p, act, grads);
    out["x" + std::to_string(t)] = flatten(g.dx);
    dh = g.dh_prev;
  }
  out["h0"] = flatten(dh);
  out["c0"] = std::vector<double>(kHidden, 0.0);
  return out;
}

}  // namespace routeseq::testing
