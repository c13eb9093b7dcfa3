#pragma once

#include "routeseq/ndmath.hpp"

#include <concepts>
#include <string>
#include <type_traits>

namespace routeseq {

double logistic(double x);

// Pre-activation of one gate: w_in x + w_rec h + bias.
struct AffineGate {
  Matrix w_in;   // (hidden, input)
  Matrix w_rec;  // (hidden, hidden)
  Vector bias;   // (hidden)

  static AffineGate zeros(Eigen::Index input, Eigen::Index hidden);
  Vector pre(const Vector& x, const Vector& h) const;
  Eigen::Index hidden() const { return w_rec.rows(); }
  Eigen::Index input() const { return w_in.cols(); }
};

// Token embedding: one row per token id.
struct Embedding {
  Matrix table;  // (vocab, dim)

  Eigen::Index vocab() const { return table.rows(); }
  Eigen::Index dim() const { return table.cols(); }
};

Vector embed(const Embedding& e, int token);
// Adds `upstream` to row `token` of the gradient table.
void embed_backward(Matrix& table_grad, int token, const Vector& upstream);

// ---------------------------------------------------------------------------
// LSTM, logistic gates i, f, o and tanh candidate j:
//   c' = f * c + i * j,   h' = o * tanh(c')
// ---------------------------------------------------------------------------

struct LstmParams {
  AffineGate input, candidate, forget, output;

  static LstmParams zeros(Eigen::Index input_dim, Eigen::Index hidden);
  Eigen::Index hidden() const { return input.hidden(); }
};

struct LstmCache {
  Vector x, h_prev, c_prev;
  Vector i, j, f, o;
  Vector c, tanh_c;
};

struct LstmStep {
  Vector h, c;
  LstmCache cache;
};

struct LstmInputGrads {
  Vector dx, dh_prev, dc_prev;
};

LstmStep lstm_step(const Vector& x, const Vector& h, const Vector& c, const LstmParams& p);
// Accumulates parameter gradients into `grads` and returns input/state grads.
LstmInputGrads lstm_backward(const LstmCache& cache, const Vector& dh, const Vector& dc,
                             const LstmParams& p, LstmParams& grads);

// ---------------------------------------------------------------------------
// GRU, logistic gates z, r and tanh candidate:
//   h~ = tanh(A_h x + B_h (r * h) + b_h),   h' = z * h + (1 - z) * h~
// ---------------------------------------------------------------------------

struct GruParams {
  AffineGate update, reset, candidate;

  static GruParams zeros(Eigen::Index input_dim, Eigen::Index hidden);
  Eigen::Index hidden() const { return update.hidden(); }
};

struct GruCache {
  Vector x, h_prev;
  Vector z, r, reset_h, candidate;
};

struct GruStep {
  Vector h;
  GruCache cache;
};

struct GruInputGrads {
  Vector dx, dh_prev;
};

GruStep gru_step(const Vector& x, const Vector& h, const GruParams& p);
GruInputGrads gru_backward(const GruCache& cache, const Vector& dh, const GruParams& p, GruParams& grads);

// ---------------------------------------------------------------------------
// Vanilla RNN decoder with a log-softmax head:
//   h' = tanh(s * (A x + B h + b)),   y = kappa * z - logsumexp(z),   z = C h' + c
// s = kappa = 1 is the plain network; other values come from the diffused
// (smoothed) activations used during homotopy training.
// ---------------------------------------------------------------------------

struct RnnDecoderParams {
  AffineGate recurrent;
  Matrix w_out;  // (vocab, hidden)
  Vector b_out;  // (vocab)

  static RnnDecoderParams zeros(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index vocab);
  Eigen::Index hidden() const { return recurrent.hidden(); }
  Eigen::Index vocab() const { return w_out.rows(); }
};

struct DecoderActivation {
  double tanh_scale = 1.0;
  double logit_scale = 1.0;  // kappa
};

struct RnnCache {
  Vector x, h_prev, h;
  Vector softmax;  // softmax of the logits z
};

struct RnnStep {
  Vector h;
  Vector y;  // log-probabilities (exact log-softmax when kappa = 1)
  RnnCache cache;
};

struct RnnInputGrads {
  Vector dx, dh_prev;
};

RnnStep rnn_step(const Vector& x, const Vector& h, const RnnDecoderParams& p,
                 const DecoderActivation& act = {});
// dy: gradient w.r.t. y; dh_next: gradient flowing into h' from later steps.
RnnInputGrads rnn_backward(const RnnCache& cache, const Vector& dy, const Vector& dh_next,
                           const RnnDecoderParams& p, const DecoderActivation& act, RnnDecoderParams& grads);

// Stable log(sum(exp(z))).
double logsumexp(const Vector& z);

// Whole-sequence decoder pass with the inputs known up front (teacher
// forcing). Column t of `inputs` feeds step t; column 0 of `hidden` is the
// initial state.
struct RnnSequenceTrace {
  Eigen::MatrixXd inputs;   // (input_dim, L)
  Eigen::MatrixXd hidden;   // (hidden, L + 1)
  Eigen::MatrixXd softmax;  // (vocab, L)
  Eigen::MatrixXd logprob;  // (vocab, L)
};

RnnSequenceTrace rnn_forward_sequence(const RnnDecoderParams& p, const Eigen::MatrixXd& inputs,
                                      const Vector& h0, const DecoderActivation& act = {});

struct RnnSequenceGrads {
  Eigen::MatrixXd dinputs;  // (input_dim, L)
  Vector dh0;
};

// `dlogits` is the loss gradient w.r.t. the logits z, one column per step.
RnnSequenceGrads rnn_backward_sequence(const RnnSequenceTrace& trace, const Eigen::MatrixXd& dlogits,
                                       const RnnDecoderParams& p, const DecoderActivation& act,
                                       RnnDecoderParams& grads);

// ---------------------------------------------------------------------------
// Named tensor traversal for checkpoints, optimizers and gradient checks.
// ---------------------------------------------------------------------------

template <typename Gate, typename F>
void visit_gate(Gate& g, const std::string& prefix, const std::string& suffix, F&& f) {
  f(prefix + "A_" + suffix, g.w_in);
  f(prefix + "B_" + suffix, g.w_rec);
  f(prefix + "b_" + suffix, g.bias);
}

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, LstmParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  visit_gate(p.input, prefix, "i", f);
  visit_gate(p.candidate, prefix, "j", f);
  visit_gate(p.forget, prefix, "f", f);
  visit_gate(p.output, prefix, "o", f);
}

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, GruParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  visit_gate(p.update, prefix, "z", f);
  visit_gate(p.reset, prefix, "r", f);
  visit_gate(p.candidate, prefix, "h", f);
}

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, RnnDecoderParams>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  f(prefix + "A", p.recurrent.w_in);
  f(prefix + "B", p.recurrent.w_rec);
  f(prefix + "b", p.recurrent.bias);
  f(prefix + "C", p.w_out);
  f(prefix + "c", p.b_out);
}

template <typename P, typename F>
  requires std::same_as<std::remove_const_t<P>, Embedding>
void visit_tensors(P& p, const std::string& prefix, F&& f) {
  f(prefix + "E", p.table);
}

}  // namespace routeseq
