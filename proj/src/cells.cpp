#include "routeseq/cells.hpp"

#include "routeseq/errors.hpp"

#include <cmath>

namespace routeseq {

namespace {

void expect_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DomainError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                      std::to_string(got));
  }
}

Vector logistic_of(const Vector& x) { return x.unaryExpr([](double v) { return routeseq::logistic(v); }); }

Vector tanh_of(const Vector& x) { return x.array().tanh().matrix(); }

// Accumulates the parameter gradient of a gate given d(pre-activation).
void accumulate_gate(AffineGate& grads, const Vector& dpre, const Vector& x, const Vector& h) {
  grads.w_in.noalias() += dpre * x.transpose();
  grads.w_rec.noalias() += dpre * h.transpose();
  grads.bias += dpre;
}

}  // namespace

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AffineGate AffineGate::zeros(Eigen::Index input, Eigen::Index hidden) {
  return {Matrix::Zero(hidden, input), Matrix::Zero(hidden, hidden), Vector::Zero(hidden)};
}

Vector AffineGate::pre(const Vector& x, const Vector& h) const {
  expect_size(x.size(), input(), "gate input");
  expect_size(h.size(), hidden(), "gate state");
  Vector out = bias;
  out.noalias() += w_in * x;
  out.noalias() += w_rec * h;
  return out;
}

Vector embed(const Embedding& e, int token) {
  if (token < 0 || token >= e.vocab()) throw DomainError("embed: token id " + std::to_string(token) + " out of range");
  return e.table.row(token).transpose();
}

void embed_backward(Matrix& table_grad, int token, const Vector& upstream) {
  if (token < 0 || token >= table_grad.rows()) {
    throw DomainError("embed_backward: token id " + std::to_string(token) + " out of range");
  }
  expect_size(upstream.size(), table_grad.cols(), "embed_backward");
  table_grad.row(token) += upstream.transpose();
}

// ---------------------------------------------------------------------------

LstmParams LstmParams::zeros(Eigen::Index input_dim, Eigen::Index hidden) {
  const auto g = AffineGate::zeros(input_dim, hidden);
  return {g, g, g, g};
}

LstmStep lstm_step(const Vector& x, const Vector& h, const Vector& c, const LstmParams& p) {
  expect_size(c.size(), p.hidden(), "lstm cell state");
  LstmStep s;
  auto& k = s.cache;
  k.x = x;
  k.h_prev = h;
  k.c_prev = c;
  k.i = logistic_of(p.input.pre(x, h));
  k.j = tanh_of(p.candidate.pre(x, h));
  k.f = logistic_of(p.forget.pre(x, h));
  k.o = logistic_of(p.output.pre(x, h));
  k.c = k.f.cwiseProduct(c) + k.i.cwiseProduct(k.j);
  k.tanh_c = tanh_of(k.c);
  s.c = k.c;
  s.h = k.o.cwiseProduct(k.tanh_c);
  return s;
}

LstmInputGrads lstm_backward(const LstmCache& k, const Vector& dh, const Vector& dc, const LstmParams& p,
                             LstmParams& grads) {
  expect_size(dh.size(), p.hidden(), "lstm_backward dh");
  expect_size(dc.size(), p.hidden(), "lstm_backward dc");
  expect_size(k.c.size(), p.hidden(), "lstm_backward cache");

  const auto ones = Vector::Ones(p.hidden()).array();
  const Vector dc_total =
      (dc.array() + dh.array() * k.o.array() * (ones - k.tanh_c.array().square())).matrix();
  const Vector d_i = (dc_total.array() * k.j.array() * k.i.array() * (ones - k.i.array())).matrix();
  const Vector d_j = (dc_total.array() * k.i.array() * (ones - k.j.array().square())).matrix();
  const Vector d_f = (dc_total.array() * k.c_prev.array() * k.f.array() * (ones - k.f.array())).matrix();
  const Vector d_o = (dh.array() * k.tanh_c.array() * k.o.array() * (ones - k.o.array())).matrix();

  accumulate_gate(grads.input, d_i, k.x, k.h_prev);
  accumulate_gate(grads.candidate, d_j, k.x, k.h_prev);
  accumulate_gate(grads.forget, d_f, k.x, k.h_prev);
  accumulate_gate(grads.output, d_o, k.x, k.h_prev);

  LstmInputGrads out;
  out.dx = p.input.w_in.transpose() * d_i + p.candidate.w_in.transpose() * d_j +
           p.forget.w_in.transpose() * d_f + p.output.w_in.transpose() * d_o;
  out.dh_prev = p.input.w_rec.transpose() * d_i + p.candidate.w_rec.transpose() * d_j +
                p.forget.w_rec.transpose() * d_f + p.output.w_rec.transpose() * d_o;
  out.dc_prev = dc_total.cwiseProduct(k.f);
  return out;
}

// ---------------------------------------------------------------------------

GruParams GruParams::zeros(Eigen::Index input_dim, Eigen::Index hidden) {
  const auto g = AffineGate::zeros(input_dim, hidden);
  return {g, g, g};
}

GruStep gru_step(const Vector& x, const Vector& h, const GruParams& p) {
  GruStep s;
  auto& k = s.cache;
  k.x = x;
  k.h_prev = h;
  k.z = logistic_of(p.update.pre(x, h));
  k.r = logistic_of(p.reset.pre(x, h));
  k.reset_h = k.r.cwiseProduct(h);
  k.candidate = tanh_of(p.candidate.pre(x, k.reset_h));
  s.h = k.z.cwiseProduct(h) + (Vector::Ones(h.size()) - k.z).cwiseProduct(k.candidate);
  return s;
}

GruInputGrads gru_backward(const GruCache& k, const Vector& dh, const GruParams& p, GruParams& grads) {
  expect_size(dh.size(), p.hidden(), "gru_backward dh");
  expect_size(k.z.size(), p.hidden(), "gru_backward cache");

  const auto ones = Vector::Ones(p.hidden()).array();
  const Vector d_cand =
      (dh.array() * (ones - k.z.array()) * (ones - k.candidate.array().square())).matrix();
  const Vector d_z =
      (dh.array() * (k.h_prev.array() - k.candidate.array()) * k.z.array() * (ones - k.z.array())).matrix();
  const Vector d_reset_h = p.candidate.w_rec.transpose() * d_cand;
  const Vector d_r = (d_reset_h.array() * k.h_prev.array() * k.r.array() * (ones - k.r.array())).matrix();

  accumulate_gate(grads.candidate, d_cand, k.x, k.reset_h);
  accumulate_gate(grads.update, d_z, k.x, k.h_prev);
  accumulate_gate(grads.reset, d_r, k.x, k.h_prev);

  GruInputGrads out;
  out.dx = p.candidate.w_in.transpose() * d_cand + p.update.w_in.transpose() * d_z +
           p.reset.w_in.transpose() * d_r;
  out.dh_prev = dh.cwiseProduct(k.z) + d_reset_h.cwiseProduct(k.r) + p.update.w_rec.transpose() * d_z +
                p.reset.w_rec.transpose() * d_r;
  return out;
}

// ---------------------------------------------------------------------------

RnnDecoderParams RnnDecoderParams::zeros(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index vocab) {
  return {AffineGate::zeros(input_dim, hidden), Matrix::Zero(vocab, hidden), Vector::Zero(vocab)};
}

double logsumexp(const Vector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

RnnStep rnn_step(const Vector& x, const Vector& h, const RnnDecoderParams& p, const DecoderActivation& act) {
  RnnStep s;
  auto& k = s.cache;
  k.x = x;
  k.h_prev = h;
  k.h = tanh_of(act.tanh_scale * p.recurrent.pre(x, h));
  Vector z = p.b_out;
  z.noalias() += p.w_out * k.h;
  const double lse = logsumexp(z);
  k.softmax = (z.array() - lse).exp().matrix();
  s.y = (act.logit_scale == 1.0 ? z : Vector(act.logit_scale * z)).array() - lse;
  s.h = k.h;
  return s;
}

RnnInputGrads rnn_backward(const RnnCache& k, const Vector& dy, const Vector& dh_next, const RnnDecoderParams& p,
                           const DecoderActivation& act, RnnDecoderParams& grads) {
  expect_size(dy.size(), p.vocab(), "rnn_backward dy");
  expect_size(dh_next.size(), p.hidden(), "rnn_backward dh");
  expect_size(k.softmax.size(), p.vocab(), "rnn_backward cache");

  const Vector dz = act.logit_scale * dy - k.softmax * dy.sum();
  grads.w_out.noalias() += dz * k.h.transpose();
  grads.b_out += dz;
  const Vector dh = p.w_out.transpose() * dz + dh_next;
  const Vector dpre =
      (act.tanh_scale * dh.array() * (1.0 - k.h.array().square())).matrix();
  accumulate_gate(grads.recurrent, dpre, k.x, k.h_prev);

  return {p.recurrent.w_in.transpose() * dpre, p.recurrent.w_rec.transpose() * dpre};
}

RnnSequenceTrace rnn_forward_sequence(const RnnDecoderParams& p, const Eigen::MatrixXd& inputs, const Vector& h0,
                                      const DecoderActivation& act) {
  expect_size(inputs.rows(), p.recurrent.input(), "decoder input");
  expect_size(h0.size(), p.hidden(), "decoder initial state");
  const Eigen::Index steps = inputs.cols();

  RnnSequenceTrace tr;
  tr.inputs = inputs;
  Eigen::MatrixXd pre = p.recurrent.w_in * inputs;
  pre.colwise() += p.recurrent.bias;
  tr.hidden.resize(p.hidden(), steps + 1);
  tr.hidden.col(0) = h0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    Vector u = pre.col(t);
    u.noalias() += p.recurrent.w_rec * tr.hidden.col(t);
    tr.hidden.col(t + 1) = (act.tanh_scale * u).array().tanh().matrix();
  }

  Eigen::MatrixXd logits = p.w_out * tr.hidden.rightCols(steps);
  logits.colwise() += p.b_out;
  tr.softmax.resize(p.vocab(), steps);
  tr.logprob.resize(p.vocab(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Vector z = logits.col(t);
    const double lse = logsumexp(z);
    tr.softmax.col(t) = (z.array() - lse).exp().matrix();
    tr.logprob.col(t) = (act.logit_scale * z).array() - lse;
  }
  return tr;
}

RnnSequenceGrads rnn_backward_sequence(const RnnSequenceTrace& tr, const Eigen::MatrixXd& dlogits,
                                       const RnnDecoderParams& p, const DecoderActivation& act,
                                       RnnDecoderParams& grads) {
  const Eigen::Index steps = tr.inputs.cols();
  expect_size(dlogits.rows(), p.vocab(), "decoder dlogits");
  expect_size(dlogits.cols(), steps, "decoder dlogits steps");

  const auto outputs = tr.hidden.rightCols(steps);
  grads.w_out.noalias() += dlogits * outputs.transpose();
  grads.b_out += dlogits.rowwise().sum();

  const Eigen::MatrixXd dh_out = p.w_out.transpose() * dlogits;
  Eigen::MatrixXd dpre(p.hidden(), steps);
  Vector carry = Vector::Zero(p.hidden());
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Vector dh = dh_out.col(t) + carry;
    dpre.col(t) = (act.tanh_scale * dh.array() * (1.0 - tr.hidden.col(t + 1).array().square())).matrix();
    carry.noalias() = p.recurrent.w_rec.transpose() * dpre.col(t);
  }

  grads.recurrent.w_in.noalias() += dpre * tr.inputs.transpose();
  grads.recurrent.w_rec.noalias() += dpre * tr.hidden.leftCols(steps).transpose();
  grads.recurrent.bias += dpre.rowwise().sum();

  RnnSequenceGrads out;
  out.dinputs = p.recurrent.w_in.transpose() * dpre;
  out.dh0 = carry;
  return out;
}

}  // namespace routeseq
