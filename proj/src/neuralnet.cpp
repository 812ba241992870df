#include "metaland/neuralnet.hpp"

#include <Eigen/QR>

#include <cmath>

namespace metaland {

namespace {

MatX sigmoid(const MatX& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

MatX affine(const Eigen::Map<const MatX>& w, const Eigen::Map<const MatX>& b, const MatX& x) {
  MatX y = w * x;
  y.colwise() += b.col(0);
  return y;
}

void require_finite(const MatX& m, const char* where) {
  if (!m.allFinite()) throw NumericFault(std::string("non-finite activation in ") + where);
}

void fill_uniform(Eigen::Map<MatX> m, Rng& rng, double limit) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
}

MatX orthogonal(std::size_t n, Rng& rng) {
  MatX g(n, n);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatX> qr(g);
  MatX q = qr.householderQ() * MatX::Identity(n, n);
  // sign fix so the factorization is unique
  const MatX rm = qr.matrixQR();
  for (std::size_t k = 0; k < n; ++k)
    if (rm(k, k) < 0.0) q.col(k) *= -1.0;
  return q;
}

}  // namespace

LayerSizes layer_sizes(std::size_t obs_dim, std::size_t act_dim, NetKind kind) {
  if (obs_dim == 0 || act_dim == 0) throw ConfigError("layer_sizes: dimensions must be positive");
  LayerSizes s;
  s.n_h1 = 10 * obs_dim;
  s.n_h3 = kind == NetKind::policy ? 10 * act_dim : 5;
  s.n_h2 = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(s.n_h1 * s.n_h3))));
  s.n_out = kind == NetKind::policy ? act_dim : 1;
  return s;
}

GruStep gru_cell(const VecX& x, const VecX& h, const MatX& wz, const VecX& bz, const MatX& wr, const VecX& br,
                 const MatX& wc, const VecX& bc) {
  VecX xh(x.size() + h.size());
  xh << x, h;
  GruStep out;
  out.z = sigmoid(wz * xh + bz);
  out.r = sigmoid(wr * xh + br);
  VecX xrh(x.size() + h.size());
  xrh << x, out.r.cwiseProduct(h);
  out.c = (wc * xrh + bc).array().tanh().matrix();
  out.h = (1.0 - out.z.array()).matrix().cwiseProduct(h) + out.z.cwiseProduct(out.c);
  return out;
}

Network::Network(std::size_t n_in, LayerSizes sizes, Layer2 layer2) : n_in_(n_in), sizes_(sizes), layer2_(layer2) {
  const std::size_t h1 = sizes.n_h1, h2 = sizes.n_h2, h3 = sizes.n_h3;
  w1_ = add_block("w1", h1, n_in);
  b1_ = add_block("b1", h1, 1);
  if (layer2 == Layer2::gru) {
    wz_ = add_block("wz", h2, h1 + h2);
    bz_ = add_block("bz", h2, 1);
    wr_ = add_block("wr", h2, h1 + h2);
    br_ = add_block("br", h2, 1);
    wc_ = add_block("wc", h2, h1 + h2);
    bc_ = add_block("bc", h2, 1);
  } else {
    w2_ = add_block("w2", h2, h1);
    b2_ = add_block("b2", h2, 1);
  }
  w3_ = add_block("w3", h3, h2);
  b3_ = add_block("b3", h3, 1);
  wo_ = add_block("wo", sizes.n_out, h3);
  bo_ = add_block("bo", sizes.n_out, 1);
  const Block& last = blocks_.back();
  theta_ = VecX::Zero(static_cast<Eigen::Index>(last.offset + last.rows * last.cols));
}

std::size_t Network::add_block(const std::string& name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = blocks_.empty() ? 0 : blocks_.back().offset + blocks_.back().rows * blocks_.back().cols;
  blocks_.push_back({name, offset, rows, cols});
  return blocks_.size() - 1;
}

Network::Map Network::block(std::size_t k) const {
  const Block& b = blocks_[k];
  return Map(theta_.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

Network::MapMut Network::grad_block(VecX& grad, std::size_t k) const {
  const Block& b = blocks_[k];
  return MapMut(grad.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

void Network::set_params(const VecX& theta) {
  if (theta.size() != theta_.size()) throw ConfigError("Network::set_params: size mismatch");
  theta_ = theta;
}

void Network::init(Rng& rng, double output_scale) {
  theta_.setZero();
  auto mut = [this](std::size_t k) { return grad_block(theta_, k); };
  const std::size_t h1 = sizes_.n_h1, h2 = sizes_.n_h2;
  fill_uniform(mut(w1_), rng, std::sqrt(3.0 / static_cast<double>(n_in_)));
  if (recurrent()) {
    for (std::size_t k : {wz_, wr_, wc_}) {
      auto w = mut(k);
      fill_uniform(MapMut(w.data(), w.rows(), static_cast<Eigen::Index>(h1)), rng,
                   std::sqrt(3.0 / static_cast<double>(h1)));
      w.rightCols(static_cast<Eigen::Index>(h2)) = orthogonal(h2, rng);
    }
  } else {
    fill_uniform(mut(w2_), rng, std::sqrt(3.0 / static_cast<double>(h1)));
  }
  fill_uniform(mut(w3_), rng, std::sqrt(3.0 / static_cast<double>(h2)));
  fill_uniform(mut(wo_), rng, output_scale * std::sqrt(3.0 / static_cast<double>(sizes_.n_h3)));
}

VecX Network::forward(const VecX& x, const VecX& h, VecX* h_out) const {
  std::vector<MatX> xs{MatX(x)};
  const MatX h0 = recurrent() ? MatX(h) : MatX(0, 1);
  Tape tape;
  const std::vector<MatX> ys = forward_batch(xs, h0, recurrent() && h_out ? &tape : nullptr);
  if (h_out) *h_out = recurrent() ? VecX(tape.steps.back().a2.col(0)) : VecX();
  return ys.front().col(0);
}

std::vector<MatX> Network::forward_batch(const std::vector<MatX>& xs, const MatX& h0, Tape* tape) const {
  const Eigen::Index h1 = static_cast<Eigen::Index>(sizes_.n_h1);
  const Eigen::Index h2 = static_cast<Eigen::Index>(sizes_.n_h2);
  if (recurrent() && h0.rows() != h2) throw ConfigError("forward_batch: hidden state has wrong length");
  std::vector<MatX> ys;
  ys.reserve(xs.size());
  if (tape) tape->steps.clear();
  MatX h = h0;
  for (const MatX& x : xs) {
    if (x.rows() != static_cast<Eigen::Index>(n_in_)) throw ConfigError("forward_batch: input has wrong length");
    if (!x.allFinite()) throw NumericFault("non-finite network input");
    StepCache s;
    s.x = x;
    s.a1 = affine(block(w1_), block(b1_), x).array().tanh().matrix();
    if (recurrent()) {
      const Map wz = block(wz_), wr = block(wr_), wc = block(wc_);
      MatX pz = wz.leftCols(h1) * s.a1 + wz.rightCols(h2) * h;
      pz.colwise() += block(bz_).col(0);
      MatX pr = wr.leftCols(h1) * s.a1 + wr.rightCols(h2) * h;
      pr.colwise() += block(br_).col(0);
      s.z = sigmoid(pz);
      s.r = sigmoid(pr);
      s.rh = s.r.cwiseProduct(h);
      MatX pc = wc.leftCols(h1) * s.a1 + wc.rightCols(h2) * s.rh;
      pc.colwise() += block(bc_).col(0);
      s.c = pc.array().tanh().matrix();
      s.h_prev = h;
      s.a2 = (1.0 - s.z.array()).matrix().cwiseProduct(h) + s.z.cwiseProduct(s.c);
      h = s.a2;
    } else {
      s.a2 = affine(block(w2_), block(b2_), s.a1).array().tanh().matrix();
    }
    s.a3 = affine(block(w3_), block(b3_), s.a2).array().tanh().matrix();
    MatX y = affine(block(wo_), block(bo_), s.a3);
    require_finite(y, "network output");
    require_finite(s.a2, "layer 2");
    ys.push_back(std::move(y));
    if (tape) tape->steps.push_back(std::move(s));
  }
  return ys;
}

void Network::backward_batch(const Tape& tape, const std::vector<MatX>& dys, VecX& grad) const {
  if (dys.size() != tape.steps.size()) throw ConfigError("backward_batch: step count mismatch");
  if (grad.size() != theta_.size()) grad = VecX::Zero(theta_.size());
  const Eigen::Index h1 = static_cast<Eigen::Index>(sizes_.n_h1);
  const Eigen::Index h2 = static_cast<Eigen::Index>(sizes_.n_h2);

  MatX dh_next;
  for (std::size_t k = tape.steps.size(); k-- > 0;) {
    const StepCache& s = tape.steps[k];
    const MatX& dy = dys[k];
    grad_block(grad, wo_).noalias() += dy * s.a3.transpose();
    grad_block(grad, bo_) += dy.rowwise().sum();
    const MatX dp3 = ((block(wo_).transpose() * dy).array() * (1.0 - s.a3.array().square())).matrix();
    grad_block(grad, w3_).noalias() += dp3 * s.a2.transpose();
    grad_block(grad, b3_) += dp3.rowwise().sum();
    MatX da2 = block(w3_).transpose() * dp3;

    MatX da1;
    if (recurrent()) {
      if (dh_next.size() > 0) da2 += dh_next;
      const Map wz = block(wz_), wr = block(wr_), wc = block(wc_);
      const MatX dz = da2.cwiseProduct(s.c - s.h_prev);
      const MatX dc = da2.cwiseProduct(s.z);
      MatX dh = da2.cwiseProduct((1.0 - s.z.array()).matrix());

      const MatX dpc = (dc.array() * (1.0 - s.c.array().square())).matrix();
      auto gwc = grad_block(grad, wc_);
      gwc.leftCols(h1).noalias() += dpc * s.a1.transpose();
      gwc.rightCols(h2).noalias() += dpc * s.rh.transpose();
      grad_block(grad, bc_) += dpc.rowwise().sum();
      da1 = wc.leftCols(h1).transpose() * dpc;
      const MatX drh = wc.rightCols(h2).transpose() * dpc;
      const MatX dr = drh.cwiseProduct(s.h_prev);
      dh += drh.cwiseProduct(s.r);

      const MatX dpz = (dz.array() * s.z.array() * (1.0 - s.z.array())).matrix();
      const MatX dpr = (dr.array() * s.r.array() * (1.0 - s.r.array())).matrix();
      auto gwz = grad_block(grad, wz_);
      gwz.leftCols(h1).noalias() += dpz * s.a1.transpose();
      gwz.rightCols(h2).noalias() += dpz * s.h_prev.transpose();
      grad_block(grad, bz_) += dpz.rowwise().sum();
      auto gwr = grad_block(grad, wr_);
      gwr.leftCols(h1).noalias() += dpr * s.a1.transpose();
      gwr.rightCols(h2).noalias() += dpr * s.h_prev.transpose();
      grad_block(grad, br_) += dpr.rowwise().sum();

      da1.noalias() += wz.leftCols(h1).transpose() * dpz + wr.leftCols(h1).transpose() * dpr;
      dh.noalias() += wz.rightCols(h2).transpose() * dpz + wr.rightCols(h2).transpose() * dpr;
      dh_next = std::move(dh);
    } else {
      const MatX dp2 = (da2.array() * (1.0 - s.a2.array().square())).matrix();
      grad_block(grad, w2_).noalias() += dp2 * s.a1.transpose();
      grad_block(grad, b2_) += dp2.rowwise().sum();
      da1 = block(w2_).transpose() * dp2;
    }
    const MatX dp1 = (da1.array() * (1.0 - s.a1.array().square())).matrix();
    grad_block(grad, w1_).noalias() += dp1 * s.x.transpose();
    grad_block(grad, b1_) += dp1.rowwise().sum();
  }
}

double gaussian_logp(const VecX& mean, const VecX& log_std, const VecX& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) throw ConfigError("gaussian_logp: size mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
  double out = 0.0;
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const double u = (action[d] - mean[d]) * std::exp(-log_std[d]);
    out += -0.5 * u * u - log_std[d] - half_log_2pi;
  }
  return out;
}

LogpGrad gaussian_logp_grad(const VecX& mean, const VecX& log_std, const VecX& action) {
  const VecX inv_var = (-2.0 * log_std.array()).exp().matrix();
  const VecX diff = action - mean;
  return {diff.cwiseProduct(inv_var), (diff.array().square() * inv_var.array() - 1.0).matrix()};
}

VecX sample_action(const VecX& mean, const VecX& log_std, Rng& rng, bool deterministic) {
  if (deterministic) return mean;
  VecX a(mean.size());
  for (Eigen::Index d = 0; d < mean.size(); ++d) a[d] = mean[d] + std::exp(log_std[d]) * rng.normal();
  return a;
}

Adam::Adam(std::size_t n, double learning_rate)
    : lr(learning_rate), m(VecX::Zero(static_cast<Eigen::Index>(n))), v(VecX::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(VecX& theta, const VecX& grad) {
  if (m.size() != theta.size()) {
    m = VecX::Zero(theta.size());
    v = VecX::Zero(theta.size());
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace metaland
