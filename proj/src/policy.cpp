#include "policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "linalg.hpp"

namespace batchgfn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// squareplus and its derivative recovered from (z, f(z)) without a second
// sqrt: f'(z) = (1 + z / (2 f(z) - z)) / 2, and 2 f(z) - z = sqrt(z^2+1) >= 1.
inline Eigen::MatrixXd squareplus(const Eigen::MatrixXd& z) {
  return 0.5 * (z.array() + (z.array().square() + 1.0).sqrt()).matrix();
}
inline Eigen::MatrixXd squareplus_deriv(const Eigen::MatrixXd& z,
                                        const Eigen::MatrixXd& h) {
  return 0.5 * (1.0 + z.array() / (2.0 * h.array() - z.array())).matrix();
}

int encoder_param_count(int input_dim, int hidden, int layers) {
  int n = hidden * input_dim + hidden;
  n += (layers - 1) * (hidden * hidden + hidden);
  return n;
}

void mlp_forward(const Eigen::MatrixXd& input,
                 const std::vector<Eigen::MatrixXd>& w,
                 const std::vector<Eigen::VectorXd>& b,
                 std::vector<Eigen::MatrixXd>& z,
                 std::vector<Eigen::MatrixXd>& h) {
  const size_t layers = w.size();
  z.resize(layers);
  h.resize(layers);
  for (size_t l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& in = (l == 0) ? input : h[l - 1];
    z[l] = in * w[l].transpose();
    z[l].rowwise() += b[l].transpose();
    h[l] = squareplus(z[l]);
  }
}

// Reverse pass through an encoder; accumulates weight/bias grads.
void mlp_backward(const Eigen::MatrixXd& input,
                  const std::vector<Eigen::MatrixXd>& w,
                  const std::vector<Eigen::MatrixXd>& z,
                  const std::vector<Eigen::MatrixXd>& h,
                  Eigen::MatrixXd dout, std::vector<Eigen::MatrixXd>& gw,
                  std::vector<Eigen::VectorXd>& gb) {
  for (int l = static_cast<int>(w.size()) - 1; l >= 0; --l) {
    const Eigen::MatrixXd dz = dout.cwiseProduct(squareplus_deriv(z[l], h[l]));
    const Eigen::MatrixXd& in = (l == 0) ? input : h[l - 1];
    gw[l].noalias() += dz.transpose() * in;
    gb[l] += dz.colwise().sum().transpose();
    if (l > 0) dout.noalias() = dz * w[l];
  }
}

struct Reader {
  const double* p;
  Eigen::MatrixXd mat(int rows, int cols) {
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(p, rows, cols);
    p += rows * cols;
    return m;
  }
  Eigen::VectorXd vec(int n) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(p, n);
    p += n;
    return v;
  }
  double scalar() { return *p++; }
};

struct Writer {
  double* p;
  void mat(const Eigen::MatrixXd& m) {
    Eigen::Map<Eigen::MatrixXd>(p, m.rows(), m.cols()) = m;
    p += m.size();
  }
  void vec(const Eigen::VectorXd& v) {
    Eigen::Map<Eigen::VectorXd>(p, v.size()) = v;
    p += v.size();
  }
  void scalar(double s) { *p++ = s; }
};

}  // namespace

int policy_param_count(const PolicyConfig& cfg) {
  const int h = cfg.hidden_dim;
  const int ctx = cfg.train_context ? 1 : 0;
  int n = 2 * encoder_param_count(1, h, cfg.encoder_layers);
  if (ctx) n += encoder_param_count(2, h, cfg.encoder_layers);
  n += h * (2 + ctx) * h + h;                        // trunk layer 1
  n += (cfg.trunk_layers - 1) * (h * h + h);         // trunk rest
  n += (h + 1) + (2 * h + 1) + (h * (1 + ctx) + 1);  // heads
  return n;
}

PolicyParams init_policy(const PolicyConfig& cfg, Rng& rng) {
  if (cfg.hidden_dim < 1 || cfg.encoder_layers < 1 || cfg.trunk_layers < 1)
    throw InvalidArgument("init_policy: bad architecture");
  PolicyParams params;
  params.cfg = cfg;
  params.theta = Eigen::VectorXd::Zero(policy_param_count(cfg));
  Writer w{params.theta.data()};
  const int h = cfg.hidden_dim;

  auto fill = [&](int rows, int cols) {
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = (2.0 * rng.uniform01() - 1.0) * s;
    w.mat(m);
    w.vec(Eigen::VectorXd::Zero(rows));  // biases start at zero
  };
  auto encoder = [&](int input_dim) {
    fill(h, input_dim);
    for (int l = 1; l < cfg.encoder_layers; ++l) fill(h, h);
  };

  encoder(1);  // pool
  encoder(1);  // state
  if (cfg.train_context) encoder(2);
  fill(h, h * (2 + (cfg.train_context ? 1 : 0)));  // trunk layer 1
  for (int l = 1; l < cfg.trunk_layers; ++l) fill(h, h);
  // Heads stay zero (w already zero-filled).
  return params;
}

PolicyEval::PolicyEval(const PolicyParams& params, std::vector<double> pool_xs,
                       const TrainSet* train_ctx)
    : params_(params), pool_xs_(std::move(pool_xs)) {
  const PolicyConfig& cfg = params_.cfg;
  const int h = cfg.hidden_dim;
  const int n = pool_size();
  if (params_.theta.size() != policy_param_count(cfg))
    throw InvalidArgument("PolicyEval: parameter vector size mismatch");
  has_train_ctx_ = cfg.train_context;

  Reader r{params_.theta.data()};
  auto read_encoder = [&](int input_dim, std::vector<Eigen::MatrixXd>& ws,
                          std::vector<Eigen::VectorXd>& bs) {
    ws.push_back(r.mat(h, input_dim));
    bs.push_back(r.vec(h));
    for (int l = 1; l < cfg.encoder_layers; ++l) {
      ws.push_back(r.mat(h, h));
      bs.push_back(r.vec(h));
    }
  };
  read_encoder(1, enc_pool_w_, enc_pool_b_);
  read_encoder(1, enc_state_w_, enc_state_b_);
  if (cfg.train_context) read_encoder(2, enc_train_w_, enc_train_b_);
  {
    const int d = h * (2 + (cfg.train_context ? 1 : 0));
    Eigen::MatrixXd w1 = r.mat(h, d);
    trunk_w1_pool_ = w1.leftCols(h);
    trunk_w1_state_ = w1.middleCols(h, h);
    if (cfg.train_context) trunk_w1_train_ = w1.rightCols(h);
    trunk_b1_ = r.vec(h);
  }
  for (int l = 1; l < cfg.trunk_layers; ++l) {
    trunk_w_rest_.push_back(r.mat(h, h));
    trunk_b_rest_.push_back(r.vec(h));
  }
  head_f_w_ = r.vec(h);
  head_f_b_ = r.scalar();
  head_b_w_ = r.vec(2 * h);
  head_b_b_ = r.scalar();
  head_flow_w_ = r.vec(h * (1 + (cfg.train_context ? 1 : 0)));
  head_flow_b_ = r.scalar();

  // Encoder sweeps over the pool; cached together with their activations for
  // the deferred backward pass.
  Eigen::MatrixXd xcol = Eigen::Map<const Eigen::VectorXd>(pool_xs_.data(), n);
  mlp_forward(xcol, enc_pool_w_, enc_pool_b_, pool_cache_.z, pool_cache_.h);
  pool_emb_ = pool_cache_.h.back();
  mlp_forward(xcol, enc_state_w_, enc_state_b_, state_cache_.z, state_cache_.h);
  state_emb_ = state_cache_.h.back();
  a_.noalias() = pool_emb_ * trunk_w1_pool_.transpose();

  c_t_ = Eigen::VectorXd::Zero(h);
  if (cfg.train_context && train_ctx && train_ctx->size() > 0) {
    const int m = train_ctx->size();
    Eigen::MatrixXd tin(m, 2);
    for (int i = 0; i < m; ++i) {
      tin(i, 0) = train_ctx->points[i].x;
      tin(i, 1) = train_ctx->points[i].y;
    }
    mlp_forward(tin, enc_train_w_, enc_train_b_, train_cache_.z, train_cache_.h);
    train_input_ = tin;
    // Sum in canonical (x, y)-sorted order so the context is bit-identical
    // under reordering of the train pairs.
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (tin(a, 0) != tin(b, 0)) return tin(a, 0) < tin(b, 0);
      return tin(a, 1) < tin(b, 1);
    });
    for (int i : order) c_t_ += train_cache_.h.back().row(i).transpose();
  }
  u_base_ = trunk_b1_;
  if (cfg.train_context) u_base_ += trunk_w1_train_ * c_t_;
}

Eigen::VectorXd PolicyEval::state_context(const BatchState& s) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(params_.cfg.hidden_dim);
  for (int idx : s.indices) c += state_emb_.row(idx).transpose();
  return c;
}

void PolicyEval::trunk_forward(const BatchState& s, Eigen::VectorXd& c_s,
                               std::vector<Eigen::MatrixXd>& z,
                               std::vector<Eigen::MatrixXd>& h) const {
  c_s = state_context(s);
  const Eigen::VectorXd u = u_base_ + trunk_w1_state_ * c_s;
  const size_t layers = 1 + trunk_w_rest_.size();
  z.resize(layers);
  h.resize(layers);
  z[0] = a_;
  z[0].rowwise() += u.transpose();
  h[0] = squareplus(z[0]);
  for (size_t l = 1; l < layers; ++l) {
    z[l].noalias() = h[l - 1] * trunk_w_rest_[l - 1].transpose();
    z[l].rowwise() += trunk_b_rest_[l - 1].transpose();
    h[l] = squareplus(z[l]);
  }
}

PolicyOutput PolicyEval::encode(const BatchState& s) const {
  const int hd = params_.cfg.hidden_dim;
  Eigen::VectorXd c_s;
  std::vector<Eigen::MatrixXd> z, h;
  trunk_forward(s, c_s, z, h);
  const Eigen::MatrixXd& hm = h.back();

  PolicyOutput out;
  out.forward_logits = hm * head_f_w_;
  out.forward_logits.array() += head_f_b_;
  if (s.is_terminal()) {
    out.forward_logits.setConstant(kNegInf);
  } else {
    for (int idx : s.indices) out.forward_logits[idx] = kNegInf;
  }
  out.backward_logits.resize(s.size());
  for (int j = 0; j < s.size(); ++j) {
    const int q = s.indices[j];
    out.backward_logits[j] = head_b_w_.head(hd).dot(hm.row(q)) +
                             head_b_w_.tail(hd).dot(c_s) + head_b_b_;
  }
  out.log_flow = head_flow_w_.head(hd).dot(c_s) + head_flow_b_;
  if (has_train_ctx_) out.log_flow += head_flow_w_.tail(hd).dot(c_t_);
  evals_.fetch_add(1, std::memory_order_relaxed);
  return out;
}

GradAccum::GradAccum(const PolicyEval& eval) : eval_(&eval) {
  const int n = eval.pool_size();
  const int h = eval.params().cfg.hidden_dim;
  g_ = Eigen::VectorXd::Zero(policy_param_count(eval.params().cfg));
  d_a_ = Eigen::MatrixXd::Zero(n, h);
  d_s_ = Eigen::MatrixXd::Zero(n, h);
  d_ct_ = Eigen::VectorXd::Zero(h);
}

void GradAccum::reset() {
  g_.setZero();
  d_a_.setZero();
  d_s_.setZero();
  d_ct_.setZero();
}

void GradAccum::add(const GradAccum& other) {
  g_ += other.g_;
  d_a_ += other.d_a_;
  d_s_ += other.d_s_;
  d_ct_ += other.d_ct_;
}

PolicyOutput PolicyEval::backward(const BatchState& s,
                                  const PolicyOutputGrad& grad,
                                  GradAccum& acc) const {
  const PolicyConfig& cfg = params_.cfg;
  const int hd = cfg.hidden_dim;
  Eigen::VectorXd c_s;
  std::vector<Eigen::MatrixXd> z, h;
  trunk_forward(s, c_s, z, h);
  const Eigen::MatrixXd& hm = h.back();

  PolicyOutput out;
  out.forward_logits = hm * head_f_w_;
  out.forward_logits.array() += head_f_b_;
  if (s.is_terminal()) {
    out.forward_logits.setConstant(kNegInf);
  } else {
    for (int idx : s.indices) out.forward_logits[idx] = kNegInf;
  }
  out.backward_logits.resize(s.size());
  for (int j = 0; j < s.size(); ++j) {
    const int q = s.indices[j];
    out.backward_logits[j] = head_b_w_.head(hd).dot(hm.row(q)) +
                             head_b_w_.tail(hd).dot(c_s) + head_b_b_;
  }
  out.log_flow = head_flow_w_.head(hd).dot(c_s) + head_flow_b_;
  if (has_train_ctx_) out.log_flow += head_flow_w_.tail(hd).dot(c_t_);

  // Gradient buffers live in acc.g_ with the same layout as theta; set up a
  // writer that walks the segments in order.
  const int ctx = cfg.train_context ? 1 : 0;
  const int enc_n = encoder_param_count(1, hd, cfg.encoder_layers);
  const int enc_t_n = ctx ? encoder_param_count(2, hd, cfg.encoder_layers) : 0;
  double* base = acc.g_.data() + 2 * enc_n + enc_t_n;  // trunk W1 block
  const int d1 = hd * (2 + ctx);
  Eigen::Map<Eigen::MatrixXd> g_w1(base, hd, d1);
  auto g_w1_pool = g_w1.leftCols(hd);
  auto g_w1_state = g_w1.middleCols(hd, hd);
  Eigen::Map<Eigen::VectorXd> g_b1(base + hd * d1, hd);
  double* p = base + hd * d1 + hd;
  std::vector<Eigen::Map<Eigen::MatrixXd>> g_w_rest;
  std::vector<Eigen::Map<Eigen::VectorXd>> g_b_rest;
  for (int l = 1; l < cfg.trunk_layers; ++l) {
    g_w_rest.emplace_back(p, hd, hd);
    p += hd * hd;
    g_b_rest.emplace_back(p, hd);
    p += hd;
  }
  Eigen::Map<Eigen::VectorXd> g_head_f_w(p, hd);
  double& g_head_f_b = p[hd];
  p += hd + 1;
  Eigen::Map<Eigen::VectorXd> g_head_b_w(p, 2 * hd);
  double& g_head_b_b = p[2 * hd];
  p += 2 * hd + 1;
  Eigen::Map<Eigen::VectorXd> g_head_flow_w(p, hd * (1 + ctx));
  double& g_head_flow_b = p[hd * (1 + ctx)];

  Eigen::VectorXd dc_s = Eigen::VectorXd::Zero(hd);

  // Forward head. Masked entries must carry zero gradient.
  Eigen::MatrixXd dh = grad.d_forward_logits * head_f_w_.transpose();
  g_head_f_w.noalias() += hm.transpose() * grad.d_forward_logits;
  g_head_f_b += grad.d_forward_logits.sum();

  // Backward head (rows of the trunk representation at state members).
  for (int j = 0; j < s.size(); ++j) {
    const int q = s.indices[j];
    const double gj = grad.d_backward_logits.size() ? grad.d_backward_logits[j] : 0.0;
    if (gj == 0.0) continue;
    dh.row(q) += gj * head_b_w_.head(hd).transpose();
    dc_s += gj * head_b_w_.tail(hd);
    g_head_b_w.head(hd) += gj * hm.row(q).transpose();
    g_head_b_w.tail(hd) += gj * c_s;
    g_head_b_b += gj;
  }

  // Flow head.
  if (grad.d_log_flow != 0.0) {
    g_head_flow_w.head(hd) += grad.d_log_flow * c_s;
    if (ctx) {
      g_head_flow_w.tail(hd) += grad.d_log_flow * c_t_;
      acc.d_ct_ += grad.d_log_flow * head_flow_w_.tail(hd);
    }
    g_head_flow_b += grad.d_log_flow;
    dc_s += grad.d_log_flow * head_flow_w_.head(hd);
  }

  // Trunk, deepest layer first.
  for (int l = cfg.trunk_layers - 1; l >= 1; --l) {
    const Eigen::MatrixXd dz = dh.cwiseProduct(squareplus_deriv(z[l], h[l]));
    g_w_rest[l - 1].noalias() += dz.transpose() * h[l - 1];
    g_b_rest[l - 1] += dz.colwise().sum().transpose();
    dh.noalias() = dz * trunk_w_rest_[l - 1];
  }
  const Eigen::MatrixXd dz1 = dh.cwiseProduct(squareplus_deriv(z[0], h[0]));
  acc.d_a_ += dz1;  // deferred: g_W1_pool and encoder backward in flatten()
  const Eigen::VectorXd du = dz1.colwise().sum().transpose();
  g_b1 += du;
  g_w1_state.noalias() += du * c_s.transpose();
  dc_s.noalias() += trunk_w1_state_.transpose() * du;
  if (ctx) {
    g_w1.rightCols(hd).noalias() += du * c_t_.transpose();
    acc.d_ct_.noalias() += trunk_w1_train_.transpose() * du;
  }
  (void)g_w1_pool;

  // State-context gradient lands on each member's state embedding.
  for (int idx : s.indices) acc.d_s_.row(idx) += dc_s.transpose();

  return out;
}

Eigen::VectorXd GradAccum::flatten() const {
  const PolicyEval& ev = *eval_;
  const PolicyConfig& cfg = ev.params().cfg;
  const int hd = cfg.hidden_dim;
  const int ctx = cfg.train_context ? 1 : 0;
  Eigen::VectorXd out = g_;

  // Deferred trunk/pool coupling: A = E_pool * W1_pool^T.
  const int enc_n = encoder_param_count(1, hd, cfg.encoder_layers);
  const int enc_t_n = ctx ? encoder_param_count(2, hd, cfg.encoder_layers) : 0;
  const int d1 = hd * (2 + ctx);
  Eigen::Map<Eigen::MatrixXd> g_w1(out.data() + 2 * enc_n + enc_t_n, hd, d1);
  g_w1.leftCols(hd).noalias() += d_a_.transpose() * ev.pool_emb_;

  // Encoder backward passes.
  const int n = ev.pool_size();
  Eigen::MatrixXd xcol =
      Eigen::Map<const Eigen::VectorXd>(ev.pool_xs_.data(), n);
  auto encoder_grads = [&](const std::vector<Eigen::MatrixXd>& w,
                           const PolicyEval::MlpCache& cache,
                           const Eigen::MatrixXd& input,
                           const Eigen::MatrixXd& dout, double* dst) {
    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::VectorXd> gb;
    for (const auto& wi : w) {
      gw.emplace_back(Eigen::MatrixXd::Zero(wi.rows(), wi.cols()));
      gb.emplace_back(Eigen::VectorXd::Zero(wi.rows()));
    }
    mlp_backward(input, w, cache.z, cache.h, dout, gw, gb);
    Writer wr{dst};
    for (size_t l = 0; l < w.size(); ++l) {
      wr.mat(gw[l]);
      wr.vec(gb[l]);
    }
  };

  Eigen::MatrixXd d_pool_emb = d_a_ * ev.trunk_w1_pool_;
  encoder_grads(ev.enc_pool_w_, ev.pool_cache_, xcol, d_pool_emb, out.data());
  encoder_grads(ev.enc_state_w_, ev.state_cache_, xcol, d_s_,
                out.data() + enc_n);
  if (ctx && ev.train_input_.rows() > 0) {
    // c_t is a plain sum, so every train row's embedding receives d_ct.
    const int m = static_cast<int>(ev.train_input_.rows());
    Eigen::MatrixXd d_train = d_ct_.transpose().replicate(m, 1);
    encoder_grads(ev.enc_train_w_, ev.train_cache_, ev.train_input_, d_train,
                  out.data() + 2 * enc_n);
  }
  return out;
}

Eigen::VectorXd masked_log_softmax(const Eigen::VectorXd& logits) {
  double mx = kNegInf;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (logits[i] > mx) mx = logits[i];
  Eigen::VectorXd out = logits;
  if (mx == kNegInf) return out;  // fully masked
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (logits[i] != kNegInf) sum += std::exp(logits[i] - mx);
  const double lse = mx + std::log(sum);
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (logits[i] != kNegInf) out[i] = logits[i] - lse;
  return out;
}

double log_pf(const PolicyOutput& out, int action) {
  if (action < 0 || action >= out.forward_logits.size() ||
      out.forward_logits[action] == kNegInf)
    throw InvalidArgument("log_pf: disallowed action");
  const Eigen::VectorXd ls = masked_log_softmax(out.forward_logits);
  return ls[action];
}

double log_pb(const PolicyOutput& out, const BatchState& s, int removed_index) {
  const auto it =
      std::lower_bound(s.indices.begin(), s.indices.end(), removed_index);
  if (it == s.indices.end() || *it != removed_index)
    throw InvalidArgument("log_pb: index not in state");
  const int pos = static_cast<int>(it - s.indices.begin());
  const Eigen::VectorXd ls = masked_log_softmax(out.backward_logits);
  return ls[pos];
}

int sample_action(const PolicyOutput& out, double epsilon, Rng& rng) {
  std::vector<int> allowed;
  allowed.reserve(out.forward_logits.size());
  for (Eigen::Index i = 0; i < out.forward_logits.size(); ++i)
    if (out.forward_logits[i] != kNegInf) allowed.push_back(static_cast<int>(i));
  if (allowed.empty())
    throw InvalidArgument("sample_action: terminal state has no actions");
  if (epsilon > 0.0 && rng.uniform01() < epsilon)
    return allowed[rng.uniform_below(allowed.size())];
  const Eigen::VectorXd ls = masked_log_softmax(out.forward_logits);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (int idx : allowed) {
    acc += std::exp(ls[idx]);
    if (u < acc) return idx;
  }
  return allowed.back();
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double lr) {
  if (params.size() != grad.size())
    throw InvalidArgument("adam_step: shape mismatch");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.t = 0;
  }
  state.t += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  params.array() -= lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + eps);
}

namespace {
struct CheckpointHeader {
  char magic[8];
  int32_t hidden_dim;
  int32_t encoder_layers;
  int32_t trunk_layers;
  uint8_t train_context;
  uint8_t has_opt;
  uint8_t pad[2];
  uint64_t param_count;
};
static_assert(sizeof(CheckpointHeader) == 32);
constexpr char kMagic[8] = {'B', 'G', 'F', 'N', 'P', 'O', 'L', '1'};
}  // namespace

void save_policy(const std::string& path, const PolicyParams& params,
                 const AdamState* opt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  CheckpointHeader hdr{};
  std::memcpy(hdr.magic, kMagic, 8);
  hdr.hidden_dim = params.cfg.hidden_dim;
  hdr.encoder_layers = params.cfg.encoder_layers;
  hdr.trunk_layers = params.cfg.trunk_layers;
  hdr.train_context = params.cfg.train_context ? 1 : 0;
  hdr.has_opt = (opt && opt->m.size() == params.theta.size()) ? 1 : 0;
  hdr.param_count = static_cast<uint64_t>(params.theta.size());
  out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
  out.write(reinterpret_cast<const char*>(params.theta.data()),
            params.theta.size() * sizeof(double));
  if (hdr.has_opt) {
    const int64_t t = opt->t;
    out.write(reinterpret_cast<const char*>(&t), sizeof(t));
    out.write(reinterpret_cast<const char*>(opt->m.data()),
              opt->m.size() * sizeof(double));
    out.write(reinterpret_cast<const char*>(opt->v.data()),
              opt->v.size() * sizeof(double));
  }
}

PolicyParams load_policy(const std::string& path, AdamState* opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  CheckpointHeader hdr{};
  in.read(reinterpret_cast<char*>(&hdr), sizeof(hdr));
  if (!in || std::memcmp(hdr.magic, kMagic, 8) != 0)
    throw std::runtime_error("load_policy: bad magic in " + path);
  PolicyParams params;
  params.cfg.hidden_dim = hdr.hidden_dim;
  params.cfg.encoder_layers = hdr.encoder_layers;
  params.cfg.trunk_layers = hdr.trunk_layers;
  params.cfg.train_context = hdr.train_context != 0;
  if (hdr.param_count !=
      static_cast<uint64_t>(policy_param_count(params.cfg)))
    throw std::runtime_error("load_policy: parameter count mismatch");
  params.theta.resize(hdr.param_count);
  in.read(reinterpret_cast<char*>(params.theta.data()),
          hdr.param_count * sizeof(double));
  if (opt) {
    *opt = AdamState{};
    if (hdr.has_opt) {
      int64_t t = 0;
      in.read(reinterpret_cast<char*>(&t), sizeof(t));
      opt->t = t;
      opt->m.resize(hdr.param_count);
      opt->v.resize(hdr.param_count);
      in.read(reinterpret_cast<char*>(opt->m.data()),
              hdr.param_count * sizeof(double));
      in.read(reinterpret_cast<char*>(opt->v.data()),
              hdr.param_count * sizeof(double));
    }
  }
  if (!in) throw std::runtime_error("load_policy: truncated file " + path);
  return params;
}

}  // namespace batchgfn
