#include "gp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "linalg.hpp"

namespace batchgfn {

namespace {

// softplus and friends for the unconstrained parameterization.
double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }
double inv_softplus(double v) {
  // log(exp(v) - 1), stable for small and large v.
  return v > 30.0 ? v : std::log(std::expm1(v));
}
double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

struct CommonTerms {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;    // (K + s^2 I)^-1 (y - m)
  Eigen::VectorXd residual; // y - m
  double logdet = 0.0;
};

CommonTerms factorize(const TrainSet& train, const KernelParams& p) {
  const auto xs = train.xs();
  Eigen::MatrixXd c = kernel_matrix(xs, xs, p);
  c.diagonal().array() += p.noise_var;
  auto chol = jittered_llt(c, p.outputscale, "K + noise");
  CommonTerms t;
  t.residual.resize(train.size());
  for (int i = 0; i < train.size(); ++i)
    t.residual[i] = train.points[i].y - p.mean_const;
  t.alpha = chol.llt.solve(t.residual);
  t.logdet = logdet_from_llt(chol.llt);
  t.llt = std::move(chol.llt);
  return t;
}

// d k(d)/d lengthscale at distance d.
double matern_dk_dlengthscale(double dist, const KernelParams& p) {
  const double rho = p.lengthscale;
  if (p.nu == 2.5) {
    const double a = std::sqrt(5.0) * dist / rho;
    return p.outputscale * std::exp(-a) * a * a * (1.0 + a) / (3.0 * rho);
  }
  if (p.nu == 1.5) {
    const double a = std::sqrt(3.0) * dist / rho;
    return p.outputscale * std::exp(-a) * a * a / rho;
  }
  const double a = dist / rho;
  return p.outputscale * std::exp(-a) * a / rho;
}

}  // namespace

double matern_kernel(double x1, double x2, const KernelParams& p) {
  const double dist = std::abs(x1 - x2);
  const double rho = p.lengthscale;
  if (p.nu == 2.5) {
    const double a = std::sqrt(5.0) * dist / rho;
    return p.outputscale * (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  if (p.nu == 1.5) {
    const double a = std::sqrt(3.0) * dist / rho;
    return p.outputscale * (1.0 + a) * std::exp(-a);
  }
  if (p.nu == 0.5) return p.outputscale * std::exp(-dist / rho);
  throw InvalidArgument("matern_kernel: nu must be 0.5, 1.5 or 2.5");
}

Eigen::MatrixXd kernel_matrix(std::span<const double> a, std::span<const double> b,
                              const KernelParams& p) {
  Eigen::MatrixXd k(a.size(), b.size());
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      k(i, j) = matern_kernel(a[i], b[j], p);
  return k;
}

GPPosterior posterior(const TrainSet& train, const KernelParams& p,
                      std::span<const double> queries) {
  if (queries.empty()) throw InvalidArgument("posterior: no query points");
  GPPosterior post;
  post.noise_var = p.noise_var;
  const Eigen::MatrixXd kqq = kernel_matrix(queries, queries, p);
  if (train.size() == 0) {
    post.mean = Eigen::VectorXd::Constant(queries.size(), p.mean_const);
    post.cov = kqq;
    return post;
  }
  const auto t = factorize(train, p);
  const auto xs = train.xs();
  const Eigen::MatrixXd ks = kernel_matrix(xs, queries, p);  // M x Q
  post.mean = Eigen::VectorXd::Constant(queries.size(), p.mean_const) +
              ks.transpose() * t.alpha;
  const Eigen::MatrixXd v =
      t.llt.matrixL().solve(ks);  // L^-1 Ks
  post.cov = kqq - v.transpose() * v;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

double log_marginal_likelihood(const TrainSet& train, const KernelParams& p) {
  if (train.size() < 1)
    throw InvalidArgument("log_marginal_likelihood: empty training set");
  const auto t = factorize(train, p);
  const double quad = t.residual.dot(t.alpha);
  return -0.5 * quad - 0.5 * t.logdet -
         0.5 * train.size() * std::log(2.0 * std::numbers::pi);
}

Eigen::Vector4d log_marginal_likelihood_grad(const TrainSet& train,
                                             const KernelParams& p) {
  const auto t = factorize(train, p);
  const auto xs = train.xs();
  const int m = train.size();
  const Eigen::MatrixXd cinv = t.llt.solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::MatrixXd k = kernel_matrix(xs, xs, p);

  Eigen::MatrixXd dk_dl(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      dk_dl(i, j) = matern_dk_dlengthscale(std::abs(xs[i] - xs[j]), p);

  auto half_trace_term = [&](const Eigen::MatrixXd& g) {
    return 0.5 * (t.alpha.dot(g * t.alpha) - (cinv.array() * g.array()).sum());
  };

  Eigen::Vector4d grad;
  grad[0] = half_trace_term(dk_dl);
  grad[1] = half_trace_term(k / p.outputscale);
  grad[2] = 0.5 * (t.alpha.squaredNorm() - cinv.trace());
  grad[3] = t.alpha.sum();
  return grad;
}

GpFitResult fit_hyperparams(const TrainSet& train, const GpFitOptions& opts) {
  if (train.size() < 1)
    throw InvalidArgument("fit_hyperparams: empty training set");
  GpFitResult result;
  result.params = opts.init;
  if (opts.epochs == 0) {
    result.best_lml = log_marginal_likelihood(train, opts.init);
    return result;
  }

  // Unconstrained iterate: (raw lengthscale, raw outputscale, raw noise, mean).
  Eigen::Vector4d u(inv_softplus(opts.init.lengthscale),
                    inv_softplus(opts.init.outputscale),
                    inv_softplus(opts.init.noise_var), opts.init.mean_const);
  Eigen::Vector4d mom = Eigen::Vector4d::Zero();
  Eigen::Vector4d vel = Eigen::Vector4d::Zero();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  KernelParams cur = opts.init;
  result.best_lml = -std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    cur.lengthscale = softplus(u[0]);
    cur.outputscale = softplus(u[1]);
    cur.noise_var = softplus(u[2]);
    cur.mean_const = u[3];

    const double lml = log_marginal_likelihood(train, cur);
    result.lml_trace.push_back(lml);
    if (lml > result.best_lml) {
      result.best_lml = lml;
      result.params = cur;
    }

    Eigen::Vector4d g = log_marginal_likelihood_grad(train, cur);
    g[0] *= sigmoid(u[0]);
    g[1] *= sigmoid(u[1]);
    g[2] *= sigmoid(u[2]);
    // Ascent on LML == descent on -LML.
    const Eigen::Vector4d neg = -g;
    mom = beta1 * mom + (1.0 - beta1) * neg;
    vel = beta2 * vel + (1.0 - beta2) * neg.cwiseProduct(neg);
    const double bc1 = 1.0 - std::pow(beta1, epoch + 1);
    const double bc2 = 1.0 - std::pow(beta2, epoch + 1);
    for (int i = 0; i < 4; ++i)
      u[i] -= opts.lr * (mom[i] / bc1) / (std::sqrt(vel[i] / bc2) + eps);
  }
  // The final iterate may beat everything seen so far.
  cur.lengthscale = softplus(u[0]);
  cur.outputscale = softplus(u[1]);
  cur.noise_var = softplus(u[2]);
  cur.mean_const = u[3];
  const double lml = log_marginal_likelihood(train, cur);
  if (lml > result.best_lml) {
    result.best_lml = lml;
    result.params = cur;
  }
  return result;
}

Eigen::VectorXd sample_labels(const GPPosterior& post, Rng& rng) {
  const Eigen::Index q = post.mean.size();
  Eigen::MatrixXd s = post.cov;
  s.diagonal().array() += post.noise_var;
  if (s.lpNorm<Eigen::Infinity>() == 0.0) return post.mean;
  const double scale = std::max(s.diagonal().maxCoeff(), 1e-300);
  auto chol = jittered_llt(s, scale, "predictive covariance");
  Eigen::VectorXd z(q);
  for (Eigen::Index i = 0; i < q; ++i) z[i] = rng.normal();
  return post.mean + Eigen::MatrixXd(chol.llt.matrixL()) * z;
}

namespace {

// Mean and diagonal variance only; avoids the Q x Q covariance for big tests.
void predictive_mean_var(const TrainSet& train, const KernelParams& p,
                         std::span<const double> queries, Eigen::VectorXd& mean,
                         Eigen::VectorXd& var) {
  const Eigen::Index q = queries.size();
  mean = Eigen::VectorXd::Constant(q, p.mean_const);
  var.resize(q);
  for (Eigen::Index i = 0; i < q; ++i)
    var[i] = matern_kernel(queries[i], queries[i], p);
  if (train.size() == 0) return;
  const auto t = factorize(train, p);
  const auto xs = train.xs();
  const Eigen::MatrixXd ks = kernel_matrix(xs, queries, p);
  mean += ks.transpose() * t.alpha;
  const Eigen::MatrixXd v = t.llt.matrixL().solve(ks);
  var -= v.colwise().squaredNorm().transpose();
}

}  // namespace

double mse_of_posterior_mean(const TrainSet& train, const KernelParams& p,
                             const TrainSet& test) {
  Eigen::VectorXd mean, var;
  predictive_mean_var(train, p, test.xs(), mean, var);
  double sum = 0.0;
  for (int i = 0; i < test.size(); ++i) {
    const double d = test.points[i].y - mean[i];
    sum += d * d;
  }
  return sum / test.size();
}

double mean_nlpd(const TrainSet& train, const KernelParams& p,
                 const TrainSet& test) {
  Eigen::VectorXd mean, var;
  predictive_mean_var(train, p, test.xs(), mean, var);
  double sum = 0.0;
  for (int i = 0; i < test.size(); ++i) {
    const double s2 = std::max(var[i], 0.0) + p.noise_var;
    const double d = test.points[i].y - mean[i];
    sum += 0.5 * std::log(2.0 * std::numbers::pi * s2) + d * d / (2.0 * s2);
  }
  return sum / test.size();
}

void save_gp_checkpoint(const std::string& path, const KernelParams& p,
                        const std::string& train_ref, int train_size) {
  nlohmann::ordered_json j;
  j["format"] = "batchgfn-gp-v1";
  j["lengthscale"] = p.lengthscale;
  j["outputscale"] = p.outputscale;
  j["noise_var"] = p.noise_var;
  j["mean_const"] = p.mean_const;
  j["nu"] = p.nu;
  j["train_ref"] = train_ref;
  j["train_size"] = train_size;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_gp_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

KernelParams load_gp_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_gp_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "batchgfn-gp-v1")
    throw std::runtime_error("load_gp_checkpoint: unknown format");
  KernelParams p;
  p.lengthscale = j.at("lengthscale").get<double>();
  p.outputscale = j.at("outputscale").get<double>();
  p.noise_var = j.at("noise_var").get<double>();
  p.mean_const = j.at("mean_const").get<double>();
  p.nu = j.at("nu").get<double>();
  return p;
}

}  // namespace batchgfn
