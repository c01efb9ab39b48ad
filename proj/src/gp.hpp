#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "data_synth.hpp"
#include "rng.hpp"

namespace batchgfn {

// Matern kernel hyperparameters plus a constant mean. Positivity of
// lengthscale/outputscale/noise_var is maintained by the fitter through a
// softplus reparameterization; the stored values are the constrained ones.
struct KernelParams {
  double lengthscale = 1.0;
  double outputscale = 1.0;
  double noise_var = 0.1;
  double mean_const = 0.0;
  double nu = 2.5;  // smoothness: 0.5, 1.5 or 2.5
};

double matern_kernel(double x1, double x2, const KernelParams& p);

// Kernel matrix K[i,j] = k(a[i], b[j]).
Eigen::MatrixXd kernel_matrix(std::span<const double> a, std::span<const double> b,
                              const KernelParams& p);

struct GPPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double noise_var = 0.0;
};

// Exact GP posterior at the query locations; an empty training set returns
// the prior. Throws NumericalError if K + sigma^2 I resists factorization
// past the jitter cap.
GPPosterior posterior(const TrainSet& train, const KernelParams& p,
                      std::span<const double> queries);

// Exact Gaussian log evidence log p(y | X, params). M >= 1.
double log_marginal_likelihood(const TrainSet& train, const KernelParams& p);

// d LML / d (lengthscale, outputscale, noise_var, mean_const), in the
// constrained parameterization.
Eigen::Vector4d log_marginal_likelihood_grad(const TrainSet& train,
                                             const KernelParams& p);

struct GpFitOptions {
  int epochs = 1000;
  double lr = 0.1;
  KernelParams init;  // lengthscale 1, outputscale 1, noise 0.1, mean 0
};

struct GpFitResult {
  KernelParams params;           // best-LML parameters seen
  double best_lml = 0.0;
  std::vector<double> lml_trace; // per-epoch LML at the current iterate
};

// Adam on the negative exact log marginal likelihood, in unconstrained
// (inverse-softplus) space for the positive parameters. Returns the
// best-scoring iterate so the result never falls below the initialization.
GpFitResult fit_hyperparams(const TrainSet& train, const GpFitOptions& opts);

// One joint draw from N(mean, cov + noise_var * I): predictive labels, not
// the latent function.
Eigen::VectorXd sample_labels(const GPPosterior& post, Rng& rng);

// Mean squared error of the posterior mean over a labeled set.
double mse_of_posterior_mean(const TrainSet& train, const KernelParams& p,
                             const TrainSet& test);
// Mean negative log predictive density (diagonal predictive), logged next to
// the MSE in run records.
double mean_nlpd(const TrainSet& train, const KernelParams& p,
                 const TrainSet& test);

// Checkpoint: kernel parameters + a reference to the training data, as a
// small JSON record.
void save_gp_checkpoint(const std::string& path, const KernelParams& p,
                        const std::string& train_ref, int train_size);
KernelParams load_gp_checkpoint(const std::string& path);

}  // namespace batchgfn
