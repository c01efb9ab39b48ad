#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace batchgfn {

// Raised when a factorization fails even after jitter escalation.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Global warning sink (stderr unless silenced); used for jitter escalations
// and training-instability notices.
void set_quiet(bool quiet);
void warn(const std::string& msg);

struct CholResult {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // diagonal jitter that was finally applied
};

// Cholesky of a symmetric matrix with escalating diagonal jitter.
// Starts at 1e-8*scale and multiplies by 10 up to 1e-4*scale; each escalation
// is reported through warn(). Throws NumericalError past the cap.
CholResult jittered_llt(const Eigen::MatrixXd& a, double scale,
                        const char* what = "matrix");

// log det A from its Cholesky factor.
double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace batchgfn
