#include "linalg.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace batchgfn {

namespace {
std::atomic<bool> g_quiet{false};
}

void set_quiet(bool quiet) { g_quiet.store(quiet); }

void warn(const std::string& msg) {
  if (!g_quiet.load()) std::cerr << "[batchgfn] " << msg << "\n";
}

CholResult jittered_llt(const Eigen::MatrixXd& a, double scale,
                        const char* what) {
  if (a.rows() != a.cols()) throw InvalidArgument("jittered_llt: non-square input");
  if (scale <= 0.0) scale = 1.0;
  const double cap = 1e-4 * scale;
  double jitter = 0.0;
  Eigen::MatrixXd m = a;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
    const double next = (jitter == 0.0) ? 1e-8 * scale : jitter * 10.0;
    if (next > cap) {
      throw NumericalError(std::string("Cholesky of ") + what +
                           " failed after jitter escalation to " +
                           std::to_string(cap));
    }
    warn(std::string("jitter escalation on ") + what + ": " +
         std::to_string(next));
    m = a;
    m.diagonal().array() += next;
    jitter = next;
  }
}

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace batchgfn
