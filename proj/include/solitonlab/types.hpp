#pragma once

#include <stdexcept>
#include <string>

#include "numerics.hpp"

namespace solitonlab {

// Exponent of the nonlinearity |u|^{p-1}u and the standing-wave frequency.
struct Params {
  double p = 3.0;
  double omega = 1.0;

  Params() = default;
  Params(double p_, double omega_ = 1.0) : p(p_), omega(omega_) {
    if (!(p > 1.0 && p < 5.0)) throw std::invalid_argument("exponent p must lie in (1, 5)");
    if (!(omega > 0.0)) throw std::invalid_argument("frequency omega must be positive");
  }
};

enum class XiNormalization { darboux, symplectic };
enum class ModeMethod { evans, birman_schwinger };

inline std::string to_string(ModeMethod m) {
  return m == ModeMethod::evans ? "evans" : "birman_schwinger";
}
inline std::string to_string(XiNormalization t) {
  return t == XiNormalization::darboux ? "darboux" : "symplectic";
}

// Discrete eigenpair (i lambda, xi) of the linearization at omega = 1.
// xi.v1 holds the real first component, xi.v2 = i * Im xi_2.
struct InternalMode {
  Params params;
  double lambda = 1.0;
  double alpha = 0.0;
  Field2 xi;
  bool has_xi = false;
  XiNormalization normalization = XiNormalization::darboux;
  ModeMethod method = ModeMethod::birman_schwinger;
  double eigen_residual = 0.0;   // |L xi - i lambda xi| / |xi| on the interior
  double reality_residual = 0.0; // size of the discarded imaginary/real parts
  int iterations = 0;
};

}  // namespace solitonlab
