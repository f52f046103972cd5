#pragma once

#include <random>

#include "noon/hilbert.hpp"
#include "noon/model.hpp"
#include "noon/protocol.hpp"

namespace testing {

using noon::CMat;
using noon::CVec;
using noon::cplx;

// Device with both qubits parked above the coupler, as used by every
// experiment config shipped with the tool.
inline noon::DeviceModel parked_device() {
  noon::DeviceModel d = noon::default_device();
  d.qubits["q0"].f_ge_idle = 7.5;
  d.qubits["q1"].f_ge_idle = 7.45;
  return d;
}

inline CMat random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<CMat> qr(z);
  return qr.householderQ() * CMat::Identity(n, n);
}

inline CVec random_pure(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v.normalized();
}

// Random full-rank density matrix.
inline CMat random_density(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = cplx(g(rng), g(rng));
  CMat r = z * z.adjoint();
  return r / r.trace().real();
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

inline CVec noon_vector(int N, int levels) {
  CVec v = CVec::Zero(levels * levels);
  v(N * levels) = 1.0 / std::sqrt(2.0);
  v(N) = 1.0 / std::sqrt(2.0);
  return v;
}

// Calibrations are slow enough to share across test cases.
inline const noon::CalibrationTable& shared_calibration() {
  static const noon::CalibrationTable table = [] {
    noon::CalibrationTable t;
    for (int N = 1; N <= 3; ++N) {
      noon::ProtocolSpec s;
      s.N = N;
      t = noon::calibrate_for(parked_device(), s, t);
    }
    return t;
  }();
  return table;
}

}  // namespace testing
