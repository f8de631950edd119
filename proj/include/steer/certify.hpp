#pragma once

#include <string>

#include "steer/flow.hpp"

namespace steer {

/// Sample lattice over [t0, T] x box. Time samples are uniform; each state
/// axis gets `n_x` uniform samples between lower and upper.
struct SampleBox {
  double t0 = 0.0;
  double T = 1.0;
  int n_t = 201;
  Vector lower;
  Vector upper;
  int n_x = 21;

  /// Throws kSchema for empty ranges or sample counts below 2.
  void validate(int d) const;
};

enum class CertificateKind { kBracket, kFullyActuated, kStmBound };

const char* to_string(CertificateKind kind);

struct Certificate {
  CertificateKind kind = CertificateKind::kBracket;
  double value = 0.0;       // infimum, floor or worst ratio
  double threshold = 0.0;
  double margin = 0.0;      // value - threshold (threshold - value for the STM ratio)
  bool passed = false;
  double arg_t = 0.0;       // lattice point attaining the value
  Vector arg_x;
  double sampled_lipschitz = 0.0;  // max slope between neighbouring lattice points
  std::string note;
};

/// inf over the lattice of |det(B_t, D_x N_t(x) B_t - B_t')| for planar
/// systems with a scalar, state-independent input. Passes when the infimum
/// exceeds `threshold` (default: strictly positive).
Certificate bracket_infimum(const SystemModel& system, const SampleBox& box,
                            double threshold = 0.0);

/// Coercivity floor exp(-2 Lambda1 (T - t0)) |b|_1^2 / (T - t0) with b(t) the
/// smallest singular value of B_t(x) over the state samples at each time.
Certificate fully_actuated_floor(const SystemModel& system, const SampleBox& box, double lambda1);

/// max_j |R_u(T,t_j)| exp(-(Lambda1 + L_B |u|_inf)(T - t_j)); passes when
/// at most 1 + 1e-6.
Certificate stm_bound_audit(const SystemModel& system, const ControlSignal& u,
                            const Trajectory& traj, const StmField& stm,
                            std::optional<SystemBounds> bounds);

}  // namespace steer
