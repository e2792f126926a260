#pragma once

#include "iossnet/model.hpp"

#include <map>
#include <string>

namespace iossnet {

/// Solution of the subsystem LMI at every grid point:
/// ||dx+||_P^2 <= eta ||dx||_P^2 + ||dw||_Q^2 + ||dy||_R^2 + ||dz||_G^2.
struct LmiCertificate {
  std::string class_name;
  double eta_tilde = 0.5;
  Matrix P;
  Matrix Q;
  Matrix R;
  Matrix G;
  double margin = 0.0;          ///< every grid block is <= -margin * I
  Index grid_points = 0;
  double off_grid_worst = 0.0;  ///< worst sampled off-grid lambda_max (not certified)
  double objective = 0.0;       ///< lambda_max(G) bound reached by the solver
};

/// Coupling gains of one node, one entry per neighbor in coupling order.
struct NodeGains {
  std::vector<Index> neighbors;
  std::vector<double> gamma;    ///< Lyapunov form, weighted by the neighbor's P
  std::vector<double> g_tilde;  ///< squared-norm form
  std::vector<double> g;        ///< trajectory form, sqrt(g_tilde / lambda_min(P_i))
  bool decoupled = false;
};

/// Trajectory-form (time-discounted) detectability bound of one subsystem.
struct SubsystemIossCertificate {
  double eta = 0.5;
  double p_gain = 1.0;
  double q_gain = 1.0;
  double r_gain = 1.0;
  std::map<Index, double> g;  ///< neighbor index -> g_ij

  void validate() const;
};

/// Quadratic incremental Lyapunov function of one subsystem.
struct SubsystemLyapCertificate {
  double lambda = 0.5;
  Matrix P1;
  Matrix P2;
  Matrix Q;
  Matrix R;
  std::map<Index, double> gamma;  ///< neighbor index -> gamma_ij

  void validate() const;
};

}  // namespace iossnet
