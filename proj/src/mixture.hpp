#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "schedule.hpp"

namespace difftv {

struct MixtureComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // zero matrix encodes a point atom
};

// Target data distribution: weighted Gaussian components (possibly point
// atoms) with a declared support radius kept as metadata.
class MixtureTarget {
 public:
  MixtureTarget(int dim, std::vector<MixtureComponent> components, double support_radius);

  static MixtureTarget from_json_text(const std::string& text);
  static MixtureTarget from_json_file(const std::string& path);

  int dim() const { return dim_; }
  double support_radius() const { return support_radius_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  const Eigen::MatrixXd& sqrt_cov(int k) const { return sqrt_cov_[k]; }

 private:
  int dim_;
  std::vector<MixtureComponent> components_;
  double support_radius_;
  std::vector<Eigen::MatrixXd> sqrt_cov_;  // symmetric PSD square roots, for sampling
};

// Exact conditional quantities of the forward process at (t, x), all derived
// from the per-component Gaussian conditioning
//   X_t | k ~ N(sqrt(abar) mu_k, abar Sigma_k + (1-abar) I),
//   X_0 | (X_t = x, k) ~ N(m_k, C_k),
//   Wbar | (X_t = x, k) ~ N(a_k, B_k),  a_k = (x - sqrt(abar) m_k)/sqrt(1-abar),
//                                       B_k = abar C_k / (1-abar).
struct MomentBundle {
  int t = 0;
  Eigen::VectorXd x;
  double q = 0.0;                    // marginal density q_t(x)
  Eigen::VectorXd posterior_weights;
  Eigen::VectorXd g;                 // E[x - sqrt(abar) X_0 | X_t = x]
  Eigen::VectorXd score;             // -g / (1 - abar)
  Eigen::MatrixXd noise_cov;         // E[Wbar Wbar^T | X_t = x]
  Eigen::MatrixXd jac;               // I + (1-abar) score score^T - noise_cov
  Eigen::VectorXd w_corr;            // third-moment correction driving the accelerated ODE
};

MomentBundle moments(const MixtureTarget& target, const Schedule& sched, int t,
                     const Eigen::VectorXd& x);

double marginal_density(const MixtureTarget& target, const Schedule& sched, int t,
                        const Eigen::VectorXd& x);

// noise_cov * z
Eigen::VectorXd v_apply(const MixtureTarget& target, const Schedule& sched, int t,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& z);

// Central-difference Jacobian of g_t at x. h <= 0 selects 1e-5 * (1 + |x|_inf).
Eigen::MatrixXd score_jacobian_fd(const MixtureTarget& target, const Schedule& sched, int t,
                                  const Eigen::VectorXd& x, double h = 0.0);

// n i.i.d. draws of X_t = sqrt(abar) X_0 + sqrt(1-abar) Wbar, one row per draw.
Eigen::MatrixXd sample_forward(const MixtureTarget& target, const Schedule& sched, int t, int n,
                               std::uint64_t seed);

// Scalar fast path for the d=1 density engines; cross-checked against the
// general path in the test suite.
struct Mixture1D {
  std::vector<double> w, mu, var;
  static Mixture1D from(const MixtureTarget& target);
};

struct Bundle1D {
  double q, s, ncov, jac, w3;
};

Bundle1D moments1d(const Mixture1D& mix, double alpha_bar, double x);
double density1d(const Mixture1D& mix, double alpha_bar, double x);

}  // namespace difftv
