#pragma once

#include <iosfwd>
#include <vector>

namespace difftv {

struct ScheduleParams {
  int T = 0;
  double c0 = 2.0;
  double c1 = 4.0;
};

// Variance-preserving learning-rate schedule:
//   beta_1 = T^-c0,
//   beta_t = (c1 ln T / T) * min{ beta_1 (1 + c1 ln T / T)^t , 1 }   for t >= 2.
// Natural logarithm throughout. Arrays are 1-indexed by step; slot 0 is unused.
class Schedule {
 public:
  // Throws std::invalid_argument when T < 2, c0 <= 0, c1 <= 0, or
  // c1 ln(T)/T >= 1/2 (the schedule could not keep alpha_t >= 1/2).
  static Schedule build(const ScheduleParams& params);

  // Derived arrays from externally supplied rates (slot 0 unused, size T+1).
  // Only beta_t in (0,1) is enforced; verify_properties reports the rest.
  static Schedule from_rates(const ScheduleParams& params, const std::vector<double>& beta);

  int T() const { return params_.T; }
  const ScheduleParams& params() const { return params_; }
  double rate_cap() const { return eta_; }  // c1 ln T / T

  double beta(int t) const { return beta_[check(t)]; }
  double alpha(int t) const { return alpha_[check(t)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t)]; }
  double sigma_sq(int t) const { return sigma_sq_[check(t)]; }
  double sigma(int t) const;

  // Columns: t,beta,alpha,alpha_bar,sigma_sq
  void write_csv(std::ostream& os) const;

  struct PropertyCheck {
    bool pass = false;
    double margin = 0.0;  // smallest slack across steps; negative when failing
  };
  // The four learning-rate properties, reported with worst-case margins:
  //  a: alpha_t >= 1 - c1 ln T / T >= 1/2
  //  b: (1-alpha_t)/(1-alpha_bar_{t-1}) <= 4 c1 ln T / T        (t >= 2)
  //  c: 1 <= (1-alpha_bar_t)/(1-alpha_bar_{t-1}) <= 1 + 4 c1 ln T / T
  //  d: alpha_bar_T <= (1 - c1 ln T / T)^{T/2}
  struct PropertyReport {
    PropertyCheck a, b, c, d;
    bool all_pass() const { return a.pass && b.pass && c.pass && d.pass; }
  };
  PropertyReport verify_properties() const;

 private:
  Schedule() = default;
  int check(int t) const;

  ScheduleParams params_;
  double eta_ = 0.0;
  std::vector<double> beta_, alpha_, alpha_bar_, sigma_sq_;
};

}  // namespace difftv
