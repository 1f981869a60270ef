#include "schedule.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace difftv {

Schedule Schedule::build(const ScheduleParams& params) {
  if (params.T < 2) {
    throw std::invalid_argument("schedule: T must be >= 2, got " + std::to_string(params.T));
  }
  if (!(params.c0 > 0.0) || !(params.c1 > 0.0)) {
    throw std::invalid_argument("schedule: c0 and c1 must be positive");
  }
  const int T = params.T;
  const double eta = params.c1 * std::log(static_cast<double>(T)) / T;
  if (eta >= 0.5) {
    throw std::invalid_argument(
        "schedule: c1*log(T)/T = " + std::to_string(eta) +
        " >= 1/2; alpha_t >= 1/2 is unachievable (lower c1 or raise T)");
  }

  Schedule s;
  s.params_ = params;
  s.eta_ = eta;
  s.beta_.assign(T + 1, 0.0);
  s.alpha_.assign(T + 1, 0.0);
  s.alpha_bar_.assign(T + 1, 0.0);
  s.sigma_sq_.assign(T + 1, 0.0);

  s.beta_[1] = std::pow(static_cast<double>(T), -params.c0);
  for (int t = 2; t <= T; ++t) {
    const double ramp = s.beta_[1] * std::pow(1.0 + eta, t);
    s.beta_[t] = eta * std::min(ramp, 1.0);
  }

  long double prod = 1.0L;  // extended precision for the running product
  for (int t = 1; t <= T; ++t) {
    s.alpha_[t] = 1.0 - s.beta_[t];
    prod *= static_cast<long double>(s.alpha_[t]);
    s.alpha_bar_[t] = static_cast<double>(prod);
    s.sigma_sq_[t] = 1.0 / s.alpha_[t] - 1.0;
  }
  return s;
}

Schedule Schedule::from_rates(const ScheduleParams& params, const std::vector<double>& beta) {
  if (params.T < 2) throw std::invalid_argument("schedule: T must be >= 2");
  if (beta.size() != static_cast<std::size_t>(params.T) + 1) {
    throw std::invalid_argument("schedule: beta must have T+1 entries (slot 0 unused)");
  }
  Schedule s;
  s.params_ = params;
  s.eta_ = params.c1 * std::log(static_cast<double>(params.T)) / params.T;
  s.beta_ = beta;
  s.alpha_.assign(params.T + 1, 0.0);
  s.alpha_bar_.assign(params.T + 1, 0.0);
  s.sigma_sq_.assign(params.T + 1, 0.0);
  long double prod = 1.0L;
  for (int t = 1; t <= params.T; ++t) {
    if (!(beta[t] > 0.0 && beta[t] < 1.0)) {
      throw std::invalid_argument("schedule: beta_t must lie in (0,1)");
    }
    s.alpha_[t] = 1.0 - beta[t];
    prod *= static_cast<long double>(s.alpha_[t]);
    s.alpha_bar_[t] = static_cast<double>(prod);
    s.sigma_sq_[t] = 1.0 / s.alpha_[t] - 1.0;
  }
  return s;
}

double Schedule::sigma(int t) const { return std::sqrt(sigma_sq_[check(t)]); }

int Schedule::check(int t) const {
  if (t < 1 || t > params_.T) {
    throw std::out_of_range("schedule: step index " + std::to_string(t) +
                            " outside [1," + std::to_string(params_.T) + "]");
  }
  return t;
}

void Schedule::write_csv(std::ostream& os) const {
  os << "t,beta,alpha,alpha_bar,sigma_sq\n";
  char buf[160];
  for (int t = 1; t <= params_.T; ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", t, beta_[t], alpha_[t],
                  alpha_bar_[t], sigma_sq_[t]);
    os << buf;
  }
}

Schedule::PropertyReport Schedule::verify_properties() const {
  const int T = params_.T;
  const double eta = eta_;
  PropertyReport r;

  double ma = std::min(1.0 - eta - 0.5, 1e300);
  for (int t = 1; t <= T; ++t) ma = std::min(ma, alpha_[t] - (1.0 - eta));
  r.a = {ma >= 0.0, ma};

  double mb = 1e300;
  double mc = 1e300;
  for (int t = 2; t <= T; ++t) {
    const double prev = 1.0 - alpha_bar_[t - 1];
    mb = std::min(mb, 4.0 * eta - beta_[t] / prev);
    const double ratio = (1.0 - alpha_bar_[t]) / prev;
    mc = std::min(mc, std::min(ratio - 1.0, 1.0 + 4.0 * eta - ratio));
  }
  r.b = {mb >= 0.0, mb};
  r.c = {mc >= 0.0, mc};

  const double bound = std::pow(1.0 - eta, T / 2.0);
  const double md = bound - alpha_bar_[T];
  r.d = {md >= 0.0, md};
  return r;
}

}  // namespace difftv
