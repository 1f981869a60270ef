#include "oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace difftv {

namespace {

// One prior draw X_0 ~ p_data from the per-sample counter stream.
Eigen::VectorXd draw_x0(const MixtureTarget& target, std::uint64_t seed, int i) {
  const int d = target.dim();
  CounterRng rng(seed, StreamTag::Oracle, static_cast<std::uint64_t>(i));
  const auto& comps = target.components();
  double u = rng.uniform(0);
  int k = 0;
  double acc = comps[0].weight;
  while (k + 1 < static_cast<int>(comps.size()) && u > acc) acc += comps[++k].weight;
  Eigen::VectorXd z(d);
  for (int j = 0; j < d; ++j) z[j] = rng.normal(1 + static_cast<std::uint64_t>(j));
  return comps[k].mean + target.sqrt_cov(k) * z;
}

struct Accum {
  double sw = 0.0, sw2 = 0.0;
  Eigen::MatrixXd swf, sw2f, sw2f2;
  void init(int r, int c) {
    swf = Eigen::MatrixXd::Zero(r, c);
    sw2f = Eigen::MatrixXd::Zero(r, c);
    sw2f2 = Eigen::MatrixXd::Zero(r, c);
  }
  void add(double w, const Eigen::MatrixXd& f) {
    sw += w;
    sw2 += w * w;
    swf += w * f;
    sw2f += (w * w) * f;
    sw2f2 += (w * w) * f.cwiseProduct(f);
  }
  void merge(const Accum& o) {
    sw += o.sw;
    sw2 += o.sw2;
    swf += o.swf;
    sw2f += o.sw2f;
    sw2f2 += o.sw2f2;
  }
};

}  // namespace

OracleEstimate mc_conditional(const MixtureTarget& target, const Schedule& sched, int t,
                              const Eigen::VectorXd& x, OracleFunctional functional, int n,
                              std::uint64_t seed) {
  if (n < 10000) throw std::invalid_argument("mc_conditional: n must be >= 1e4");
  const int d = target.dim();
  if (x.size() != d) throw std::invalid_argument("mc_conditional: x has wrong dimension");
  const double a = sched.alpha_bar(t);
  const double sq = std::sqrt(a);
  const double om = 1.0 - a;

  // pass 1: max log-weight for a stable normalization
  double maxlog = -1e300;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x0 = draw_x0(target, seed, i);
    const double lw = -(x - sq * x0).squaredNorm() / (2.0 * om);
    maxlog = std::max(maxlog, lw);
  }

  // pass 2 (W_CORR only): plug-in score estimate from the same draws
  Eigen::VectorXd s_hat = Eigen::VectorXd::Zero(d);
  if (functional == OracleFunctional::WCorr) {
    double sw = 0.0;
    Eigen::VectorXd swg = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x0 = draw_x0(target, seed, i);
      const Eigen::VectorXd res = x - sq * x0;
      const double w = std::exp(-res.squaredNorm() / (2.0 * om) - maxlog);
      sw += w;
      swg += w * res;
    }
    s_hat = -(swg / sw) / om;
  }

  int rows = d, cols = 1;
  if (functional == OracleFunctional::NoiseCov) cols = d;
  if (functional == OracleFunctional::Moment1 || functional == OracleFunctional::Moment2) {
    rows = 1;
  }

  Accum acc;
  acc.init(rows, cols);
  Eigen::MatrixXd extra_se = Eigen::MatrixXd::Zero(rows, cols);  // s_hat sensitivity, W_CORR
  Eigen::MatrixXd e2_mat, ncov_mat;
  if (functional == OracleFunctional::WCorr) {
    e2_mat = Eigen::MatrixXd::Zero(1, 1);
    ncov_mat = Eigen::MatrixXd::Zero(d, d);
  }

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x0 = draw_x0(target, seed, i);
    const Eigen::VectorXd res = x - sq * x0;
    const double w = std::exp(-res.squaredNorm() / (2.0 * om) - maxlog);
    const Eigen::VectorXd wb = res / std::sqrt(om);
    Eigen::MatrixXd f(rows, cols);
    switch (functional) {
      case OracleFunctional::G:
        f = res;
        break;
      case OracleFunctional::NoiseCov:
        f = wb * wb.transpose();
        break;
      case OracleFunctional::WCorr: {
        const double n2 = wb.squaredNorm();
        f = n2 * wb / (om * std::sqrt(om)) + (n2 * s_hat + wb * wb.dot(s_hat)) / om;
        ncov_mat += w * wb * wb.transpose();
        e2_mat(0, 0) += w * n2;
        break;
      }
      case OracleFunctional::Moment1:
        f(0, 0) = res.norm();
        break;
      case OracleFunctional::Moment2:
        f(0, 0) = res.squaredNorm();
        break;
    }
    acc.add(w, f);
  }

  OracleEstimate est;
  est.value = acc.swf / acc.sw;
  // delta-method variance of the self-normalized mean
  Eigen::MatrixXd var = (acc.sw2f2 - 2.0 * est.value.cwiseProduct(acc.sw2f) +
                         acc.sw2 * est.value.cwiseProduct(est.value)) /
                        (acc.sw * acc.sw);
  est.std_error = var.cwiseMax(0.0).cwiseSqrt();

  if (functional == OracleFunctional::WCorr) {
    // propagate the plug-in score uncertainty: dw/ds = (E|W|^2 I + ncov)/(1-abar)
    const double e2 = e2_mat(0, 0) / acc.sw;
    const Eigen::MatrixXd ncov = ncov_mat / acc.sw;
    // SE(s_hat) ~= SE(G)/ (1-abar); reuse the G functional pass
    OracleEstimate g_est = mc_conditional(target, sched, t, x, OracleFunctional::G, n, seed);
    const Eigen::VectorXd se_s = g_est.std_error.col(0) / om;
    const Eigen::MatrixXd sens = (e2 * Eigen::MatrixXd::Identity(d, d) + ncov) / om;
    const Eigen::VectorXd prop = sens.cwiseAbs() * se_s;
    est.std_error =
        (est.std_error.cwiseProduct(est.std_error) + prop.cwiseProduct(prop)).cwiseSqrt();
  }

  est.n_effective = acc.sw * acc.sw / acc.sw2;
  est.reliable = est.n_effective >= 0.1 * n;
  return est;
}

SampleTvEstimate mc_sample_tv(std::span<const double> samples,
                              const std::function<double(double)>& q_density, int bins, double lo,
                              double hi) {
  if (samples.size() < 100000) throw std::invalid_argument("mc_sample_tv: n must be >= 1e5");
  if (bins < 2 || !(hi > lo)) throw std::invalid_argument("mc_sample_tv: bad binning");
  const double w = (hi - lo) / bins;
  const double n = static_cast<double>(samples.size());

  std::vector<long> counts(bins, 0);
  long inside = 0;
  for (double s : samples) {
    if (s < lo || s >= hi) continue;
    ++counts[static_cast<int>((s - lo) / w)];
    ++inside;
  }

  SampleTvEstimate out;
  double q_inside = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double l = lo + b * w;
    const double ql = q_density(l), qm = q_density(l + 0.5 * w), qr = q_density(l + w);
    const double qbar = (ql + 4.0 * qm + qr) / 6.0;  // Simpson average over the bin
    const double pb = counts[b] / (n * w);
    out.estimate += 0.5 * std::abs(pb - qbar) * w;
    out.bias_bound += 0.5 * (std::max({ql, qm, qr}) - std::min({ql, qm, qr})) * w;
    const double mass = qbar * w;
    out.std_error += 0.5 * std::sqrt(std::max(mass * (1.0 - mass), 0.0) / n);
    q_inside += qbar * w;
  }
  const double p_out = 1.0 - inside / n;
  const double q_out = std::max(0.0, 1.0 - q_inside);
  out.estimate += 0.5 * std::abs(p_out - q_out);
  return out;
}

}  // namespace difftv
