#include "mixture.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rng.hpp"

namespace difftv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool is_zero_matrix(const Eigen::MatrixXd& m) { return m.isZero(0.0); }

}  // namespace

MixtureTarget::MixtureTarget(int dim, std::vector<MixtureComponent> components,
                             double support_radius)
    : dim_(dim), components_(std::move(components)), support_radius_(support_radius) {
  if (dim_ < 1) throw std::invalid_argument("target: dim must be >= 1");
  if (components_.empty()) throw std::invalid_argument("target: need at least one component");

  double wsum = 0.0;
  bool all_atoms = true;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("target: weights must be positive");
    wsum += c.weight;
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_) {
      throw std::invalid_argument("target: component dimensions do not match dim");
    }
    if (!c.cov.isApprox(c.cov.transpose(), 1e-12)) {
      throw std::invalid_argument("target: covariance must be symmetric");
    }
    if (!is_zero_matrix(c.cov)) all_atoms = false;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("target: weights must sum to 1, got " + std::to_string(wsum));
  }
  if (all_atoms) {
    for (const auto& c : components_) {
      if (c.mean.norm() > support_radius_ + 1e-12) {
        throw std::invalid_argument("target: atom outside declared support radius");
      }
    }
  }

  sqrt_cov_.reserve(components_.size());
  for (const auto& c : components_) {
    if (is_zero_matrix(c.cov)) {
      sqrt_cov_.push_back(Eigen::MatrixXd::Zero(dim_, dim_));
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw std::invalid_argument("target: covariance must be PSD");
    }
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    sqrt_cov_.push_back(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
  }
}

MixtureTarget MixtureTarget::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const int dim = j.at("dim").get<int>();
  const double radius = j.value("support_radius", 0.0);
  std::vector<MixtureComponent> comps;
  for (const auto& jc : j.at("components")) {
    MixtureComponent c;
    c.weight = jc.at("weight").get<double>();
    c.mean = Eigen::VectorXd::Zero(dim);
    if (jc.at("mean").is_number()) {
      if (dim != 1) throw std::invalid_argument("target json: scalar mean needs dim == 1");
      c.mean[0] = jc.at("mean").get<double>();
    } else {
      const auto v = jc.at("mean").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != dim) throw std::invalid_argument("target json: bad mean size");
      for (int i = 0; i < dim; ++i) c.mean[i] = v[i];
    }
    // cov: scalar (isotropic), vector (diagonal), or full row-major matrix
    const auto& jv = jc.at("cov");
    c.cov = Eigen::MatrixXd::Zero(dim, dim);
    if (jv.is_number()) {
      c.cov = jv.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
    } else if (jv.is_array() && !jv.empty() && jv[0].is_number()) {
      const auto v = jv.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != dim) throw std::invalid_argument("target json: bad diag cov size");
      for (int i = 0; i < dim; ++i) c.cov(i, i) = v[i];
    } else {
      const auto rows = jv.get<std::vector<std::vector<double>>>();
      if (static_cast<int>(rows.size()) != dim) throw std::invalid_argument("target json: bad cov rows");
      for (int i = 0; i < dim; ++i) {
        if (static_cast<int>(rows[i].size()) != dim)
          throw std::invalid_argument("target json: bad cov cols");
        for (int k = 0; k < dim; ++k) c.cov(i, k) = rows[i][k];
      }
    }
    comps.push_back(std::move(c));
  }
  return MixtureTarget(dim, std::move(comps), radius);
}

MixtureTarget MixtureTarget::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("target: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

MomentBundle moments(const MixtureTarget& target, const Schedule& sched, int t,
                     const Eigen::VectorXd& x) {
  const int d = target.dim();
  if (x.size() != d) throw std::invalid_argument("moments: x has wrong dimension");
  const double a = sched.alpha_bar(t);
  const double sq = std::sqrt(a);
  const double om = 1.0 - a;  // strictly positive for every t >= 1
  const auto& comps = target.components();
  const int K = static_cast<int>(comps.size());

  Eigen::VectorXd logw(K);
  std::vector<Eigen::VectorXd> a_k(K);
  std::vector<Eigen::MatrixXd> B_k(K);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd S = a * comps[k].cov + om * I;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("moments: component covariance not PD at t=" + std::to_string(t));
    }
    const Eigen::VectorXd delta = x - sq * comps[k].mean;
    const Eigen::VectorXd Sinv_delta = llt.solve(delta);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    logw[k] = std::log(comps[k].weight) -
              0.5 * (d * kLog2Pi + logdet + delta.dot(Sinv_delta));

    const Eigen::VectorXd m = comps[k].mean + sq * comps[k].cov * Sinv_delta;
    const Eigen::MatrixXd C = comps[k].cov - a * comps[k].cov * llt.solve(comps[k].cov);
    a_k[k] = (x - sq * m) / std::sqrt(om);
    B_k[k] = (a / om) * C;
  }

  // posterior weights in log-space with max subtraction
  const double M = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - M).exp();
  const double Z = w.sum();
  MomentBundle out;
  out.t = t;
  out.x = x;
  out.q = Z * std::exp(M);
  out.posterior_weights = w / Z;

  Eigen::VectorXd Ea = Eigen::VectorXd::Zero(d);       // E[Wbar | x]
  Eigen::MatrixXd ncov = Eigen::MatrixXd::Zero(d, d);  // E[Wbar Wbar^T | x]
  Eigen::VectorXd e3 = Eigen::VectorXd::Zero(d);       // E[|Wbar|^2 Wbar | x]
  for (int k = 0; k < K; ++k) {
    const double wk = out.posterior_weights[k];
    Ea += wk * a_k[k];
    ncov += wk * (B_k[k] + a_k[k] * a_k[k].transpose());
    // Gaussian third moment: E[|W|^2 W] = (tr B + |a|^2) a + 2 B a for W ~ N(a, B)
    e3 += wk * ((B_k[k].trace() + a_k[k].squaredNorm()) * a_k[k] + 2.0 * B_k[k] * a_k[k]);
  }

  out.g = std::sqrt(om) * Ea;
  out.score = -out.g / om;
  out.noise_cov = ncov;
  out.jac = I + om * out.score * out.score.transpose() - ncov;
  out.w_corr = e3 / (om * std::sqrt(om)) +
               (ncov.trace() * out.score + ncov * out.score) / om;
  return out;
}

double marginal_density(const MixtureTarget& target, const Schedule& sched, int t,
                        const Eigen::VectorXd& x) {
  return moments(target, sched, t, x).q;
}

Eigen::VectorXd v_apply(const MixtureTarget& target, const Schedule& sched, int t,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  return moments(target, sched, t, x).noise_cov * z;
}

Eigen::MatrixXd score_jacobian_fd(const MixtureTarget& target, const Schedule& sched, int t,
                                  const Eigen::VectorXd& x, double h) {
  const int d = target.dim();
  if (h <= 0.0) h = 1e-5 * (1.0 + x.lpNorm<Eigen::Infinity>());
  Eigen::MatrixXd J(d, d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (moments(target, sched, t, xp).g - moments(target, sched, t, xm).g) / (2.0 * h);
  }
  return J;
}

Eigen::MatrixXd sample_forward(const MixtureTarget& target, const Schedule& sched, int t, int n,
                               std::uint64_t seed) {
  const int d = target.dim();
  const double a = sched.alpha_bar(t);
  const double sq = std::sqrt(a);
  const double sn = std::sqrt(1.0 - a);
  const auto& comps = target.components();

  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, StreamTag::Forward, static_cast<std::uint64_t>(i));
    double u = rng.uniform(0);
    int k = 0;
    double acc = comps[0].weight;
    while (k + 1 < static_cast<int>(comps.size()) && u > acc) acc += comps[++k].weight;

    Eigen::VectorXd z0(d), zw(d);
    for (int j = 0; j < d; ++j) {
      z0[j] = rng.normal(1 + static_cast<std::uint64_t>(j));
      zw[j] = rng.normal(1 + static_cast<std::uint64_t>(d + j));
    }
    const Eigen::VectorXd x0 = comps[k].mean + target.sqrt_cov(k) * z0;
    out.row(i) = (sq * x0 + sn * zw).transpose();
  }
  return out;
}

Mixture1D Mixture1D::from(const MixtureTarget& target) {
  if (target.dim() != 1) throw std::invalid_argument("Mixture1D: target must be 1-d");
  Mixture1D m;
  for (const auto& c : target.components()) {
    m.w.push_back(c.weight);
    m.mu.push_back(c.mean[0]);
    m.var.push_back(c.cov(0, 0));
  }
  return m;
}

Bundle1D moments1d(const Mixture1D& mix, double a, double x) {
  const int K = static_cast<int>(mix.w.size());
  const double sq = std::sqrt(a);
  const double om = 1.0 - a;
  double logw[16];
  double ak[16], Bk[16];
  if (K > 16) throw std::invalid_argument("moments1d: at most 16 components");

  double M = -1e300;
  for (int k = 0; k < K; ++k) {
    const double S = a * mix.var[k] + om;
    const double delta = x - sq * mix.mu[k];
    logw[k] = std::log(mix.w[k]) - 0.5 * (kLog2Pi + std::log(S) + delta * delta / S);
    const double m = mix.mu[k] + sq * mix.var[k] / S * delta;
    const double C = mix.var[k] * om / S;
    ak[k] = (x - sq * m) / std::sqrt(om);
    Bk[k] = a / om * C;
    M = std::max(M, logw[k]);
  }
  double Z = 0.0;
  for (int k = 0; k < K; ++k) {
    logw[k] = std::exp(logw[k] - M);
    Z += logw[k];
  }

  double Ea = 0.0, ncov = 0.0, e3 = 0.0;
  for (int k = 0; k < K; ++k) {
    const double wk = logw[k] / Z;
    Ea += wk * ak[k];
    ncov += wk * (Bk[k] + ak[k] * ak[k]);
    e3 += wk * ((Bk[k] + ak[k] * ak[k]) * ak[k] + 2.0 * Bk[k] * ak[k]);
  }

  Bundle1D b;
  b.q = Z * std::exp(M);
  b.s = -std::sqrt(om) * Ea / om;
  b.ncov = ncov;
  b.jac = 1.0 + om * b.s * b.s - ncov;
  b.w3 = e3 / (om * std::sqrt(om)) + 2.0 * ncov * b.s / om;
  return b;
}

double density1d(const Mixture1D& mix, double a, double x) {
  const double sq = std::sqrt(a);
  const double om = 1.0 - a;
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.w.size(); ++k) {
    const double S = a * mix.var[k] + om;
    const double delta = x - sq * mix.mu[k];
    acc += mix.w[k] * std::exp(-0.5 * delta * delta / S) / std::sqrt(2.0 * std::numbers::pi * S);
  }
  return acc;
}

}  // namespace difftv
