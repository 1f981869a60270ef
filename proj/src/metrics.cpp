#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difftv {

namespace {

void require_same_grid(const DensityGrid& p, const DensityGrid& q) {
  if (p.n() != q.n() || p.lo != q.lo || p.hi != q.hi) {
    throw std::invalid_argument("metrics: grids do not match");
  }
}

double trapezoid(const std::vector<double>& f, double h) {
  double acc = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i];
  return acc * h;
}

}  // namespace

TvResult tv_distance(const DensityGrid& p, const DensityGrid& q) {
  require_same_grid(p, q);
  std::vector<double> diff(p.n());
  for (int i = 0; i < p.n(); ++i) diff[i] = std::abs(p.values[i] - q.values[i]);
  TvResult r;
  r.raw = 0.5 * trapezoid(diff, p.step());
  r.corrected = r.raw + 0.5 * (p.leaked_mass_bound + q.leaked_mass_bound);
  return r;
}

KlResult kl_divergence(const DensityGrid& q, const DensityGrid& p) {
  require_same_grid(p, q);
  constexpr double kFloor = 1e-300;
  std::vector<double> integrand(p.n());
  KlResult r;
  std::vector<double> clamped(p.n(), 0.0);
  for (int i = 0; i < p.n(); ++i) {
    const double qi = q.values[i];
    if (qi <= 0.0) {
      integrand[i] = 0.0;
      continue;
    }
    const double pi = p.values[i];
    if (pi < kFloor) clamped[i] = qi;
    integrand[i] = qi * std::log(qi / std::max(pi, kFloor));
  }
  r.value = trapezoid(integrand, p.step());
  r.clamped_mass = trapezoid(clamped, p.step());
  if (r.value < -1e-10) {
    throw std::runtime_error("kl_divergence: negative value " + std::to_string(r.value) +
                             " signals quadrature breakdown");
  }
  return r;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
  for (const auto& [T, tv] : points) {
    if (!(tv > 0.0)) throw std::invalid_argument("fit_rate: TV values must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("fit_rate: T values must be positive");
  }

  auto fit_on = [](const std::vector<std::pair<double, double>>& pts) {
    const std::size_t n = pts.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [T, tv] : pts) {
      const double x = std::log(T), y = std::log(tv);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    RateFit f;
    const double det = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
    double rss = 0.0;
    for (const auto& [T, tv] : pts) {
      const double r = std::log(tv) - (f.intercept + f.slope * std::log(T));
      rss += r * r;
    }
    f.residual_rms = std::sqrt(rss / n);
    return f;
  };

  std::vector<std::pair<double, double>> pts = points;
  std::sort(pts.begin(), pts.end());
  RateFit fit = fit_on(pts);
  if (pts.size() >= 4) {
    const double r0 =
        std::abs(std::log(pts.front().second) -
                 (fit.intercept + fit.slope * std::log(pts.front().first)));
    if (fit.residual_rms > 0.0 && r0 > 3.0 * fit.residual_rms) {
      std::vector<std::pair<double, double>> rest(pts.begin() + 1, pts.end());
      fit = fit_on(rest);
      fit.excluded_smallest = true;
    }
  }
  return fit;
}

bool pinsker_ok(double tv, double kl) { return tv <= std::sqrt(0.5 * kl) + kPinskerSlack; }

bool pinsker_check(ConvergenceReport& report) {
  bool ok = true;
  for (const auto& row : report.rows) ok = ok && pinsker_ok(row.tv_corrected, row.kl);
  report.pinsker_all_ok = ok;
  return ok;
}

}  // namespace difftv
