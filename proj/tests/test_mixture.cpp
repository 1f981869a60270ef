#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mixture.hpp"
#include "schedule.hpp"

using namespace difftv;

namespace {

const char* kAtomJson = R"({"dim":1,"support_radius":0.0,
  "components":[{"weight":1.0,"mean":0.0,"cov":0.0}]})";

const char* kUnitJson = R"({"dim":2,"support_radius":9.0,
  "components":[{"weight":1.0,"mean":[0.0,0.0],"cov":1.0}]})";

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("point atom: degenerate posterior closed forms") {
  const MixtureTarget atom = MixtureTarget::from_json_text(kAtomJson);
  const Schedule sched = Schedule::build({64, 1.5, 3.0});
  for (int t : {2, 11, 40, 64}) {
    const double om = 1.0 - sched.alpha_bar(t);
    for (double x : {-1.3, 0.2, 2.5}) {
      Eigen::VectorXd xv(1);
      xv << x;
      const MomentBundle m = moments(atom, sched, t, xv);
      CHECK(m.score[0] == doctest::Approx(-x / om).epsilon(1e-13));
      CHECK(m.noise_cov(0, 0) == doctest::Approx(x * x / om).epsilon(1e-13));
      CHECK(m.jac(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
      // degenerate posterior: the third-moment correction collapses to -|x|^2 x/(1-abar)^3
      CHECK(m.w_corr[0] == doctest::Approx(-x * x * x / (om * om * om)).epsilon(1e-12));
      // Gaussian peak: q_t = N(0, 1-abar)
      CHECK(m.q ==
            doctest::Approx(std::exp(-x * x / (2 * om)) / std::sqrt(2 * std::numbers::pi * om)).epsilon(1e-13));
    }
  }
}

TEST_CASE("single N(0,I): variance-preserving fixed point") {
  const MixtureTarget unit = MixtureTarget::from_json_text(kUnitJson);
  const Schedule sched = Schedule::build({64, 1.5, 3.0});
  const Eigen::VectorXd x = vec2(0.7, -1.1);
  for (int t : {2, 30, 64}) {
    const double a = sched.alpha_bar(t);
    const MomentBundle m = moments(unit, sched, t, x);
    CHECK((m.score + x).norm() == doctest::Approx(0.0).epsilon(1e-12));
    // noise_cov = abar I + (1-abar) x x^T
    const Eigen::MatrixXd expect =
        a * Eigen::MatrixXd::Identity(2, 2) + (1.0 - a) * x * x.transpose();
    CHECK((m.noise_cov - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));
    // jacobian collapses to (1-abar) I
    CHECK((m.jac - (1.0 - a) * Eigen::MatrixXd::Identity(2, 2)).norm() ==
          doctest::Approx(0.0).epsilon(1e-11));
    const double q_expect = std::exp(-x.squaredNorm() / 2.0) / (2 * std::numbers::pi);
    CHECK(m.q == doctest::Approx(q_expect).epsilon(1e-13));
  }
}

TEST_CASE("bundle identities on the 2-d three-component mixture") {
  const MixtureTarget target = MixtureTarget::from_json_file("configs/targets/gmm3_2d.json");
  const Schedule sched = Schedule::build({128, 1.5, 3.5});
  for (int t : {2, 17, 64, 128}) {
    const double om = 1.0 - sched.alpha_bar(t);
    for (double ax : {-2.0, 0.3, 1.7}) {
      const Eigen::VectorXd x = vec2(ax, 0.9 * ax - 0.4);
      const MomentBundle m = moments(target, sched, t, x);
      CHECK(m.q > 0.0);
      CHECK(m.posterior_weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((m.score * om + m.g).norm() == doctest::Approx(0.0).epsilon(1e-13));
      const Eigen::MatrixXd resid = m.jac - Eigen::MatrixXd::Identity(2, 2) + m.noise_cov -
                                    om * m.score * m.score.transpose();
      CHECK(resid.norm() == doctest::Approx(0.0).epsilon(1e-12));
      // noise_cov is symmetric PSD
      CHECK((m.noise_cov - m.noise_cov.transpose()).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.noise_cov);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
  }
}

TEST_CASE("finite-difference score of log q matches the closed form") {
  const MixtureTarget target = MixtureTarget::from_json_file("configs/targets/gmm3_2d.json");
  const Schedule sched = Schedule::build({128, 1.5, 3.5});
  const int t = 40;
  for (double ax : {-1.5, 0.2, 1.1}) {
    const Eigen::VectorXd x = vec2(ax, -0.5 * ax + 0.3);
    const MomentBundle m = moments(target, sched, t, x);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (std::log(marginal_density(target, sched, t, xp)) -
                         std::log(marginal_density(target, sched, t, xm))) /
                        (2 * h);
      CHECK(fd == doctest::Approx(m.score[j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("analytic Jacobian vs central differences of g") {
  const Schedule sched = Schedule::build({128, 1.5, 3.5});
  for (const char* path :
       {"configs/targets/gmm3_2d.json", "configs/targets/gmm2_1d.json"}) {
    const MixtureTarget target = MixtureTarget::from_json_file(path);
    for (int t : {3, 50, 128}) {
      Eigen::VectorXd x = Eigen::VectorXd::Constant(target.dim(), 0.4 * t / 128.0 - 0.9);
      const MomentBundle m = moments(target, sched, t, x);
      const Eigen::MatrixXd fd = score_jacobian_fd(target, sched, t, x);
      const double scale = std::max(1.0, m.jac.cwiseAbs().maxCoeff());
      CHECK((fd - m.jac).cwiseAbs().maxCoeff() / scale < 1e-6);
      // symmetry of the finite-difference Jacobian
      CHECK((fd - fd.transpose()).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("posterior weights are invariant under component relabeling") {
  const char* fwd = R"({"dim":1,"support_radius":8.0,"components":[
    {"weight":0.3,"mean":-1.0,"cov":0.2},{"weight":0.7,"mean":1.5,"cov":0.5}]})";
  const char* rev = R"({"dim":1,"support_radius":8.0,"components":[
    {"weight":0.7,"mean":1.5,"cov":0.5},{"weight":0.3,"mean":-1.0,"cov":0.2}]})";
  const MixtureTarget a = MixtureTarget::from_json_text(fwd);
  const MixtureTarget b = MixtureTarget::from_json_text(rev);
  const Schedule sched = Schedule::build({32, 1.5, 3.0});
  Eigen::VectorXd x(1);
  x << 0.4;
  const MomentBundle ma = moments(a, sched, 9, x);
  const MomentBundle mb = moments(b, sched, 9, x);
  CHECK(ma.q == doctest::Approx(mb.q).epsilon(1e-14));
  CHECK(ma.score[0] == doctest::Approx(mb.score[0]).epsilon(1e-14));
  CHECK(ma.w_corr[0] == doctest::Approx(mb.w_corr[0]).epsilon(1e-13));
  CHECK(ma.posterior_weights[0] == doctest::Approx(mb.posterior_weights[1]).epsilon(1e-14));
  CHECK(ma.posterior_weights[1] == doctest::Approx(mb.posterior_weights[0]).epsilon(1e-14));
}

TEST_CASE("v_apply: linearity and rank-1 atom case") {
  const MixtureTarget atom = MixtureTarget::from_json_text(kAtomJson);
  const Schedule sched = Schedule::build({64, 1.5, 3.0});
  Eigen::VectorXd x(1), z(1), zero(1);
  x << 1.2;
  z << -0.7;
  zero << 0.0;
  CHECK(v_apply(atom, sched, 10, x, zero)[0] == 0.0);
  const double om = 1.0 - sched.alpha_bar(10);
  CHECK(v_apply(atom, sched, 10, x, z)[0] ==
        doctest::Approx(x[0] * z[0] * x[0] / om).epsilon(1e-13));
}

TEST_CASE("scalar fast path agrees with the general path") {
  const MixtureTarget target = MixtureTarget::from_json_file("configs/targets/gmm2_1d.json");
  const Mixture1D mix = Mixture1D::from(target);
  const Schedule sched = Schedule::build({100, 1.0, 3.8});
  for (int t : {2, 13, 55, 100}) {
    const double a = sched.alpha_bar(t);
    for (double x = -6.0; x <= 6.0; x += 0.63) {
      Eigen::VectorXd xv(1);
      xv << x;
      const MomentBundle m = moments(target, sched, t, xv);
      const Bundle1D b = moments1d(mix, a, x);
      CHECK(b.q == doctest::Approx(m.q).epsilon(1e-13));
      CHECK(b.s == doctest::Approx(m.score[0]).epsilon(1e-13));
      CHECK(b.ncov == doctest::Approx(m.noise_cov(0, 0)).epsilon(1e-13));
      CHECK(b.jac == doctest::Approx(m.jac(0, 0)).epsilon(1e-12));
      CHECK(b.w3 == doctest::Approx(m.w_corr[0]).epsilon(1e-12));
      CHECK(density1d(mix, a, x) == doctest::Approx(m.q).epsilon(1e-13));
    }
  }
}

TEST_CASE("forward sampling moments") {
  const Schedule sched = Schedule::build({64, 1.5, 3.0});

  SUBCASE("point atom gives N(0, 1-abar)") {
    const MixtureTarget atom = MixtureTarget::from_json_text(kAtomJson);
    const int t = 20, n = 40000;
    const Eigen::MatrixXd s = sample_forward(atom, sched, t, n, 99);
    const double om = 1.0 - sched.alpha_bar(t);
    const double mean = s.col(0).mean();
    const double var = (s.col(0).array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(mean) < 4.0 * std::sqrt(om / n));
    CHECK(std::abs(var - om) < 4.0 * om * std::sqrt(2.0 / n));
  }

  SUBCASE("unit Gaussian is a fixed point at every t") {
    const MixtureTarget unit = MixtureTarget::from_json_text(kUnitJson);
    for (int t : {3, 40}) {
      const Eigen::MatrixXd s = sample_forward(unit, sched, t, 30000, 7);
      for (int j = 0; j < 2; ++j) {
        const double mean = s.col(j).mean();
        const double var = (s.col(j).array() - mean).square().sum() / (s.rows() - 1);
        CHECK(std::abs(mean) < 4.0 / std::sqrt(30000.0));
        CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / 30000.0));
      }
    }
  }

  SUBCASE("symmetric two-atom mixture has near-zero mean") {
    const char* two = R"({"dim":1,"support_radius":1.0,"components":[
      {"weight":0.5,"mean":-1.0,"cov":0.0},{"weight":0.5,"mean":1.0,"cov":0.0}]})";
    const MixtureTarget target = MixtureTarget::from_json_text(two);
    const Eigen::MatrixXd s = sample_forward(target, sched, 10, 20000, 3);
    CHECK(std::abs(s.col(0).mean()) < 4.0 / std::sqrt(20000.0));
  }

  SUBCASE("seeded determinism") {
    const MixtureTarget unit = MixtureTarget::from_json_text(kUnitJson);
    const Eigen::MatrixXd a = sample_forward(unit, sched, 11, 64, 42);
    const Eigen::MatrixXd b = sample_forward(unit, sched, 11, 64, 42);
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("target json validation") {
  CHECK_THROWS(MixtureTarget::from_json_text(R"({"dim":1,"components":[]})"));
  // weights must sum to one
  CHECK_THROWS(MixtureTarget::from_json_text(
      R"({"dim":1,"support_radius":1,"components":[{"weight":0.4,"mean":0,"cov":1}]})"));
  // covariance must be symmetric
  CHECK_THROWS(MixtureTarget::from_json_text(
      R"({"dim":2,"support_radius":1,"components":[
        {"weight":1.0,"mean":[0,0],"cov":[[1,0.5],[0.2,1]]}]})"));
  // atoms must respect the declared support radius
  CHECK_THROWS(MixtureTarget::from_json_text(
      R"({"dim":1,"support_radius":0.5,"components":[{"weight":1.0,"mean":2.0,"cov":0.0}]})"));
  // diagonal and full covariance forms parse
  CHECK_NOTHROW(MixtureTarget::from_json_file("configs/targets/gmm3_2d.json"));
  CHECK_NOTHROW(MixtureTarget::from_json_file("configs/targets/gmm2_1d.json"));
  CHECK_NOTHROW(MixtureTarget::from_json_file("configs/targets/point_atom_1d.json"));
}
