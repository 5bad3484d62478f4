#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "mtgpk/base_kernels.hpp"
#include "mtgpk/bnn_sim.hpp"
#include "mtgpk/multitask_kernels.hpp"
#include "mtgpk/rng.hpp"

using namespace mtgpk;

namespace {

Eigen::VectorXd vec1(double a) { return Eigen::VectorXd::Constant(1, a); }

BaseKernelSpec erf_base(double sigma_u = 1.0, double bias_var = 1.0) {
  BaseKernelSpec b;
  b.activation = Activation::Erf;
  b.sigma_u = Eigen::VectorXd::Constant(1, sigma_u);
  b.input_bias_var = bias_var;
  return b;
}

TaskCovariance omega_08() {
  Eigen::MatrixXd L(2, 2);
  L << 1.0, 0.0, 0.8, 0.6;  // L L^T = [[1, .8], [.8, 1]]
  return TaskCovariance::from_factor(L);
}

std::vector<Probe> two_task_probes() {
  std::vector<Probe> pts;
  for (double g : {-1.0, 0.0, 1.0})
    for (int t : {0, 1}) pts.push_back(Probe{vec1(g), t});
  return pts;
}

double entry_se(const Eigen::MatrixXd& K, int i, int j, long n) {
  return std::sqrt((K(i, i) * K(j, j) + K(i, j) * K(i, j)) /
                   static_cast<double>(n));
}

}  // namespace

TEST_CASE("sampled networks are deterministic in the seed") {
  SingleLayerNet net{16, erf_base(), omega_08(), 0.2};
  NetworkSample a = sample_network(net, 1, 99);
  NetworkSample b = sample_network(net, 1, 99);
  CHECK(a.input_weights[0] == b.input_weights[0]);
  CHECK(a.output_weights == b.output_weights);
  CHECK(a.output_bias == b.output_bias);
  NetworkSample c = sample_network(net, 1, 100);
  CHECK(a.output_weights != c.output_weights);
}

TEST_CASE("zero bias constant draws exactly zero biases") {
  SingleLayerNet net{8, erf_base(), omega_08(), 0.0};
  NetworkSample s = sample_network(net, 1, 5);
  CHECK(s.output_bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("output weight rows carry the imposed task correlation") {
  // One wide draw: the empirical correlation over hidden units approaches
  // the 0.8 set by the factor.
  SingleLayerNet net{100000, erf_base(), omega_08(), 0.0};
  NetworkSample s = sample_network(net, 1, 31);
  Eigen::VectorXd v1 = s.output_weights.row(0);
  Eigen::VectorXd v2 = s.output_weights.row(1);
  double c12 = v1.dot(v2) / static_cast<double>(v1.size());
  double c11 = v1.squaredNorm() / static_cast<double>(v1.size());
  double c22 = v2.squaredNorm() / static_cast<double>(v2.size());
  double corr = c12 / std::sqrt(c11 * c22);
  CHECK(corr == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("forward pass at width one is hand-checkable") {
  BaseKernelSpec base = erf_base(1.0, 0.0);  // no augmentation
  SingleLayerNet net{1, base, omega_08(), 0.3};
  NetworkSample s = sample_network(net, 1, 7);
  Eigen::VectorXd x = vec1(0.6);
  Eigen::VectorXd f = forward(s, x);
  for (int t = 0; t < 2; ++t) {
    double z = s.input_weights[0](0, 0) * x[0];
    double expect = s.output_bias[t] + s.output_weights(t, 0) * std::erf(z);
    CHECK(f[t] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("streamed draws match explicit sample + forward") {
  // empirical_moments never materializes the weights; this pins its draws to
  // the same networks sample_network produces from the derived seeds.
  auto check_match = [](const MtbnnSpec& spec, Eigen::Index dim) {
    std::vector<Probe> pts;
    Rng prng(3);
    const int T = mtbnn_task_count(spec);
    for (int i = 0; i < 4; ++i)
      pts.push_back(Probe{prng.normal_vector(dim), i % T});

    const long n = 1000;
    EmpiricalMoments fused = empirical_moments(spec, pts, n, 17);

    MomentAccumulator acc(static_cast<Eigen::Index>(pts.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(pts.size()));
    for (long i = 0; i < n; ++i) {
      NetworkSample net =
          sample_network(spec, dim, derive_seed(17, static_cast<std::uint64_t>(i)));
      for (size_t j = 0; j < pts.size(); ++j)
        out[static_cast<Eigen::Index>(j)] = forward(net, pts[j].x)[pts[j].task];
      acc.add(out);
    }
    CHECK((fused.mean - acc.mean_vector()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fused.cov - acc.covariance()).cwiseAbs().maxCoeff() < 1e-10);
  };

  SUBCASE("single layer, odd width") {
    check_match(SingleLayerNet{5, erf_base(), omega_08(), 0.2}, 2);
  }
  SUBCASE("deep, mixed odd widths") {
    DeepNet deep;
    deep.widths = {3, 5};
    deep.base = erf_base();
    deep.base.sigma_b2 = 0.1;
    deep.layers = {{0.05, 1.1}};
    deep.task_cov = omega_08();
    deep.bias_task_cov = TaskCovariance::identity(2);
    check_match(deep, 2);
  }
  SUBCASE("adaptive with cross-basis coupling") {
    BaseKernelSpec relu;
    relu.activation = Activation::Relu;
    Eigen::MatrixXd F = Eigen::MatrixXd::Identity(4, 4);
    F(2, 0) = 0.4;
    F(3, 1) = 0.3;
    Eigen::MatrixXd big = F * F.transpose();
    AdaptiveNet net;
    net.width = 3;
    net.bases = {erf_base(), relu};
    net.grid = {{big.block(0, 0, 2, 2), big.block(0, 2, 2, 2)},
                {big.block(2, 0, 2, 2), big.block(2, 2, 2, 2)}};
    check_match(net, 2);
  }
}

TEST_CASE("empirical moments: linear activation is width-exact") {
  // For the identity activation the network covariance equals the kernel at
  // any width; only Monte Carlo noise remains.
  BaseKernelSpec base;
  base.activation = Activation::Linear;
  IcmSpec icm{base, omega_08()};
  icm.base.bias_const = 0.3;
  MtbnnSpec net = finite_network(KernelSpec{icm}, 7);

  auto pts = two_task_probes();
  const long n = 20000;
  EmpiricalMoments em = empirical_moments(net, pts, n, 2024);
  Eigen::MatrixXd analytic = kernel_matrix(KernelSpec{icm}, pts);
  int violations = 0;
  for (int i = 0; i < analytic.rows(); ++i)
    for (int j = i; j < analytic.cols(); ++j)
      if (std::abs(em.cov(i, j) - analytic(i, j)) >
          4.0 * entry_se(analytic, i, j, n))
        ++violations;
  CHECK(violations <= 1);
}

TEST_CASE("empirical moments: zero prior mean and diagonal independence") {
  IcmSpec icm{erf_base(), TaskCovariance::diagonal(Eigen::VectorXd::Constant(2, 1.0))};
  MtbnnSpec net = finite_network(KernelSpec{icm}, 64);
  auto pts = two_task_probes();
  const long n = 20000;
  EmpiricalMoments em = empirical_moments(net, pts, n, 77);

  for (Eigen::Index i = 0; i < em.mean.size(); ++i)
    CHECK(std::abs(em.mean[i]) <= 4.0 * em.mean_std_error[i]);

  // Probes alternate tasks; every (task 0, task 1) covariance entry sits
  // within noise of zero.
  Eigen::MatrixXd analytic = kernel_matrix(KernelSpec{icm}, pts);
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = 0; j < pts.size(); ++j) {
      if (pts[i].task == pts[j].task) continue;
      CHECK(std::abs(em.cov(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j))) <=
            4.0 * entry_se(analytic, static_cast<int>(i), static_cast<int>(j),
                           n) +
                4.0 * std::sqrt(analytic(i, i) * analytic(j, j) /
                                static_cast<double>(n)));
    }
}

TEST_CASE("empirical moments are independent of the worker count") {
  IcmSpec icm{erf_base(), omega_08()};
  icm.base.bias_const = 0.1;
  MtbnnSpec net = finite_network(KernelSpec{icm}, 32);
  auto pts = two_task_probes();

  setenv("MTGPK_THREADS", "1", 1);
  EmpiricalMoments serial = empirical_moments(net, pts, 3000, 5);
  setenv("MTGPK_THREADS", "3", 1);
  EmpiricalMoments parallel = empirical_moments(net, pts, 3000, 5);
  unsetenv("MTGPK_THREADS");

  CHECK(serial.mean == parallel.mean);
  CHECK(serial.cov == parallel.cov);
  CHECK(serial.skewness == parallel.skewness);
}

TEST_CASE("adaptive with one basis matches the bias-free single layer") {
  // K = 1 adaptive and a single-layer network with C = 0 define the same
  // prior; two independent runs must agree within combined noise.
  BaseKernelSpec base = erf_base();
  IcmSpec icm{base, omega_08()};
  LmcSpec lmc{{{base, omega_08()}}};
  const int H = 128;
  MtbnnSpec single = finite_network(KernelSpec{icm}, H);
  MtbnnSpec adaptive = finite_network(KernelSpec{lmc}, H);

  auto pts = two_task_probes();
  const long n = 20000;
  EmpiricalMoments a = empirical_moments(single, pts, n, 101);
  EmpiricalMoments b = empirical_moments(adaptive, pts, n, 202);
  Eigen::MatrixXd analytic = kernel_matrix(KernelSpec{lmc}, pts);
  int violations = 0;
  for (int i = 0; i < analytic.rows(); ++i)
    for (int j = i; j < analytic.cols(); ++j) {
      double se = entry_se(analytic, i, j, n) * std::sqrt(2.0);
      if (std::abs(a.cov(i, j) - b.cov(i, j)) > 4.0 * se) ++violations;
    }
  CHECK(violations <= 1);
}

TEST_CASE("deep network second moments match the recursive kernel") {
  // x2 = -x1 with a pure linear base keeps the recursion hand-checkable and
  // nondegenerate.
  BaseKernelSpec base = erf_base(1.0, 0.0);
  base.sigma_b2 = 0.0;
  base.omega_v2 = 1.0;

  DeepMtSpec deep;
  deep.depth = 2;
  deep.base = base;
  deep.layers.push_back({0.0, 1.0});
  deep.task_cov = TaskCovariance::identity(1);
  deep.bias_task_cov = TaskCovariance::from_factor(Eigen::MatrixXd::Zero(1, 1));

  std::vector<Probe> pts{{vec1(1.0), 0}, {vec1(-1.0), 0}};
  const int H = 512;
  const long n = 4000;
  EmpiricalMoments em =
      empirical_moments(finite_network(KernelSpec{deep}, H), pts, n, 404);

  Eigen::MatrixXd analytic = kernel_matrix(KernelSpec{deep}, pts);
  // Spot value: K^0 = x1 x2 = -1; one erf level gives -(2/pi) asin(2/3).
  std::vector<LayerParams> two_levels{{0.0, 1.0}, {0.0, 1.0}};
  KernelMoments k2 = deep_moments(vec1(1.0), vec1(-1.0), base, two_levels, 2);
  CHECK(analytic(0, 1) == doctest::Approx(k2.k12).epsilon(1e-13));

  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j)
      CHECK(std::abs(em.cov(i, j) - analytic(i, j)) <=
            4.0 * entry_se(analytic, i, j, n) + 4.0 * analytic.norm() / H);
}

TEST_CASE("convergence study: linear kernels sit in the noise band everywhere") {
  BaseKernelSpec base;
  base.activation = Activation::Linear;
  IcmSpec icm{base, omega_08()};
  auto report = convergence_study(KernelSpec{icm}, {4, 16, 64},
                                  two_task_probes(), 5000, 99);
  REQUIRE(report.widths.size() == 3);
  CHECK(report.monotone_checked);
  CHECK(report.monotone_ok);
  for (const auto& w : report.widths) CHECK(w.rel_frobenius < 0.2);
}

TEST_CASE("convergence study: deep widths genuinely improve") {
  BaseKernelSpec base = erf_base(1.0, 0.0);
  DeepMtSpec deep;
  deep.depth = 2;
  deep.base = base;
  deep.layers.push_back({0.0, 1.0});
  deep.task_cov = TaskCovariance::identity(1);
  deep.bias_task_cov = TaskCovariance::from_factor(Eigen::MatrixXd::Zero(1, 1));

  std::vector<Probe> pts{{vec1(1.0), 0}, {vec1(-0.5), 0}, {vec1(0.25), 0}};
  auto report =
      convergence_study(KernelSpec{deep}, {4, 32, 256}, pts, 6000, 7);
  CHECK(report.monotone_checked);
  CHECK(report.monotone_ok);
  CHECK(report.widths.front().rel_frobenius >
        report.widths.back().rel_frobenius);
}

TEST_CASE("convergence study edge cases") {
  IcmSpec icm{erf_base(), omega_08()};
  SUBCASE("single width skips the monotonicity check") {
    auto report =
        convergence_study(KernelSpec{icm}, {8}, two_task_probes(), 1000, 1);
    CHECK_FALSE(report.monotone_checked);
    CHECK(report.note.find("skipped") != std::string::npos);
  }
  SUBCASE("widths must ascend") {
    CHECK_THROWS_AS(convergence_study(KernelSpec{icm}, {64, 64},
                                      two_task_probes(), 1000, 1),
                    Error);
  }
  SUBCASE("draw budget is validated") {
    CHECK_THROWS_AS(
        empirical_moments(finite_network(KernelSpec{icm}, 8),
                          two_task_probes(), 10, 1),
        Error);
  }
}

TEST_CASE("gp prior sampling") {
  SUBCASE("scalar case scales the seeded normal") {
    IcmSpec icm;
    icm.base.activation = Activation::Linear;
    Eigen::MatrixXd L(1, 1);
    L << 1.0;
    icm.task_cov = TaskCovariance::from_factor(L);
    // Input 2 under the linear kernel: K = 4, so the draw is 2 z.
    std::vector<Probe> pts{{vec1(2.0), 0}};
    Eigen::VectorXd draw = sample_gp_prior(KernelSpec{icm}, pts, 31337);
    double z = Rng(31337).normal();
    CHECK(draw[0] == doctest::Approx(2.0 * z).epsilon(1e-12));
  }
  SUBCASE("draw covariance approaches the kernel matrix") {
    IcmSpec icm{erf_base(), omega_08()};
    std::vector<Probe> pts{
        {vec1(-1.0), 0}, {vec1(0.0), 1}, {vec1(0.5), 0}, {vec1(1.0), 1}};
    Eigen::MatrixXd K = kernel_matrix(KernelSpec{icm}, pts);
    MomentAccumulator acc(4);
    for (long i = 0; i < 10000; ++i)
      acc.add(sample_gp_prior(KernelSpec{icm}, pts, derive_seed(9, static_cast<std::uint64_t>(i))));
    CHECK((acc.covariance() - K).norm() / K.norm() < 0.05);
  }
}

TEST_CASE("limit kernel round-trips through finite_network") {
  IcmSpec icm{erf_base(), omega_08()};
  icm.base.bias_const = 0.25;
  MtbnnSpec net = finite_network(KernelSpec{icm}, 64);
  KernelSpec back = limit_kernel(net);
  const auto& got = std::get<IcmSpec>(back);
  CHECK(got.base.bias_const == 0.25);
  CHECK(got.task_cov.matrix().isApprox(icm.task_cov.matrix()));

  DeepMtSpec deep;
  deep.depth = 3;
  deep.base = erf_base();
  deep.layers = {{0.1, 1.0}, {0.2, 0.9}};
  deep.task_cov = omega_08();
  deep.bias_task_cov = TaskCovariance::identity(2);
  MtbnnSpec dnet = finite_network(KernelSpec{deep}, 32);
  const auto& dn = std::get<DeepNet>(dnet);
  CHECK(dn.widths == std::vector<int>{32, 32, 32});
  CHECK(std::get<DeepMtSpec>(limit_kernel(dnet)).depth == 3);
}
