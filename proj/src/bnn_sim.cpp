#include "mtgpk/bnn_sim.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>

#include "mtgpk/gp.hpp"
#include "mtgpk/multitask_kernels.hpp"
#include "mtgpk/parallel.hpp"
#include "mtgpk/rng.hpp"

namespace mtgpk {

namespace {

constexpr Eigen::Index kWeightBlockCols = 256;
constexpr long kDrawChunk = 256;

/// Weight matrices are always generated in fixed 256-column blocks so the
/// streamed (never-materialized) path and sample_network consume identical
/// RNG sequences.
template <typename Fn>
void for_each_weight_block(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                           Eigen::MatrixXd& buf, Fn&& fn) {
  const Eigen::Index width = std::min(cols, kWeightBlockCols);
  if (buf.rows() != rows || buf.cols() != width) buf.resize(rows, width);
  for (Eigen::Index c0 = 0; c0 < cols; c0 += kWeightBlockCols) {
    const Eigen::Index bc = std::min(kWeightBlockCols, cols - c0);
    rng.fill_normal(buf.data(), rows * bc);
    fn(buf.leftCols(bc), c0);
  }
}

void apply_activation(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::Erf:
      m = m.array().erf();
      break;
    case Activation::Relu:
      m = m.array().max(0.0);
      break;
    case Activation::Linear:
      break;
  }
}

/// sqrt of the effective input-weight variances, including the constant
/// erf bias coordinate (appended last) when augmentation is on.
Eigen::VectorXd input_scale(const BaseKernelSpec& base, Eigen::Index d) {
  Eigen::VectorXd w = sigma_u_diag(base, d);
  const bool aug = has_input_augmentation(base);
  Eigen::VectorXd s(d + (aug ? 1 : 0));
  for (Eigen::Index i = 0; i < d; ++i) s[i] = std::sqrt(base.omega_v2 * w[i]);
  if (aug) s[d] = std::sqrt(base.omega_v2 * base.input_bias_var);
  return s;
}

/// Probe matrix with the input scaling folded in: column j such that
/// (raw weights column)' * col(j) is the pre-activation of probe j.
Eigen::MatrixXd scaled_probes(const BaseKernelSpec& base,
                              const std::vector<Probe>& pts) {
  const Eigen::Index s = static_cast<Eigen::Index>(pts.size());
  const Eigen::Index d = pts[0].x.size();
  for (const auto& p : pts)
    if (p.x.size() != d)
      raise(ErrorCode::DimensionMismatch, "probes differ in dimension");
  Eigen::VectorXd scale = input_scale(base, d);
  Eigen::MatrixXd X(scale.size(), s);
  for (Eigen::Index j = 0; j < s; ++j) {
    X.col(j).head(d) = scale.head(d).cwiseProduct(pts[static_cast<size_t>(j)].x);
    if (scale.size() > d) X(d, j) = scale[d];
  }
  return X;
}

int check_tasks(const std::vector<Probe>& pts, int T) {
  for (const auto& p : pts)
    if (p.task < 0 || p.task >= T)
      raise(ErrorCode::TaskIndexOutOfRange,
            "probe task " + std::to_string(p.task));
  return T;
}

// ---------------------------------------------------------------------------
// Fused per-draw evaluators. Each holds precomputed constants plus scratch so
// a chunk of draws reuses its buffers. RNG consumption order per draw matches
// sample_network exactly: input weights, (input bias), hidden layers in
// order (weights then bias), output weights, output bias.
// ---------------------------------------------------------------------------

struct SingleLayerWorkspace {
  const SingleLayerNet& net;
  Eigen::MatrixXd Xs;  // scaled probes
  Eigen::MatrixXd out_factor;
  Eigen::MatrixXd bias_factor;
  std::vector<TaskId> tasks;
  Eigen::MatrixXd wbuf, Z, M, F;
  Eigen::VectorXd braw;

  SingleLayerWorkspace(const SingleLayerNet& n, const std::vector<Probe>& pts)
      : net(n), Xs(scaled_probes(n.base, pts)) {
    const double h = static_cast<double>(n.width);
    out_factor = n.task_cov.factor() / std::sqrt(h);
    bias_factor = std::sqrt(n.bias_const) * n.task_cov.factor();
    for (const auto& p : pts) tasks.push_back(p.task);
    Z.resize(n.width, Xs.cols());
    M.resize(n.task_cov.n_tasks(), Xs.cols());
  }

  void draw(Rng& rng, Eigen::VectorXd& out) {
    const Eigen::Index T = M.rows();
    for_each_weight_block(rng, Xs.rows(), net.width, wbuf,
                          [&](auto block, Eigen::Index c0) {
                            Z.middleRows(c0, block.cols()).noalias() =
                                block.transpose() * Xs;
                          });
    apply_activation(net.base.activation, Z);
    M.setZero();
    for_each_weight_block(rng, T, net.width, wbuf,
                          [&](auto block, Eigen::Index c0) {
                            M.noalias() += block * Z.middleRows(c0, block.cols());
                          });
    F.noalias() = out_factor * M;
    braw = rng.normal_vector(T);
    F.colwise() += bias_factor * braw;
    for (Eigen::Index j = 0; j < F.cols(); ++j)
      out[j] = F(tasks[static_cast<size_t>(j)], j);
  }
};

struct DeepWorkspace {
  const DeepNet& net;
  Eigen::MatrixXd Xs;
  Eigen::MatrixXd out_factor, bias_factor;
  std::vector<TaskId> tasks;
  Eigen::MatrixXd wbuf, A, B, M, F;
  Eigen::VectorXd braw;

  DeepWorkspace(const DeepNet& n, const std::vector<Probe>& pts)
      : net(n), Xs(scaled_probes(n.base, pts)) {
    const double nl = static_cast<double>(n.widths.back());
    out_factor = n.task_cov.factor() / std::sqrt(nl);
    bias_factor = n.bias_task_cov.factor();
    for (const auto& p : pts) tasks.push_back(p.task);
    M.resize(n.task_cov.n_tasks(), Xs.cols());
  }

  void draw(Rng& rng, Eigen::VectorXd& out) {
    const Eigen::Index s = Xs.cols();
    const Eigen::Index T = M.rows();
    const int L = static_cast<int>(net.widths.size());

    A.resize(net.widths[0], s);
    for_each_weight_block(rng, Xs.rows(), net.widths[0], wbuf,
                          [&](auto block, Eigen::Index c0) {
                            A.middleRows(c0, block.cols()).noalias() =
                                block.transpose() * Xs;
                          });
    braw = rng.normal_vector(net.widths[0]);
    A.colwise() += std::sqrt(net.base.sigma_b2) * braw;
    apply_activation(net.base.activation, A);

    for (int l = 1; l < L; ++l) {
      const auto& layer = net.layers[static_cast<size_t>(l - 1)];
      const Eigen::Index rows = net.widths[static_cast<size_t>(l - 1)];
      const Eigen::Index cols = net.widths[static_cast<size_t>(l)];
      const double wscale =
          std::sqrt(layer.omega_v2 / static_cast<double>(rows));
      B.resize(cols, s);
      for_each_weight_block(rng, rows, cols, wbuf,
                            [&](auto block, Eigen::Index c0) {
                              B.middleRows(c0, block.cols()).noalias() =
                                  wscale * (block.transpose() * A);
                            });
      braw = rng.normal_vector(cols);
      B.colwise() += std::sqrt(layer.sigma_b2) * braw;
      apply_activation(net.base.activation, B);
      A.swap(B);
    }

    M.setZero();
    for_each_weight_block(rng, T, net.widths.back(), wbuf,
                          [&](auto block, Eigen::Index c0) {
                            M.noalias() += block * A.middleRows(c0, block.cols());
                          });
    F.noalias() = out_factor * M;
    braw = rng.normal_vector(T);
    F.colwise() += bias_factor * braw;
    for (Eigen::Index j = 0; j < F.cols(); ++j)
      out[j] = F(tasks[static_cast<size_t>(j)], j);
  }
};

struct AdaptiveWorkspace {
  const AdaptiveNet& net;
  std::vector<Eigen::MatrixXd> Xs;  // per basis
  Eigen::MatrixXd grid_factor;      // KT x KT, scaled by 1/sqrt(width)
  std::vector<TaskId> tasks;
  Eigen::MatrixXd wbuf, F;
  std::vector<Eigen::MatrixXd> H;  // per-basis hidden activations
  Eigen::MatrixXd Vb;

  AdaptiveWorkspace(const AdaptiveNet& n, const std::vector<Probe>& pts)
      : net(n) {
    for (const auto& base : n.bases) Xs.push_back(scaled_probes(base, pts));
    CcSpec cc{n.bases, n.grid};
    grid_factor = psd_lower_factor(cc_block_matrix(cc)) /
                  std::sqrt(static_cast<double>(n.width));
    for (const auto& p : pts) tasks.push_back(p.task);
    H.resize(n.bases.size());
  }

  void draw(Rng& rng, Eigen::VectorXd& out) {
    const Eigen::Index s = Xs[0].cols();
    const size_t K = net.bases.size();
    const Eigen::Index T = static_cast<Eigen::Index>(net.grid[0][0].rows());

    for (size_t k = 0; k < K; ++k) {
      H[k].resize(net.width, s);
      for_each_weight_block(rng, Xs[k].rows(), net.width, wbuf,
                            [&](auto block, Eigen::Index c0) {
                              H[k].middleRows(c0, block.cols()).noalias() =
                                  block.transpose() * Xs[k];
                            });
      apply_activation(net.bases[k].activation, H[k]);
    }

    F.resize(T, s);
    F.setZero();
    for_each_weight_block(
        rng, static_cast<Eigen::Index>(K) * T, net.width, wbuf,
        [&](auto block, Eigen::Index c0) {
          Vb.noalias() = grid_factor * block;  // mixes bases and tasks
          for (size_t k = 0; k < K; ++k)
            F.noalias() += Vb.middleRows(static_cast<Eigen::Index>(k) * T, T) *
                           H[k].middleRows(c0, block.cols());
        });
    for (Eigen::Index j = 0; j < s; ++j)
      out[j] = F(tasks[static_cast<size_t>(j)], j);
  }
};

struct DrawWorkspace {
  std::variant<SingleLayerWorkspace, DeepWorkspace, AdaptiveWorkspace> ws;

  DrawWorkspace(const MtbnnSpec& spec, const std::vector<Probe>& pts)
      : ws(make(spec, pts)) {}

  static std::variant<SingleLayerWorkspace, DeepWorkspace, AdaptiveWorkspace>
  make(const MtbnnSpec& spec, const std::vector<Probe>& pts) {
    if (const auto* s = std::get_if<SingleLayerNet>(&spec))
      return SingleLayerWorkspace(*s, pts);
    if (const auto* d = std::get_if<DeepNet>(&spec))
      return DeepWorkspace(*d, pts);
    return AdaptiveWorkspace(std::get<AdaptiveNet>(spec), pts);
  }

  void draw(Rng& rng, Eigen::VectorXd& out) {
    std::visit([&](auto& w) { w.draw(rng, out); }, ws);
  }
};

}  // namespace

void validate_mtbnn(const MtbnnSpec& spec) {
  if (const auto* s = std::get_if<SingleLayerNet>(&spec)) {
    if (s->width < 1) raise(ErrorCode::InvalidArgument, "width must be >= 1");
    validate_base(s->base);
    validate_task_cov(s->task_cov);
    if (s->bias_const < 0.0 || !std::isfinite(s->bias_const))
      raise(ErrorCode::InvalidArgument, "bias_const must be finite and >= 0");
    return;
  }
  if (const auto* d = std::get_if<DeepNet>(&spec)) {
    if (d->widths.empty())
      raise(ErrorCode::InvalidArgument, "deep network needs >= 1 hidden layer");
    for (int w : d->widths)
      if (w < 1) raise(ErrorCode::InvalidArgument, "widths must be >= 1");
    if (d->layers.size() + 1 != d->widths.size())
      raise(ErrorCode::InvalidArgument,
            "deep network needs widths.size()-1 layer parameter entries");
    KernelSpec k = DeepMtSpec{static_cast<int>(d->widths.size()), d->base,
                              d->layers, d->task_cov, d->bias_task_cov};
    validate_kernel_spec(k);
    return;
  }
  const auto& a = std::get<AdaptiveNet>(spec);
  if (a.width < 1) raise(ErrorCode::InvalidArgument, "width must be >= 1");
  validate_kernel_spec(KernelSpec{CcSpec{a.bases, a.grid}});
}

int mtbnn_task_count(const MtbnnSpec& spec) {
  return task_count(limit_kernel(spec));
}

MtbnnSpec finite_network(const KernelSpec& spec, int width) {
  if (width < 1) raise(ErrorCode::InvalidArgument, "width must be >= 1");
  if (const auto* icm = std::get_if<IcmSpec>(&spec))
    return SingleLayerNet{width, icm->base, icm->task_cov,
                          icm->base.bias_const};
  if (const auto* deep = std::get_if<DeepMtSpec>(&spec))
    return DeepNet{std::vector<int>(static_cast<size_t>(deep->depth), width),
                   deep->base, deep->layers, deep->task_cov,
                   deep->bias_task_cov};
  if (const auto* lmc = std::get_if<LmcSpec>(&spec)) {
    CcSpec cc = cc_from_lmc(*lmc);
    return AdaptiveNet{width, cc.bases, cc.grid};
  }
  const auto& cc = std::get<CcSpec>(spec);
  return AdaptiveNet{width, cc.bases, cc.grid};
}

KernelSpec limit_kernel(const MtbnnSpec& spec) {
  if (const auto* s = std::get_if<SingleLayerNet>(&spec)) {
    BaseKernelSpec base = s->base;
    base.bias_const = s->bias_const;
    return IcmSpec{base, s->task_cov};
  }
  if (const auto* d = std::get_if<DeepNet>(&spec))
    return DeepMtSpec{static_cast<int>(d->widths.size()), d->base, d->layers,
                      d->task_cov, d->bias_task_cov};
  const auto& a = std::get<AdaptiveNet>(spec);
  return CcSpec{a.bases, a.grid};
}

NetworkSample sample_network(const MtbnnSpec& spec, Eigen::Index input_dim,
                             std::uint64_t seed) {
  validate_mtbnn(spec);
  NetworkSample net;
  net.spec = spec;
  Rng rng(seed);
  Eigen::MatrixXd buf;

  if (const auto* s = std::get_if<SingleLayerNet>(&spec)) {
    const Eigen::VectorXd scale = input_scale(s->base, input_dim);
    Eigen::MatrixXd U(scale.size(), s->width);
    for_each_weight_block(rng, scale.size(), s->width, buf,
                          [&](auto block, Eigen::Index c0) {
                            U.middleCols(c0, block.cols()) =
                                scale.asDiagonal() * block;
                          });
    net.input_weights.push_back(std::move(U));
    const Eigen::Index T = s->task_cov.n_tasks();
    Eigen::MatrixXd V(T, s->width);
    const Eigen::MatrixXd vf =
        s->task_cov.factor() / std::sqrt(static_cast<double>(s->width));
    for_each_weight_block(rng, T, s->width, buf,
                          [&](auto block, Eigen::Index c0) {
                            V.middleCols(c0, block.cols()).noalias() =
                                vf * block;
                          });
    net.output_weights = std::move(V);
    net.output_bias =
        std::sqrt(s->bias_const) * (s->task_cov.factor() * rng.normal_vector(T));
    return net;
  }

  if (const auto* d = std::get_if<DeepNet>(&spec)) {
    const Eigen::VectorXd scale = input_scale(d->base, input_dim);
    Eigen::MatrixXd U(scale.size(), d->widths[0]);
    for_each_weight_block(rng, scale.size(), d->widths[0], buf,
                          [&](auto block, Eigen::Index c0) {
                            U.middleCols(c0, block.cols()) =
                                scale.asDiagonal() * block;
                          });
    net.input_weights.push_back(std::move(U));
    net.input_bias =
        std::sqrt(d->base.sigma_b2) * rng.normal_vector(d->widths[0]);
    for (size_t l = 1; l < d->widths.size(); ++l) {
      const auto& layer = d->layers[l - 1];
      const Eigen::Index rows = d->widths[l - 1];
      const Eigen::Index cols = d->widths[l];
      const double wscale =
          std::sqrt(layer.omega_v2 / static_cast<double>(rows));
      Eigen::MatrixXd W(rows, cols);
      for_each_weight_block(rng, rows, cols, buf,
                            [&](auto block, Eigen::Index c0) {
                              W.middleCols(c0, block.cols()) = wscale * block;
                            });
      net.hidden_weights.push_back(std::move(W));
      net.hidden_biases.push_back(std::sqrt(layer.sigma_b2) *
                                  rng.normal_vector(cols));
    }
    const Eigen::Index T = d->task_cov.n_tasks();
    Eigen::MatrixXd V(T, d->widths.back());
    const Eigen::MatrixXd vf =
        d->task_cov.factor() /
        std::sqrt(static_cast<double>(d->widths.back()));
    for_each_weight_block(rng, T, d->widths.back(), buf,
                          [&](auto block, Eigen::Index c0) {
                            V.middleCols(c0, block.cols()).noalias() =
                                vf * block;
                          });
    net.output_weights = std::move(V);
    net.output_bias = d->bias_task_cov.factor() * rng.normal_vector(T);
    return net;
  }

  const auto& a = std::get<AdaptiveNet>(spec);
  for (const auto& base : a.bases) {
    const Eigen::VectorXd scale = input_scale(base, input_dim);
    Eigen::MatrixXd U(scale.size(), a.width);
    for_each_weight_block(rng, scale.size(), a.width, buf,
                          [&](auto block, Eigen::Index c0) {
                            U.middleCols(c0, block.cols()) =
                                scale.asDiagonal() * block;
                          });
    net.input_weights.push_back(std::move(U));
  }
  CcSpec cc{a.bases, a.grid};
  const Eigen::MatrixXd gf = psd_lower_factor(cc_block_matrix(cc)) /
                             std::sqrt(static_cast<double>(a.width));
  const Eigen::Index kt = gf.rows();
  Eigen::MatrixXd V(kt, a.width);
  for_each_weight_block(rng, kt, a.width, buf,
                        [&](auto block, Eigen::Index c0) {
                          V.middleCols(c0, block.cols()).noalias() = gf * block;
                        });
  net.output_weights = std::move(V);
  net.output_bias = Eigen::VectorXd::Zero(a.grid[0][0].rows());
  return net;
}

Eigen::VectorXd forward(const NetworkSample& net, const InputPoint& x) {
  auto augment = [&](const BaseKernelSpec& base) {
    if (!has_input_augmentation(base)) return x.eval();
    Eigen::VectorXd xa(x.size() + 1);
    xa.head(x.size()) = x;
    xa[x.size()] = 1.0;
    return xa;
  };

  if (const auto* s = std::get_if<SingleLayerNet>(&net.spec)) {
    Eigen::VectorXd xa = augment(s->base);
    if (xa.size() != net.input_weights[0].rows())
      raise(ErrorCode::DimensionMismatch, "input dimension mismatch");
    Eigen::MatrixXd z = (net.input_weights[0].transpose() * xa).eval();
    apply_activation(s->base.activation, z);
    return net.output_bias + net.output_weights * z;
  }

  if (const auto* d = std::get_if<DeepNet>(&net.spec)) {
    Eigen::VectorXd xa = augment(d->base);
    if (xa.size() != net.input_weights[0].rows())
      raise(ErrorCode::DimensionMismatch, "input dimension mismatch");
    Eigen::MatrixXd h = (net.input_weights[0].transpose() * xa).eval();
    h.col(0) += net.input_bias;
    apply_activation(d->base.activation, h);
    for (size_t l = 0; l < net.hidden_weights.size(); ++l) {
      Eigen::MatrixXd z = (net.hidden_weights[l].transpose() * h).eval();
      z.col(0) += net.hidden_biases[l];
      apply_activation(d->base.activation, z);
      h = std::move(z);
    }
    return net.output_bias + net.output_weights * h;
  }

  const auto& a = std::get<AdaptiveNet>(net.spec);
  const Eigen::Index T = a.grid[0][0].rows();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(T);
  for (size_t k = 0; k < a.bases.size(); ++k) {
    Eigen::VectorXd xa = augment(a.bases[k]);
    if (xa.size() != net.input_weights[k].rows())
      raise(ErrorCode::DimensionMismatch, "input dimension mismatch");
    Eigen::MatrixXd z = (net.input_weights[k].transpose() * xa).eval();
    apply_activation(a.bases[k].activation, z);
    f += net.output_weights.middleRows(static_cast<Eigen::Index>(k) * T, T) * z;
  }
  return f;
}

std::vector<MomentAccumulator> empirical_moment_chunks(
    const MtbnnSpec& spec, const std::vector<Probe>& points, long n_draws,
    std::uint64_t seed) {
  validate_mtbnn(spec);
  if (points.empty()) raise(ErrorCode::InvalidArgument, "need >= 1 probe");
  if (n_draws < 1000)
    raise(ErrorCode::InvalidArgument, "empirical moments need >= 1e3 draws");
  check_tasks(points, mtbnn_task_count(spec));

  const Eigen::Index s = static_cast<Eigen::Index>(points.size());
  const long n_chunks = (n_draws + kDrawChunk - 1) / kDrawChunk;
  std::vector<MomentAccumulator> slots(static_cast<size_t>(n_chunks),
                                       MomentAccumulator(s));
  parallel_chunks(n_chunks, [&](long c) {
    DrawWorkspace ws(spec, points);
    Eigen::VectorXd out(s);
    const long lo = c * kDrawChunk;
    const long hi = std::min(n_draws, lo + kDrawChunk);
    MomentAccumulator acc(s);
    for (long i = lo; i < hi; ++i) {
      // Draw i's stream is reproducible externally: sample_network with seed
      // derive_seed(seed, i) walks the identical weight sequence.
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      ws.draw(rng, out);
      acc.add(out);
    }
    slots[static_cast<size_t>(c)] = std::move(acc);
  });
  return slots;
}

EmpiricalMoments empirical_moments(const MtbnnSpec& spec,
                                   const std::vector<Probe>& points,
                                   long n_draws, std::uint64_t seed) {
  auto chunks = empirical_moment_chunks(spec, points, n_draws, seed);
  MomentAccumulator total(static_cast<Eigen::Index>(points.size()));
  for (const auto& c : chunks) total.merge(c);
  EmpiricalMoments em;
  em.points = points;
  em.mean = total.mean_vector();
  em.cov = total.covariance();
  em.mean_std_error = total.mean_std_error();
  em.skewness = total.skewness();
  em.excess_kurtosis = total.excess_kurtosis();
  em.n_draws = n_draws;
  em.seed = seed;
  return em;
}

namespace {

double rel_frobenius_deviation(const Eigen::MatrixXd& emp,
                               const Eigen::MatrixXd& analytic) {
  return (emp - analytic).norm() / analytic.norm();
}

}  // namespace

ConvergenceReport convergence_study(const KernelSpec& spec,
                                    const std::vector<int>& widths,
                                    const std::vector<Probe>& points,
                                    long n_draws, std::uint64_t seed) {
  validate_kernel_spec(spec);
  if (widths.empty()) raise(ErrorCode::InvalidArgument, "need >= 1 width");
  for (size_t i = 1; i < widths.size(); ++i)
    if (widths[i] <= widths[i - 1])
      raise(ErrorCode::InvalidArgument, "widths must be strictly ascending");
  if (points.size() > 12)
    raise(ErrorCode::InvalidArgument, "convergence probes capped at 12 points");

  ConvergenceReport report;
  report.points = points;
  report.n_draws = n_draws;
  report.seed = seed;
  report.analytic = kernel_matrix(spec, points);

  for (size_t w = 0; w < widths.size(); ++w) {
    auto chunks = empirical_moment_chunks(
        finite_network(spec, widths[w]), points, n_draws,
        derive_seed(seed, 7000 + static_cast<std::uint64_t>(w)));
    const size_t C = chunks.size();
    MomentAccumulator total(static_cast<Eigen::Index>(points.size()));
    for (const auto& c : chunks) total.merge(c);
    const Eigen::MatrixXd emp = total.covariance();

    WidthDeviation dev;
    dev.width = widths[w];
    dev.rel_frobenius = rel_frobenius_deviation(emp, report.analytic);
    dev.max_abs = (emp - report.analytic).cwiseAbs().maxCoeff();

    // Leave-one-chunk-out jackknife for the deviation's standard error.
    if (C >= 2) {
      std::vector<MomentAccumulator> prefix(C + 1), suffix(C + 1);
      prefix[0] = MomentAccumulator(static_cast<Eigen::Index>(points.size()));
      suffix[C] = MomentAccumulator(static_cast<Eigen::Index>(points.size()));
      for (size_t i = 0; i < C; ++i) {
        prefix[i + 1] = prefix[i];
        prefix[i + 1].merge(chunks[i]);
      }
      for (size_t i = C; i > 0; --i) {
        suffix[i - 1] = suffix[i];
        suffix[i - 1].merge(chunks[i - 1]);
      }
      std::vector<double> devs(C);
      for (size_t i = 0; i < C; ++i) {
        MomentAccumulator loo = prefix[i];
        loo.merge(suffix[i + 1]);
        devs[i] = rel_frobenius_deviation(loo.covariance(), report.analytic);
      }
      double mean = 0.0;
      for (double v : devs) mean += v;
      mean /= static_cast<double>(C);
      double ss = 0.0;
      for (double v : devs) ss += (v - mean) * (v - mean);
      dev.std_error =
          std::sqrt(ss * static_cast<double>(C - 1) / static_cast<double>(C));
    }

    report.widths.push_back(dev);
    report.empirical.push_back(emp);
  }

  if (widths.size() < 2) {
    report.monotone_checked = false;
    report.note = "single width: monotonicity check skipped";
  } else {
    report.monotone_checked = true;
    int inversions = 0;
    bool severe = false;
    for (size_t i = 0; i + 1 < report.widths.size(); ++i) {
      const auto& a = report.widths[i];
      const auto& b = report.widths[i + 1];
      if (b.rel_frobenius > a.rel_frobenius) {
        ++inversions;
        double band = 4.0 * std::sqrt(a.std_error * a.std_error +
                                      b.std_error * b.std_error);
        if (b.rel_frobenius - a.rel_frobenius > band) severe = true;
      }
    }
    report.monotone_ok = !severe && inversions <= 1;
    report.note = severe ? "deviation increased beyond the noise band"
                         : (inversions > 1 ? "more than one inversion" : "");
  }
  return report;
}

Eigen::VectorXd sample_gp_prior(const KernelSpec& spec,
                                const std::vector<Probe>& points,
                                std::uint64_t seed) {
  validate_kernel_spec(spec);
  check_tasks(points, task_count(spec));
  Eigen::MatrixXd K = kernel_matrix(spec, points);
  CholeskyFactor chol = cholesky_with_jitter(K);
  Rng rng(seed);
  return chol.L *
         rng.normal_vector(static_cast<Eigen::Index>(points.size()));
}

}  // namespace mtgpk
