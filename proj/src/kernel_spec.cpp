#include "mtgpk/kernel_spec.hpp"

#include <cmath>

namespace mtgpk {

namespace {

struct TaskCountVisitor {
  int operator()(const IcmSpec& s) const { return s.task_cov.n_tasks(); }
  int operator()(const DeepMtSpec& s) const { return s.task_cov.n_tasks(); }
  int operator()(const LmcSpec& s) const {
    return s.components.empty() ? 0 : s.components.front().task_cov.n_tasks();
  }
  int operator()(const CcSpec& s) const {
    return s.grid.empty() ? 0 : static_cast<int>(s.grid[0][0].rows());
  }
};

}  // namespace

int task_count(const KernelSpec& spec) {
  return std::visit(TaskCountVisitor{}, spec);
}

const char* kernel_kind_name(const KernelSpec& spec) {
  switch (spec.index()) {
    case 0:
      return "icm";
    case 1:
      return "deep_mt";
    case 2:
      return "lmc";
    case 3:
      return "cc";
  }
  return "?";
}

void validate_kernel_spec(const KernelSpec& spec) {
  if (const auto* icm = std::get_if<IcmSpec>(&spec)) {
    validate_base(icm->base);
    validate_task_cov(icm->task_cov);
    return;
  }
  if (const auto* deep = std::get_if<DeepMtSpec>(&spec)) {
    if (deep->depth < 1)
      raise(ErrorCode::InvalidArgument, "deep kernel depth must be >= 1");
    if (static_cast<int>(deep->layers.size()) != deep->depth - 1)
      raise(ErrorCode::InvalidArgument,
            "deep kernel needs depth-1 layer parameter entries, got " +
                std::to_string(deep->layers.size()));
    validate_base(deep->base);
    for (const auto& layer : deep->layers) {
      if (!std::isfinite(layer.sigma_b2) || layer.sigma_b2 < 0.0)
        raise(ErrorCode::InvalidArgument, "layer sigma_b2 must be >= 0");
      if (!std::isfinite(layer.omega_v2) || layer.omega_v2 <= 0.0)
        raise(ErrorCode::InvalidArgument, "layer omega_v2 must be > 0");
    }
    validate_task_cov(deep->task_cov);
    validate_psd(deep->bias_task_cov.matrix(), "bias task covariance");
    if (deep->bias_task_cov.n_tasks() != deep->task_cov.n_tasks())
      raise(ErrorCode::DimensionMismatch,
            "task_cov and bias_task_cov disagree on the task count");
    return;
  }
  if (const auto* lmc = std::get_if<LmcSpec>(&spec)) {
    if (lmc->components.empty())
      raise(ErrorCode::InvalidArgument, "LMC kernel needs at least one component");
    int T = lmc->components.front().task_cov.n_tasks();
    for (const auto& comp : lmc->components) {
      validate_base(comp.base);
      validate_psd(comp.task_cov.matrix(), "LMC component task covariance");
      if (comp.task_cov.n_tasks() != T)
        raise(ErrorCode::DimensionMismatch,
              "LMC components disagree on the task count");
    }
    return;
  }
  const auto& cc = std::get<CcSpec>(spec);
  const size_t K = cc.bases.size();
  if (K == 0) raise(ErrorCode::InvalidArgument, "CC kernel needs at least one basis");
  if (cc.grid.size() != K)
    raise(ErrorCode::DimensionMismatch, "CC grid must be K x K");
  for (const auto& row : cc.grid)
    if (row.size() != K)
      raise(ErrorCode::DimensionMismatch, "CC grid must be K x K");
  for (const auto& base : cc.bases) validate_base(base);
  const Eigen::Index T = cc.grid[0][0].rows();
  for (const auto& row : cc.grid)
    for (const auto& block : row)
      if (block.rows() != T || block.cols() != T)
        raise(ErrorCode::DimensionMismatch, "CC grid blocks must all be T x T");
  validate_psd(cc_block_matrix(cc), "CC block covariance");
}

KernelSpec restrict_to_task(const KernelSpec& spec, TaskId t) {
  int T = task_count(spec);
  if (t < 0 || t >= T)
    raise(ErrorCode::TaskIndexOutOfRange, "task " + std::to_string(t));
  auto scalar_cov = [&](const TaskCovariance& tc) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = std::sqrt(std::max(tc(t, t), 0.0));
    return TaskCovariance::from_factor(m);
  };
  if (const auto* icm = std::get_if<IcmSpec>(&spec))
    return IcmSpec{icm->base, scalar_cov(icm->task_cov)};
  if (const auto* deep = std::get_if<DeepMtSpec>(&spec))
    return DeepMtSpec{deep->depth, deep->base, deep->layers,
                      scalar_cov(deep->task_cov), scalar_cov(deep->bias_task_cov)};
  if (const auto* lmc = std::get_if<LmcSpec>(&spec)) {
    LmcSpec out;
    for (const auto& comp : lmc->components)
      out.components.push_back({comp.base, scalar_cov(comp.task_cov)});
    return out;
  }
  const auto& cc = std::get<CcSpec>(spec);
  CcSpec out;
  out.bases = cc.bases;
  out.grid.resize(cc.grid.size());
  for (size_t m = 0; m < cc.grid.size(); ++m)
    for (size_t n = 0; n < cc.grid.size(); ++n) {
      Eigen::MatrixXd block(1, 1);
      block(0, 0) = cc.grid[m][n](t, t);
      out.grid[m].push_back(block);
    }
  return out;
}

CcSpec cc_from_lmc(const LmcSpec& spec) {
  const size_t K = spec.components.size();
  const int T = spec.components.front().task_cov.n_tasks();
  CcSpec out;
  out.grid.assign(K, std::vector<Eigen::MatrixXd>(K, Eigen::MatrixXd::Zero(T, T)));
  for (size_t m = 0; m < K; ++m) {
    out.bases.push_back(spec.components[m].base);
    out.grid[m][m] = spec.components[m].task_cov.matrix();
  }
  return out;
}

Eigen::MatrixXd cc_block_matrix(const CcSpec& spec) {
  const Eigen::Index K = static_cast<Eigen::Index>(spec.bases.size());
  const Eigen::Index T = spec.grid[0][0].rows();
  Eigen::MatrixXd big(K * T, K * T);
  for (Eigen::Index m = 0; m < K; ++m)
    for (Eigen::Index n = 0; n < K; ++n)
      big.block(m * T, n * T, T, T) =
          spec.grid[static_cast<size_t>(m)][static_cast<size_t>(n)];
  return big;
}

}  // namespace mtgpk
