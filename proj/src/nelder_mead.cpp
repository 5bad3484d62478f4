#include "mtgpk/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mtgpk {

NelderMeadResult nelder_mead_minimize(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
    const NelderMeadOptions& opts) {
  const Eigen::Index dim = x0.size();
  NelderMeadResult result;
  result.best_x = x0;
  result.best_f = std::numeric_limits<double>::infinity();

  auto evaluate = [&](const Eigen::VectorXd& x) {
    double v = f(x);
    ++result.evaluations;
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    if (v < result.best_f) {
      result.best_f = v;
      result.best_x = x;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> verts(static_cast<size_t>(dim) + 1, x0);
  std::vector<double> vals(static_cast<size_t>(dim) + 1);
  vals[0] = evaluate(verts[0]);
  for (Eigen::Index i = 0; i < dim; ++i) {
    verts[static_cast<size_t>(i) + 1][i] += steps[i];
    vals[static_cast<size_t>(i) + 1] = evaluate(verts[static_cast<size_t>(i) + 1]);
    if (result.evaluations >= opts.max_evals) return result;
  }

  std::vector<size_t> order(verts.size());
  while (result.evaluations < opts.max_evals) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return vals[a] < vals[b]; });
    const size_t best = order.front(), worst = order.back();
    const size_t second_worst = order[order.size() - 2];

    double diameter = 0.0;
    for (size_t i = 1; i < order.size(); ++i)
      diameter = std::max(diameter,
                          (verts[order[i]] - verts[best]).cwiseAbs().maxCoeff());
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(vals[best]) && diameter < opts.tol &&
        (!std::isfinite(spread) ? false : spread < opts.tol)) {
      result.converged = true;
      return result;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (size_t i : order)
      if (i != worst) centroid += verts[i];
    centroid /= static_cast<double>(dim);

    Eigen::VectorXd reflected = centroid + (centroid - verts[worst]);
    double f_ref = evaluate(reflected);

    if (f_ref < vals[order[0]]) {
      Eigen::VectorXd expanded = centroid + 2.0 * (centroid - verts[worst]);
      double f_exp = evaluate(expanded);
      if (f_exp < f_ref) {
        verts[worst] = expanded;
        vals[worst] = f_exp;
      } else {
        verts[worst] = reflected;
        vals[worst] = f_ref;
      }
    } else if (f_ref < vals[second_worst]) {
      verts[worst] = reflected;
      vals[worst] = f_ref;
    } else {
      const bool outside = f_ref < vals[worst];
      Eigen::VectorXd contracted;
      if (outside)
        contracted = centroid + 0.5 * (reflected - centroid);
      else
        contracted = centroid - 0.5 * (centroid - verts[worst]);
      double f_con = evaluate(contracted);
      if (f_con < std::min(f_ref, vals[worst])) {
        verts[worst] = contracted;
        vals[worst] = f_con;
      } else {
        for (size_t i : order) {
          if (i == best) continue;
          verts[i] = verts[best] + 0.5 * (verts[i] - verts[best]);
          vals[i] = evaluate(verts[i]);
          if (result.evaluations >= opts.max_evals) return result;
        }
      }
    }
  }
  return result;
}

}  // namespace mtgpk
