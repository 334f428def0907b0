#include "dipsim/traces/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <limits>
#include <tuple>

#include <Eigen/QR>

#include "dipsim/masking/schemes.hpp"
#include "dipsim/masking/topk.hpp"
#include "dipsim/parallel.hpp"

namespace dipsim {

double dip_memory_fraction(Index k_in, Index k_mid, Index d_model, Index d_ff) {
  // up + gate read k_in columns of d_ff weights each; down reads k_mid columns of d_model.
  const double read = 2.0 * double(k_in) * double(d_ff) + double(k_mid) * double(d_model);
  return read / (3.0 * double(d_model) * double(d_ff));
}

std::vector<DensityPoint> sweep_density_allocation(const MlpWeightsd& w, const Eigen::MatrixXd& inputs,
                                                   std::span<const std::pair<double, double>> grid,
                                                   unsigned threads) {
  if (grid.empty()) throw std::invalid_argument("sweep_density_allocation: empty grid");
  w.validate();
  require_dims(inputs.rows() == w.d_model(), "sweep_density_allocation: inputs rows != d_model");
  if (inputs.cols() == 0) throw std::invalid_argument("sweep_density_allocation: no calibration inputs");

  Eigen::MatrixXd reference(w.d_model(), inputs.cols());
  for (Index c = 0; c < inputs.cols(); ++c) reference.col(c) = mlp_dense_forward(w, inputs.col(c));

  std::vector<DensityPoint> out(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const auto [mid_density, in_density] = grid[i];
    const Index k_in = density_to_k(in_density, w.d_model());
    const Index k_mid = density_to_k(mid_density, w.d_ff());
    double err = 0.0;
    for (Index c = 0; c < inputs.cols(); ++c) {
      const Eigen::VectorXd x = inputs.col(c);
      const MaskSet m = scheme_dip(w, x, k_in, k_mid);
      err += approx_error(reference.col(c), mlp_sparse_forward(w, m, x)).relative_l2;
    }
    out[i] = {in_density, mid_density, dip_memory_fraction(k_in, k_mid, w.d_model(), w.d_ff()),
              err / double(inputs.cols())};
  });
  return out;
}

std::vector<DensityPoint> pareto_front(std::span<const DensityPoint> points) {
  if (points.empty()) throw std::invalid_argument("pareto_front: no points");
  auto key = [](const DensityPoint& p) {
    return std::tuple(p.memory, p.error, p.input_density, p.intermediate_density);
  };
  std::vector<DensityPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  // After sorting by memory then error, a point survives iff its error is
  // strictly below every earlier point with strictly lower memory, and it is
  // not beaten on error at equal memory.
  std::vector<DensityPoint> front;
  double best_error = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].memory == sorted[i].memory) ++j;
    const double group_min = sorted[i].error;  // sorted by error within equal memory
    if (group_min < best_error) {
      for (std::size_t k = i; k < j && sorted[k].error == group_min; ++k) front.push_back(sorted[k]);
      best_error = group_min;
    }
    i = j;
  }
  return front;
}

double logit(double p) {
  p = std::clamp(p, kLogitClampLo, kLogitClampHi);
  return std::log(p / (1.0 - p));
}

double inv_logit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::pair<double, double> AllocationModel::predict(double target) const {
  const double z = logit(target);
  const double lo = logit(kLogitClampLo);
  const double hi = logit(kLogitClampHi);
  return {inv_logit(std::clamp(input_intercept + input_slope * z, lo, hi)),
          inv_logit(std::clamp(intermediate_intercept + intermediate_slope * z, lo, hi))};
}

AllocationModel fit_logit_linear(std::span<const DensityPoint> points) {
  if (points.size() < 2) throw std::invalid_argument("fit_logit_linear: needs at least 2 points");
  const auto n = static_cast<Index>(points.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y_in(n), y_mid(n);
  for (Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    design(i, 1) = logit(p.memory);
    y_in(i) = logit(p.input_density);
    y_mid(i) = logit(p.intermediate_density);
  }
  const Eigen::VectorXd x = design.col(1);
  if ((x.array() - x.mean()).abs().maxCoeff() < 1e-12)
    throw std::invalid_argument("fit_logit_linear: degenerate design, all target densities equal");
  const auto qr = design.colPivHouseholderQr();
  const Eigen::Vector2d c_in = qr.solve(y_in);
  const Eigen::Vector2d c_mid = qr.solve(y_mid);
  return {c_in(1), c_in(0), c_mid(1), c_mid(0)};
}

AllocationModel fit_allocation_model(std::span<const DensityPoint> front) {
  std::vector<DensityPoint> interior;
  for (const auto& p : front)
    if (p.input_density < 1.0 && p.intermediate_density < 1.0) interior.push_back(p);
  const auto distinct = std::adjacent_find(interior.begin(), interior.end(), [](const auto& a, const auto& b) {
                          return std::abs(a.memory - b.memory) >= 1e-12;
                        }) != interior.end();
  return fit_logit_linear(interior.size() >= 2 && distinct ? std::span<const DensityPoint>(interior) : front);
}

Allocation optimal_allocation(const AllocationModel& model, double target, Index d_model, Index d_ff) {
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("optimal_allocation: target must be in (0, 1)");
  const auto [in_density, mid_density] = model.predict(target);
  Allocation a;
  a.input_density = in_density;
  a.intermediate_density = mid_density;
  a.k_in = density_to_k(in_density, d_model);
  a.k_mid = density_to_k(mid_density, d_ff);
  a.memory = dip_memory_fraction(a.k_in, a.k_mid, d_model, d_ff);
  return a;
}

}  // namespace dipsim
