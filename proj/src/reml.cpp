#include "borrow/reml.hpp"

#include "borrow/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace borrow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double log_det_spd(const SparseMatrix& m) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw NotPositiveDefinite("LDL' factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  if ((d.array() <= 0.0).any()) throw NotPositiveDefinite("matrix is not positive-definite");
  return d.array().log().sum();
}

SparseMatrix stacked_design(const ModelSpec& spec) {
  const Eigen::Index n = spec.n_obs();
  const Eigen::Index p1 = spec.fixed_design.cols();
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index k = 0; k < p1; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (spec.fixed_design(i, k) != 0.0) triplets.emplace_back(i, k, spec.fixed_design(i, k));
    }
  }
  for (int k = 0; k < spec.random_design.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(spec.random_design, k); it; ++it) {
      triplets.emplace_back(it.row(), p1 + it.col(), it.value());
    }
  }
  SparseMatrix x(n, p1 + spec.random_design.cols());
  x.setFromTriplets(triplets.begin(), triplets.end());
  return x;
}

// -2 x restricted log-likelihood in Henderson's mixed-model-equation form.
double neg2_restricted(const ModelSpec& spec, const Eigen::VectorXd& y) {
  const Eigen::Index n = spec.n_obs();
  const Eigen::Index p1 = spec.fixed_design.cols();
  const Eigen::Index p2 = spec.random_design.cols();
  if (y.size() != n) throw DimensionError("response length does not match the design");
  if ((spec.noise_variances.array() <= 0.0).any()) {
    throw NotPositiveDefinite("noise variances must be positive");
  }
  const SparseMatrix x = stacked_design(spec);
  const Eigen::VectorXd rinv = spec.noise_variances.cwiseInverse();

  double log_det_q = 0.0;
  std::vector<PrecisionMatrix> prior_blocks{PrecisionMatrix(p1, p1)};
  if (p2 > 0) {
    PrecisionMatrix q = precision(spec.random_structure);
    log_det_q = log_det_spd(q);
    prior_blocks.push_back(std::move(q));
  }
  SparseMatrix c = SparseMatrix(x.transpose() * rinv.asDiagonal()) * x + block_diagonal(prior_blocks);

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(c);
  if (ldlt.info() != Eigen::Success) throw NotPositiveDefinite("mixed-model equations are singular");
  const Eigen::VectorXd d = ldlt.vectorD();
  if ((d.array() <= 0.0).any()) throw NotPositiveDefinite("mixed-model equations are singular");

  const Eigen::VectorXd ry = rinv.cwiseProduct(y);
  const Eigen::VectorXd rhs = x.transpose() * ry;
  const Eigen::VectorXd b = ldlt.solve(rhs);
  const double quad = y.dot(ry) - b.dot(rhs);

  return static_cast<double>(n - p1) * kLog2Pi + spec.noise_variances.array().log().sum() - log_det_q +
         d.array().log().sum() + quad;
}

enum class ParamKind { PhiScale, Sigma2, RhoSpace, RhoTime };

struct FreeParam {
  ParamKind kind;
  std::size_t term = 0;
};

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

bool has_rho_space(const CovarianceStructure& s) {
  return std::holds_alternative<CarStructure>(s) || std::holds_alternative<SpaceTimeAr>(s);
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  const Eigen::Index n = start.size();
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };

  NelderMeadResult result;
  result.x = start;
  result.value = eval(start);
  if (n == 0) {
    result.converged = true;
    return result;
  }

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1));
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  auto init_simplex = [&](const Eigen::VectorXd& x0, double f0) {
    pts[0] = x0;
    vals[0] = f0;
    for (Eigen::Index k = 0; k < n; ++k) {
      pts[k + 1] = x0;
      pts[k + 1](k) += options.initial_step;
      vals[k + 1] = eval(pts[k + 1]);
    }
  };

  int iter = 0;
  int restarts = 0;
  init_simplex(start, result.value);
  while (true) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> sp;
    std::vector<double> sv;
    for (std::size_t k : order) {
      sp.push_back(pts[k]);
      sv.push_back(vals[k]);
    }
    pts.swap(sp);
    vals.swap(sv);

    const double best = vals.front();
    const double worst = vals.back();
    double diameter = 0.0;
    for (Eigen::Index k = 1; k <= n; ++k) {
      diameter = std::max(diameter, (pts[k] - pts[0]).lpNorm<Eigen::Infinity>());
    }
    const bool f_done = std::isfinite(worst) &&
                        std::abs(worst - best) <= options.f_tolerance * std::max(1.0, std::abs(best));
    if (f_done && diameter <= options.x_tolerance) {
      // A collapsed simplex can stall away from the optimum; restart once around the best point.
      if (restarts < 1 && iter < options.max_iterations) {
        const double before = best;
        ++restarts;
        init_simplex(pts[0], best);
        bool improved = false;
        for (Eigen::Index k = 1; k <= n; ++k) {
          if (vals[k] < before - options.f_tolerance * std::max(1.0, std::abs(before))) improved = true;
        }
        if (improved) continue;
        // Restart simplex found nothing better: accept the collapsed one.
      }
      result.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    ++iter;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) centroid += pts[k];
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd& xw = pts[n];

    const Eigen::VectorXd xr = centroid + (centroid - xw);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xw);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
      continue;
    }
    if (fr < vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
      continue;
    }
    bool accepted = false;
    if (fr < vals[n]) {
      const Eigen::VectorXd xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        pts[n] = xc;
        vals[n] = fc;
        accepted = true;
      }
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (xw - centroid);
      const double fc = eval(xc);
      if (fc < vals[n]) {
        pts[n] = xc;
        vals[n] = fc;
        accepted = true;
      }
    }
    if (!accepted) {
      for (Eigen::Index k = 1; k <= n; ++k) {
        pts[k] = pts[0] + 0.5 * (pts[k] - pts[0]);
        vals[k] = eval(pts[k]);
      }
    }
  }

  std::size_t arg = 0;
  for (std::size_t k = 1; k < vals.size(); ++k) {
    if (vals[k] < vals[arg]) arg = k;
  }
  result.x = pts[arg];
  result.value = vals[arg];
  result.iterations = iter;
  return result;
}

double restricted_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& y) {
  return -0.5 * neg2_restricted(spec, y);
}

std::vector<TermEstimate> current_terms(const ModelSpec& spec) {
  std::vector<TermEstimate> out;
  for (const auto& term : spec.random_structure) {
    TermEstimate e;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, IidBlocks>) {
            e.sigma2 = s.blocks.empty() ? 1.0 : s.blocks.front().sigma2;
          } else if constexpr (std::is_same_v<T, DensePrecision>) {
            e.sigma2 = 1.0;
          } else if constexpr (std::is_same_v<T, CarStructure>) {
            e.sigma2 = s.sigma2;
            e.rho_space = s.rho;
          } else {
            e.sigma2 = s.sigma2;
            e.rho_space = s.rho_space;
            e.rho_time = s.rho_time;
          }
        },
        term);
    out.push_back(e);
  }
  return out;
}

ModelSpec apply_estimates(const ModelSpec& spec, const VarianceEstimates& estimates) {
  if (estimates.terms.size() != spec.random_structure.size()) {
    throw DimensionError("estimates carry " + std::to_string(estimates.terms.size()) +
                         " terms, the model has " + std::to_string(spec.random_structure.size()));
  }
  ModelSpec out = spec;
  out.noise_variances = spec.noise_variances * estimates.phi_scale;
  for (std::size_t k = 0; k < out.random_structure.size(); ++k) {
    const TermEstimate& e = estimates.terms[k];
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, IidBlocks>) {
            for (auto& b : s.blocks) b.sigma2 = e.sigma2;
          } else if constexpr (std::is_same_v<T, DensePrecision>) {
            s.precision /= e.sigma2;
          } else if constexpr (std::is_same_v<T, CarStructure>) {
            s.sigma2 = e.sigma2;
            s.rho = e.rho_space;
          } else {
            s.sigma2 = e.sigma2;
            s.rho_space = e.rho_space;
            s.rho_time = e.rho_time;
          }
        },
        out.random_structure[k]);
  }
  return out;
}

VarianceEstimates fit_variance_reml(const ModelSpec& spec, const Eigen::VectorXd& y,
                                    const VarianceFitPlan& plan) {
  if (y.size() != spec.n_obs()) throw DimensionError("response length does not match the design");
  if (spec.n_obs() < 2) throw DimensionError("REML needs at least two observations");

  std::vector<FreeParam> free;
  if (plan.phi_scale) free.push_back({ParamKind::PhiScale, 0});
  for (std::size_t k = 0; k < plan.terms.size() && k < spec.random_structure.size(); ++k) {
    const auto& term = spec.random_structure[k];
    if (plan.terms[k].sigma2) free.push_back({ParamKind::Sigma2, k});
    if (plan.terms[k].rho_space) {
      if (!has_rho_space(term)) throw DimensionError("term " + std::to_string(k) + " has no rho_space");
      free.push_back({ParamKind::RhoSpace, k});
    }
    if (plan.terms[k].rho_time) {
      if (!std::holds_alternative<SpaceTimeAr>(term)) {
        throw DimensionError("term " + std::to_string(k) + " has no rho_time");
      }
      free.push_back({ParamKind::RhoTime, k});
    }
  }
  if (free.size() > 4) {
    throw DimensionError("REML supports at most 4 free variance parameters, got " +
                         std::to_string(free.size()));
  }

  const double mean = y.mean();
  const double var_y = std::max((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1),
                                std::numeric_limits<double>::min());
  const double variance_floor = 1e-10 * var_y;

  VarianceEstimates base;
  base.terms = current_terms(spec);

  auto decode = [&](const Eigen::VectorXd& theta) {
    VarianceEstimates e = base;
    for (std::size_t k = 0; k < free.size(); ++k) {
      const double t = theta(static_cast<Eigen::Index>(k));
      switch (free[k].kind) {
        case ParamKind::PhiScale:
          e.phi_scale = std::max(std::exp(t), variance_floor);
          break;
        case ParamKind::Sigma2:
          e.terms[free[k].term].sigma2 = std::max(std::exp(t), variance_floor);
          break;
        case ParamKind::RhoSpace:
          e.terms[free[k].term].rho_space = std::min(logistic(t), 1.0 - 1e-12);
          break;
        case ParamKind::RhoTime:
          e.terms[free[k].term].rho_time = std::min(logistic(t), 1.0 - 1e-12);
          break;
      }
    }
    return e;
  };

  Eigen::VectorXd theta0(static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    const auto& term = base.terms[free[k].term];
    double t = 0.0;
    switch (free[k].kind) {
      case ParamKind::PhiScale:
        t = 0.0;
        break;
      case ParamKind::Sigma2:
        t = std::log(std::max(term.sigma2, 1e3 * variance_floor));
        break;
      case ParamKind::RhoSpace:
        t = logit(std::clamp(term.rho_space, 0.05, 0.95));
        break;
      case ParamKind::RhoTime:
        t = logit(std::clamp(term.rho_time, 0.05, 0.95));
        break;
    }
    theta0(static_cast<Eigen::Index>(k)) = t;
  }

  auto objective = [&](const Eigen::VectorXd& theta) {
    try {
      return neg2_restricted(apply_estimates(spec, decode(theta)), y);
    } catch (const Error&) {
      return kInf;
    }
  };

  const NelderMeadResult nm = nelder_mead(objective, theta0, plan.optimizer);
  VarianceEstimates out = decode(nm.x);
  out.log_restricted_likelihood = -0.5 * nm.value;
  out.iterations = nm.iterations;
  out.converged = nm.converged;
  if (!std::isfinite(nm.value)) {
    throw NotPositiveDefinite("restricted likelihood is undefined at every visited parameter value");
  }
  if (!nm.converged) {
    out.warnings.push_back("NonConvergence: iteration cap of " +
                           std::to_string(plan.optimizer.max_iterations) +
                           " reached; returning the best point found");
  }
  const double boundary_tol = 1e-6;
  auto flag = [&](const std::string& what) {
    out.at_boundary = true;
    out.warnings.push_back("BoundaryWarning: " + what);
  };
  if (plan.phi_scale && out.phi_scale <= boundary_tol * var_y) flag("noise scale at zero");
  for (const auto& p : free) {
    const auto& t = out.terms[p.term];
    const std::string name = "term " + std::to_string(p.term);
    if (p.kind == ParamKind::Sigma2 && t.sigma2 <= boundary_tol * var_y) flag(name + " variance at zero");
    if (p.kind == ParamKind::RhoSpace && t.rho_space >= 1.0 - boundary_tol) flag(name + " rho_space at 1");
    if (p.kind == ParamKind::RhoTime && t.rho_time >= 1.0 - boundary_tol) flag(name + " rho_time at 1");
  }
  return out;
}

}  // namespace borrow
