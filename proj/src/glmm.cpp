#include "borrow/glmm.hpp"

#include "borrow/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace borrow {

PseudoVarianceMode parse_pseudo_variance_mode(std::string_view name) {
  if (name == "moment_matched") return PseudoVarianceMode::MomentMatched;
  if (name == "paper_literal") return PseudoVarianceMode::PaperLiteral;
  throw ParseError("unknown variance mode '" + std::string(name) + "' (moment_matched | paper_literal)");
}

std::string_view to_string(PseudoVarianceMode mode) {
  return mode == PseudoVarianceMode::MomentMatched ? "moment_matched" : "paper_literal";
}

PseudoData poisson_pseudo_observations(const Eigen::VectorXd& counts, const Eigen::VectorXd& offsets,
                                       PseudoVarianceMode mode) {
  if (counts.size() != offsets.size()) throw DimensionError("counts and offsets differ in length");
  const Eigen::Index n = counts.size();
  PseudoData out;
  out.response.resize(n);
  out.variance.resize(n);
  out.eta_hat.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = counts(i);
    const double e = offsets(i);
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw NonPositiveOffset("offset of row " + std::to_string(i) + " is " + std::to_string(e));
    }
    if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y)) {
      throw DimensionError("count of row " + std::to_string(i) + " is not a non-negative integer");
    }
    const double eta = (y == 0.0 ? 0.5 : y) / e;
    out.eta_hat(i) = eta;
    out.response(i) = std::log(eta);
    out.variance(i) = mode == PseudoVarianceMode::MomentMatched ? 1.0 / (eta * e) : 1.0 / eta;
  }
  return out;
}

PseudoMoments simulate_pseudo_moments(double eta, double offset, int draws, std::uint64_t seed) {
  if (draws < 2) throw DimensionError("at least two draws are needed");
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long long> poisson(eta * offset);
  Eigen::VectorXd counts(draws);
  for (int k = 0; k < draws; ++k) counts(k) = static_cast<double>(poisson(rng));
  const PseudoData pd = poisson_pseudo_observations(counts, Eigen::VectorXd::Constant(draws, offset));
  PseudoMoments m;
  m.mean = pd.response.mean();
  m.variance = (pd.response.array() - m.mean).square().sum() / (draws - 1.0);
  m.std_error = std::sqrt(m.variance / draws);
  return m;
}

}  // namespace borrow
