#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

namespace borrow {

/// Normal approximation of Poisson counts with offsets: log-rate pseudo-responses with
/// variance 1/(eta E) (moment matched) or 1/eta (as printed).
enum class PseudoVarianceMode { MomentMatched, PaperLiteral };

PseudoVarianceMode parse_pseudo_variance_mode(std::string_view name);
std::string_view to_string(PseudoVarianceMode mode);

struct PseudoData {
  Eigen::VectorXd response;  // log eta_hat
  Eigen::VectorXd variance;
  Eigen::VectorXd eta_hat;   // (Y + 0.5 [Y = 0]) / E
};

PseudoData poisson_pseudo_observations(const Eigen::VectorXd& counts, const Eigen::VectorXd& offsets,
                                       PseudoVarianceMode mode = PseudoVarianceMode::MomentMatched);

/// Monte Carlo moments of the pseudo-response for Y ~ Poisson(eta E).
struct PseudoMoments {
  double mean = 0.0;
  double std_error = 0.0;  // of the mean
  double variance = 0.0;   // sample variance
};

PseudoMoments simulate_pseudo_moments(double eta, double offset, int draws, std::uint64_t seed);

}  // namespace borrow
