#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "parsteps/errors.hpp"

namespace parsteps::regression {

// Coefficients carry fixed N(0, coef_sd^2) priors and the noise scale an
// exponential(noise_rate) prior. Columns are standardized z-scores in the
// intended use, so the scales apply as stated.
struct PriorConfig {
  double intercept_sd = 1.0;
  double coef_sd = 2.5;
  double noise_rate = 1.0;
  int draws = 500;
  std::uint64_t seed = 0;
  bool intercept = false;

  void validate() const;  // sds > 0, draws >= 500
};

struct DimensionMismatch : InputError {
  using InputError::InputError;
};

struct SingularDesign : NumericalError {
  using NumericalError::NumericalError;
};

struct UnknownTerm : InputError {
  explicit UnknownTerm(const std::string& t) : InputError("unknown term '" + t + "'") {}
};

struct DrawCountMismatch : InputError {
  DrawCountMismatch() : InputError("draw counts differ across fits") {}
};

// Posterior draws for one region plus, after evaluate_on_test, the held-out
// RMSE and per-term ablation distributions.
struct FitResult {
  std::vector<std::string> terms;
  Eigen::MatrixXd beta;          // draws x terms
  Eigen::VectorXd sigma;         // draws
  Eigen::RowVectorXd x_mean;     // training column means
  double y_mean = 0;
  double intercept_mean = 0;     // 0 unless fitted with an intercept
  Eigen::VectorXd intercept;     // draws, empty unless intercept
  double train_rmse = 0;         // at the posterior mean
  Eigen::VectorXd rmse_full;     // per draw on the test split
  Eigen::MatrixXd drmse;         // draws x terms
  bool evaluated = false;

  int draw_count() const { return static_cast<int>(beta.rows()); }
  int term_index(const std::string& name) const;  // UnknownTerm
};

// Exact posterior sampling: beta is integrated out analytically, sigma is
// drawn from its one-dimensional marginal by inverse CDF on a dense grid, and
// beta | sigma is Gaussian in closed form. Deterministic given the seed.
FitResult fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const PriorConfig& priors,
              std::vector<std::string> terms = {});

// One RMSE per posterior draw, using that draw's coefficients.
Eigen::VectorXd predict_rmse(const FitResult& f, const Eigen::MatrixXd& X_test,
                             const Eigen::VectorXd& y_test);

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

// Circular shift of one column by k positions: out[i] = in[(i + k) % n].
Eigen::VectorXd rotate_column(const Eigen::VectorXd& col, long k);

// The named column rotated by floor(n/2); everything else untouched.
Eigen::MatrixXd ablate(const Eigen::MatrixXd& X, int term);
Eigen::MatrixXd ablate(const Eigen::MatrixXd& X, const FitResult& f, const std::string& term);

// RMSE(ablated) - RMSE(full) per draw, one shift shared by all draws.
Eigen::VectorXd delta_rmse(const FitResult& f, const Eigen::MatrixXd& X_test,
                           const Eigen::VectorXd& y_test, int term);

// Fills rmse_full and drmse for all terms.
void evaluate_on_test(FitResult& f, const Eigen::MatrixXd& X_test, const Eigen::VectorXd& y_test);

struct Ci {
  double lo = 0;
  double hi = 0;
  bool excludes_zero() const { return lo > 0 || hi < 0; }
};

// Central quantile interval of the draws (level 0.99 -> [0.5%, 99.5%]).
Ci credible_interval(const Eigen::VectorXd& draws, double level = 0.99);

// Both the beta CI and the dRMSE CI must exclude zero.
bool reliable(const FitResult& f, int term, double level = 0.99);
bool reliable(const FitResult& f, const std::string& term, double level = 0.99);

// Target beats control: the CI of dRMSE_target - dRMSE_control lies above
// zero AND the target itself is reliable. Deliberately asymmetric.
bool compare_terms(const FitResult& f, int target, int control, double level = 0.99);
bool compare_terms(const FitResult& f, const std::string& target, const std::string& control,
                   double level = 0.99);

// Per-draw sum of dRMSE across regions and across the terms of a group.
Eigen::VectorXd sum_delta_rmse(const std::vector<const FitResult*>& fits,
                               const std::vector<int>& term_group);

}  // namespace parsteps::regression
