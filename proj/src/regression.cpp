#include "parsteps/regression.hpp"

#include <algorithm>
#include <cmath>

#include "parsteps/rng.hpp"

namespace parsteps::regression {

void PriorConfig::validate() const {
  if (!(intercept_sd > 0) || !(coef_sd > 0) || !(noise_rate > 0))
    throw InputError("prior scales must be positive");
  if (draws < 500) throw InputError("need at least 500 posterior draws");
}

int FitResult::term_index(const std::string& name) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i] == name) return static_cast<int>(i);
  }
  throw UnknownTerm(name);
}

namespace {

constexpr int kSigmaGrid = 4096;

}  // namespace

FitResult fit(const Eigen::MatrixXd& X_in, const Eigen::VectorXd& y_in, const PriorConfig& priors,
              std::vector<std::string> terms) {
  priors.validate();
  const long n = X_in.rows();
  long p = X_in.cols();
  if (n != y_in.rows()) throw DimensionMismatch("fit: rows(X) != rows(y)");
  if (n < 2 || p < 1) throw SingularDesign("fit: degenerate problem size");
  if (!X_in.allFinite() || !y_in.allFinite()) throw SingularDesign("fit: non-finite inputs");
  if (terms.empty()) {
    for (long j = 0; j < p; ++j) terms.push_back("x" + std::to_string(j));
  }
  if (static_cast<long>(terms.size()) != p) throw DimensionMismatch("fit: term names vs columns");

  FitResult f;
  f.terms = std::move(terms);

  // regressors enter mean-centered; an intercept, when requested, becomes an
  // extra unit column with its own prior scale
  f.x_mean = X_in.colwise().mean();
  Eigen::MatrixXd X = X_in.rowwise() - f.x_mean;
  Eigen::VectorXd y = y_in;
  if (priors.intercept) {
    X.conservativeResize(n, p + 1);
    X.col(p) = Eigen::VectorXd::Ones(n);
    ++p;
  } else {
    f.y_mean = y.mean();
    y.array() -= f.y_mean;
  }

  Eigen::VectorXd prior_sd = Eigen::VectorXd::Constant(p, priors.coef_sd);
  if (priors.intercept) prior_sd[p - 1] = priors.intercept_sd;

  // scale so the prior on theta = beta / prior_sd is standard normal
  Eigen::MatrixXd XS = X * prior_sd.asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(XS, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd d = svd.singularValues();
  Eigen::MatrixXd U = svd.matrixU();
  Eigen::MatrixXd W = svd.matrixV();
  Eigen::VectorXd uy = U.transpose() * y;
  const double yy = y.squaredNorm();
  const double resid_out = std::max(yy - uy.squaredNorm(), 0.0);  // outside col(X)

  // sigma grid spanning the residual scale with generous slack
  double ls_rmse = std::sqrt(resid_out / std::max<long>(n - p, 1));
  double lo = std::max(ls_rmse / 50.0, 1e-8);
  double hi = std::max({ls_rmse * 50.0, std::sqrt(yy / n) * 10.0 + 1.0, lo * 10.0});
  Eigen::VectorXd grid(kSigmaGrid), logpost(kSigmaGrid);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < kSigmaGrid; ++i)
    grid[i] = std::exp(llo + (lhi - llo) * i / (kSigmaGrid - 1));
  // log p(sigma | y) up to a constant, with beta integrated out:
  //   -1/2 [ sum_j log(s2 + d_j^2) + (n - p) log s2 ]
  //   -1/2 [ resid_out / s2 + sum_j uy_j^2 / (s2 + d_j^2) ]  - noise_rate * sigma
  for (int i = 0; i < kSigmaGrid; ++i) {
    double s2 = grid[i] * grid[i];
    double logdet = (n - p) * std::log(s2);
    double quad = resid_out / s2;
    for (long j = 0; j < p; ++j) {
      double dj2 = d[j] * d[j];
      logdet += std::log(s2 + dj2);
      quad += uy[j] * uy[j] / (s2 + dj2);
    }
    logpost[i] = -0.5 * (logdet + quad) - priors.noise_rate * grid[i];
  }
  double m = logpost.maxCoeff();
  if (!std::isfinite(m)) throw SingularDesign("fit: sigma marginal is degenerate");
  // trapezoid CDF over sigma
  Eigen::VectorXd dens = (logpost.array() - m).exp();
  Eigen::VectorXd cdf(kSigmaGrid);
  cdf[0] = 0;
  for (int i = 1; i < kSigmaGrid; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
  double total = cdf[kSigmaGrid - 1];
  if (!(total > 0)) throw SingularDesign("fit: sigma marginal has no mass");

  Rng rng = Rng::derive(priors.seed, "fit");
  f.beta.resize(priors.draws, static_cast<long>(f.terms.size()));
  f.sigma.resize(priors.draws);
  if (priors.intercept) f.intercept.resize(priors.draws);
  Eigen::VectorXd z(p), mean_t(p), theta(p);
  for (int t = 0; t < priors.draws; ++t) {
    // inverse-CDF draw of sigma
    double u = rng.uniform() * total;
    int idx = static_cast<int>(std::lower_bound(cdf.data(), cdf.data() + kSigmaGrid, u) -
                               cdf.data());
    double sig;
    if (idx <= 0) {
      sig = grid[0];
    } else {
      double c0 = cdf[idx - 1], c1 = cdf[idx];
      double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
      sig = grid[idx - 1] + w * (grid[idx] - grid[idx - 1]);
    }
    f.sigma[t] = sig;
    double s2 = sig * sig;
    // theta | sigma ~ N(W diag(d/(d^2+s2)) uy, W diag(s2/(d^2+s2)) W^T)
    for (long j = 0; j < p; ++j) {
      mean_t[j] = d[j] / (d[j] * d[j] + s2) * uy[j];
      z[j] = rng.normal() * std::sqrt(s2 / (d[j] * d[j] + s2));
    }
    theta = W * (mean_t + z);
    for (long j = 0; j < p; ++j) theta[j] *= prior_sd[j];
    if (priors.intercept) {
      f.intercept[t] = theta[p - 1];
      f.beta.row(t) = theta.head(p - 1).transpose();
    } else {
      f.beta.row(t) = theta.transpose();
    }
  }
  if (priors.intercept) f.intercept_mean = f.intercept.mean();

  Eigen::VectorXd beta_mean = f.beta.colwise().mean();
  Eigen::VectorXd fitted =
      (X_in.rowwise() - f.x_mean).matrix() * beta_mean +
      Eigen::VectorXd::Constant(n, f.y_mean + f.intercept_mean);
  f.train_rmse = rmse(y_in, fitted);
  return f;
}

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.rows() != yhat.rows()) throw DimensionMismatch("rmse: length mismatch");
  return std::sqrt((y - yhat).squaredNorm() / y.rows());
}

Eigen::VectorXd predict_rmse(const FitResult& f, const Eigen::MatrixXd& X_test,
                             const Eigen::VectorXd& y_test) {
  if (X_test.cols() != static_cast<long>(f.terms.size()))
    throw DimensionMismatch("predict_rmse: test columns do not match training terms");
  if (X_test.rows() != y_test.rows()) throw DimensionMismatch("predict_rmse: rows(X) != rows(y)");
  Eigen::MatrixXd Xc = X_test.rowwise() - f.x_mean;
  int draws = f.draw_count();
  Eigen::VectorXd out(draws);
  for (int t = 0; t < draws; ++t) {
    double c = f.y_mean + (f.intercept.size() ? f.intercept[t] : 0.0);
    Eigen::VectorXd yhat = Xc * f.beta.row(t).transpose();
    yhat.array() += c;
    out[t] = rmse(y_test, yhat);
  }
  return out;
}

Eigen::VectorXd rotate_column(const Eigen::VectorXd& col, long k) {
  long n = col.rows();
  if (n == 0) return col;
  k = ((k % n) + n) % n;
  Eigen::VectorXd out(n);
  for (long i = 0; i < n; ++i) out[i] = col[(i + k) % n];
  return out;
}

Eigen::MatrixXd ablate(const Eigen::MatrixXd& X, int term) {
  if (term < 0 || term >= X.cols()) throw UnknownTerm("#" + std::to_string(term));
  if (X.rows() < 2) throw InputError("ablate: need at least 2 rows");
  Eigen::MatrixXd out = X;
  out.col(term) = rotate_column(X.col(term), X.rows() / 2);
  return out;
}

Eigen::MatrixXd ablate(const Eigen::MatrixXd& X, const FitResult& f, const std::string& term) {
  return ablate(X, f.term_index(term));
}

Eigen::VectorXd delta_rmse(const FitResult& f, const Eigen::MatrixXd& X_test,
                           const Eigen::VectorXd& y_test, int term) {
  Eigen::VectorXd full = predict_rmse(f, X_test, y_test);
  Eigen::VectorXd shifted = predict_rmse(f, ablate(X_test, term), y_test);
  return shifted - full;
}

void evaluate_on_test(FitResult& f, const Eigen::MatrixXd& X_test,
                      const Eigen::VectorXd& y_test) {
  f.rmse_full = predict_rmse(f, X_test, y_test);
  f.drmse.resize(f.draw_count(), static_cast<long>(f.terms.size()));
  for (long j = 0; j < static_cast<long>(f.terms.size()); ++j) {
    Eigen::VectorXd shifted = predict_rmse(f, ablate(X_test, static_cast<int>(j)), y_test);
    f.drmse.col(j) = shifted - f.rmse_full;
  }
  f.evaluated = true;
}

Ci credible_interval(const Eigen::VectorXd& draws, double level) {
  if (draws.size() == 0) throw InputError("credible_interval: no draws");
  if (!(level > 0 && level < 1)) throw InputError("credible_interval: bad level");
  std::vector<double> v(draws.data(), draws.data() + draws.size());
  std::sort(v.begin(), v.end());
  auto quantile = [&v](double q) {
    double pos = q * (static_cast<double>(v.size()) - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
  };
  double tail = (1 - level) / 2;
  return {quantile(tail), quantile(1 - tail)};
}

namespace {

void require_evaluated(const FitResult& f) {
  if (!f.evaluated) throw InputError("fit has not been evaluated on a test split");
}

}  // namespace

bool reliable(const FitResult& f, int term, double level) {
  require_evaluated(f);
  if (term < 0 || term >= static_cast<int>(f.terms.size()))
    throw UnknownTerm("#" + std::to_string(term));
  Ci beta_ci = credible_interval(f.beta.col(term), level);
  Ci drmse_ci = credible_interval(f.drmse.col(term), level);
  return beta_ci.excludes_zero() && drmse_ci.excludes_zero();
}

bool reliable(const FitResult& f, const std::string& term, double level) {
  return reliable(f, f.term_index(term), level);
}

bool compare_terms(const FitResult& f, int target, int control, double level) {
  require_evaluated(f);
  if (target < 0 || target >= static_cast<int>(f.terms.size()))
    throw UnknownTerm("#" + std::to_string(target));
  if (control < 0 || control >= static_cast<int>(f.terms.size()))
    throw UnknownTerm("#" + std::to_string(control));
  Eigen::VectorXd diff = f.drmse.col(target) - f.drmse.col(control);
  Ci ci = credible_interval(diff, level);
  return ci.lo > 0 && reliable(f, target, level);
}

bool compare_terms(const FitResult& f, const std::string& target, const std::string& control,
                   double level) {
  return compare_terms(f, f.term_index(target), f.term_index(control), level);
}

Eigen::VectorXd sum_delta_rmse(const std::vector<const FitResult*>& fits,
                               const std::vector<int>& term_group) {
  if (fits.empty()) throw InputError("sum_delta_rmse: no fits");
  int draws = fits[0]->draw_count();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(draws);
  for (const FitResult* f : fits) {
    require_evaluated(*f);
    if (f->draw_count() != draws) throw DrawCountMismatch();
    for (int term : term_group) {
      if (term < 0 || term >= static_cast<int>(f->terms.size()))
        throw UnknownTerm("#" + std::to_string(term));
      out += f->drmse.col(term);
    }
  }
  return out;
}

}  // namespace parsteps::regression
