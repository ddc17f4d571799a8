#include <doctest.h>

#include <cmath>

#include "parsteps/regression.hpp"
#include "parsteps/rng.hpp"

using namespace parsteps;
using namespace parsteps::regression;

namespace {

struct Synth {
  Eigen::MatrixXd X_train, X_test;
  Eigen::VectorXd y_train, y_test;
};

// standardized random columns, y = X beta* + noise
Synth make_synth(std::uint64_t seed, int n_train, int n_test, const Eigen::VectorXd& beta,
                 double noise_sd) {
  Rng rng = Rng::derive(seed, "synth");
  int n = n_train + n_test;
  int p = static_cast<int>(beta.size());
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j) {
    double mean = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      X(i, j) = rng.normal();
      mean += X(i, j);
    }
    mean /= n;
    for (int i = 0; i < n; ++i) ss += (X(i, j) - mean) * (X(i, j) - mean);
    double sd = std::sqrt(ss / (n - 1));
    for (int i = 0; i < n; ++i) X(i, j) = (X(i, j) - mean) / sd;
  }
  Eigen::VectorXd y = X * beta;
  for (int i = 0; i < n; ++i) y[i] += noise_sd * rng.normal();
  Synth s;
  s.X_train = X.topRows(n_train);
  s.X_test = X.bottomRows(n_test);
  s.y_train = y.head(n_train);
  s.y_test = y.tail(n_test);
  return s;
}

PriorConfig priors(std::uint64_t seed) {
  PriorConfig p;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("prior validation") {
  PriorConfig p;
  p.draws = 100;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = PriorConfig{};
  p.coef_sd = 0;
  CHECK_THROWS_AS(p.validate(), InputError);
}

TEST_CASE("noiseless recovery is essentially exact") {
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  Synth s = make_synth(1, 400, 400, beta, 0.0);
  FitResult f = fit(s.X_train, s.y_train, priors(7));
  Eigen::VectorXd mean = f.beta.colwise().mean();
  CHECK(std::fabs(mean[0] - 2.0) < 1e-6);
  CHECK(std::fabs(mean[1] + 1.0) < 1e-6);
  CHECK(f.train_rmse < 1e-6);
}

TEST_CASE("noisy recovery and coverage on one replicate") {
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  Synth s = make_synth(2, 400, 400, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(8));
  Eigen::VectorXd mean = f.beta.colwise().mean();
  CHECK(std::fabs(mean[0] - 2.0) < 0.05);
  CHECK(std::fabs(mean[1] + 1.0) < 0.05);
  Ci c0 = credible_interval(f.beta.col(0));
  CHECK(c0.lo <= 2.0);
  CHECK(2.0 <= c0.hi);
  // sigma posterior concentrates near the true noise scale
  CHECK(f.sigma.mean() == doctest::Approx(0.1).epsilon(0.25));
}

TEST_CASE("determinism: identical seed gives bit-identical draws") {
  Eigen::VectorXd beta(3);
  beta << 2.0, -1.0, 0.0;
  Synth s = make_synth(3, 200, 200, beta, 0.1);
  FitResult a = fit(s.X_train, s.y_train, priors(42));
  FitResult b = fit(s.X_train, s.y_train, priors(42));
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() == 0.0);
  FitResult c = fit(s.X_train, s.y_train, priors(43));
  CHECK((a.beta - c.beta).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fit input validation") {
  Eigen::MatrixXd X(10, 2);
  X.setRandom();
  Eigen::VectorXd y(9);
  y.setZero();
  CHECK_THROWS_AS(fit(X, y, priors(1)), DimensionMismatch);
  Eigen::VectorXd y10 = Eigen::VectorXd::Zero(10);
  Eigen::MatrixXd Xnan = X;
  Xnan(0, 0) = std::nan("");
  CHECK_THROWS_AS(fit(Xnan, y10, priors(1)), SingularDesign);
  CHECK_THROWS_AS(fit(X, y10, priors(1), {"only_one_name"}), DimensionMismatch);
}

TEST_CASE("rmse identities") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK(rmse(y, y) == 0.0);
  Eigen::VectorXd shifted = y.array() + 2.5;
  CHECK(rmse(y, shifted) == doctest::Approx(2.5));
}

TEST_CASE("predict_rmse returns one rmse per draw") {
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  Synth s = make_synth(4, 300, 300, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(9));
  Eigen::VectorXd r = predict_rmse(f, s.X_test, s.y_test);
  CHECK(r.size() == 500);
  // close to the noise sd for a well-specified model
  CHECK(r.mean() == doctest::Approx(0.1).epsilon(0.10));
  Eigen::MatrixXd narrow = s.X_test.leftCols(1);
  CHECK_THROWS_AS(predict_rmse(f, narrow, s.y_test), DimensionMismatch);
}

TEST_CASE("ablate rotates exactly one column by floor(n/2)") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 10, 2, 20, 3, 30, 4, 40;
  Eigen::MatrixXd A = ablate(X, 0);
  Eigen::VectorXd expect(4);
  expect << 3, 4, 1, 2;
  CHECK((A.col(0) - expect).norm() == 0.0);
  CHECK((A.col(1) - X.col(1)).norm() == 0.0);
  CHECK_THROWS_AS(ablate(X, 5), UnknownTerm);

  // shifting by n is the identity; composing with n/2 equals n/2 alone
  Eigen::VectorXd col = X.col(0);
  CHECK((rotate_column(col, 4) - col).norm() == 0.0);
  CHECK((rotate_column(rotate_column(col, 4), 2) - rotate_column(col, 2)).norm() == 0.0);
}

TEST_CASE("constant and periodic columns are ablation fixed points") {
  Eigen::MatrixXd X(6, 2);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = 1.0;                 // constant
    X(i, 1) = i % 3 == 0 ? 1 : 0;  // period n/2 = 3
  }
  CHECK((ablate(X, 0).col(0) - X.col(0)).norm() == 0.0);
  CHECK((ablate(X, 1).col(1) - X.col(1)).norm() == 0.0);
}

TEST_CASE("delta rmse separates live terms from nulls") {
  Eigen::VectorXd beta(3);
  beta << 2.0, -1.0, 0.0;
  Synth s = make_synth(5, 400, 400, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(10));
  evaluate_on_test(f, s.X_test, s.y_test);
  Ci live = credible_interval(f.drmse.col(0));
  CHECK(live.excludes_zero());
  CHECK(live.lo > 0);
  Ci live2 = credible_interval(f.drmse.col(1));
  CHECK(live2.excludes_zero());
  CHECK(reliable(f, 0));
  CHECK(reliable(f, 1));
  CHECK(!reliable(f, 2));
}

TEST_CASE("a constant column has identically zero delta rmse") {
  Rng rng(31);
  int n = 200;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = 1.0;
    y[i] = 2.0 * X(i, 0) + 0.1 * rng.normal();
  }
  PriorConfig p = priors(11);
  FitResult f = fit(X.topRows(100), y.head(100), p);
  Eigen::VectorXd dr = delta_rmse(f, X.bottomRows(100), y.tail(100), 1);
  CHECK(dr.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compare_terms is asymmetric by construction") {
  Eigen::VectorXd beta(2);
  beta << 2.0, 0.0;
  Synth s = make_synth(6, 400, 400, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(12));
  evaluate_on_test(f, s.X_test, s.y_test);
  CHECK(compare_terms(f, 0, 1));
  CHECK(!compare_terms(f, 1, 0));
  CHECK(!compare_terms(f, 0, 0));  // difference identically zero
}

TEST_CASE("duplicated columns compare false both ways") {
  Rng rng(77);
  int n = 800;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    X(i, 0) = v;
    X(i, 1) = v;
    y[i] = 2.0 * v + 0.1 * rng.normal();
  }
  FitResult f = fit(X.topRows(400), y.head(400), priors(13));
  evaluate_on_test(f, X.bottomRows(400), y.tail(400));
  CHECK(!compare_terms(f, 0, 1));
  CHECK(!compare_terms(f, 1, 0));
}

TEST_CASE("ablation locality under a shared permutation") {
  Eigen::VectorXd beta(3);
  beta << 2.0, -1.0, 0.5;
  Synth s = make_synth(14, 300, 300, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(15));
  Eigen::VectorXd d0 = delta_rmse(f, s.X_test, s.y_test, 0);
  // jointly permute y and the other columns (a cyclic shift keeps the pairs)
  long n = s.X_test.rows();
  Eigen::MatrixXd Xp = s.X_test;
  Eigen::VectorXd yp(n);
  Xp.col(1) = rotate_column(s.X_test.col(1), 7);
  Xp.col(2) = rotate_column(s.X_test.col(2), 7);
  Eigen::VectorXd x0p = rotate_column(s.X_test.col(0), 7);
  Xp.col(0) = x0p;
  yp = rotate_column(s.y_test, 7);
  Eigen::VectorXd d0p = delta_rmse(f, Xp, yp, 0);
  CHECK((d0 - d0p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("posterior variance halves when n doubles") {
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  Synth small = make_synth(20, 400, 10, beta, 0.5);
  Synth big = make_synth(20, 800, 10, beta, 0.5);
  FitResult fs = fit(small.X_train, small.y_train, priors(21));
  FitResult fb = fit(big.X_train, big.y_train, priors(21));
  auto var = [](const Eigen::VectorXd& v) {
    double m = v.mean();
    return (v.array() - m).square().sum() / (v.size() - 1);
  };
  double ratio = var(fb.beta.col(0)) / var(fs.beta.col(0));
  CHECK(ratio == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("sum_delta_rmse adds draws across regions and terms") {
  Eigen::VectorXd beta(2);
  beta << 2.0, -1.0;
  Synth s = make_synth(30, 300, 300, beta, 0.1);
  FitResult a = fit(s.X_train, s.y_train, priors(31));
  evaluate_on_test(a, s.X_test, s.y_test);
  FitResult b = fit(s.X_train, s.y_train, priors(32));
  evaluate_on_test(b, s.X_test, s.y_test);
  Eigen::VectorXd sum = sum_delta_rmse({&a, &b}, {0});
  CHECK((sum - (a.drmse.col(0) + b.drmse.col(0))).cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd group = sum_delta_rmse({&a}, {0, 1});
  CHECK((group - (a.drmse.col(0) + a.drmse.col(1))).cwiseAbs().maxCoeff() == 0.0);
  // single term, single region: just its own distribution
  Eigen::VectorXd own = sum_delta_rmse({&a}, {1});
  CHECK((own - a.drmse.col(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("summed group effects dominate when more regions carry them") {
  // ten regions; term 0 is live in six of them, term 1 in three
  Rng rng = Rng::derive(606, "group-study");
  int n = 800;
  Eigen::MatrixXd X(n, 2);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < n; ++i) X(i, j) = rng.normal();
    double mean = X.col(j).mean();
    double sd = std::sqrt((X.col(j).array() - mean).square().sum() / (n - 1));
    X.col(j) = (X.col(j).array() - mean) / sd;
  }
  std::vector<FitResult> fits;
  std::vector<const FitResult*> ptrs;
  for (int r = 0; r < 10; ++r) {
    double ba = r < 6 ? 1.0 : 0.0;
    double bb = r < 3 ? 1.0 : 0.0;
    Eigen::VectorXd y = ba * X.col(0) + bb * X.col(1);
    for (int i = 0; i < n; ++i) y[i] += 0.2 * rng.normal();
    PriorConfig p = priors(700 + r);
    FitResult f = fit(X.topRows(400), y.head(400), p);
    evaluate_on_test(f, X.bottomRows(400), y.tail(400));
    fits.push_back(std::move(f));
  }
  for (const FitResult& f : fits) ptrs.push_back(&f);
  Eigen::VectorXd sum_a = sum_delta_rmse(ptrs, {0});
  Eigen::VectorXd sum_b = sum_delta_rmse(ptrs, {1});
  // stochastic dominance, checked at several quantiles plus the mean
  for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    auto quant = [q](Eigen::VectorXd v) {
      std::vector<double> s(v.data(), v.data() + v.size());
      std::sort(s.begin(), s.end());
      return s[static_cast<std::size_t>(q * (s.size() - 1))];
    };
    REQUIRE(quant(sum_a) > quant(sum_b));
  }
  CHECK(sum_a.mean() > sum_b.mean());
}

TEST_CASE("term lookup by name") {
  Eigen::VectorXd beta(2);
  beta << 1.0, 0.0;
  Synth s = make_synth(40, 100, 100, beta, 0.1);
  FitResult f = fit(s.X_train, s.y_train, priors(41), {"alpha", "beta"});
  CHECK(f.term_index("beta") == 1);
  CHECK_THROWS_AS(f.term_index("gamma"), UnknownTerm);
  evaluate_on_test(f, s.X_test, s.y_test);
  CHECK(reliable(f, "alpha") == reliable(f, 0));
}
