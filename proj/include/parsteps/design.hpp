#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parsteps/errors.hpp"

namespace parsteps::design {

struct WordEvent {
  std::string word;
  double onset_s = 0;
  double offset_s = 0;
  int run_id = 0;
};

// TSV columns: word, onset_s, offset_s, run. A header row is skipped.
std::vector<WordEvent> read_events_tsv(std::istream& in);

struct PredictorSeries {
  std::string name;
  enum class Kind { Impulse, Continuous } kind = Kind::Impulse;
  std::vector<double> times;   // impulse: event times (word offsets)
  std::vector<double> values;  // impulse amplitudes, or uniform samples
  double rate_hz = 0;          // continuous only
};

struct LengthMismatch : InputError {
  using InputError::InputError;
};

// Impulse train at word offsets; amplitude 1 without values (wordrate), else
// the per-word value (step counts, surprisal, frequency).
PredictorSeries impulses_from_events(std::string name, const std::vector<WordEvent>& events,
                                     const std::optional<std::vector<double>>& values = {});

// Continuous covariate file: header `#rate_hz=<r>`, one value per line.
PredictorSeries read_continuous_tsv(std::istream& in, std::string name);

struct InvalidParams : NumericalError {
  using NumericalError::NumericalError;
};

struct EmptyKernel : NumericalError {
  EmptyKernel() : NumericalError("empty convolution kernel") {}
};

// Canonical double-gamma response; delays in seconds, gamma shape =
// delay/dispersion, undershoot scaled down by the ratio.
struct HrfParams {
  double peak_delay = 6;
  double undershoot_delay = 16;
  double peak_dispersion = 1;
  double undershoot_dispersion = 1;
  double peak_undershoot_ratio = 6;
  double duration_s = 32;

  void validate() const;  // InvalidParams; duration must cover >= 32 s
};

// Sampled on [0, duration] at dt, peak-normalized to max 1; value 0 at t = 0.
std::vector<double> hrf_kernel(const HrfParams& p, double dt);

// Place the series on the internal grid, convolve, truncate to the scan
// duration, and decimate to the output rate (grid ratios must be integral).
std::vector<double> convolve_resample(const PredictorSeries& series,
                                      const std::vector<double>& kernel, double internal_hz,
                                      double out_hz, double duration_s);

struct ZeroVariance : NumericalError {
  int which;
  explicit ZeroVariance(int idx)
      : NumericalError("zero variance in run/column " + std::to_string(idx)), which(idx) {}
};

// In place, divisor n-1; run_starts[0] must be 0.
void zscore_per_run(std::vector<double>& x, const std::vector<int>& run_starts);

struct RankDeficientBasis : NumericalError {
  RankDeficientBasis() : NumericalError("orthogonalization basis is rank deficient") {}
};

// Least-squares residual of target against span(basis columns).
Eigen::VectorXd orthogonalize(const Eigen::VectorXd& target, const Eigen::MatrixXd& basis);

struct ScreenFlag {
  int i = 0;
  int j = 0;
  double r = 0;
  int drop = 0;  // lower-priority member of the pair
};

struct ScreenResult {
  Eigen::MatrixXd r;  // symmetric, unit diagonal
  std::vector<ScreenFlag> flags;
};

// Pairwise Pearson correlations; pairs with |r| > threshold are flagged with
// a drop recommendation (keep the higher-priority column; default priority is
// column order).
ScreenResult correlation_screen(const Eigen::MatrixXd& columns, double threshold = 0.95,
                                const std::vector<int>& priority = {});

struct DesignMatrix {
  std::vector<std::string> names;
  double rate_hz = 0.5;
  Eigen::MatrixXd values;       // rows x columns
  std::vector<int> run_starts;  // first row of each run
  int train_rows = 400;
  int test_rows = 400;

  Eigen::MatrixXd train() const { return values.topRows(train_rows); }
  Eigen::MatrixXd test() const { return values.middleRows(train_rows, test_rows); }
};

void write_design_csv(std::ostream& out, const DesignMatrix& d);
DesignMatrix read_design_csv(std::istream& in);

// Region time series: header row of region ids, one row per sample.
struct RegionSeries {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};
RegionSeries read_regions_csv(std::istream& in);
void write_regions_csv(std::ostream& out, const RegionSeries& r);

std::string format_double(double v);

}  // namespace parsteps::design
