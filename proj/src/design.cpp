#include "parsteps/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace parsteps::design {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t p = line.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

double parse_double(const std::string& s, int lineno) {
  std::string t = trim(s);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw InputError("line " + std::to_string(lineno) + ": bad number '" + t + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<WordEvent> read_events_tsv(std::istream& in) {
  std::vector<WordEvent> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() < 4)
      throw InputError("line " + std::to_string(lineno) +
                       ": expected word<TAB>onset_s<TAB>offset_s<TAB>run");
    if (trim(cols[0]) == "word") continue;  // header
    WordEvent e;
    e.word = trim(cols[0]);
    e.onset_s = parse_double(cols[1], lineno);
    e.offset_s = parse_double(cols[2], lineno);
    e.run_id = static_cast<int>(parse_double(cols[3], lineno));
    if (!(e.onset_s >= 0) || !(e.offset_s > e.onset_s))
      throw InputError("line " + std::to_string(lineno) + ": need 0 <= onset < offset");
    out.push_back(std::move(e));
  }
  return out;
}

PredictorSeries impulses_from_events(std::string name, const std::vector<WordEvent>& events,
                                     const std::optional<std::vector<double>>& values) {
  if (values && values->size() != events.size())
    throw LengthMismatch("impulses_from_events: " + std::to_string(values->size()) +
                         " values for " + std::to_string(events.size()) + " events");
  PredictorSeries s;
  s.name = std::move(name);
  s.kind = PredictorSeries::Kind::Impulse;
  for (std::size_t i = 0; i < events.size(); ++i) {
    s.times.push_back(events[i].offset_s);
    s.values.push_back(values ? (*values)[i] : 1.0);
  }
  return s;
}

PredictorSeries read_continuous_tsv(std::istream& in, std::string name) {
  PredictorSeries s;
  s.name = std::move(name);
  s.kind = PredictorSeries::Kind::Continuous;
  std::string line;
  int lineno = 0;
  bool rate_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("#rate_hz=", 0) == 0) {
      s.rate_hz = parse_double(t.substr(9), lineno);
      if (!(s.rate_hz > 0))
        throw InputError("line " + std::to_string(lineno) + ": rate_hz must be positive");
      rate_seen = true;
      continue;
    }
    if (t[0] == '#') continue;
    if (!rate_seen)
      throw InputError("missing #rate_hz=<r> header before data at line " +
                       std::to_string(lineno));
    s.values.push_back(parse_double(t, lineno));
  }
  for (std::size_t i = 0; i < s.values.size(); ++i)
    s.times.push_back(static_cast<double>(i) / s.rate_hz);
  return s;
}

void HrfParams::validate() const {
  if (!(peak_delay > 0) || !(undershoot_delay > 0) || !(peak_dispersion > 0) ||
      !(undershoot_dispersion > 0) || !(peak_undershoot_ratio > 0))
    throw InvalidParams("hrf parameters must be positive");
  if (!(duration_s >= 32)) throw InvalidParams("hrf kernel must cover at least 32 s");
}

namespace {

double gamma_pdf(double t, double shape, double scale) {
  if (t <= 0) return 0;
  return std::exp((shape - 1) * std::log(t) - t / scale - shape * std::log(scale) -
                  std::lgamma(shape));
}

}  // namespace

std::vector<double> hrf_kernel(const HrfParams& p, double dt) {
  p.validate();
  if (!(dt > 0)) throw InvalidParams("hrf dt must be positive");
  int n = static_cast<int>(std::floor(p.duration_s / dt)) + 1;
  std::vector<double> k(n);
  double peak_shape = p.peak_delay / p.peak_dispersion;
  double under_shape = p.undershoot_delay / p.undershoot_dispersion;
  double maxv = 0;
  for (int i = 0; i < n; ++i) {
    double t = i * dt;
    k[i] = gamma_pdf(t, peak_shape, p.peak_dispersion) -
           gamma_pdf(t, under_shape, p.undershoot_dispersion) / p.peak_undershoot_ratio;
    maxv = std::max(maxv, k[i]);
  }
  if (!(maxv > 0)) throw InvalidParams("hrf kernel has no positive mass");
  for (double& v : k) v /= maxv;
  return k;
}

std::vector<double> convolve_resample(const PredictorSeries& series,
                                      const std::vector<double>& kernel, double internal_hz,
                                      double out_hz, double duration_s) {
  if (kernel.empty()) throw EmptyKernel();
  if (!(internal_hz > 0) || !(out_hz > 0) || !(duration_s > 0))
    throw InvalidParams("rates and duration must be positive");
  double step = internal_hz / out_hz;
  if (std::fabs(step - std::llround(step)) > 1e-9)
    throw InvalidParams("internal rate must be an integer multiple of the output rate");
  long long stride = std::llround(step);
  double out_n_d = duration_s * out_hz;
  if (std::fabs(out_n_d - std::llround(out_n_d)) > 1e-9)
    throw InvalidParams("duration must be a whole number of output samples");
  int n_out = static_cast<int>(std::llround(out_n_d));
  int n_in = static_cast<int>(std::llround(duration_s * internal_hz));

  // place onto the internal grid
  std::vector<double> x(n_in, 0.0);
  if (series.kind == PredictorSeries::Kind::Impulse) {
    for (std::size_t i = 0; i < series.times.size(); ++i) {
      long long bin = std::llround(series.times[i] * internal_hz);
      if (bin < 0 || bin >= n_in) continue;  // outside the scan
      x[static_cast<std::size_t>(bin)] += series.values[i];
    }
  } else {
    if (series.values.empty()) throw InputError("continuous series '" + series.name + "' is empty");
    for (int i = 0; i < n_in; ++i) {
      double t = i / internal_hz;
      double pos = t * series.rate_hz;
      auto lo = static_cast<long long>(std::floor(pos));
      if (lo < 0) lo = 0;
      if (lo >= static_cast<long long>(series.values.size()) - 1)
        lo = static_cast<long long>(series.values.size()) - 1;
      double frac = pos - static_cast<double>(lo);
      double a = series.values[static_cast<std::size_t>(lo)];
      double b = lo + 1 < static_cast<long long>(series.values.size())
                     ? series.values[static_cast<std::size_t>(lo + 1)]
                     : a;
      x[i] = a + frac * (b - a);
    }
  }

  // discrete linear convolution truncated to the scan
  std::vector<double> y(n_in, 0.0);
  int klen = static_cast<int>(kernel.size());
  for (int i = 0; i < n_in; ++i) {
    if (x[i] == 0.0) continue;
    int jmax = std::min(klen, n_in - i);
    for (int j = 0; j < jmax; ++j) y[i + j] += x[i] * kernel[j];
  }

  std::vector<double> out(n_out);
  for (int j = 0; j < n_out; ++j) out[j] = y[static_cast<std::size_t>(j) * stride];
  return out;
}

void zscore_per_run(std::vector<double>& x, const std::vector<int>& run_starts) {
  if (run_starts.empty() || run_starts[0] != 0)
    throw InputError("run_starts must begin with 0");
  for (std::size_t r = 0; r < run_starts.size(); ++r) {
    int lo = run_starts[r];
    int hi = r + 1 < run_starts.size() ? run_starts[r + 1] : static_cast<int>(x.size());
    int n = hi - lo;
    if (n < 2) throw ZeroVariance(static_cast<int>(r));
    double mean = 0;
    for (int i = lo; i < hi; ++i) mean += x[i];
    mean /= n;
    double ss = 0;
    for (int i = lo; i < hi; ++i) ss += (x[i] - mean) * (x[i] - mean);
    double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0)) throw ZeroVariance(static_cast<int>(r));
    for (int i = lo; i < hi; ++i) x[i] = (x[i] - mean) / sd;
  }
}

Eigen::VectorXd orthogonalize(const Eigen::VectorXd& target, const Eigen::MatrixXd& basis) {
  if (basis.rows() != target.rows())
    throw InputError("orthogonalize: basis rows do not match target");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  qr.setThreshold(1e-10);  // pivot ratio; proportional columns must be caught
  if (qr.rank() < basis.cols()) throw RankDeficientBasis();
  Eigen::VectorXd coef = qr.solve(target);
  return target - basis * coef;
}

ScreenResult correlation_screen(const Eigen::MatrixXd& columns, double threshold,
                                const std::vector<int>& priority) {
  int p = static_cast<int>(columns.cols());
  long n = columns.rows();
  if (n < 2) throw InputError("correlation_screen: need at least 2 samples");
  Eigen::MatrixXd centered = columns.rowwise() - columns.colwise().mean();
  Eigen::VectorXd norms(p);
  for (int j = 0; j < p; ++j) {
    norms[j] = centered.col(j).norm();
    if (!(norms[j] > 0)) throw ZeroVariance(j);
  }
  ScreenResult out;
  out.r = Eigen::MatrixXd::Identity(p, p);
  std::vector<int> rank(p);
  for (int j = 0; j < p; ++j) rank[j] = j;
  for (std::size_t k = 0; k < priority.size(); ++k) rank[priority[k]] = static_cast<int>(k);
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      double r = centered.col(i).dot(centered.col(j)) / (norms[i] * norms[j]);
      out.r(i, j) = r;
      out.r(j, i) = r;
      if (std::fabs(r) > threshold) {
        ScreenFlag f;
        f.i = i;
        f.j = j;
        f.r = r;
        f.drop = rank[i] <= rank[j] ? j : i;
        out.flags.push_back(f);
      }
    }
  }
  return out;
}

void write_design_csv(std::ostream& out, const DesignMatrix& d) {
  out << "# rate_hz=" << format_double(d.rate_hz) << " train_rows=" << d.train_rows
      << " test_rows=" << d.test_rows << " run_starts=";
  for (std::size_t i = 0; i < d.run_starts.size(); ++i) {
    if (i) out << ';';
    out << d.run_starts[i];
  }
  out << '\n';
  for (std::size_t j = 0; j < d.names.size(); ++j) {
    if (j) out << ',';
    out << d.names[j];
  }
  out << '\n';
  for (long i = 0; i < d.values.rows(); ++i) {
    for (long j = 0; j < d.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(d.values(i, j));
    }
    out << '\n';
  }
}

DesignMatrix read_design_csv(std::istream& in) {
  DesignMatrix d;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# rate_hz=", 0) != 0)
    throw InputError("design csv: missing metadata header");
  {
    std::istringstream meta(line.substr(2));
    std::string kv;
    while (meta >> kv) {
      std::size_t eq = kv.find('=');
      if (eq == std::string::npos) continue;
      std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "rate_hz") d.rate_hz = std::strtod(val.c_str(), nullptr);
      else if (key == "train_rows") d.train_rows = std::atoi(val.c_str());
      else if (key == "test_rows") d.test_rows = std::atoi(val.c_str());
      else if (key == "run_starts") {
        for (const std::string& s : split(val, ';'))
          if (!s.empty()) d.run_starts.push_back(std::atoi(s.c_str()));
      }
    }
  }
  if (!std::getline(in, line)) throw InputError("design csv: missing column header");
  for (const std::string& name : split(trim(line), ',')) d.names.push_back(trim(name));
  std::vector<std::vector<double>> rows;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cols = split(t, ',');
    if (cols.size() != d.names.size())
      throw InputError("design csv line " + std::to_string(lineno) + ": expected " +
                       std::to_string(d.names.size()) + " columns");
    std::vector<double> row;
    for (const std::string& c : cols) row.push_back(parse_double(c, lineno));
    rows.push_back(std::move(row));
  }
  d.values.resize(static_cast<long>(rows.size()), static_cast<long>(d.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      d.values(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return d;
}

RegionSeries read_regions_csv(std::istream& in) {
  RegionSeries r;
  std::string line;
  if (!std::getline(in, line)) throw InputError("regions csv: empty file");
  for (const std::string& name : split(trim(line), ',')) r.ids.push_back(trim(name));
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cols = split(t, ',');
    if (cols.size() != r.ids.size())
      throw InputError("regions csv line " + std::to_string(lineno) + ": expected " +
                       std::to_string(r.ids.size()) + " columns");
    std::vector<double> row;
    for (const std::string& c : cols) row.push_back(parse_double(c, lineno));
    rows.push_back(std::move(row));
  }
  r.values.resize(static_cast<long>(rows.size()), static_cast<long>(r.ids.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      r.values(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return r;
}

void write_regions_csv(std::ostream& out, const RegionSeries& r) {
  for (std::size_t j = 0; j < r.ids.size(); ++j) {
    if (j) out << ',';
    out << r.ids[j];
  }
  out << '\n';
  for (long i = 0; i < r.values.rows(); ++i) {
    for (long j = 0; j < r.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(r.values(i, j));
    }
    out << '\n';
  }
}

}  // namespace parsteps::design
