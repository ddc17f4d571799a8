#include "parsteps/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "parsteps/rng.hpp"
#include "parsteps/surprisal.hpp"

namespace parsteps::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

cfg::CfgStrategy cfg_strategy_from_name(const std::string& s) {
  if (s == "bottomup") return cfg::CfgStrategy::BottomUp;
  if (s == "topdown") return cfg::CfgStrategy::TopDown;
  if (s == "leftcorner") return cfg::CfgStrategy::LeftCorner;
  throw InputError("unknown cfg strategy '" + s + "' (valid: bottomup, topdown, leftcorner)");
}

ccg::CcgStrategy ccg_strategy_from_name(const std::string& s) {
  if (s == "right") return ccg::CcgStrategy::Right;
  if (s == "left") return ccg::CcgStrategy::Left;
  if (s == "revealing") return ccg::CcgStrategy::Revealing;
  throw InputError("unknown ccg strategy '" + s + "' (valid: right, left, revealing)");
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  return q.is_absolute() ? q.string() : (base / q).string();
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config parse error in '" + path + "': " + e.what());
  }
  fs::path base = fs::path(path).parent_path();
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.output_dir = resolve(base, j.value("output_dir", c.output_dir));
    if (j.contains("inputs")) {
      const json& in_j = j["inputs"];
      c.trees_path = resolve(base, in_j.value("trees", ""));
      c.ccg_path = resolve(base, in_j.value("ccg", ""));
      c.tokens_path = resolve(base, in_j.value("tokens", ""));
      c.events_path = resolve(base, in_j.value("events", ""));
      c.regions_path = resolve(base, in_j.value("regions", ""));
      if (in_j.contains("continuous")) {
        for (auto& [k, v] : in_j["continuous"].items())
          c.continuous[k] = resolve(base, v.get<std::string>());
      }
      if (in_j.contains("word_values")) {
        for (auto& [k, v] : in_j["word_values"].items())
          c.word_values[k] = resolve(base, v.get<std::string>());
      }
    }
    if (j.contains("strategies")) {
      const json& s = j["strategies"];
      if (s.contains("cfg")) {
        c.cfg_strategies.clear();
        for (const auto& v : s["cfg"]) c.cfg_strategies.push_back(cfg_strategy_from_name(v));
      }
      if (s.contains("ccg")) {
        c.ccg_strategies.clear();
        for (const auto& v : s["ccg"]) c.ccg_strategies.push_back(ccg_strategy_from_name(v));
      }
    }
    c.strip_punct = j.value("punctuation", "keep") == "strip";
    c.strict_features = j.value("strict_features", false);
    if (j.contains("reveal")) {
      const json& r = j["reveal"];
      c.reveal.count_rotation_as_step = r.value("count_rotation", true);
      std::string attach = r.value("attach", "lowest");
      if (attach == "lowest") c.reveal.attach = ccg::RevealConfig::Attach::Lowest;
      else if (attach == "highest") c.reveal.attach = ccg::RevealConfig::Attach::Highest;
      else throw InputError("reveal.attach must be lowest|highest");
    }
    if (c.strict_features) c.reveal.features = ccg::FeaturePolicy::Exact;
    if (j.contains("unary_rules")) {
      for (auto& [k, v] : j["unary_rules"].items()) {
        c.unary_rules[k] = {ccg::parse_category(v.at(0).get<std::string>()),
                            ccg::parse_category(v.at(1).get<std::string>())};
      }
    }
    if (j.contains("hrf")) {
      const json& h = j["hrf"];
      c.hrf.peak_delay = h.value("peak_delay", c.hrf.peak_delay);
      c.hrf.undershoot_delay = h.value("undershoot_delay", c.hrf.undershoot_delay);
      c.hrf.peak_dispersion = h.value("peak_dispersion", c.hrf.peak_dispersion);
      c.hrf.undershoot_dispersion = h.value("undershoot_dispersion", c.hrf.undershoot_dispersion);
      c.hrf.peak_undershoot_ratio = h.value("peak_undershoot_ratio", c.hrf.peak_undershoot_ratio);
      c.hrf.duration_s = h.value("duration_s", c.hrf.duration_s);
    }
    if (j.contains("rates")) {
      c.internal_hz = j["rates"].value("internal_hz", c.internal_hz);
      c.output_hz = j["rates"].value("output_hz", c.output_hz);
    }
    if (j.contains("split")) {
      c.train_rows = j["split"].value("train_rows", c.train_rows);
      c.test_rows = j["split"].value("test_rows", c.test_rows);
    }
    if (j.contains("runs")) {
      const json& r = j["runs"];
      if (r.contains("samples")) {
        for (const auto& v : r["samples"]) c.run_samples.push_back(v.get<int>());
      }
      c.run_start_discard = r.value("start_discard", 0);
      c.initial_discard = r.value("initial_discard", 0);
    }
    if (j.contains("screen")) {
      const json& s = j["screen"];
      c.screen_threshold = s.value("threshold", c.screen_threshold);
      std::string on_flag = s.value("on_flag", "error");
      if (on_flag == "error") c.on_flag = PipelineConfig::OnFlag::Error;
      else if (on_flag == "drop") c.on_flag = PipelineConfig::OnFlag::Drop;
      else throw InputError("screen.on_flag must be error|drop");
      if (s.contains("priority")) {
        for (const auto& v : s["priority"]) c.screen_priority.push_back(v.get<std::string>());
      }
    }
    if (j.contains("orthogonalize_targets")) {
      for (const auto& v : j["orthogonalize_targets"])
        c.orthogonalize_targets.push_back(v.get<std::string>());
    }
    c.zscore_regions = j.value("zscore_regions", true);
    if (j.contains("priors")) {
      const json& p = j["priors"];
      c.priors.intercept_sd = p.value("intercept_sd", c.priors.intercept_sd);
      c.priors.coef_sd = p.value("coef_sd", c.priors.coef_sd);
      c.priors.noise_rate = p.value("noise_rate", c.priors.noise_rate);
      c.priors.draws = p.value("draws", c.priors.draws);
      c.priors.intercept = p.value("intercept", c.priors.intercept);
    }
    if (j.contains("comparisons")) {
      for (const auto& v : j["comparisons"])
        c.comparisons.emplace_back(v.at(0).get<std::string>(), v.at(1).get<std::string>());
    }
    c.dump_draws = j.value("dump_draws", false);
    c.hierarchy_shrinkage = j.value("hierarchy_shrinkage", false);
  } catch (const json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return c;
}

StepsColumns compute_cfg_steps(const std::vector<cfg::ConstTree>& trees,
                               const std::vector<cfg::CfgStrategy>& strategies,
                               bool strip_punct) {
  StepsColumns out;
  std::vector<cfg::ConstTree> kept;
  for (const cfg::ConstTree& t : trees) {
    if (strip_punct) {
      if (auto s = cfg::strip_punctuation(t)) kept.push_back(std::move(*s));
    } else {
      kept.push_back(t);
    }
  }
  for (const cfg::ConstTree& t : kept) {
    for (const std::string& w : cfg::leaves(t)) out.words.push_back(w);
  }
  for (cfg::CfgStrategy s : strategies) {
    std::vector<double> col;
    for (const cfg::ConstTree& t : kept) {
      for (const StepTrace& tr : cfg::steps_cfg(t, s)) col.push_back(tr.count());
    }
    out.names.emplace_back(cfg::strategy_name(s));
    out.values.push_back(std::move(col));
  }
  return out;
}

StepsColumns compute_ccg_steps(const std::vector<ccg::Derivation>& ders,
                               const std::vector<ccg::CcgStrategy>& strategies,
                               const ccg::RevealConfig& reveal) {
  StepsColumns out;
  for (const ccg::Derivation& d : ders) {
    for (const std::string& w : ccg::der_leaves(d)) out.words.push_back(w);
  }
  for (ccg::CcgStrategy s : strategies) {
    std::vector<double> col;
    for (const ccg::Derivation& d : ders) {
      for (const StepTrace& tr : ccg::steps_ccg(d, s, reveal)) col.push_back(tr.count());
    }
    out.names.emplace_back(ccg::strategy_name(s));
    out.values.push_back(std::move(col));
  }
  return out;
}

void write_steps_tsv(std::ostream& out, const std::string& strategy,
                     const std::vector<std::vector<StepTrace>>& per_sentence, bool with_trace) {
  out << "sentence_id\tword_index\tword\tstrategy\tcount";
  if (with_trace) out << "\tops";
  out << '\n';
  for (std::size_t s = 0; s < per_sentence.size(); ++s) {
    for (const StepTrace& tr : per_sentence[s]) {
      out << s << '\t' << tr.word_index << '\t' << tr.word << '\t' << strategy << '\t'
          << tr.count();
      if (with_trace) out << '\t' << format_ops(tr);
      out << '\n';
    }
  }
}

namespace {

struct RunSlices {
  std::vector<int> run_ids;                           // distinct, in order
  std::vector<std::vector<design::WordEvent>> events;  // per run
  std::vector<std::pair<int, int>> word_spans;         // [first, last) word index per run
};

RunSlices slice_runs(const std::vector<design::WordEvent>& events) {
  RunSlices rs;
  int prev_run = -1;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const design::WordEvent& e = events[i];
    if (rs.run_ids.empty() || e.run_id != prev_run) {
      for (int seen : rs.run_ids) {
        if (seen == e.run_id)
          throw InputError("events: run " + std::to_string(e.run_id) +
                           " appears in two separate blocks");
      }
      rs.run_ids.push_back(e.run_id);
      rs.events.emplace_back();
      rs.word_spans.emplace_back(static_cast<int>(i), static_cast<int>(i));
      prev_run = e.run_id;
    }
    if (!rs.events.back().empty() && e.onset_s < rs.events.back().back().onset_s)
      throw InputError("events: onsets not sorted within run " + std::to_string(e.run_id));
    rs.events.back().push_back(e);
    rs.word_spans.back().second = static_cast<int>(i) + 1;
  }
  return rs;
}

}  // namespace

DesignOutput build_design(const PipelineConfig& cfg,
                          const std::vector<design::WordEvent>& events,
                          const std::vector<std::pair<std::string, std::vector<double>>>& word_cols,
                          const std::vector<design::PredictorSeries>& continuous) {
  if (events.empty()) throw InputError("no word events");
  RunSlices runs = slice_runs(events);
  std::size_t n_runs = runs.run_ids.size();
  if (cfg.run_samples.size() != n_runs)
    throw InputError("runs.samples lists " + std::to_string(cfg.run_samples.size()) +
                     " runs but the events file has " + std::to_string(n_runs));
  for (const auto& [name, col] : word_cols) {
    if (col.size() != events.size())
      throw design::LengthMismatch("word column '" + name + "' has " +
                                   std::to_string(col.size()) + " values for " +
                                   std::to_string(events.size()) + " events");
  }

  std::vector<double> kernel = design::hrf_kernel(cfg.hrf, 1.0 / cfg.internal_hz);

  std::vector<std::string> names;
  names.emplace_back("wordrate");
  for (const auto& [name, col] : word_cols) names.push_back(name);
  for (const design::PredictorSeries& s : continuous) names.push_back(s.name);

  // convolve per run, then stack runs
  std::vector<std::vector<double>> cols(names.size());
  std::vector<int> run_starts;
  std::vector<std::size_t> cont_consumed(continuous.size(), 0);
  int rows = 0;
  for (std::size_t r = 0; r < n_runs; ++r) {
    double duration = cfg.run_samples[r] / cfg.output_hz;
    run_starts.push_back(rows);
    rows += cfg.run_samples[r];
    std::size_t ci = 0;
    auto [w0, w1] = runs.word_spans[r];
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::vector<double> piece;
      if (j == 0) {
        design::PredictorSeries s = design::impulses_from_events("wordrate", runs.events[r]);
        piece = design::convolve_resample(s, kernel, cfg.internal_hz, cfg.output_hz, duration);
      } else if (j < 1 + word_cols.size()) {
        const auto& [name, col] = word_cols[j - 1];
        std::vector<double> vals(col.begin() + w0, col.begin() + w1);
        design::PredictorSeries s = design::impulses_from_events(name, runs.events[r], vals);
        piece = design::convolve_resample(s, kernel, cfg.internal_hz, cfg.output_hz, duration);
      } else {
        const design::PredictorSeries& src = continuous[ci];
        auto need = static_cast<std::size_t>(std::llround(duration * src.rate_hz));
        if (cont_consumed[ci] + need > src.values.size())
          throw InputError("continuous covariate '" + src.name + "' is shorter than the runs");
        design::PredictorSeries s;
        s.name = src.name;
        s.kind = design::PredictorSeries::Kind::Continuous;
        s.rate_hz = src.rate_hz;
        s.values.assign(src.values.begin() + static_cast<long>(cont_consumed[ci]),
                        src.values.begin() + static_cast<long>(cont_consumed[ci] + need));
        for (std::size_t i = 0; i < s.values.size(); ++i)
          s.times.push_back(static_cast<double>(i) / s.rate_hz);
        cont_consumed[ci] += need;
        ++ci;
        piece = design::convolve_resample(s, kernel, cfg.internal_hz, cfg.output_hz, duration);
      }
      cols[j].insert(cols[j].end(), piece.begin(), piece.end());
    }
  }

  // volume exclusion at run starts
  if (cfg.run_start_discard > 0 || cfg.initial_discard > 0) {
    std::vector<std::vector<double>> kept(cols.size());
    std::vector<int> new_starts;
    int kept_rows = 0;
    for (std::size_t r = 0; r < n_runs; ++r) {
      int lo = run_starts[r] + cfg.run_start_discard + (r == 0 ? cfg.initial_discard : 0);
      int hi = r + 1 < n_runs ? run_starts[r + 1] : rows;
      if (lo > hi) throw InputError("volume exclusion leaves run " + std::to_string(r) + " empty");
      new_starts.push_back(kept_rows);
      kept_rows += hi - lo;
      for (std::size_t j = 0; j < cols.size(); ++j)
        kept[j].insert(kept[j].end(), cols[j].begin() + lo, cols[j].begin() + hi);
    }
    cols = std::move(kept);
    run_starts = std::move(new_starts);
    rows = kept_rows;
  }

  DesignOutput out;
  out.matrix.names = names;
  out.matrix.rate_hz = cfg.output_hz;
  out.matrix.run_starts = run_starts;
  out.matrix.train_rows = cfg.train_rows;
  out.matrix.test_rows = cfg.test_rows;
  out.matrix.values.resize(rows, static_cast<long>(names.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (int i = 0; i < rows; ++i) out.matrix.values(i, static_cast<long>(j)) = cols[j][i];

  if (cfg.train_rows + cfg.test_rows > rows)
    throw InputError("split needs " + std::to_string(cfg.train_rows + cfg.test_rows) +
                     " rows but the design has " + std::to_string(rows));

  // orthogonalize the target regressors against wordrate + constant
  Eigen::MatrixXd basis(rows, 2);
  basis.col(0) = out.matrix.values.col(0);
  basis.col(1) = Eigen::VectorXd::Ones(rows);
  for (const std::string& target : cfg.orthogonalize_targets) {
    long idx = -1;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == target) idx = static_cast<long>(j);
    }
    if (idx < 0) throw InputError("orthogonalize target '" + target + "' is not a design column");
    if (idx == 0) throw InputError("cannot orthogonalize wordrate against itself");
    out.matrix.values.col(idx) = design::orthogonalize(out.matrix.values.col(idx), basis);
  }

  // collinearity screen over the final columns
  std::vector<int> priority;
  for (const std::string& name : cfg.screen_priority) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) priority.push_back(static_cast<int>(j));
    }
  }
  out.screen = design::correlation_screen(out.matrix.values, cfg.screen_threshold, priority);
  if (!out.screen.flags.empty()) {
    if (cfg.on_flag == PipelineConfig::OnFlag::Error) {
      const design::ScreenFlag& f = out.screen.flags.front();
      std::ostringstream msg;
      msg << "collinear pair |r|>" << cfg.screen_threshold << ": " << names[f.i] << " vs "
          << names[f.j] << " (r=" << f.r << "); configure screen.on_flag=drop or remove one";
      throw InputError(msg.str());
    }
    std::vector<bool> drop(names.size(), false);
    for (const design::ScreenFlag& f : out.screen.flags) drop[f.drop] = true;
    std::vector<std::string> kept_names;
    std::vector<long> kept_idx;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (drop[j]) {
        out.dropped.push_back(names[j]);
      } else {
        kept_names.push_back(names[j]);
        kept_idx.push_back(static_cast<long>(j));
      }
    }
    Eigen::MatrixXd reduced(rows, static_cast<long>(kept_idx.size()));
    for (std::size_t j = 0; j < kept_idx.size(); ++j) reduced.col(j) = out.matrix.values.col(kept_idx[j]);
    out.matrix.values = std::move(reduced);
    out.matrix.names = std::move(kept_names);
  }
  return out;
}

std::vector<RegionFit> fit_regions(const PipelineConfig& cfg, const design::DesignMatrix& dm,
                                   const design::RegionSeries& regions) {
  if (regions.values.rows() != dm.values.rows())
    throw InputError("regions rows (" + std::to_string(regions.values.rows()) +
                     ") do not match design rows (" + std::to_string(dm.values.rows()) + ")");
  Eigen::MatrixXd y_all = regions.values;
  if (cfg.zscore_regions) {
    for (long j = 0; j < y_all.cols(); ++j) {
      std::vector<double> col(y_all.col(j).data(), y_all.col(j).data() + y_all.rows());
      design::zscore_per_run(col, dm.run_starts);
      for (long i = 0; i < y_all.rows(); ++i) y_all(i, j) = col[i];
    }
  }
  Eigen::MatrixXd X_train = dm.train();
  Eigen::MatrixXd X_test = dm.test();

  std::vector<RegionFit> fits(regions.ids.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t j = next.fetch_add(1);
      if (j >= regions.ids.size()) return;
      regression::PriorConfig p = cfg.priors;
      p.seed = Rng::mix(cfg.seed, Rng::fnv1a(regions.ids[j]));
      Eigen::VectorXd y = y_all.col(static_cast<long>(j));
      regression::FitResult f =
          regression::fit(X_train, y.head(dm.train_rows), p, dm.names);
      regression::evaluate_on_test(f, X_test, y.segment(dm.train_rows, dm.test_rows));
      fits[j] = {regions.ids[j], std::move(f)};
    }
  };
  int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  if (cfg.hierarchy_shrinkage && regions.ids.size() > 1) {
    // desk-scale stand-in for the random slopes: shift each region's
    // coefficient location toward a pooled fit, weighted by how noisy the
    // region estimate is relative to the hierarchical scale prior
    regression::PriorConfig p = cfg.priors;
    p.seed = Rng::mix(cfg.seed, Rng::fnv1a("pooled"));
    Eigen::VectorXd ybar = y_all.rowwise().mean();
    regression::FitResult pooled =
        regression::fit(X_train, ybar.head(dm.train_rows), p, dm.names);
    Eigen::VectorXd pooled_mean = pooled.beta.colwise().mean();
    const double tau = 1.0 / cfg.priors.noise_rate;  // mean of the exponential prior
    for (std::size_t j = 0; j < fits.size(); ++j) {
      RegionFit& rf = fits[j];
      for (long t = 0; t < rf.fit.beta.cols(); ++t) {
        double m = rf.fit.beta.col(t).mean();
        double var = (rf.fit.beta.col(t).array() - m).square().sum() /
                     std::max<long>(rf.fit.beta.rows() - 1, 1);
        double w = tau * tau / (tau * tau + var);
        rf.fit.beta.col(t).array() += (1.0 - w) * (pooled_mean[t] - m);
      }
      regression::evaluate_on_test(
          rf.fit, X_test, y_all.col(static_cast<long>(j)).segment(dm.train_rows, dm.test_rows));
    }
  }
  return fits;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write '" + tmp + "'");
    out << contents;
  }
  fs::rename(tmp, path);
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot hash missing file '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json ci_json(const regression::Ci& ci) { return json{{"lo", ci.lo}, {"hi", ci.hi}}; }

json summary_json(const Eigen::VectorXd& draws) {
  double mean = draws.mean();
  double sd = std::sqrt((draws.array() - mean).square().sum() /
                        std::max<long>(draws.size() - 1, 1));
  regression::Ci ci = regression::credible_interval(draws);
  return json{{"mean", mean}, {"sd", sd}, {"q005", ci.lo}, {"q995", ci.hi}};
}

std::vector<double> read_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t b = line.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    if (line[b] == '#') continue;
    char* end = nullptr;
    double v = std::strtod(line.c_str() + b, &end);
    if (end == line.c_str() + static_cast<long>(b))
      throw InputError(path + " line " + std::to_string(lineno) + ": bad value");
    out.push_back(v);
  }
  return out;
}

void check_words_match(const std::vector<std::string>& a, const std::vector<std::string>& b,
                       const std::string& what) {
  if (a.size() != b.size())
    throw InputError(what + ": word count " + std::to_string(b.size()) + " does not match events (" +
                     std::to_string(a.size()) + ")");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i])
      throw InputError(what + ": word " + std::to_string(i) + " is '" + b[i] +
                       "' but events say '" + a[i] + "'");
  }
}

}  // namespace

std::string run_pipeline(const PipelineConfig& cfg, bool design_only) {
  if (cfg.events_path.empty()) throw InputError("pipeline needs inputs.events");
  if (!design_only && cfg.regions_path.empty())
    throw InputError("pipeline needs inputs.regions");
  fs::create_directories(cfg.output_dir);
  fs::path out_dir(cfg.output_dir);
  std::vector<std::string> artifacts;

  std::ifstream ev_in(cfg.events_path);
  if (!ev_in) throw InputError("cannot open events '" + cfg.events_path + "'");
  std::vector<design::WordEvent> events = design::read_events_tsv(ev_in);
  std::vector<std::string> event_words;
  for (const design::WordEvent& e : events) event_words.push_back(e.word);

  std::vector<std::pair<std::string, std::vector<double>>> word_cols;
  std::vector<std::string> default_targets;

  ccg::RevealConfig reveal = cfg.reveal;
  if (cfg.strict_features) reveal.features = ccg::FeaturePolicy::Exact;

  // parser step predictors
  if (!cfg.trees_path.empty()) {
    std::ifstream in(cfg.trees_path);
    if (!in) throw InputError("cannot open trees '" + cfg.trees_path + "'");
    std::vector<cfg::ConstTree> trees = cfg::read_penn_file(in);
    StepsColumns sc = compute_cfg_steps(trees, cfg.cfg_strategies, cfg.strip_punct);
    check_words_match(event_words, sc.words, "trees");
    for (std::size_t k = 0; k < sc.names.size(); ++k) {
      std::vector<std::vector<StepTrace>> per_sentence;
      std::vector<cfg::ConstTree> kept;
      for (const cfg::ConstTree& t : trees) {
        if (cfg.strip_punct) {
          if (auto s = cfg::strip_punctuation(t)) kept.push_back(std::move(*s));
        } else {
          kept.push_back(t);
        }
      }
      for (const cfg::ConstTree& t : kept)
        per_sentence.push_back(cfg::steps_cfg(t, cfg.cfg_strategies[k]));
      std::ostringstream tsv;
      write_steps_tsv(tsv, sc.names[k], per_sentence, false);
      std::string path = (out_dir / ("steps_" + sc.names[k] + ".tsv")).string();
      write_file_atomic(path, tsv.str());
      artifacts.push_back(path);
      word_cols.emplace_back(sc.names[k], std::move(sc.values[k]));
      default_targets.push_back(sc.names[k]);
    }
  }
  if (!cfg.ccg_path.empty()) {
    std::ifstream in(cfg.ccg_path);
    if (!in) throw InputError("cannot open ccg derivations '" + cfg.ccg_path + "'");
    std::vector<ccg::Derivation> ders = ccg::read_derivation_file(in);
    ccg::FeaturePolicy pol =
        cfg.strict_features ? ccg::FeaturePolicy::Exact : ccg::FeaturePolicy::Ignore;
    for (const ccg::Derivation& d : ders) ccg::validate(d, cfg.unary_rules, pol);
    StepsColumns sc = compute_ccg_steps(ders, cfg.ccg_strategies, reveal);
    check_words_match(event_words, sc.words, "ccg");
    for (std::size_t k = 0; k < sc.names.size(); ++k) {
      std::vector<std::vector<StepTrace>> per_sentence;
      for (const ccg::Derivation& d : ders)
        per_sentence.push_back(ccg::steps_ccg(d, cfg.ccg_strategies[k], reveal));
      std::ostringstream tsv;
      write_steps_tsv(tsv, sc.names[k], per_sentence, false);
      std::string path = (out_dir / ("steps_" + sc.names[k] + ".tsv")).string();
      write_file_atomic(path, tsv.str());
      artifacts.push_back(path);
      word_cols.emplace_back(sc.names[k], std::move(sc.values[k]));
      default_targets.push_back(sc.names[k]);
    }
  }

  // surprisal from token log-probabilities
  if (!cfg.tokens_path.empty()) {
    std::ifstream in(cfg.tokens_path);
    if (!in) throw InputError("cannot open tokens '" + cfg.tokens_path + "'");
    surprisal::LogProbFile lp = surprisal::read_logprob_tsv(in);
    std::vector<std::string> toks;
    for (const auto& t : lp.tokens) toks.push_back(t.token);
    surprisal::WordAlignment al = surprisal::align(event_words, toks);
    std::vector<double> bits = surprisal::word_surprisal(lp, al);
    std::ostringstream tsv;
    surprisal::write_surprisal_tsv(tsv, event_words, bits);
    std::string path = (out_dir / "surprisal.tsv").string();
    write_file_atomic(path, tsv.str());
    artifacts.push_back(path);
    word_cols.emplace_back("surprisal", std::move(bits));
    default_targets.emplace_back("surprisal");
  }

  // generic per-word covariates (freq and friends)
  for (const auto& [name, path] : cfg.word_values) {
    std::vector<double> vals = read_value_file(path);
    if (vals.size() != events.size())
      throw InputError("word_values '" + name + "' has " + std::to_string(vals.size()) +
                       " values for " + std::to_string(events.size()) + " events");
    word_cols.emplace_back(name, std::move(vals));
  }

  std::vector<design::PredictorSeries> continuous;
  for (const auto& [name, path] : cfg.continuous) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open continuous covariate '" + path + "'");
    continuous.push_back(design::read_continuous_tsv(in, name));
  }

  PipelineConfig cfg2 = cfg;
  if (cfg2.orthogonalize_targets.empty()) cfg2.orthogonalize_targets = default_targets;
  DesignOutput dz = build_design(cfg2, events, word_cols, continuous);

  {
    std::ostringstream csv;
    design::write_design_csv(csv, dz.matrix);
    std::string path = (out_dir / "design.csv").string();
    write_file_atomic(path, csv.str());
    artifacts.push_back(path);
  }
  {
    json side;
    side["columns"] = dz.matrix.names;
    side["rate_hz"] = dz.matrix.rate_hz;
    side["hrf"] = {{"peak_delay", cfg.hrf.peak_delay},
                   {"undershoot_delay", cfg.hrf.undershoot_delay},
                   {"peak_dispersion", cfg.hrf.peak_dispersion},
                   {"undershoot_dispersion", cfg.hrf.undershoot_dispersion},
                   {"peak_undershoot_ratio", cfg.hrf.peak_undershoot_ratio},
                   {"duration_s", cfg.hrf.duration_s}};
    side["internal_hz"] = cfg.internal_hz;
    side["orthogonalized"] = cfg2.orthogonalize_targets;
    side["screen_threshold"] = cfg.screen_threshold;
    std::vector<std::vector<double>> rmat;
    for (long i = 0; i < dz.screen.r.rows(); ++i) {
      std::vector<double> row;
      for (long j = 0; j < dz.screen.r.cols(); ++j) row.push_back(dz.screen.r(i, j));
      rmat.push_back(std::move(row));
    }
    side["correlation"] = rmat;
    json flags = json::array();
    for (const design::ScreenFlag& f : dz.screen.flags)
      flags.push_back({{"i", f.i}, {"j", f.j}, {"r", f.r}, {"drop", f.drop}});
    side["flags"] = flags;
    side["dropped"] = dz.dropped;
    std::string path = (out_dir / "design_sidecar.json").string();
    write_file_atomic(path, side.dump(2) + "\n");
    artifacts.push_back(path);
  }

  std::vector<RegionFit> fits;
  if (!design_only) {
    std::ifstream reg_in(cfg.regions_path);
    if (!reg_in) throw InputError("cannot open regions '" + cfg.regions_path + "'");
    design::RegionSeries regions = design::read_regions_csv(reg_in);
    fits = fit_regions(cfg, dz.matrix, regions);
  }

  // default comparisons: every ordered pair of orthogonalized targets
  std::vector<std::pair<std::string, std::string>> comparisons = cfg.comparisons;
  if (comparisons.empty()) {
    for (const std::string& a : cfg2.orthogonalize_targets) {
      bool a_in = false;
      for (const std::string& n : dz.matrix.names) a_in |= n == a;
      if (!a_in) continue;
      for (const std::string& b : cfg2.orthogonalize_targets) {
        bool b_in = false;
        for (const std::string& n : dz.matrix.names) b_in |= n == b;
        if (a != b && b_in) comparisons.emplace_back(a, b);
      }
    }
  }

  for (const RegionFit& rf : fits) {
    json j;
    j["region"] = rf.region;
    j["terms"] = rf.fit.terms;
    json post;
    for (std::size_t t = 0; t < rf.fit.terms.size(); ++t)
      post[rf.fit.terms[t]] = summary_json(rf.fit.beta.col(static_cast<long>(t)));
    j["beta"] = post;
    j["train_rmse"] = rf.fit.train_rmse;
    j["test_rmse"] = summary_json(rf.fit.rmse_full);
    json dr;
    for (std::size_t t = 0; t < rf.fit.terms.size(); ++t) {
      json one = summary_json(rf.fit.drmse.col(static_cast<long>(t)));
      one["beta_ci"] = ci_json(regression::credible_interval(rf.fit.beta.col(static_cast<long>(t))));
      one["reliable"] = regression::reliable(rf.fit, static_cast<int>(t));
      dr[rf.fit.terms[t]] = one;
    }
    j["delta_rmse"] = dr;
    json comp = json::array();
    for (const auto& [a, b] : comparisons) {
      bool ok = true;
      try {
        rf.fit.term_index(a);
        rf.fit.term_index(b);
      } catch (const regression::UnknownTerm&) {
        ok = false;
      }
      if (!ok) continue;
      comp.push_back({{"target", a},
                      {"control", b},
                      {"target_better", regression::compare_terms(rf.fit, a, b)}});
    }
    j["comparisons"] = comp;
    j["metadata"] = {
        {"draws", cfg.priors.draws},
        {"seed", cfg.seed},
        {"coef_prior_sd", cfg.priors.coef_sd},
        {"noise_prior", "exponential(rate=" + design::format_double(cfg.priors.noise_rate) + ") on sigma"},
        {"scheme",
         "exact posterior sampling: sigma from its 1-D marginal (grid inverse CDF), beta | sigma "
         "in closed form; independent per-region fits stand in for the crossed random-effects "
         "model; convergence diagnostics not applicable"},
        {"circular_shift_rows", dz.matrix.test_rows / 2}};
    std::string path = (out_dir / ("fit_" + rf.region + ".json")).string();
    write_file_atomic(path, j.dump(2) + "\n");
    artifacts.push_back(path);

    if (cfg.dump_draws) {
      // raw little-endian doubles: beta (draws x terms, row major), sigma,
      // rmse_full, drmse (draws x terms); dimensions in the header
      std::ostringstream bin(std::ios::binary);
      const char magic[8] = {'P', 'S', 'D', 'R', 'A', 'W', 'S', '1'};
      bin.write(magic, 8);
      std::int32_t dims[2] = {static_cast<std::int32_t>(rf.fit.draw_count()),
                              static_cast<std::int32_t>(rf.fit.terms.size())};
      bin.write(reinterpret_cast<const char*>(dims), sizeof dims);
      auto put = [&bin](double v) { bin.write(reinterpret_cast<const char*>(&v), sizeof v); };
      for (int t = 0; t < rf.fit.draw_count(); ++t)
        for (long k = 0; k < rf.fit.beta.cols(); ++k) put(rf.fit.beta(t, k));
      for (int t = 0; t < rf.fit.draw_count(); ++t) put(rf.fit.sigma[t]);
      for (int t = 0; t < rf.fit.draw_count(); ++t) put(rf.fit.rmse_full[t]);
      for (int t = 0; t < rf.fit.draw_count(); ++t)
        for (long k = 0; k < rf.fit.drmse.cols(); ++k) put(rf.fit.drmse(t, k));
      std::string bpath = (out_dir / ("fit_" + rf.region + ".draws.bin")).string();
      write_file_atomic(bpath, bin.str());
      artifacts.push_back(bpath);
    }
  }

  // report tables
  if (!design_only) {
    std::ostringstream csv;
    csv << "region,term,beta_mean,beta_q005,beta_q995,drmse_mean,drmse_q005,drmse_q995,reliable\n";
    for (const RegionFit& rf : fits) {
      for (std::size_t t = 0; t < rf.fit.terms.size(); ++t) {
        auto beta = rf.fit.beta.col(static_cast<long>(t));
        auto dr = rf.fit.drmse.col(static_cast<long>(t));
        regression::Ci bci = regression::credible_interval(beta);
        regression::Ci dci = regression::credible_interval(dr);
        csv << rf.region << ',' << rf.fit.terms[t] << ',' << design::format_double(beta.mean())
            << ',' << design::format_double(bci.lo) << ',' << design::format_double(bci.hi) << ','
            << design::format_double(dr.mean()) << ',' << design::format_double(dci.lo) << ','
            << design::format_double(dci.hi) << ','
            << (regression::reliable(rf.fit, static_cast<int>(t)) ? 1 : 0) << '\n';
      }
    }
    std::string path = (out_dir / "report.csv").string();
    write_file_atomic(path, csv.str());
    artifacts.push_back(path);
  }
  if (!design_only) {
    std::ostringstream csv;
    csv << "region,target,control,target_better\n";
    for (const RegionFit& rf : fits) {
      for (const auto& [a, b] : comparisons) {
        bool have = true;
        try {
          rf.fit.term_index(a);
          rf.fit.term_index(b);
        } catch (const regression::UnknownTerm&) {
          have = false;
        }
        if (!have) continue;
        csv << rf.region << ',' << a << ',' << b << ','
            << (regression::compare_terms(rf.fit, a, b) ? 1 : 0) << '\n';
      }
    }
    std::string path = (out_dir / "comparisons.csv").string();
    write_file_atomic(path, csv.str());
    artifacts.push_back(path);
  }

  // manifest with content hashes; no timestamps so reruns are byte-identical
  json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["draws"] = cfg.priors.draws;
  manifest["output_hz"] = cfg.output_hz;
  manifest["internal_hz"] = cfg.internal_hz;
  manifest["train_rows"] = cfg.train_rows;
  manifest["test_rows"] = cfg.test_rows;
  json arts;
  std::uint64_t combined = 0xcbf29ce484222325ull;
  for (const std::string& path : artifacts) {
    std::uint64_t h = fnv1a_file(path);
    arts[fs::path(path).filename().string()] = hex64(h);
    combined = Rng::mix(combined, h);
  }
  manifest["artifacts"] = arts;
  manifest["combined_hash"] = hex64(combined);
  std::string manifest_path = (out_dir / "manifest.json").string();
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

void run_synth(const SynthConfig& sc) {
  if (sc.regions < 1) throw InputError("synth: need at least one region");
  if (sc.run_samples_each < 2 || sc.runs < 1) throw InputError("synth: bad run geometry");
  if (!(sc.noise_sd >= 0)) throw InputError("synth: noise_sd must be >= 0");
  fs::create_directories(sc.output_dir);
  fs::path out_dir(sc.output_dir);

  PipelineConfig pc;
  pc.seed = sc.seed;
  double tr_s = 1.0 / pc.output_hz;
  double duration = sc.run_samples_each * tr_s;

  // word events; times restart per run
  Rng ev_rng = Rng::derive(sc.seed, "synth-events");
  std::vector<design::WordEvent> events;
  std::ostringstream ev;
  ev << "word\tonset_s\toffset_s\trun\n";
  int word_id = 0;
  for (int r = 0; r < sc.runs; ++r) {
    double t = 1.0;
    while (t + sc.word_len_s < duration - 1.0) {
      design::WordEvent e;
      char name[16];
      std::snprintf(name, sizeof name, "w%04d", word_id++);
      e.word = name;
      e.onset_s = t;
      e.offset_s = t + sc.word_len_s;
      e.run_id = r + 1;
      events.push_back(e);
      ev << e.word << '\t' << design::format_double(e.onset_s) << '\t'
         << design::format_double(e.offset_s) << '\t' << e.run_id << '\n';
      t += sc.word_gap_s + 0.05 * ev_rng.uniform();
    }
  }
  write_file_atomic((out_dir / "events.tsv").string(), ev.str());

  // per-word values, one file per term
  std::vector<std::pair<std::string, std::vector<double>>> word_cols;
  for (std::size_t k = 0; k < sc.beta.size(); ++k) {
    Rng rng = Rng::derive(sc.seed, "synth-term", k);
    std::vector<double> vals;
    vals.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) vals.push_back(rng.normal());
    std::string name = "t" + std::to_string(k);
    std::ostringstream vf;
    vf << "# per-word values for " << name << "\n";
    for (double v : vals) vf << design::format_double(v) << '\n';
    write_file_atomic((out_dir / (name + ".values")).string(), vf.str());
    word_cols.emplace_back(name, std::move(vals));
  }

  pc.run_samples.assign(sc.runs, sc.run_samples_each);
  int total_rows = sc.runs * sc.run_samples_each;
  pc.train_rows = total_rows / 2;
  pc.test_rows = total_rows - pc.train_rows;
  DesignOutput dz = build_design(pc, events, word_cols, {});

  // y = X beta + noise, beta 0 on wordrate
  Eigen::VectorXd beta_full = Eigen::VectorXd::Zero(static_cast<long>(dz.matrix.names.size()));
  for (std::size_t k = 0; k < sc.beta.size(); ++k)
    beta_full[static_cast<long>(1 + k)] = sc.beta[k];
  design::RegionSeries regions;
  regions.values.resize(dz.matrix.values.rows(), sc.regions);
  for (int g = 0; g < sc.regions; ++g) {
    char name[16];
    std::snprintf(name, sizeof name, "r%03d", g);
    regions.ids.emplace_back(name);
    Rng rng = Rng::derive(sc.seed, "synth-noise", static_cast<std::uint64_t>(g));
    Eigen::VectorXd y = dz.matrix.values * beta_full;
    for (long i = 0; i < y.rows(); ++i) y[i] += sc.noise_sd * rng.normal();
    regions.values.col(g) = y;
  }
  std::ostringstream reg;
  design::write_regions_csv(reg, regions);
  write_file_atomic((out_dir / "regions.csv").string(), reg.str());

  json truth;
  truth["seed"] = sc.seed;
  truth["noise_sd"] = sc.noise_sd;
  json betas;
  for (std::size_t j = 0; j < dz.matrix.names.size(); ++j)
    betas[dz.matrix.names[j]] = beta_full[static_cast<long>(j)];
  truth["beta"] = betas;
  write_file_atomic((out_dir / "truth.json").string(), truth.dump(2) + "\n");

  json cj;
  cj["seed"] = sc.seed;
  cj["output_dir"] = "out";
  cj["inputs"] = {{"events", "events.tsv"}, {"regions", "regions.csv"}};
  json wv;
  for (const auto& [name, vals] : word_cols) wv[name] = name + ".values";
  cj["inputs"]["word_values"] = wv;
  cj["runs"] = {{"samples", pc.run_samples}};
  cj["split"] = {{"train_rows", pc.train_rows}, {"test_rows", pc.test_rows}};
  cj["zscore_regions"] = false;
  cj["orthogonalize_targets"] = json::array();
  write_file_atomic((out_dir / "config.json").string(), cj.dump(2) + "\n");
}

}  // namespace parsteps::pipeline
