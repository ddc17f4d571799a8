#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "parsteps/ccg.hpp"
#include "parsteps/ccg_strategies.hpp"
#include "parsteps/cfg.hpp"
#include "parsteps/design.hpp"
#include "parsteps/pipeline.hpp"
#include "parsteps/regression.hpp"
#include "parsteps/surprisal.hpp"

namespace pp = parsteps;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct GlobalFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool strict_features = false;
  bool count_rotation = true;
  bool count_rotation_set = false;
};

pp::pipeline::PipelineConfig make_config(const GlobalFlags& g) {
  pp::pipeline::PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = pp::pipeline::load_config(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.strict_features) {
    cfg.strict_features = true;
    cfg.reveal.features = pp::ccg::FeaturePolicy::Exact;
  }
  if (g.count_rotation_set) cfg.reveal.count_rotation_as_step = g.count_rotation;
  return cfg;
}

int run_steps(const GlobalFlags& g, const std::string& grammar, const std::string& strategy,
              const std::string& file, bool trace, bool strip_punct) {
  pp::pipeline::PipelineConfig cfg = make_config(g);
  if (strip_punct) cfg.strip_punct = true;
  std::ifstream in(file);
  if (!in) throw pp::InputError("cannot open '" + file + "'");
  std::vector<std::vector<pp::StepTrace>> per_sentence;
  std::string name;
  if (grammar == "cfg") {
    pp::cfg::CfgStrategy s;
    if (strategy == "bottomup") s = pp::cfg::CfgStrategy::BottomUp;
    else if (strategy == "topdown") s = pp::cfg::CfgStrategy::TopDown;
    else if (strategy == "leftcorner") s = pp::cfg::CfgStrategy::LeftCorner;
    else throw pp::InputError("unknown cfg strategy '" + strategy +
                              "' (valid: bottomup, topdown, leftcorner)");
    name = pp::cfg::strategy_name(s);
    for (const pp::cfg::ConstTree& t : pp::cfg::read_penn_file(in)) {
      if (cfg.strip_punct) {
        if (auto kept = pp::cfg::strip_punctuation(t))
          per_sentence.push_back(pp::cfg::steps_cfg(*kept, s));
      } else {
        per_sentence.push_back(pp::cfg::steps_cfg(t, s));
      }
    }
  } else if (grammar == "ccg") {
    pp::ccg::CcgStrategy s;
    if (strategy == "right") s = pp::ccg::CcgStrategy::Right;
    else if (strategy == "left") s = pp::ccg::CcgStrategy::Left;
    else if (strategy == "revealing") s = pp::ccg::CcgStrategy::Revealing;
    else throw pp::InputError("unknown ccg strategy '" + strategy +
                              "' (valid: right, left, revealing)");
    name = pp::ccg::strategy_name(s);
    pp::ccg::FeaturePolicy pol = cfg.strict_features ? pp::ccg::FeaturePolicy::Exact
                                                     : pp::ccg::FeaturePolicy::Ignore;
    for (const pp::ccg::Derivation& d : pp::ccg::read_derivation_file(in)) {
      pp::ccg::validate(d, cfg.unary_rules, pol);
      per_sentence.push_back(pp::ccg::steps_ccg(d, s, cfg.reveal));
    }
  } else {
    throw pp::InputError("grammar must be cfg or ccg");
  }
  pp::pipeline::write_steps_tsv(std::cout, name, per_sentence, trace);
  return kExitOk;
}

int run_surprisal(const std::string& tokens_file, const std::string& words_file,
                  const std::string& events_file) {
  std::ifstream tok_in(tokens_file);
  if (!tok_in) throw pp::InputError("cannot open '" + tokens_file + "'");
  pp::surprisal::LogProbFile lp = pp::surprisal::read_logprob_tsv(tok_in);
  std::vector<std::string> words;
  if (!words_file.empty()) {
    std::ifstream in(words_file);
    if (!in) throw pp::InputError("cannot open '" + words_file + "'");
    words = pp::surprisal::read_word_list(in);
  } else if (!events_file.empty()) {
    std::ifstream in(events_file);
    if (!in) throw pp::InputError("cannot open '" + events_file + "'");
    for (const pp::design::WordEvent& e : pp::design::read_events_tsv(in))
      words.push_back(e.word);
  } else {
    throw pp::InputError("surprisal needs --words or --events");
  }
  std::vector<std::string> toks;
  for (const auto& t : lp.tokens) toks.push_back(t.token);
  pp::surprisal::WordAlignment al = pp::surprisal::align(words, toks);
  std::vector<double> bits = pp::surprisal::word_surprisal(lp, al);
  pp::surprisal::write_surprisal_tsv(std::cout, words, bits);
  return kExitOk;
}

int run_ablate(const std::string& design_file, const std::string& term,
               const std::string& out_file) {
  std::ifstream in(design_file);
  if (!in) throw pp::InputError("cannot open '" + design_file + "'");
  pp::design::DesignMatrix dm = pp::design::read_design_csv(in);
  long idx = -1;
  for (std::size_t j = 0; j < dm.names.size(); ++j) {
    if (dm.names[j] == term) idx = static_cast<long>(j);
  }
  if (idx < 0) throw pp::regression::UnknownTerm(term);
  dm.values = pp::regression::ablate(dm.values, static_cast<int>(idx));
  std::ostringstream csv;
  pp::design::write_design_csv(csv, dm);
  if (out_file.empty()) {
    std::cout << csv.str();
  } else {
    pp::pipeline::write_file_atomic(out_file, csv.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"incremental parsing-effort metrics and region-series regression"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed (overrides config)");
  app.add_option("--threads", g.threads, "worker threads for region fits");
  app.add_flag("--strict-features", g.strict_features, "require exact feature matches");
  auto* rot_opt = app.add_flag("--count-rotation,!--no-count-rotation", g.count_rotation,
                               "count ROTATE as a step (default on)");

  auto* steps = app.add_subcommand("steps", "per-word parser step counts as TSV");
  std::string grammar = "cfg", strategy = "bottomup", steps_file;
  bool trace = false, strip_punct = false;
  steps->add_option("--grammar", grammar, "cfg | ccg");
  steps->add_option("--strategy", strategy, "bottomup|topdown|leftcorner or right|left|revealing");
  steps->add_flag("--trace", trace, "emit the op sequence per word");
  steps->add_flag("--strip-punct", strip_punct, "drop punctuation leaves (cfg only)");
  steps->add_option("file", steps_file, "trees / derivations, one per line")->required();

  auto* surp = app.add_subcommand("surprisal", "word surprisal from token log-probabilities");
  std::string tokens_file, words_file, events_file;
  surp->add_option("tokens", tokens_file, "TSV with #base header")->required();
  surp->add_option("--words", words_file, "word list, one per line");
  surp->add_option("--events", events_file, "word events TSV");

  auto* design_cmd = app.add_subcommand("design", "assemble the design matrix");
  auto* fit_cmd = app.add_subcommand("fit", "per-region Bayesian fits from design + regions");
  std::string fit_design, fit_regions_path, fit_out = "out";
  fit_cmd->add_option("--design", fit_design, "design CSV")->required();
  fit_cmd->add_option("--regions", fit_regions_path, "region series CSV")->required();
  fit_cmd->add_option("--out", fit_out, "output directory");

  auto* ablate_cmd = app.add_subcommand("ablate", "circularly shift one design column");
  std::string ab_design, ab_term, ab_out;
  ablate_cmd->add_option("--design", ab_design, "design CSV")->required();
  ablate_cmd->add_option("--term", ab_term, "column to shift")->required();
  ablate_cmd->add_option("--out", ab_out, "output CSV (default stdout)");

  auto* synth = app.add_subcommand("synth", "synthetic validation bundle");
  pp::pipeline::SynthConfig sc;
  std::string beta_str = "2,-1,0";
  synth->add_option("--out", sc.output_dir, "output directory");
  synth->add_option("--regions", sc.regions, "number of regions");
  synth->add_option("--beta", beta_str, "comma-separated true coefficients");
  synth->add_option("--noise", sc.noise_sd, "noise sd");
  synth->add_option("--runs", sc.runs, "number of runs");
  synth->add_option("--run-samples", sc.run_samples_each, "output samples per run");

  auto* report = app.add_subcommand("report", "summarize fit JSONs to CSV (see pipeline)");
  std::string report_dir;
  bool report_comparisons = false;
  report->add_option("dir", report_dir, "pipeline output directory")->required();
  report->add_flag("--comparisons", report_comparisons, "emit the pairwise comparison table");

  auto* pipe = app.add_subcommand("pipeline", "run all stages end to end");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;
  g.count_rotation_set = rot_opt->count() > 0;

  try {
    if (steps->parsed()) return run_steps(g, grammar, strategy, steps_file, trace, strip_punct);
    if (surp->parsed()) return run_surprisal(tokens_file, words_file, events_file);
    if (design_cmd->parsed() || pipe->parsed()) {
      if (g.config_path.empty()) throw pp::InputError("pipeline/design need --config");
      pp::pipeline::PipelineConfig cfg = make_config(g);
      std::string manifest = pp::pipeline::run_pipeline(cfg, design_cmd->parsed());
      std::cout << manifest << "\n";
      return kExitOk;
    }
    if (fit_cmd->parsed()) {
      pp::pipeline::PipelineConfig cfg = make_config(g);
      std::ifstream din(fit_design);
      if (!din) throw pp::InputError("cannot open '" + fit_design + "'");
      pp::design::DesignMatrix dm = pp::design::read_design_csv(din);
      std::ifstream rin(fit_regions_path);
      if (!rin) throw pp::InputError("cannot open '" + fit_regions_path + "'");
      pp::design::RegionSeries regions = pp::design::read_regions_csv(rin);
      std::vector<pp::pipeline::RegionFit> fits = pp::pipeline::fit_regions(cfg, dm, regions);
      for (const pp::pipeline::RegionFit& rf : fits) {
        std::cout << rf.region << " train_rmse=" << rf.fit.train_rmse
                  << " test_rmse_mean=" << rf.fit.rmse_full.mean() << "\n";
      }
      return kExitOk;
    }
    if (ablate_cmd->parsed()) return run_ablate(ab_design, ab_term, ab_out);
    if (synth->parsed()) {
      pp::pipeline::PipelineConfig base = make_config(g);
      sc.seed = base.seed;
      sc.beta.clear();
      std::istringstream bs(beta_str);
      std::string tok;
      while (std::getline(bs, tok, ',')) {
        try {
          sc.beta.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw pp::InputError("synth: bad --beta value '" + tok + "'");
        }
      }
      if (sc.beta.empty()) throw pp::InputError("synth: --beta must name at least one term");
      pp::pipeline::run_synth(sc);
      std::cout << sc.output_dir << "\n";
      return kExitOk;
    }
    if (report->parsed()) {
      // report.csv / comparisons.csv are written by `pipeline`; this re-emits them
      std::string name = report_comparisons ? "/comparisons.csv" : "/report.csv";
      std::ifstream in(report_dir + name);
      if (!in)
        throw pp::InputError("no " + name.substr(1) + " under '" + report_dir +
                             "' (run pipeline first)");
      std::cout << in.rdbuf();
      return kExitOk;
    }
  } catch (const pp::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const pp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
