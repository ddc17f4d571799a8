#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "parsteps/ccg.hpp"
#include "parsteps/ccg_strategies.hpp"
#include "parsteps/cfg.hpp"
#include "parsteps/design.hpp"
#include "parsteps/regression.hpp"

namespace parsteps::pipeline {

// Everything the end-to-end run needs; loaded from a JSON file, overridable
// by CLI flags. Defaults mirror the module-level decisions.
struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string output_dir = "out";

  // inputs; empty paths mean the corresponding predictors are skipped
  std::string trees_path;
  std::string ccg_path;
  std::string tokens_path;
  std::string events_path;
  std::string regions_path;
  std::map<std::string, std::string> continuous;   // name -> file (#rate_hz header)
  std::map<std::string, std::string> word_values;  // name -> file (one value per word)

  std::vector<cfg::CfgStrategy> cfg_strategies{cfg::CfgStrategy::BottomUp,
                                               cfg::CfgStrategy::TopDown,
                                               cfg::CfgStrategy::LeftCorner};
  std::vector<ccg::CcgStrategy> ccg_strategies{ccg::CcgStrategy::Left,
                                               ccg::CcgStrategy::Revealing};

  bool strip_punct = false;
  bool strict_features = false;
  ccg::RevealConfig reveal;
  ccg::UnaryRuleTable unary_rules;

  design::HrfParams hrf;
  double internal_hz = 50;
  double output_hz = 0.5;
  int train_rows = 400;
  int test_rows = 400;
  std::vector<int> run_samples;  // output samples per run, before discards
  int run_start_discard = 0;     // volumes dropped at the start of every run
  int initial_discard = 0;       // extra volumes dropped at the start of run 1

  double screen_threshold = 0.95;
  enum class OnFlag { Error, Drop } on_flag = OnFlag::Error;
  std::vector<std::string> screen_priority;
  std::vector<std::string> orthogonalize_targets;  // default: step + surprisal columns
  bool zscore_regions = true;

  regression::PriorConfig priors;
  std::vector<std::pair<std::string, std::string>> comparisons;  // target vs control
  bool dump_draws = false;           // write fit_<region>.draws.bin
  bool hierarchy_shrinkage = false;  // pull coefficient locations toward a pooled fit
};

PipelineConfig load_config(const std::string& path);

// Word-level predictor values in corpus order, one entry per strategy.
struct StepsColumns {
  std::vector<std::string> words;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

StepsColumns compute_cfg_steps(const std::vector<cfg::ConstTree>& trees,
                               const std::vector<cfg::CfgStrategy>& strategies,
                               bool strip_punct);
StepsColumns compute_ccg_steps(const std::vector<ccg::Derivation>& ders,
                               const std::vector<ccg::CcgStrategy>& strategies,
                               const ccg::RevealConfig& reveal);

void write_steps_tsv(std::ostream& out, const std::string& strategy,
                     const std::vector<std::vector<StepTrace>>& per_sentence, bool with_trace);

// Assembled design plus the screening result, for the sidecar.
struct DesignOutput {
  design::DesignMatrix matrix;
  design::ScreenResult screen;
  std::vector<std::string> dropped;
};

DesignOutput build_design(const PipelineConfig& cfg,
                          const std::vector<design::WordEvent>& events,
                          const std::vector<std::pair<std::string, std::vector<double>>>& word_cols,
                          const std::vector<design::PredictorSeries>& continuous);

struct RegionFit {
  std::string region;
  regression::FitResult fit;
};

std::vector<RegionFit> fit_regions(const PipelineConfig& cfg, const design::DesignMatrix& dm,
                                   const design::RegionSeries& regions);

inline constexpr const char* kVersion = "0.1.0";

// Runs steps -> surprisal -> design -> fit -> ablation -> report, writing all
// artifacts plus a manifest with content hashes. Returns the manifest path.
// With design_only, stops after the design stage (no regions required).
std::string run_pipeline(const PipelineConfig& cfg, bool design_only = false);

struct SynthConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "synth_out";
  int regions = 3;
  std::vector<double> beta{2.0, -1.0, 0.0};
  double noise_sd = 0.1;
  int runs = 2;
  int run_samples_each = 400;
  double word_gap_s = 0.45;
  double word_len_s = 0.3;
};

// Synthetic bundle: events, per-word values, region series y = X beta + noise,
// a ground-truth sidecar, and a pipeline config covering them.
void run_synth(const SynthConfig& cfg);

std::uint64_t fnv1a_file(const std::string& path);

void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace parsteps::pipeline
