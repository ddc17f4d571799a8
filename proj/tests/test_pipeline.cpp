#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "parsteps/pipeline.hpp"

using namespace parsteps;
using namespace parsteps::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "parsteps_test";
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// small self-consistent bundle: 12 words over 2 runs, varied sentence shapes
// so the step columns are not collinear with wordrate
void write_bundle(const fs::path& dir) {
  write(dir / "demo.trees",
        "(S (NP Mary) (VP (V reads) (NP papers)))\n"
        "(S (NP John) (VP (VP (V writes) (NP code)) (ADVP daily)))\n"
        "(S (NP birds) (VP (V sing)))\n"
        "(S (NP (D the) (N cat)) (VP (V sleeps)))\n");
  write(dir / "demo.ccg",
        R"x((b ba "S" (lex "NP" Mary) (b fa "S\NP" (lex "(S\NP)/NP" reads) (lex "NP" papers))))x"
        "\n"
        R"x((b ba "S" (lex "NP" John) (b ba "S\NP" (b fa "S\NP" (lex "(S\NP)/NP" writes) (lex "NP" code)) (lex "(S\NP)\(S\NP)" daily))))x"
        "\n"
        R"x((b ba "S" (lex "NP" birds) (lex "S\NP" sing)))x"
        "\n"
        R"x((b ba "S" (b fa "NP" (lex "NP/N" the) (lex "N" cat)) (lex "S\NP" sleeps)))x"
        "\n");
  write(dir / "demo.tokens",
        "#base=2\nMary\t-8\nre\t-2\nads\t-3\npapers\t-9\nJohn\t-7\nwrites\t-6\ncode\t-5\n"
        "da\t-1.5\nily\t-2.5\nbirds\t-7.5\nsing\t-4\nthe\t-1\ncat\t-6.5\nsleeps\t-5.5\n");
  write(dir / "demo.events",
        "word\tonset_s\toffset_s\trun\n"
        "Mary\t1.0\t1.3\t1\nreads\t1.5\t1.9\t1\npapers\t2.1\t2.6\t1\n"
        "John\t4.0\t4.3\t1\nwrites\t4.5\t4.9\t1\ncode\t5.1\t5.5\t1\ndaily\t5.7\t6.2\t1\n"
        "birds\t1.1\t1.5\t2\nsing\t1.8\t2.3\t2\n"
        "the\t4.2\t4.4\t2\ncat\t4.6\t5.0\t2\nsleeps\t5.2\t5.8\t2\n");
  write(dir / "demo.freq", "1.5\n-0.3\n0.2\n0.9\n-1.1\n0.4\n-0.6\n0.8\n-1.4\n2.1\n0.1\n-0.9\n");
  // regions: 40 rows = 2 runs x 20 samples
  std::ostringstream reg;
  reg << "r000,r001\n";
  for (int i = 0; i < 40; ++i)
    reg << 0.1 * ((i * 7) % 11 - 5) << "," << 0.1 * ((i * 3) % 13 - 6) << "\n";
  write(dir / "demo.regions", reg.str());
  write(dir / "demo.json", R"({
  "seed": 7,
  "output_dir": "out",
  "inputs": {
    "trees": "demo.trees",
    "ccg": "demo.ccg",
    "tokens": "demo.tokens",
    "events": "demo.events",
    "regions": "demo.regions",
    "word_values": {"freq": "demo.freq"}
  },
  "strategies": {"cfg": ["bottomup", "topdown"], "ccg": ["left", "revealing"]},
  "runs": {"samples": [20, 20]},
  "split": {"train_rows": 20, "test_rows": 20},
  "priors": {"draws": 500}
})");
}

}  // namespace

TEST_CASE("config loading with defaults and overrides") {
  fs::path dir = scratch() / "cfg";
  fs::create_directories(dir);
  write(dir / "c.json", R"({"seed": 123, "screen": {"threshold": 0.9, "on_flag": "drop"}})");
  PipelineConfig c = load_config((dir / "c.json").string());
  CHECK(c.seed == 123);
  CHECK(c.screen_threshold == 0.9);
  CHECK(c.on_flag == PipelineConfig::OnFlag::Drop);
  CHECK(c.priors.coef_sd == 2.5);
  CHECK(c.internal_hz == 50);
  write(dir / "bad.json", R"({"screen": {"on_flag": "explode"}})");
  CHECK_THROWS_AS(load_config((dir / "bad.json").string()), InputError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), InputError);
}

TEST_CASE("steps columns line up with corpus words") {
  std::istringstream trees("(S (NP Mary) (VP (V reads) (NP papers)))\n(NP John)\n");
  auto parsed = cfg::read_penn_file(trees);
  StepsColumns sc = compute_cfg_steps(parsed, {cfg::CfgStrategy::BottomUp}, false);
  CHECK(sc.words == std::vector<std::string>{"Mary", "reads", "papers", "John"});
  CHECK(sc.values[0] == std::vector<double>{2, 2, 4, 2});
}

TEST_CASE("build_design geometry, orthogonalization, screening") {
  std::vector<design::WordEvent> events;
  for (int r = 1; r <= 2; ++r) {
    for (int w = 0; w < 12; ++w) {
      design::WordEvent e;
      e.word = "w" + std::to_string(w);
      e.onset_s = 1.0 + w * 2.5;
      e.offset_s = e.onset_s + 0.3;
      e.run_id = r;
      events.push_back(e);
    }
  }
  std::vector<double> vals;
  for (int i = 0; i < 24; ++i) vals.push_back((i * 13) % 7 - 3.0);
  PipelineConfig cfg;
  cfg.run_samples = {20, 20};
  cfg.train_rows = 20;
  cfg.test_rows = 20;
  cfg.orthogonalize_targets = {"steps"};
  DesignOutput out = build_design(cfg, events, {{"steps", vals}}, {});
  CHECK(out.matrix.names == std::vector<std::string>{"wordrate", "steps"});
  CHECK(out.matrix.values.rows() == 40);
  CHECK(out.matrix.run_starts == std::vector<int>{0, 20});
  // orthogonalized against wordrate + constant
  Eigen::VectorXd steps = out.matrix.values.col(1);
  Eigen::VectorXd wr = out.matrix.values.col(0);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(40);
  CHECK(std::fabs(steps.dot(wr)) < 1e-8);
  CHECK(std::fabs(steps.dot(ones)) < 1e-8);

  // a duplicated column trips the screen as an error by default
  PipelineConfig cfg2 = cfg;
  cfg2.orthogonalize_targets.clear();
  CHECK_THROWS_AS(build_design(cfg2, events, {{"a", vals}, {"b", vals}}, {}), InputError);
  cfg2.on_flag = PipelineConfig::OnFlag::Drop;
  DesignOutput dropped = build_design(cfg2, events, {{"a", vals}, {"b", vals}}, {});
  CHECK(dropped.dropped == std::vector<std::string>{"b"});
  CHECK(dropped.matrix.names == std::vector<std::string>{"wordrate", "a"});
}

TEST_CASE("volume exclusion drops rows at run starts") {
  std::vector<design::WordEvent> events;
  for (int r = 1; r <= 2; ++r) {
    for (int w = 0; w < 5; ++w) {
      design::WordEvent e;
      e.word = "w";
      e.onset_s = 1.0 + w * 3.0;
      e.offset_s = e.onset_s + 0.2;
      e.run_id = r;
      events.push_back(e);
    }
  }
  PipelineConfig cfg;
  cfg.run_samples = {12, 12};
  cfg.train_rows = 10;
  cfg.test_rows = 8;
  cfg.run_start_discard = 1;
  cfg.initial_discard = 2;
  DesignOutput out = build_design(cfg, events, {}, {});
  CHECK(out.matrix.values.rows() == 12 - 3 + 12 - 1);
  CHECK(out.matrix.run_starts == std::vector<int>{0, 9});
}

TEST_CASE("synthetic bundle end-to-end recovers the truth") {
  fs::path dir = scratch() / "synth";
  fs::remove_all(dir);
  SynthConfig sc;
  sc.seed = 77;
  sc.output_dir = dir.string();
  sc.regions = 2;
  sc.beta = {2.0, -1.0, 0.0};
  sc.noise_sd = 0.1;
  sc.runs = 2;
  sc.run_samples_each = 400;
  run_synth(sc);
  PipelineConfig cfg = load_config((dir / "config.json").string());
  std::string manifest = run_pipeline(cfg);
  CHECK(fs::exists(manifest));

  // the fit on the bundle recovers beta* within the posterior summaries
  std::ifstream din(dir / "out" / "design.csv");
  design::DesignMatrix dm = design::read_design_csv(din);
  std::ifstream rin((dir / "regions.csv").string());
  design::RegionSeries regions = design::read_regions_csv(rin);
  cfg.zscore_regions = false;
  std::vector<RegionFit> fits = fit_regions(cfg, dm, regions);
  REQUIRE(fits.size() == 2);
  for (const RegionFit& rf : fits) {
    int t0 = rf.fit.term_index("t0");
    int t1 = rf.fit.term_index("t1");
    int t2 = rf.fit.term_index("t2");
    CHECK(std::fabs(rf.fit.beta.col(t0).mean() - 2.0) < 0.05);
    CHECK(std::fabs(rf.fit.beta.col(t1).mean() + 1.0) < 0.05);
    CHECK(regression::reliable(rf.fit, t0));
    CHECK(regression::reliable(rf.fit, t1));
    CHECK(!regression::reliable(rf.fit, t2));
    CHECK(regression::compare_terms(rf.fit, t0, t2));
    CHECK(!regression::compare_terms(rf.fit, t2, t0));
  }
}

TEST_CASE("demo bundle runs end to end and is deterministic") {
  fs::path dir = scratch() / "demo";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_bundle(dir);
  PipelineConfig cfg = load_config((dir / "demo.json").string());
  std::string m1 = run_pipeline(cfg);
  std::uint64_t h1 = fnv1a_file(m1);
  // second run in a fresh directory must be byte-identical
  PipelineConfig cfg2 = cfg;
  cfg2.output_dir = (dir / "out2").string();
  std::string m2 = run_pipeline(cfg2);
  CHECK(h1 == fnv1a_file(m2));

  for (const char* name :
       {"design.csv", "design_sidecar.json", "report.csv", "comparisons.csv",
        "steps_cfg_bottomup.tsv", "steps_ccg_revealing.tsv", "surprisal.tsv", "fit_r000.json"}) {
    CHECK(fs::exists(dir / "out" / name));
  }
}

TEST_CASE("hierarchy shrinkage pulls null regions toward the pooled location") {
  fs::path dir = scratch() / "shrink";
  fs::remove_all(dir);
  SynthConfig sc;
  sc.seed = 99;
  sc.output_dir = dir.string();
  sc.regions = 4;
  sc.beta = {2.0, -1.0};
  sc.noise_sd = 0.4;
  sc.runs = 2;
  sc.run_samples_each = 200;
  run_synth(sc);
  PipelineConfig cfg = load_config((dir / "config.json").string());
  std::ifstream din;
  {
    // build the design once via the pipeline, then fit twice
    run_pipeline(cfg);
  }
  std::ifstream d2(dir / "out" / "design.csv");
  design::DesignMatrix dm = design::read_design_csv(d2);
  std::ifstream rin((dir / "regions.csv").string());
  design::RegionSeries regions = design::read_regions_csv(rin);
  cfg.zscore_regions = false;
  std::vector<RegionFit> plain = fit_regions(cfg, dm, regions);
  cfg.hierarchy_shrinkage = true;
  std::vector<RegionFit> shrunk = fit_regions(cfg, dm, regions);
  // identical data in every region, so the pooled pull is small but real
  bool moved = false;
  for (std::size_t r = 0; r < plain.size(); ++r) {
    for (long t = 0; t < plain[r].fit.beta.cols(); ++t) {
      if (std::fabs(plain[r].fit.beta.col(t).mean() - shrunk[r].fit.beta.col(t).mean()) > 1e-12)
        moved = true;
    }
    // shrinkage must not destroy recovery
    int t0 = shrunk[r].fit.term_index("t0");
    CHECK(std::fabs(shrunk[r].fit.beta.col(t0).mean() - 2.0) < 0.2);
  }
  CHECK(moved);
}

TEST_CASE("draw dump has the advertised layout") {
  fs::path dir = scratch() / "draws";
  fs::remove_all(dir);
  SynthConfig sc;
  sc.seed = 5;
  sc.output_dir = dir.string();
  sc.regions = 1;
  sc.beta = {1.0};
  sc.runs = 1;
  sc.run_samples_each = 100;
  run_synth(sc);
  PipelineConfig cfg = load_config((dir / "config.json").string());
  cfg.dump_draws = true;
  run_pipeline(cfg);
  std::ifstream bin(dir / "out" / "fit_r000.draws.bin", std::ios::binary);
  REQUIRE(bin.good());
  char magic[8];
  bin.read(magic, 8);
  CHECK(std::string(magic, 8) == "PSDRAWS1");
  std::int32_t dims[2];
  bin.read(reinterpret_cast<char*>(dims), sizeof dims);
  CHECK(dims[0] == 500);
  CHECK(dims[1] == 2);  // wordrate + t0
  bin.seekg(0, std::ios::end);
  long expect = 8 + 8 + 8L * (500L * 2 + 500 + 500 + 500L * 2);
  CHECK(static_cast<long>(bin.tellg()) == expect);
}

TEST_CASE("pipeline rejects unknown strategies with a helpful message") {
  fs::path dir = scratch() / "badstrat";
  fs::create_directories(dir);
  write(dir / "c.json", R"({"strategies": {"cfg": ["sideways"]}})");
  try {
    load_config((dir / "c.json").string());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    std::string msg = e.what();
    CHECK(msg.find("sideways") != std::string::npos);
    CHECK(msg.find("bottomup") != std::string::npos);  // names the valid ones
  }
}

TEST_CASE("pipeline errors when words disagree with events") {
  fs::path dir = scratch() / "mismatch";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_bundle(dir);
  write(dir / "demo.trees",
        "(S (NP Maria) (VP (V reads) (NP papers)))\n"
        "(S (NP John) (VP (V writes) (NP code)))\n");
  PipelineConfig cfg = load_config((dir / "demo.json").string());
  CHECK_THROWS_AS(run_pipeline(cfg), InputError);
}
