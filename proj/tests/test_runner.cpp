#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <doctest.h>

#include "cpfd/checkpoint.hpp"
#include "cpfd/config.hpp"
#include "cpfd/trainer.hpp"

using namespace cpfd;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cpfd_run_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// A deliberately tiny experiment so runner tests stay fast.
RunConfig tiny_experiment(const std::string& out_dir) {
  RunConfig cfg;
  cfg.synthetic.types = 2;
  cfg.synthetic.sentences_per_type = 8;
  cfg.synthetic.vocab_size = 12;
  cfg.synthetic.seed = 3;
  cfg.fg = 1;
  cfg.pg = 1;
  cfg.model.layers = 1;
  cfg.model.heads = 2;
  cfg.model.d_model = 16;
  cfg.model.d_ff = 16;
  cfg.model.max_seq_len = 16;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 3e-3;
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults follow the training recipe") {
  const RunConfig cfg = parse_config_text("seed = 5\nout = runs/x\n");
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.learning_rate == doctest::Approx(4e-4));
  CHECK(cfg.distill.lambda == doctest::Approx(2.0));
  CHECK(cfg.distill.variant == DistillVariant::PFD);
  CHECK(cfg.pseudo == PseudoMode::CPL);
  CHECK(cfg.art);
  CHECK(cfg.pg == 1);
  CHECK(cfg.effective_epochs() == 10);  // PG=1

  const RunConfig wide = parse_config_text("pg = 2\nfg = 2\nout = runs/x\n");
  CHECK(wide.effective_epochs() == 20);  // PG>1

  const RunConfig fixed = parse_config_text("epochs = 7\nout = runs/x\n");
  CHECK(fixed.effective_epochs() == 7);
}

TEST_CASE("config parsing: comments, unknown keys, bad values") {
  const RunConfig cfg = parse_config_text(
      "# a comment\nseed = 9   # trailing comment\ndistill = PFD-lax\npseudo = none\n"
      "art = off\nlambda = 0.5\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.distill.variant == DistillVariant::PFDLax);
  CHECK(cfg.pseudo == PseudoMode::None);
  CHECK_FALSE(cfg.art);
  CHECK(cfg.distill.lambda == doctest::Approx(0.5));

  CHECK_THROWS_AS(parse_config_text("mystery = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("epochs = banana\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("data.train = x.conll\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("batch_size = 0\n"), std::invalid_argument);
}

TEST_CASE("resolved config text reparses to the same settings") {
  RunConfig cfg;
  cfg.seed = 123;
  cfg.distill.variant = DistillVariant::FD;
  cfg.pseudo = PseudoMode::VPL;
  cfg.art_scope = ArtScope::Dataset;
  cfg.out_dir = "runs/echo";
  const RunConfig reparsed = parse_config_text(resolved_config_text(cfg));
  CHECK(reparsed.seed == cfg.seed);
  CHECK(reparsed.distill.variant == cfg.distill.variant);
  CHECK(reparsed.pseudo == cfg.pseudo);
  CHECK(reparsed.art_scope == ArtScope::Dataset);
  CHECK(reparsed.out_dir == cfg.out_dir);
}

TEST_CASE("checkpoint round trip preserves forward outputs to float32 precision") {
  TempDir dir;
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 8;
  cfg.vocab_size = 10;
  cfg.max_seq_len = 6;
  Rng rng(2);
  TaggerModel model(cfg, 3, rng);

  const std::string path = dir.file("model.bin");
  save_checkpoint(path, model, {"O", "B-A", "I-A"}, 1);
  const CheckpointData data = load_checkpoint(path);
  CHECK(data.step == 1);
  CHECK(data.class_names == std::vector<std::string>{"O", "B-A", "I-A"});
  CHECK(data.config.d_model == 8);

  const TaggerModel reloaded = model_from_checkpoint(data);
  const std::vector<int> ids = {1, 5, 2, 9};
  const auto original = model.forward(ids).logits.value();
  const auto restored = reloaded.forward(ids).logits.value();
  REQUIRE(original.size() == restored.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(std::abs(original[i] - restored[i]) < 1e-6);
  }
}

TEST_CASE("checkpoint loader rejects foreign files and versions") {
  TempDir dir;
  const std::string junk = dir.file("junk.bin");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "NOPE00000000";
  }
  CHECK_THROWS_AS(load_checkpoint(junk), std::runtime_error);

  const std::string versioned = dir.file("future.bin");
  {
    std::ofstream out(versioned, std::ios::binary);
    out << "CPFD";
    const std::uint32_t version = 999;
    out.write(reinterpret_cast<const char*>(&version), 4);
  }
  CHECK_THROWS_AS(load_checkpoint(versioned), std::runtime_error);
}

TEST_CASE("tiny experiment: reproducible artifacts and sane shape") {
  TempDir dir;
  RunConfig cfg = tiny_experiment(dir.file("a"));
  const RunReport report = run_experiment(cfg);
  REQUIRE(report.steps.size() == 2);
  CHECK(fs::exists(dir.file("a") + "/metrics.jsonl"));
  CHECK(fs::exists(dir.file("a") + "/summary.csv"));
  CHECK(fs::exists(dir.file("a") + "/config_resolved.txt"));
  CHECK(fs::exists(dir.file("a") + "/ckpt_step1.bin"));
  CHECK(fs::exists(dir.file("a") + "/ckpt_step2.bin"));

  cfg.out_dir = dir.file("b");
  run_experiment(cfg);
  CHECK(read_file(dir.file("a") + "/metrics.jsonl") ==
        read_file(dir.file("b") + "/metrics.jsonl"));
  CHECK(read_file(dir.file("a") + "/summary.csv") ==
        read_file(dir.file("b") + "/summary.csv"));

  // a different seed changes training but not the metric schema
  cfg.out_dir = dir.file("c");
  cfg.seed = 12;
  const RunReport other = run_experiment(cfg);
  REQUIRE(other.steps.size() == 2);
}

TEST_CASE("train_step enforces the old-model contract") {
  TempDir dir;
  ModelConfig mc;
  mc.layers = 1;
  mc.heads = 1;
  mc.d_model = 8;
  mc.d_ff = 8;
  mc.vocab_size = 8;
  mc.max_seq_len = 8;
  Rng rng(1);
  TaggerModel model(mc, 3, rng);
  const LabelSchema schema = LabelSchema::build({{"A"}});
  Vocabulary vocab;
  std::vector<Sentence> data = {{{"x", "y"}, {"B-A", "O"}}};
  for (const auto& t : data[0].tokens) vocab.add(t);
  RunConfig cfg = tiny_experiment(dir.file("x"));
  cfg.epochs = 1;

  // step 1 must not receive an old model; step 2 must
  const TaggerModel frozen = model.frozen_snapshot();
  CHECK_THROWS_AS(
      train_step(model, &frozen, data, data, vocab, schema, 1, cfg, rng),
      std::invalid_argument);
  CHECK_THROWS_AS(train_step(model, nullptr, data, data, vocab, schema, 2, cfg, rng),
                  std::invalid_argument);
  // and the old model must actually be frozen
  CHECK_THROWS_AS(train_step(model, &model, data, data, vocab, schema, 2, cfg, rng),
                  std::invalid_argument);
}

#ifdef CPFD_CLI_PATH
TEST_CASE("cli: synth, slice, eval and exit codes") {
  TempDir dir;
  const std::string cli = CPFD_CLI_PATH;
  auto run_cli = [&](const std::string& args) {
    return std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
  };

  CHECK(WEXITSTATUS(run_cli("synth --types 2 --per-type 5 --seed 4 --out " +
                            dir.file("data"))) == 0);
  CHECK(fs::exists(dir.file("data") + "/train.conll"));
  CHECK(fs::exists(dir.file("data") + "/dev.conll"));
  CHECK(fs::exists(dir.file("data") + "/test.conll"));

  CHECK(WEXITSTATUS(run_cli("slice --data " + dir.file("data") + "/train.conll" +
                            " --fg 1 --pg 1 --out " + dir.file("slices"))) == 0);
  CHECK(fs::exists(dir.file("slices") + "/step1.conll"));
  CHECK(fs::exists(dir.file("slices") + "/step2.conll"));

  // identical files score F1 = 1.0 and exit 0
  const std::string gold = dir.file("data") + "/test.conll";
  CHECK(WEXITSTATUS(run_cli("eval --pred " + gold + " --gold " + gold)) == 0);

  // unknown flag and missing required arguments exit 2
  CHECK(WEXITSTATUS(run_cli("run --bogus")) == 2);
  CHECK(WEXITSTATUS(run_cli("run")) == 2);
}
#endif
