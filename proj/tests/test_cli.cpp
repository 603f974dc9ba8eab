#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

std::string cli_path() {
  const char* env = std::getenv("INTENT_RNNT_CLI");
  return env ? env : "intent-rnnt";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = "'" + cli_path() + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough that the whole pipeline runs in a few seconds.
fs::path write_tiny_config(const fs::path& dir) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << R"({
  "seed": 3,
  "out_dir": ")" << (dir / "run").string() << R"(",
  "corpus": {"a2i_per_intent": 4, "train_per_intent": 4, "dev_per_intent": 2, "test_per_intent": 2,
             "feature_dim": 12},
  "a2i": {"lstm_units": 8, "embedding_dim": 4, "train": {"steps": 20, "batch_size": 4}},
  "rnnt": {"vocab_size": 40, "encoder_layers": 1, "encoder_units": 8, "pred_units": 8,
           "train": {"steps": 10, "batch_size": 4},
           "augment": {"max_freq_width": 4}},
  "conditioning": {"kind": "per_frame_posterior"}
})";
  return path;
}

}  // namespace

TEST_CASE("the full command chain runs and is reproducible") {
  const fs::path dir = fresh_dir("intent_rnnt_cli_chain");
  const fs::path cfg = write_tiny_config(dir);
  const std::string c = "--config '" + cfg.string() + "'";
  const fs::path run_dir = dir / "run";

  REQUIRE(run(dir, "generate-corpus " + c).code == 0);
  CHECK(fs::exists(run_dir / "corpus" / "test.jsonl"));
  const Result a2i = run(dir, "train-a2i " + c);
  REQUIRE(a2i.code == 0);
  CHECK(a2i.output.find("Per-utterance") != std::string::npos);
  CHECK(fs::exists(run_dir / "a2i" / "every_frame.ckpt"));
  CHECK(fs::exists(run_dir / "a2i" / "accuracy.tsv"));

  REQUIRE(run(dir, "train-rnnt " + c).code == 0);
  const fs::path policy_dir = run_dir / "rnnt" / "per_frame_posterior";
  CHECK(fs::exists(policy_dir / "model.ckpt"));
  CHECK(fs::exists(policy_dir / "vocab.txt"));
  CHECK(slurp(policy_dir / "manifest.json").find("\"version\"") != std::string::npos);

  REQUIRE(run(dir, "decode --mode offline " + c).code == 0);
  REQUIRE(run(dir, "decode --mode streaming " + c).code == 0);
  // Greedy streaming and offline decoding agree token for token.
  CHECK(slurp(policy_dir / "hyps-test-offline.tsv") == slurp(policy_dir / "hyps-test-streaming.tsv"));

  const Result eval = run(dir, "evaluate " + c);
  REQUIRE(eval.code == 0);
  CHECK(eval.output.find("streamable: yes") != std::string::npos);
  CHECK(fs::exists(policy_dir / "eval-test.json"));

  REQUIRE(run(dir, "analyze-posteriors " + c).code == 0);
  CHECK(fs::exists(run_dir / "a2i" / "posteriors" / "every_frame-dev-curves.tsv"));

  // Identical config, identical bytes.
  const std::string ckpt = slurp(policy_dir / "model.ckpt");
  const std::string a2i_ckpt = slurp(run_dir / "a2i" / "every_frame.ckpt");
  const std::string hyps = slurp(policy_dir / "hyps-test-offline.tsv");
  REQUIRE(run(dir, "generate-corpus " + c).code == 0);
  REQUIRE(run(dir, "train-a2i " + c).code == 0);
  REQUIRE(run(dir, "train-rnnt " + c).code == 0);
  REQUIRE(run(dir, "decode " + c).code == 0);
  CHECK(slurp(run_dir / "a2i" / "every_frame.ckpt") == a2i_ckpt);
  CHECK(slurp(policy_dir / "model.ckpt") == ckpt);
  CHECK(slurp(policy_dir / "hyps-test-offline.tsv") == hyps);

  // A checkpoint trained for one policy cannot be decoded under another.
  const Result mismatch =
      run(dir, "decode --policy one_hot_oracle --checkpoint '" + (policy_dir / "model.ckpt").string() + "' " + c);
  CHECK(mismatch.code == 12);
  CHECK(mismatch.output.find("error[configuration]") != std::string::npos);

  // A hypothesis file with a missing utterance is an evaluation error.
  {
    std::ifstream in(policy_dir / "hyps-test-offline.tsv");
    std::ofstream out(dir / "short.tsv");
    std::string line;
    std::getline(in, line);
    out << line << '\n';
  }
  CHECK(run(dir, "evaluate --hyps '" + (dir / "short.tsv").string() + "' " + c).code == 15);

  // A corpus generated from another spec is refused.
  {
    std::string text = slurp(cfg);
    text.replace(text.find("\"feature_dim\": 12}"), 18, "\"feature_dim\": 12, \"seed\": 9}");
    std::ofstream(dir / "other.json") << text;
  }
  const Result stale = run(dir, "train-rnnt --config '" + (dir / "other.json").string() + "'");
  CHECK(stale.code == 12);
  CHECK(stale.output.find("generate-corpus") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("streaming a non-streamable policy fails before reading anything") {
  const fs::path dir = fresh_dir("intent_rnnt_cli_stream");
  const fs::path cfg = write_tiny_config(dir);
  // No corpus or checkpoint exists, so an I/O error would mean data was touched.
  const std::string c = "--config '" + cfg.string() + "'";
  for (const std::string policy : {"repeated_final_embedding --fraction 1", "hybrid_switch --fraction 0.7"}) {
    const Result r = run(dir, "decode --mode streaming --policy " + policy + " " + c);
    CHECK(r.code == 12);
    CHECK(r.output.find("not streamable") != std::string::npos);
  }
  CHECK(run(dir, "decode --mode offline --policy repeated_final_embedding " + c).code == 17);
  fs::remove_all(dir);
}

TEST_CASE("errors map to categories and exit codes") {
  const fs::path dir = fresh_dir("intent_rnnt_cli_errors");
  {
    std::ofstream(dir / "unknown.json") << R"({"seed": 1, "learning_rate": 0.1})";
    std::ofstream(dir / "broken.json") << R"({"seed": )";
    std::ofstream(dir / "badkind.json") << R"({"conditioning": {"kind": "telepathy"}})";
  }
  const Result unknown = run(dir, "generate-corpus --config '" + (dir / "unknown.json").string() + "'");
  CHECK(unknown.code == 12);
  CHECK(unknown.output.find("learning_rate") != std::string::npos);
  CHECK(run(dir, "generate-corpus --config '" + (dir / "broken.json").string() + "'").code == 13);
  CHECK(run(dir, "train-rnnt --config '" + (dir / "badkind.json").string() + "'").code == 12);
  CHECK(run(dir, "generate-corpus --config '" + (dir / "missing.json").string() + "'").code == 17);
  CHECK(run(dir, "train-a2i --out '" + (dir / "empty").string() + "'").code == 17);
  CHECK(run(dir, "decode --mode sideways").code == 11);
  CHECK(run(dir, "no-such-command").code == 11);
  CHECK(run(dir, "--version").code == 0);
  fs::remove_all(dir);
}
