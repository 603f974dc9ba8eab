// intent-rnnt: corpus generation, A2I and transducer training, decoding,
// evaluation and analysis from one config file.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "intent_rnnt/commands.hpp"
#include "intent_rnnt/errors.hpp"

using namespace intent_rnnt;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> policy;
  std::optional<double> fraction;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "run config (JSON); defaults apply when omitted");
  cmd->add_option("--seed", opts.seed, "override the run seed");
  cmd->add_option("--out", opts.out, "override the output directory");
}

void add_policy(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--policy", opts.policy, "override conditioning.kind");
  cmd->add_option("--fraction", opts.fraction, "override conditioning.switch_fraction");
}

RunConfig resolve(const CommonOptions& opts) {
  RunConfig config = opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.out) config.out_dir = *opts.out;
  if (opts.policy) config.conditioning.kind = parse_conditioning_kind(*opts.policy);
  if (opts.fraction) config.conditioning.switch_fraction = *opts.fraction;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intent-conditioned RNN-T toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonOptions opts;
  std::string mode = "offline";
  std::string split;
  std::string checkpoint, output, hyps, baseline, objective = "every_frame";

  auto* gen = app.add_subcommand("generate-corpus", "write the synthetic corpus");
  add_common(gen, opts);

  auto* a2i = app.add_subcommand("train-a2i", "train last-frame and every-frame A2I models");
  add_common(a2i, opts);

  auto* rnnt = app.add_subcommand("train-rnnt", "train a transducer with the configured conditioning");
  add_common(rnnt, opts);
  add_policy(rnnt, opts);

  auto* dec = app.add_subcommand("decode", "decode a split with a trained transducer");
  add_common(dec, opts);
  add_policy(dec, opts);
  dec->add_option("--mode", mode, "offline or streaming")->check(CLI::IsMember({"offline", "streaming"}));
  dec->add_option("--split", split, "a2i, train, dev or test (default test)");
  dec->add_option("--checkpoint", checkpoint, "transducer checkpoint (default: the policy directory)");
  dec->add_option("--output", output, "hypothesis file");

  auto* ev = app.add_subcommand("evaluate", "score hypotheses against a split");
  add_common(ev, opts);
  add_policy(ev, opts);
  ev->add_option("--split", split, "split holding the references (default test)");
  ev->add_option("--hyps", hyps, "hypothesis file (default: offline hypotheses of the policy)");
  ev->add_option("--baseline", baseline, "baseline report.json for relative WERR");
  ev->add_option("--output", output, "report path prefix");

  auto* ana = app.add_subcommand("analyze-posteriors", "posterior trajectories and convergence ratios");
  add_common(ana, opts);
  ana->add_option("--objective", objective, "A2I model to analyze")->check(CLI::IsMember({"last_frame", "every_frame"}));
  ana->add_option("--split", split, "split to analyze (default dev)");

  auto* sweep = app.add_subcommand("sweep-hybrid", "WERR against the e_t/e_T switch fraction");
  add_common(sweep, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCategory::kArgument);
  }

  try {
    const RunConfig config = resolve(opts);
    if (gen->parsed()) {
      generate_corpus_command(config, std::cout);
    } else if (a2i->parsed()) {
      train_a2i_command(config, std::cout);
    } else if (rnnt->parsed()) {
      train_rnnt_command(config, std::cout);
    } else if (dec->parsed()) {
      DecodeRequest request;
      request.mode = parse_decode_mode(mode);
      if (!split.empty()) request.split = split;
      if (!checkpoint.empty()) request.checkpoint = checkpoint;
      if (!output.empty()) request.output = output;
      decode_command(config, request, std::cout);
    } else if (ev->parsed()) {
      EvaluateRequest request;
      if (!split.empty()) request.split = split;
      if (!hyps.empty()) request.hypotheses = hyps;
      if (!baseline.empty()) request.baseline = baseline;
      if (!output.empty()) request.output_prefix = output;
      evaluate_command(config, request, std::cout);
    } else if (ana->parsed()) {
      analyze_posteriors_command(config, parse_a2i_objective(objective), split.empty() ? "dev" : split, std::cout);
    } else if (sweep->parsed()) {
      sweep_hybrid_command(config, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
