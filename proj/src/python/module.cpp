// Python bindings: feature extraction, the transducer loss, scoring, BPE and
// the pipeline commands driven by a JSON run config.

#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "intent_rnnt/commands.hpp"
#include "intent_rnnt/errors.hpp"

namespace py = pybind11;
using namespace intent_rnnt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  Tensor t(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

py::object loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

RunConfig config_from(const std::string& json_text) { return json_text.empty() ? RunConfig{} : parse_run_config(json_text); }

std::vector<RefRecord> as_refs(const std::vector<std::string>& texts) {
  std::vector<RefRecord> refs;
  for (std::size_t i = 0; i < texts.size(); ++i) refs.push_back({std::to_string(i), texts[i], "all"});
  return refs;
}

std::vector<HypRecord> as_hyps(const std::vector<std::string>& texts) {
  std::vector<HypRecord> hyps;
  for (std::size_t i = 0; i < texts.size(); ++i) hyps.push_back({std::to_string(i), texts[i], 0.0, {}});
  return hyps;
}

}  // namespace

PYBIND11_MODULE(intent_rnnt, m) {
  m.doc() = "Intent-conditioned RNN-T toolkit";
  m.attr("__version__") = std::string(kToolVersion);

  // Base class first: translators run newest first, so subclasses must be
  // registered after it.
  static py::exception<Error> base(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
  py::register_exception<SpecError>(m, "SpecError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def(
      "compute_lfbe",
      [](const Array& samples, int sample_rate, std::size_t num_filters) {
        if (samples.ndim() != 1) throw DimensionError("samples must be 1-D");
        LfbeOptions options;
        options.num_filters = num_filters;
        return to_array(compute_lfbe({samples.data(), static_cast<std::size_t>(samples.size())}, sample_rate, options).frames);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("num_filters") = 64,
      "Log mel filterbank energies, one row per 10 ms frame.");

  m.def(
      "stack_downsample",
      [](const Array& frames, std::size_t left_context, std::size_t factor) {
        FrameSequence fs;
        fs.frames = to_tensor(frames);
        return to_array(stack_downsample(fs, left_context, factor).frames);
      },
      py::arg("frames"), py::arg("left_context") = 2, py::arg("factor") = 3);

  m.def(
      "rnnt_loss",
      [](const Array& log_probs, const std::vector<std::size_t>& target) {
        if (log_probs.ndim() != 3) throw DimensionError("log_probs must be T x (U+1) x V");
        JointLattice lat(log_probs.shape(0), log_probs.shape(1), log_probs.shape(2));
        std::copy(log_probs.data(), log_probs.data() + log_probs.size(), lat.values().begin());
        const RnntLossResult r = rnnt_loss(lat, target);
        Array grad({lat.frames(), lat.label_positions(), lat.vocab()});
        std::copy(r.grad.values().begin(), r.grad.values().end(), grad.mutable_data());
        return py::make_tuple(r.loss, grad);
      },
      py::arg("log_probs"), py::arg("target"),
      "Negative log-likelihood over a lattice of per-node log-probabilities (blank id 0) and its gradient.");

  m.def(
      "edit_distance",
      [](const std::string& ref, const std::string& hyp) {
        const EditCounts e = edit_distance(scoring_words(ref), scoring_words(hyp));
        py::dict d;
        d["substitutions"] = e.substitutions;
        d["insertions"] = e.insertions;
        d["deletions"] = e.deletions;
        return d;
      },
      py::arg("ref"), py::arg("hyp"));

  m.def(
      "wer", [](const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
        if (refs.size() != hyps.size()) throw EvaluationError("reference and hypothesis counts differ");
        return wer(as_refs(refs), as_hyps(hyps));
      },
      py::arg("refs"), py::arg("hyps"), "Pooled word error rate over parallel lists of sentences.");

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def("__len__", &Vocabulary::size)
      .def("encode", &Vocabulary::encode, py::arg("text"))
      .def("decode", [](const Vocabulary& v, const std::vector<std::size_t>& ids) { return v.decode(ids); })
      .def("to_text", &Vocabulary::to_text)
      .def_static("from_text", &Vocabulary::from_text);
  m.def(
      "bpe_train", [](const std::vector<std::string>& corpus, std::size_t size) { return bpe_train(corpus, size); },
      py::arg("corpus"), py::arg("target_size"));

  m.def(
      "default_config", [] { return loads(dump_run_config(RunConfig{})); },
      "The resolved default run config as a dict.");

  // Commands take the run config as JSON text ("" for defaults) and return
  // what the CLI would print.
  auto command = [&m](const char* name, auto fn) {
    m.def(
        name,
        [fn](const std::string& config_json) {
          std::ostringstream out;
          fn(config_from(config_json), out);
          return out.str();
        },
        py::arg("config_json") = "");
  };
  command("generate_corpus", [](const RunConfig& c, std::ostream& o) { generate_corpus_command(c, o); });
  command("train_a2i", [](const RunConfig& c, std::ostream& o) { train_a2i_command(c, o); });
  command("train_rnnt", [](const RunConfig& c, std::ostream& o) { train_rnnt_command(c, o); });

  m.def(
      "decode",
      [](const std::string& config_json, const std::string& mode, const std::string& split) {
        DecodeRequest request;
        request.mode = parse_decode_mode(mode);
        request.split = split;
        std::ostringstream out;
        return decode_command(config_from(config_json), request, out).string();
      },
      py::arg("config_json") = "", py::arg("mode") = "offline", py::arg("split") = "test",
      "Decodes a split and returns the hypothesis file path.");

  m.def(
      "evaluate",
      [](const std::string& config_json, const std::string& split, const std::string& hypotheses) {
        EvaluateRequest request;
        request.split = split;
        if (!hypotheses.empty()) request.hypotheses = hypotheses;
        std::ostringstream out;
        return loads(evaluate_command(config_from(config_json), request, out).to_json());
      },
      py::arg("config_json") = "", py::arg("split") = "test", py::arg("hypotheses") = "",
      "Scores a hypothesis file (the offline one by default); returns the report as a dict.");
}
