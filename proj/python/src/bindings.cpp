#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "protoed/corpus.hpp"
#include "protoed/distance.hpp"
#include "protoed/error.hpp"
#include "protoed/evaluation.hpp"
#include "protoed/experiment.hpp"
#include "protoed/method.hpp"
#include "protoed/pipeline.hpp"
#include "protoed/sampler.hpp"
#include "protoed/synthetic.hpp"

namespace py = pybind11;
using namespace protoed;

namespace {

py::dict prf_dict(const Prf& r) {
  py::dict d;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["true_positives"] = r.true_positives;
  d["n_predicted"] = r.n_predicted;
  d["n_gold"] = r.n_gold;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prototype-based few-shot event detection";

  static py::exception<Error> base(m, "ProtoedError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      base((std::string(e.kind()) + ": " + e.what()).c_str());
    }
  });

  py::class_<Mention>(m, "Mention")
      .def(py::init([](int start, int end, std::string label) { return Mention{start, end, std::move(label)}; }),
           py::arg("start"), py::arg("end"), py::arg("label"))
      .def_readwrite("start", &Mention::start)
      .def_readwrite("end", &Mention::end)
      .def_readwrite("label", &Mention::label)
      .def("__eq__", [](const Mention& a, const Mention& b) { return a == b; })
      .def("__repr__", [](const Mention& x) {
        return "Mention(" + std::to_string(x.start) + ", " + std::to_string(x.end) + ", '" + x.label + "')";
      });

  py::class_<Sentence>(m, "Sentence")
      .def(py::init([](std::string id, std::vector<std::string> tokens, std::vector<Mention> mentions) {
             return Sentence{std::move(id), std::move(tokens), std::move(mentions)};
           }),
           py::arg("id"), py::arg("tokens"), py::arg("mentions") = std::vector<Mention>{})
      .def_readwrite("id", &Sentence::id)
      .def_readwrite("tokens", &Sentence::tokens)
      .def_readwrite("mentions", &Sentence::mentions);

  py::class_<Schema>(m, "Schema")
      .def(py::init<std::vector<std::string>, std::map<std::string, std::string>>(), py::arg("types"),
           py::arg("label_texts") = std::map<std::string, std::string>{})
      .def_property_readonly("types", &Schema::types)
      .def("label_text", [](const Schema& s, const std::string& t) { return s.label_text(t); })
      .def("__len__", &Schema::size);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Schema schema, std::vector<Sentence> sentences) {
             Dataset d{std::move(schema), std::move(sentences)};
             validate(d);
             return d;
           }),
           py::arg("schema"), py::arg("sentences"))
      .def_readonly("schema", &Dataset::schema)
      .def_readonly("sentences", &Dataset::sentences)
      .def("__len__", [](const Dataset& d) { return d.sentences.size(); });

  m.def("read_corpus",
        [](const std::string& path, std::optional<std::string> schema_path) {
          std::optional<Schema> s;
          if (schema_path) s = read_schema(*schema_path);
          return parse_corpus(path, s);
        },
        py::arg("path"), py::arg("schema_path") = py::none());
  m.def("write_corpus", py::overload_cast<const std::string&, const Dataset&>(&write_corpus), py::arg("path"),
        py::arg("dataset"));

  m.def("gen_synthetic",
        [](std::size_t n_types, std::size_t n_sentences, std::size_t vocab_size, std::size_t triggers_per_type,
           double distractor_rate, std::uint64_t seed, std::uint64_t lexicon_seed, std::string id_prefix) {
          SyntheticSpec s;
          s.n_types = n_types;
          s.n_sentences = n_sentences;
          s.vocab_size = vocab_size;
          s.triggers_per_type = triggers_per_type;
          s.distractor_rate = distractor_rate;
          s.seed = seed;
          s.lexicon_seed = lexicon_seed;
          s.id_prefix = std::move(id_prefix);
          return gen_synthetic(s);
        },
        py::arg("n_types") = 10, py::arg("n_sentences") = 1000, py::arg("vocab_size") = 150,
        py::arg("triggers_per_type") = 2, py::arg("distractor_rate") = 0.3, py::arg("seed") = 0,
        py::arg("lexicon_seed") = 0, py::arg("id_prefix") = "syn");

  m.def("greedy_sample", &greedy_sample, py::arg("dataset"), py::arg("k"), py::arg("seed"));
  m.def(
      "sample_train_dev",
      [](const Dataset& d, int k_train, int k_dev, std::uint64_t seed) {
        return sample_train_dev(d, SampleSpec{k_train, k_dev, seed});
      },
      py::arg("dataset"), py::arg("k_train"), py::arg("k_dev"), py::arg("seed"));

  m.def(
      "distance",
      [](const std::vector<double>& u, const std::vector<double>& v, const std::string& kind, double tau) {
        return distance(u, v, DistanceSpec{distance_from_code(kind), tau});
      },
      py::arg("u"), py::arg("v"), py::arg("kind"), py::arg("tau") = 1.0);

  m.def(
      "micro_f1",
      [](const std::vector<Sentence>& pred, const std::vector<Sentence>& gold) { return prf_dict(micro_f1(pred, gold)); },
      py::arg("predictions"), py::arg("gold"));
  m.def(
      "aggregate_runs",
      [](const std::vector<double>& v) {
        const Aggregate a = aggregate_runs(v);
        return py::make_tuple(a.mean, a.std ? py::cast(*a.std) : py::none());
      },
      py::arg("values"));

  m.def("preset_names", &preset_names);
  m.def("method_preset", [](const std::string& name) { return to_kv(method_preset(name)); }, py::arg("name"));
  m.def(
      "config_hash", [](const KeyValues& kv) { return config_hash(train_config_from_kv(kv)); }, py::arg("config"));

  m.def(
      "run_low_resource",
      [](const Dataset& train, const Dataset& dev, const Dataset& test, const KeyValues& config, std::uint64_t seed) {
        TrainConfig c = train_config_from_kv(config);
        c.seed = seed;
        std::optional<RunResult> r;
        {
          py::gil_scoped_release release;
          r.emplace(run_low_resource(c, train, dev, test));
        }
        py::dict d = prf_dict(r->test);
        d["lr"] = r->score.lr;
        d["seed"] = seed;
        d["predictions"] = r->predictions;
        return d;
      },
      py::arg("train"), py::arg("dev"), py::arg("test"), py::arg("config"), py::arg("seed") = 0);
}
