#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "dexseg/ablations.hpp"
#include "dexseg/featurizer.hpp"
#include "dexseg/metrics.hpp"
#include "dexseg/segmenter.hpp"
#include "dexseg/synth.hpp"
#include "dexseg/trace.hpp"

namespace py = pybind11;

namespace {

dexseg::FeatureKind kind_of(const std::string& name) {
  return dexseg::feature_kind_from_name(name);
}

std::vector<std::string> skill_names() {
  std::vector<std::string> names;
  for (dexseg::SkillId id = 1; id <= dexseg::kNumSkills; ++id)
    names.emplace_back(dexseg::skill_name(id));
  return names;
}

py::dict generate_corpus_py(const std::string& out_dir, std::uint64_t seed, int demos_per_skill,
                            bool clean) {
  dexseg::SynthConfig cfg;
  cfg.demos_per_skill = demos_per_skill;
  cfg.noise = !clean;
  dexseg::Corpus corpus = dexseg::generate_corpus(cfg, seed);
  dexseg::save_traces(corpus.train, out_dir + "/train");
  dexseg::save_traces(corpus.tasks, out_dir + "/tasks");

  py::dict counts;
  counts["train_traces"] = corpus.train.traces.size();
  counts["train_frames"] = corpus.train.total_frames();
  counts["task_traces"] = corpus.tasks.traces.size();
  counts["task_frames"] = corpus.tasks.total_frames();
  return counts;
}

void generate_skill_file(int skill, std::uint64_t seed, const std::string& object_tag,
                         const std::string& out_path, bool clean) {
  dexseg::SynthConfig cfg;
  cfg.noise = !clean;
  dexseg::Trace trace = dexseg::generate_skill(skill, seed, cfg, object_tag);
  dexseg::save_single_trace(trace, out_path);
}

std::vector<int> load_trace_labels(const std::string& path) {
  dexseg::Trace trace = dexseg::load_single_trace(path);
  return trace.labels();
}

void train_segmenter_file(const std::string& data_dir, const std::string& ckpt_out,
                          const std::string& regime, int epochs, int latent, int median_width,
                          std::uint64_t seed, int threads) {
  dexseg::Dataset ds = dexseg::load_traces(data_dir);
  dexseg::FeatureConfig fcfg;
  dexseg::SegmenterConfig scfg;
  scfg.latent_dim = latent;
  scfg.median_width = median_width;
  dexseg::TrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.seed = seed;
  dexseg::SegmenterModel model =
      dexseg::train_regime(regime, ds, fcfg, scfg, tcfg, nullptr, threads);
  dexseg::save_segmenter(model, ckpt_out);
}

std::string segment_file(const std::string& ckpt, const std::string& trace_path,
                         int median_width) {
  dexseg::SegmenterModel model = dexseg::load_segmenter(ckpt);
  dexseg::Trace trace = dexseg::load_single_trace(trace_path);
  int width = median_width > 0 ? median_width : model.config.median_width;
  return dexseg::segmentation_to_json(dexseg::segment_trace(model, trace, width));
}

std::string evaluate_file(const std::string& ckpt, const std::string& data_dir, int median_width,
                          int threads) {
  dexseg::SegmenterModel model = dexseg::load_segmenter(ckpt);
  dexseg::Dataset ds = dexseg::load_traces(data_dir);
  int width = median_width > 0 ? median_width : model.config.median_width;
  dexseg::EvalReport report = dexseg::evaluate_model(model, ds, width, threads);
  return dexseg::report_to_json(report);
}

std::vector<std::tuple<std::size_t, std::size_t, int>> labels_to_segments_py(
    const std::vector<int>& labels) {
  std::vector<std::tuple<std::size_t, std::size_t, int>> out;
  for (const dexseg::Segment& s : dexseg::labels_to_segments(labels))
    out.emplace_back(s.start, s.end, s.skill);
  return out;
}

std::vector<int> segments_to_labels_py(
    const std::vector<std::tuple<std::size_t, std::size_t, int>>& segments) {
  std::vector<dexseg::Segment> segs;
  for (const auto& [start, end, skill] : segments) segs.push_back({start, end, skill});
  return dexseg::segments_to_labels(segs);
}

}  // namespace

PYBIND11_MODULE(_dexseg, m) {
  m.doc() = "haptic skill segmentation toolkit";
  m.attr("__version__") = "0.1.0";
  m.attr("NUM_SKILLS") = dexseg::kNumSkills;

  py::register_exception<dexseg::Error>(m, "DexsegError");

  m.def("skill_names", &skill_names, "ordered names of the 20 skill classes");
  m.def("feature_dim", [](const std::string& kind) { return dexseg::feature_dim(kind_of(kind)); },
        py::arg("kind"), "feature vector width for 'engineered' | 'raw' | 'calculated'");
  m.def("feature_layout_hash",
        [](const std::string& kind) { return dexseg::feature_layout_hash(kind_of(kind)); },
        py::arg("kind"));
  m.def("feature_layout",
        [](const std::string& kind) {
          std::vector<std::tuple<std::string, int, int>> out;
          for (const dexseg::FeatureComponent& c : dexseg::feature_layout(kind_of(kind)))
            out.emplace_back(c.name, c.offset, c.arity);
          return out;
        },
        py::arg("kind"), "list of (name, offset, arity) component triples");

  m.def("generate_corpus", &generate_corpus_py, py::arg("out_dir"), py::arg("seed") = 7,
        py::arg("demos_per_skill") = 10, py::arg("clean") = false,
        "write the synthetic corpus under out_dir/train and out_dir/tasks");
  m.def("generate_skill", &generate_skill_file, py::arg("skill"), py::arg("seed"),
        py::arg("object"), py::arg("out_path"), py::arg("clean") = false,
        "write one scripted primitive-skill demo");
  m.def("load_trace_labels", &load_trace_labels, py::arg("path"),
        "frame labels of a stored trace");

  m.def("train_segmenter", &train_segmenter_file, py::arg("data_dir"), py::arg("ckpt_out"),
        py::arg("regime") = "dexskills", py::arg("epochs") = 25, py::arg("latent") = 64,
        py::arg("median_width") = 15, py::arg("seed") = 0, py::arg("threads") = 1);
  m.def("segment", &segment_file, py::arg("ckpt"), py::arg("trace_path"),
        py::arg("median_width") = 0, "segmentation JSON for one trace");
  m.def("evaluate", &evaluate_file, py::arg("ckpt"), py::arg("data_dir"),
        py::arg("median_width") = 0, py::arg("threads") = 1,
        "evaluation report JSON over a labeled dataset");

  m.def("median_smooth", &dexseg::median_smooth, py::arg("labels"), py::arg("width"));
  m.def("labels_to_segments", &labels_to_segments_py, py::arg("labels"),
        "maximal runs as (start, end, skill) with end exclusive");
  m.def("segments_to_labels", &segments_to_labels_py, py::arg("segments"));

  m.def("regime_tags", [] {
    return std::vector<std::string>(dexseg::kRegimeTags.begin(), dexseg::kRegimeTags.end());
  });
}
