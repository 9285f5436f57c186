#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "dexseg/ablations.hpp"
#include "dexseg/featurizer.hpp"
#include "dexseg/metrics.hpp"
#include "dexseg/policy.hpp"
#include "dexseg/segmenter.hpp"
#include "dexseg/synth.hpp"
#include "dexseg/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dexseg::io_error("cannot read '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dexseg::io_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw dexseg::io_error("write failed for '" + path + "'");
}

// Every run leaves its fully resolved flag set next to its outputs.
void write_resolved_config(const fs::path& dir, const std::string& subcommand,
                           const ordered_json& resolved) {
  fs::create_directories(dir);
  ordered_json j;
  j["subcommand"] = subcommand;
  j["resolved"] = resolved;
  write_text((dir / "resolved-config.json").string(), j.dump(2) + "\n");
}

fs::path parent_of(const std::string& file) {
  fs::path p = fs::path(file).parent_path();
  return p.empty() ? fs::path(".") : p;
}

// `gen` lays out DIR/train and DIR/tasks; the other subcommands accept either
// that DIR or a direct trace path.
std::string resolve_data(const std::string& data, const char* preferred) {
  fs::path sub = fs::path(data) / preferred;
  if (fs::is_directory(sub)) return sub.string();
  return data;
}

std::map<dexseg::SkillId, dexseg::SkillPolicy> load_policy_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw dexseg::io_error("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw dexseg::io_error("no .ckpt policies in '" + dir + "'");

  std::map<dexseg::SkillId, dexseg::SkillPolicy> policies;
  for (const std::string& f : files) {
    dexseg::SkillPolicy p = dexseg::load_policy(f);
    dexseg::SkillId skill = p.skill;
    if (policies.count(skill))
      throw dexseg::validate_error("duplicate policy for skill id " + std::to_string(skill) +
                                   " in '" + dir + "'");
    policies.emplace(skill, std::move(p));
  }
  return policies;
}

std::vector<dexseg::PlanStep> plan_from_file(
    const std::string& path, const std::map<dexseg::SkillId, dexseg::SkillPolicy>& policies) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw dexseg::parse_error("plan '" + path + "': " + e.what());
  }
  if (!j.is_array()) throw dexseg::parse_error("plan '" + path + "' must be a JSON array");

  std::vector<dexseg::PlanStep> plan;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("skill"))
      throw dexseg::parse_error("plan entries need a 'skill' field");
    dexseg::PlanStep step;
    step.skill = e.at("skill").get<int>();
    dexseg::check_skill(step.skill, "plan");
    step.steps = e.value("steps", 0);
    if (step.steps <= 0) {
      auto it = policies.find(step.skill);
      if (it == policies.end())
        throw dexseg::validate_error("plan: no policy for skill id " +
                                     std::to_string(step.skill));
      step.steps = it->second.median_steps;
    }
    if (step.steps <= 0)
      throw dexseg::validate_error("plan: no step count for skill id " +
                                   std::to_string(step.skill));
    plan.push_back(step);
  }
  return plan;
}

std::vector<dexseg::PlanStep> plan_from_segments(
    const std::string& path, const std::map<dexseg::SkillId, dexseg::SkillPolicy>&) {
  dexseg::SegmentationResult r = dexseg::segmentation_from_json(slurp(path));
  std::vector<dexseg::PlanStep> plan;
  for (const dexseg::Segment& s : r.segments)
    plan.push_back({s.skill, static_cast<int>(s.end - s.start)});
  return plan;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"haptic skill segmentation and execution toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 1;
  if (const char* env = std::getenv("DEXSEG_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) threads = v;
  }
  app.add_option("--threads", threads, "worker cap (env DEXSEG_THREADS)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // gen
  auto* gen = app.add_subcommand("gen", "generate the synthetic corpus");
  struct {
    std::string out;
    std::uint64_t seed = 7;
    int demos = 10;
    bool clean = false;
  } gen_opt;
  gen->add_option("--out", gen_opt.out, "output directory")->required();
  gen->add_option("--seed", gen_opt.seed, "corpus seed")->capture_default_str();
  gen->add_option("--demos-per-skill", gen_opt.demos, "demos per primitive skill")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_flag("--clean", gen_opt.clean, "disable noise and start jitter");
  gen->callback([&] {
    dexseg::SynthConfig cfg;
    cfg.demos_per_skill = gen_opt.demos;
    cfg.noise = !gen_opt.clean;
    dexseg::Corpus corpus = dexseg::generate_corpus(cfg, gen_opt.seed);

    fs::path out(gen_opt.out);
    fs::create_directories(out);
    dexseg::save_traces(corpus.train, (out / "train").string());
    dexseg::save_traces(corpus.tasks, (out / "tasks").string());
    ordered_json manifest = dexseg::corpus_manifest(corpus, gen_opt.seed, "train", "tasks");
    write_text((out / "corpus-manifest.json").string(), manifest.dump(2) + "\n");
    dexseg::write_feature_layout_json(dexseg::FeatureKind::Engineered,
                                      (out / "feature-layout.json").string());
    write_resolved_config(out, "gen",
                          {{"out", gen_opt.out},
                           {"seed", gen_opt.seed},
                           {"demos_per_skill", gen_opt.demos},
                           {"clean", gen_opt.clean},
                           {"threads", threads}});
    std::cout << "wrote " << corpus.train.traces.size() << " skill demos and "
              << corpus.tasks.traces.size() << " task traces to " << gen_opt.out << "\n";
  });

  // train
  auto* train = app.add_subcommand("train", "train a segmenter regime");
  struct {
    std::string data;
    std::string out;
    std::string regime = "dexskills";
    int epochs = 25;
    int latent = 64;
    int median_width = 15;
    std::uint64_t seed = 0;
  } train_opt;
  train->add_option("--data", train_opt.data, "corpus directory")->required();
  train->add_option("--out", train_opt.out, "checkpoint path")->required();
  train->add_option("--regime", train_opt.regime, "training regime")->capture_default_str();
  train->add_option("--epochs", train_opt.epochs, "epochs per phase")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--latent", train_opt.latent, "latent dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--median-width", train_opt.median_width, "stored smoothing width")
      ->capture_default_str();
  train->add_option("--seed", train_opt.seed, "training seed")->capture_default_str();
  train->callback([&] {
    dexseg::Dataset ds = dexseg::load_traces(resolve_data(train_opt.data, "train"));
    dexseg::FeatureConfig fcfg;
    dexseg::SegmenterConfig scfg;
    scfg.latent_dim = train_opt.latent;
    scfg.median_width = train_opt.median_width;
    dexseg::TrainConfig tcfg;
    tcfg.epochs = train_opt.epochs;
    tcfg.seed = train_opt.seed;

    dexseg::TrainLog log;
    dexseg::SegmenterModel model =
        dexseg::train_regime(train_opt.regime, ds, fcfg, scfg, tcfg, &log, threads);
    dexseg::save_segmenter(model, train_opt.out);

    write_resolved_config(parent_of(train_opt.out), "train",
                          {{"data", train_opt.data},
                           {"out", train_opt.out},
                           {"regime", train_opt.regime},
                           {"epochs", train_opt.epochs},
                           {"latent", train_opt.latent},
                           {"median_width", train_opt.median_width},
                           {"seed", train_opt.seed},
                           {"threads", threads}});
    if (!log.epochs.empty()) {
      const dexseg::EpochStats& last = log.epochs.back();
      std::cout << "trained " << train_opt.regime << " on " << ds.traces.size() << " traces ("
                << log.epochs.size() << " epochs, final recon " << last.recon << " label "
                << last.label << ")\n";
    }
    for (dexseg::SkillId missing : log.missing_classes)
      std::cout << "warning: no training frames for skill " << missing << " ("
                << dexseg::skill_name(missing) << ")\n";
  });

  // segment
  auto* segment = app.add_subcommand("segment", "segment one trace");
  struct {
    std::string ckpt;
    std::string trace;
    std::string out;
    int median_width = -1;
  } seg_opt;
  segment->add_option("--ckpt", seg_opt.ckpt, "segmenter checkpoint")->required();
  segment->add_option("--trace", seg_opt.trace, "trace JSONL file")->required();
  segment->add_option("--out", seg_opt.out, "segmentation JSON path")->required();
  segment->add_option("--median-width", seg_opt.median_width,
                      "smoothing width (default: checkpoint value)");
  segment->callback([&] {
    dexseg::SegmenterModel model = dexseg::load_segmenter(seg_opt.ckpt);
    dexseg::Trace trace = dexseg::load_single_trace(seg_opt.trace);
    int width = seg_opt.median_width > 0 ? seg_opt.median_width : model.config.median_width;
    dexseg::SegmentationResult r = dexseg::segment_trace(model, trace, width);
    write_text(seg_opt.out, dexseg::segmentation_to_json(r) + "\n");
    write_resolved_config(parent_of(seg_opt.out), "segment",
                          {{"ckpt", seg_opt.ckpt},
                           {"trace", seg_opt.trace},
                           {"out", seg_opt.out},
                           {"median_width", width},
                           {"threads", threads}});
    std::cout << "segments:";
    for (const dexseg::Segment& s : r.segments) std::cout << " " << s.skill;
    std::cout << "\n";
  });

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on labeled traces");
  struct {
    std::string ckpt;
    std::string data;
    std::string out;
    int median_width = -1;
  } eval_opt;
  eval->add_option("--ckpt", eval_opt.ckpt, "segmenter checkpoint")->required();
  eval->add_option("--data", eval_opt.data, "corpus directory or trace path")->required();
  eval->add_option("--out", eval_opt.out, "report JSON path")->required();
  eval->add_option("--median-width", eval_opt.median_width,
                   "smoothing width (default: checkpoint value)");
  eval->callback([&] {
    dexseg::SegmenterModel model = dexseg::load_segmenter(eval_opt.ckpt);
    dexseg::Dataset ds = dexseg::load_traces(resolve_data(eval_opt.data, "tasks"));
    int width = eval_opt.median_width > 0 ? eval_opt.median_width : model.config.median_width;
    dexseg::EvalReport report = dexseg::evaluate_model(model, ds, width, threads);

    dexseg::write_report_json(report, eval_opt.out);
    fs::path csv = parent_of(eval_opt.out) / "confusion.csv";
    dexseg::write_confusion_csv(report.confusion, csv.string());
    write_resolved_config(parent_of(eval_opt.out), "eval",
                          {{"ckpt", eval_opt.ckpt},
                           {"data", eval_opt.data},
                           {"out", eval_opt.out},
                           {"median_width", width},
                           {"threads", threads}});
    std::cout << "accuracy " << report.accuracy << " macro_f1 " << report.macro_f1
              << " avg_iou " << report.average_iou << " over " << report.total << " frames\n";
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the six-regime comparison");
  struct {
    std::string data;
    std::string out;
    int epochs = 25;
    int latent = 64;
    int median_width = 15;
    std::uint64_t seed = 0;
  } abl_opt;
  ablate->add_option("--data", abl_opt.data, "corpus directory")->required();
  ablate->add_option("--out", abl_opt.out, "output directory")->required();
  ablate->add_option("--epochs", abl_opt.epochs, "epochs per phase")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ablate->add_option("--latent", abl_opt.latent, "latent dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ablate->add_option("--median-width", abl_opt.median_width, "smoothing width")
      ->capture_default_str();
  ablate->add_option("--seed", abl_opt.seed, "training seed")->capture_default_str();
  ablate->callback([&] {
    dexseg::Dataset train_ds = dexseg::load_traces(resolve_data(abl_opt.data, "train"));
    dexseg::Dataset eval_ds = dexseg::load_traces(resolve_data(abl_opt.data, "tasks"));
    dexseg::FeatureConfig fcfg;
    dexseg::SegmenterConfig scfg;
    scfg.latent_dim = abl_opt.latent;
    scfg.median_width = abl_opt.median_width;
    dexseg::TrainConfig tcfg;
    tcfg.epochs = abl_opt.epochs;
    tcfg.seed = abl_opt.seed;

    dexseg::AblationSuite suite = dexseg::run_ablation_suite(
        train_ds, eval_ds, fcfg, scfg, tcfg, abl_opt.median_width, threads,
        [](const std::string& line) { std::cout << line << "\n"; });

    fs::path out(abl_opt.out);
    fs::create_directories(out);
    write_text((out / "ablation-report.json").string(), dexseg::ablation_to_json(suite) + "\n");
    std::string table = dexseg::ablation_table(suite);
    write_text((out / "ablation-table.txt").string(), table);
    write_resolved_config(out, "ablate",
                          {{"data", abl_opt.data},
                           {"out", abl_opt.out},
                           {"epochs", abl_opt.epochs},
                           {"latent", abl_opt.latent},
                           {"median_width", abl_opt.median_width},
                           {"seed", abl_opt.seed},
                           {"threads", threads}});
    std::cout << table;
  });

  // policy-train
  auto* ptrain = app.add_subcommand("policy-train", "train one behavior-cloning skill policy");
  struct {
    std::string data;
    std::string out;
    int skill = 0;
    int epochs = 25;
    std::uint64_t seed = 0;
  } pol_opt;
  ptrain->add_option("--data", pol_opt.data, "corpus directory")->required();
  ptrain->add_option("--skill", pol_opt.skill, "skill id (1..20)")->required();
  ptrain->add_option("--out", pol_opt.out, "policy checkpoint path")->required();
  ptrain->add_option("--epochs", pol_opt.epochs, "training epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ptrain->add_option("--seed", pol_opt.seed, "training seed")->capture_default_str();
  ptrain->callback([&] {
    dexseg::Dataset ds = dexseg::load_traces(resolve_data(pol_opt.data, "train"));
    dexseg::FeatureConfig fcfg;
    dexseg::PolicyPairs pairs = dexseg::extract_pairs(ds, pol_opt.skill, fcfg);
    dexseg::TrainConfig tcfg;
    tcfg.epochs = pol_opt.epochs;
    tcfg.seed = pol_opt.seed;
    dexseg::SkillPolicy policy =
        dexseg::train_policy(pol_opt.skill, pairs, fcfg, dexseg::PolicyConfig{}, tcfg);
    policy.median_steps = dexseg::median_demo_steps(ds, pol_opt.skill);
    dexseg::save_policy(policy, pol_opt.out);
    write_resolved_config(parent_of(pol_opt.out), "policy-train",
                          {{"data", pol_opt.data},
                           {"skill", pol_opt.skill},
                           {"out", pol_opt.out},
                           {"epochs", pol_opt.epochs},
                           {"seed", pol_opt.seed},
                           {"threads", threads}});
    std::cout << "policy " << pol_opt.skill << " (" << dexseg::skill_name(pol_opt.skill)
              << "): " << pairs.count() << " pairs, train mse "
              << dexseg::policy_mse(policy, pairs) << ", median steps " << policy.median_steps
              << "\n";
  });

  // rollout
  auto* rollout = app.add_subcommand("rollout", "execute a skill sequence with trained policies");
  struct {
    std::string policies;
    std::string plan;
    std::string segments;
    std::string out;
    std::string object = "sponge";
    std::uint64_t seed = 7;
    bool clean = false;
  } roll_opt;
  rollout->add_option("--policies", roll_opt.policies, "directory of policy .ckpt files")
      ->required();
  auto* plan_opt = rollout->add_option("--plan", roll_opt.plan, "plan JSON file");
  auto* seg_src =
      rollout->add_option("--from-segments", roll_opt.segments, "segmentation JSON file");
  plan_opt->excludes(seg_src);
  rollout->add_option("--out", roll_opt.out, "output trace JSONL path")->required();
  rollout->add_option("--object", roll_opt.object, "world object tag")->capture_default_str();
  rollout->add_option("--seed", roll_opt.seed, "world seed")->capture_default_str();
  rollout->add_flag("--clean", roll_opt.clean, "disable measurement noise");
  rollout->callback([&] {
    if (roll_opt.plan.empty() == roll_opt.segments.empty())
      throw dexseg::Error("usage", "rollout needs exactly one of --plan or --from-segments");
    auto policies = load_policy_dir(roll_opt.policies);
    std::vector<dexseg::PlanStep> plan = roll_opt.plan.empty()
                                             ? plan_from_segments(roll_opt.segments, policies)
                                             : plan_from_file(roll_opt.plan, policies);
    dexseg::SynthConfig cfg;
    cfg.noise = !roll_opt.clean;
    dexseg::World world = dexseg::make_world(cfg, roll_opt.object, roll_opt.seed);
    dexseg::Trace trace = dexseg::execute_sequence(policies, plan, world);
    trace.meta.seed = roll_opt.seed;
    dexseg::save_single_trace(trace, roll_opt.out);
    write_resolved_config(parent_of(roll_opt.out), "rollout",
                          {{"policies", roll_opt.policies},
                           {"plan", roll_opt.plan},
                           {"from_segments", roll_opt.segments},
                           {"out", roll_opt.out},
                           {"object", roll_opt.object},
                           {"seed", roll_opt.seed},
                           {"clean", roll_opt.clean},
                           {"threads", threads}});
    std::cout << "executed " << plan.size() << " phases, " << trace.size() << " frames\n";
  });

  // export-latents
  auto* latents = app.add_subcommand("export-latents", "dump encoder latents to CSV");
  struct {
    std::string ckpt;
    std::string data;
    std::string out;
  } lat_opt;
  latents->add_option("--ckpt", lat_opt.ckpt, "segmenter checkpoint")->required();
  latents->add_option("--data", lat_opt.data, "corpus directory or trace path")->required();
  latents->add_option("--out", lat_opt.out, "CSV path")->required();
  latents->callback([&] {
    dexseg::SegmenterModel model = dexseg::load_segmenter(lat_opt.ckpt);
    dexseg::Dataset ds = dexseg::load_traces(resolve_data(lat_opt.data, "train"));
    dexseg::export_latents(model, ds, lat_opt.out);
    write_resolved_config(parent_of(lat_opt.out), "export-latents",
                          {{"ckpt", lat_opt.ckpt},
                           {"data", lat_opt.data},
                           {"out", lat_opt.out},
                           {"threads", threads}});
    std::cout << "wrote latents for " << ds.traces.size() << " traces to " << lat_opt.out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "ERR usage: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  } catch (const dexseg::Error& e) {
    std::cerr << "ERR " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERR internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
