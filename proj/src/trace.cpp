#include "dexseg/trace.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dexseg {

namespace {

const char* kSkillNames[kNumSkills] = {
    "Reach",           "Setup Position", "PreTouch",        "Touch",
    "Flip",            "Wipe Forth",     "Wipe Back",       "PreGrasp",
    "Grasp",           "Lift with Grasp","Transport Forward","Place",
    "PreRotate",       "Rotate",         "Shake Up",        "Shake Down",
    "Twist",           "Vertical Place", "Pour",            "Release",
};

constexpr double kNominalDt = 0.1;
constexpr double kDtTol = 0.01;       // +-10% of the nominal spacing
constexpr double kDtSlack = 1e-9;     // float-noise allowance on the bound

bool finite(double v) { return std::isfinite(v); }

}  // namespace

const char* skill_name(SkillId id) {
  check_skill(id);
  return kSkillNames[id - 1];
}

bool is_valid_skill(SkillId id) { return id >= 1 && id <= kNumSkills; }

void check_skill(SkillId id) {
  if (!is_valid_skill(id))
    throw domain_error("skill id " + std::to_string(id) + " outside 1.." +
                       std::to_string(kNumSkills));
}

void check_skill(SkillId id, const std::string& where) {
  if (!is_valid_skill(id))
    throw domain_error(where + ": skill id " + std::to_string(id) + " outside 1.." +
                       std::to_string(kNumSkills));
}

std::vector<double> one_hot(SkillId id) {
  check_skill(id);
  std::vector<double> v(kNumSkills, 0.0);
  v[id - 1] = 1.0;
  return v;
}

std::vector<SkillId> Trace::labels() const {
  std::vector<SkillId> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.label) throw validate_error("trace '" + meta.id + "' has unlabeled frames");
    out.push_back(*f.label);
  }
  return out;
}

void validate_trace(const Trace& trace) {
  const std::string where = trace.meta.id.empty() ? "trace" : "trace '" + trace.meta.id + "'";
  if (trace.frames.size() < 3)
    throw validate_error(where + ": needs at least 3 frames, has " +
                         std::to_string(trace.frames.size()));

  const bool labeled = trace.frames.front().label.has_value();
  double prev_t = 0.0;
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const HapticFrame& f = trace.frames[i];
    if (!finite(f.t)) throw validate_error(where + ": non-finite timestamp at frame " + std::to_string(i));
    for (double v : f.ee_pose)
      if (!finite(v)) throw validate_error(where + ": non-finite ee_pose at frame " + std::to_string(i));
    for (double v : f.ah_joints)
      if (!finite(v)) throw validate_error(where + ": non-finite ah_joints at frame " + std::to_string(i));
    for (const auto& p : f.fingertip_pos)
      for (double v : p)
        if (!finite(v)) throw validate_error(where + ": non-finite fingertip_pos at frame " + std::to_string(i));
    for (const auto& p : f.tactile)
      for (double v : p)
        if (!finite(v)) throw validate_error(where + ": non-finite tactile at frame " + std::to_string(i));

    if (f.label.has_value() != labeled)
      throw validate_error(where + ": mixed labeled/unlabeled frames (frame " + std::to_string(i) + ")");
    if (f.label) check_skill(*f.label);

    if (i > 0) {
      double dt = f.t - prev_t;
      if (dt <= 0.0)
        throw validate_error(where + ": non-monotonic time at frame " + std::to_string(i));
      if (dt < kNominalDt - kDtTol - kDtSlack || dt > kNominalDt + kDtTol + kDtSlack) {
        std::ostringstream os;
        os << where << ": frame spacing " << dt << " s at frame " << i
           << " outside [" << kNominalDt - kDtTol << ", " << kNominalDt + kDtTol << "]";
        throw validate_error(os.str());
      }
    }
    prev_t = f.t;
  }
}

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.size();
  return n;
}

bool Dataset::labeled() const {
  for (const auto& t : traces)
    if (!t.labeled()) return false;
  return true;
}

std::vector<Segment> labels_to_segments(const std::vector<SkillId>& labels) {
  if (labels.empty()) throw validate_error("labels_to_segments: empty sequence");
  std::vector<Segment> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[start]) {
      out.push_back({start, i, labels[start]});
      start = i;
    }
  }
  return out;
}

std::vector<SkillId> segments_to_labels(const std::vector<Segment>& segments) {
  std::vector<SkillId> out;
  for (const auto& s : segments) {
    if (s.start != out.size() || s.end <= s.start)
      throw validate_error("segments are not contiguous");
    out.insert(out.end(), s.end - s.start, s.skill);
  }
  return out;
}

namespace {

void write_array(std::ostream& os, const double* v, std::size_t n) {
  os << '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ',';
    os << fmt_g17(v[i]);
  }
  os << ']';
}

void write_trace_block(std::ostream& os, const Trace& trace) {
  json meta = json::object();
  if (!trace.meta.id.empty()) meta["id"] = trace.meta.id;
  meta["source"] = trace.meta.source;
  if (!trace.meta.object.empty()) meta["object"] = trace.meta.object;
  if (!trace.meta.split.empty()) meta["split"] = trace.meta.split;
  if (trace.meta.seed) meta["seed"] = *trace.meta.seed;
  if (trace.meta.skill) meta["skill"] = *trace.meta.skill;
  if (trace.meta.task) meta["task"] = *trace.meta.task;
  json header = {{"format", "dexseg-trace"}, {"version", 1}, {"meta", meta}};
  os << header.dump() << '\n';

  for (const auto& f : trace.frames) {
    os << "{\"t\":" << fmt_g17(f.t) << ",\"ee_pose\":";
    write_array(os, f.ee_pose.data(), 6);
    os << ",\"ah_joints\":";
    write_array(os, f.ah_joints.data(), 16);
    os << ",\"fingertip_pos\":[";
    for (int i = 0; i < 4; ++i) {
      if (i) os << ',';
      write_array(os, f.fingertip_pos[i].data(), 3);
    }
    os << "],\"tactile\":[";
    for (int i = 0; i < 4; ++i) {
      if (i) os << ',';
      write_array(os, f.tactile[i].data(), 3);
    }
    os << ']';
    if (f.label) os << ",\"label\":" << *f.label;
    os << "}\n";
  }
}

double get_number(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw parse_error(ctx + ": missing or non-numeric field '" + key + "'");
  return it->get<double>();
}

void read_fixed_array(const json& j, const char* key, double* out, std::size_t n,
                      const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw parse_error(ctx + ": missing array field '" + key + "'");
  if (it->size() != n)
    throw parse_error(ctx + ": field '" + key + "' has " + std::to_string(it->size()) +
                      " entries, expected " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(*it)[i].is_number())
      throw parse_error(ctx + ": non-numeric entry in '" + key + "'");
    out[i] = (*it)[i].get<double>();
  }
}

TraceMeta parse_meta(const json& header) {
  TraceMeta meta;
  if (!header.contains("meta") || !header["meta"].is_object()) return meta;
  const json& m = header["meta"];
  if (m.contains("id")) meta.id = m["id"].get<std::string>();
  if (m.contains("source")) meta.source = m["source"].get<std::string>();
  if (m.contains("object")) meta.object = m["object"].get<std::string>();
  if (m.contains("split")) meta.split = m["split"].get<std::string>();
  if (m.contains("seed")) meta.seed = m["seed"].get<std::uint64_t>();
  if (m.contains("skill")) meta.skill = m["skill"].get<int>();
  if (m.contains("task")) meta.task = m["task"].get<std::string>();
  return meta;
}

void parse_file(const std::string& path, Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  bool have_trace = false;
  Trace current;

  auto flush = [&]() {
    if (have_trace) {
      if (!current.frames.empty()) {
        validate_trace(current);
        ds.traces.push_back(std::move(current));
      }
      current = Trace{};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(ctx + ": malformed line: " + e.what());
    }

    if (j.contains("format")) {
      if (j["format"] != "dexseg-trace")
        throw parse_error(ctx + ": unknown format '" + j["format"].dump() + "'");
      if (!j.contains("version") || j["version"].get<int>() != 1)
        throw parse_error(ctx + ": unsupported version");
      flush();
      have_trace = true;
      current.meta = parse_meta(j);
      continue;
    }

    if (!have_trace) throw parse_error(ctx + ": frame line before header");

    HapticFrame f;
    f.t = get_number(j, "t", ctx);
    read_fixed_array(j, "ee_pose", f.ee_pose.data(), 6, ctx);
    read_fixed_array(j, "ah_joints", f.ah_joints.data(), 16, ctx);

    auto read_nested = [&](const char* key, std::array<std::array<double, 3>, 4>& out) {
      auto it = j.find(key);
      if (it == j.end() || !it->is_array() || it->size() != 4)
        throw parse_error(ctx + ": field '" + std::string(key) + "' must be an array of 4 arrays");
      for (int i = 0; i < 4; ++i) {
        if (!(*it)[i].is_array() || (*it)[i].size() != 3)
          throw parse_error(ctx + ": field '" + std::string(key) + "' entry " +
                            std::to_string(i) + " must have 3 numbers");
        for (int k = 0; k < 3; ++k) out[i][k] = (*it)[i][k].get<double>();
      }
    };
    read_nested("fingertip_pos", f.fingertip_pos);
    read_nested("tactile", f.tactile);

    if (j.contains("label")) {
      int label = j["label"].get<int>();
      check_skill(label);
      f.label = label;
    }
    current.frames.push_back(f);
  }
  flush();
}

}  // namespace

Dataset load_traces(const std::string& path) {
  Dataset ds;
  fs::path p(path);
  if (!fs::exists(p)) throw io_error("path does not exist: '" + path + "'");
  if (fs::is_directory(p)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".jsonl")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) parse_file(f, ds);
  } else {
    parse_file(path, ds);
  }
  return ds;
}

void save_traces(const Dataset& ds, const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p) || (!p.has_extension() && !fs::exists(p))) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (!fs::is_directory(p)) throw io_error("cannot create directory '" + path + "'");
    for (std::size_t i = 0; i < ds.traces.size(); ++i) {
      const Trace& t = ds.traces[i];
      std::string name = t.meta.id.empty()
                             ? "trace_" + std::to_string(i)
                             : t.meta.id;
      save_single_trace(t, (p / (name + ".jsonl")).string());
    }
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  if (ds.traces.empty()) {
    json header = {{"format", "dexseg-trace"}, {"version", 1}, {"meta", json::object()}};
    out << header.dump() << '\n';
    return;
  }
  for (const auto& t : ds.traces) {
    validate_trace(t);
    write_trace_block(out, t);
  }
  if (!out) throw io_error("write failed for '" + path + "'");
}

Trace load_single_trace(const std::string& path) {
  Dataset ds = load_traces(path);
  if (ds.traces.size() != 1)
    throw validate_error("expected exactly one trace in '" + path + "', found " +
                         std::to_string(ds.traces.size()));
  return std::move(ds.traces.front());
}

void save_single_trace(const Trace& trace, const std::string& path) {
  validate_trace(trace);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  write_trace_block(out, trace);
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace dexseg
