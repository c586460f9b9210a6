#include "ctprep/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ctprep/checksum.hpp"

namespace ctprep {
namespace {

using json = nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) invalid(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) invalid("unknown key '" + key + "' in " + where);
  }
}

std::pair<double, double> parse_range(const json& j, const std::string& where) {
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  if (j.is_object() && j.contains("lo") && j.contains("hi") && j.size() == 2)
    return {j.at("lo").get<double>(), j.at("hi").get<double>()};
  invalid(where + " must be [lo, hi]");
}

std::int64_t parse_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) invalid(where + " must be an integer");
  return j.get<std::int64_t>();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string channel_key(Modality m) { return std::string(to_string(m)); }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Canonical key for a manifest path entry, or nullopt if not recognised.
std::optional<std::string> canonical_path_key(std::string_view key) {
  if (key == kBrainMaskKey || key == kLesionKey) return std::string(key);
  if (auto m = parse_modality(key); m && *m != Modality::MASK && *m != Modality::OTHER) return channel_key(*m);
  return std::nullopt;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

fs::path require_path(const SubjectManifest& m, std::string_view key) {
  auto p = m.path_for(key);
  if (!p) throw Error(ErrorCode::MissingModality, "subject " + m.subject_id + " has no " + std::string(key));
  if (!fs::exists(*p)) throw Error(ErrorCode::IoFailure, "subject " + m.subject_id + ": missing file " + p->string());
  return *p;
}

Volume3D load_channel(const SubjectManifest& m, Modality modality) {
  return read_volume(require_path(m, to_string(modality)), modality);
}

BinaryMask3D load_mask(const fs::path& path) { return mask_from_volume(read_volume(path, Modality::MASK)); }

// Brain mask from the manifest, or the fallback stripper when explicitly allowed.
BinaryMask3D load_brain(const SubjectManifest& m, const PipelineConfig& config, const Volume3D& ncct,
                        bool& used_fallback) {
  used_fallback = false;
  if (auto p = m.path_for(kBrainMaskKey)) {
    if (!fs::exists(*p)) throw Error(ErrorCode::IoFailure, "subject " + m.subject_id + ": missing file " + p->string());
    return load_mask(*p);
  }
  if (!config.allow_fallback_mask)
    throw Error(ErrorCode::MissingModality,
                "subject " + m.subject_id + " has no brain_mask (pass --allow-fallback-mask to use the threshold fallback)");
  used_fallback = true;
  return fallback_skull_strip(ncct);
}

OutputRecord write_output(const Volume3D& vol, const fs::path& dir, const std::string& file, const std::string& channel,
                          DataType datatype) {
  const auto bytes = write_volume(vol, dir / file, datatype);
  OutputRecord rec;
  rec.channel = channel;
  rec.file = file;
  rec.sha256 = sha256_hex(bytes);
  rec.voxels = vol.size();
  rec.nonzero = static_cast<std::int64_t>((vol.voxels != 0.0).count());
  rec.min = vol.size() > 0 ? vol.voxels.minCoeff() : 0.0;
  rec.max = vol.size() > 0 ? vol.voxels.maxCoeff() : 0.0;
  return rec;
}

// Config minus parallel_subjects, which never changes outputs.
json result_affecting_config(const PipelineConfig& config) {
  json j = config_to_json(config);
  j.erase("parallel_subjects");
  return j;
}

json provenance_json(const SubjectManifest& m, const PipelineConfig& config, const SubjectResult& r,
                     std::string_view stage) {
  json outputs = json::array();
  for (const auto& o : r.outputs) {
    outputs.push_back({{"channel", o.channel},
                       {"file", o.file},
                       {"sha256", o.sha256},
                       {"min", o.min},
                       {"max", o.max},
                       {"voxels", o.voxels},
                       {"nonzero", o.nonzero}});
  }
  json inputs = json::object();
  for (const auto& [key, path] : m.paths) inputs[key] = path.filename().string();
  return {{"subject_id", m.subject_id},
          {"stage", stage},
          {"mode", to_string(config.mode)},
          {"config_hash", config_hash(config)},
          {"config", result_affecting_config(config)},
          {"fallback_mask_used", r.fallback_mask_used},
          {"inputs", inputs},
          {"outputs", outputs}};
}

template <class Fn>
SubjectResult guarded(const SubjectManifest& m, Fn&& fn) {
  SubjectResult r;
  r.subject_id = m.subject_id;
  try {
    fn(r);
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error_code = e.code();
    r.error = e.what();
    r.outputs.clear();
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
    r.outputs.clear();
  }
  return r;
}

std::vector<SubjectManifest> sorted_by_id(std::vector<SubjectManifest> subjects) {
  std::sort(subjects.begin(), subjects.end(),
            [](const SubjectManifest& a, const SubjectManifest& b) { return a.subject_id < b.subject_id; });
  return subjects;
}

BatchResult run_batch(const std::vector<SubjectManifest>& subjects, int workers,
                      const std::function<SubjectResult(const SubjectManifest&)>& one) {
  const auto ordered = sorted_by_id(subjects);
  BatchResult batch;
  batch.subjects.resize(ordered.size());
  parallel_for(ordered.size(), workers, [&](std::size_t i) { batch.subjects[i] = one(ordered[i]); });
  return batch;
}

std::string file_name(const SubjectManifest& m, std::string_view suffix) {
  return m.subject_id + "_" + std::string(suffix) + ".nii.gz";
}

}  // namespace

std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::Clinical: return "clinical";
    case PipelineMode::Baseline: return "baseline";
    case PipelineMode::ClinicalVessels: return "clinical+vessels";
  }
  return "clinical";
}

const std::vector<Modality>& input_channels() {
  static const std::vector<Modality> kChannels{Modality::CTA, Modality::CBF, Modality::CBV, Modality::MTT,
                                               Modality::TMAX};
  return kChannels;
}

// ---- config ---------------------------------------------------------------

nlohmann::json config_to_json(const PipelineConfig& c) {
  json windows = json::object();
  for (const auto& [m, w] : c.windows) windows[channel_key(m)] = {w.lo, w.hi};
  const auto& v = c.vessel_params;
  return {{"windows", windows},
          {"equalize_bins", c.equalize_bins},
          {"vessel_params",
           {{"hu_window", {v.hu_lo, v.hu_hi}},
            {"tau_low", v.tau_low},
            {"tau_high", v.tau_high},
            {"s_min", v.s_min},
            {"connectivity", static_cast<int>(v.connectivity)}}},
          {"connectivity", static_cast<int>(c.connectivity)},
          {"mode", to_string(c.mode)},
          {"parallel_subjects", c.parallel_subjects},
          {"baseline_foreground", c.baseline_foreground == BaselineForeground::Lesion ? "lesion" : "brain"},
          {"min_overlap", c.min_overlap},
          {"allow_fallback_mask", c.allow_fallback_mask}};
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  PipelineConfig c;
  if (doc.is_null()) return c;
  reject_unknown(doc,
                 {"windows", "equalize_bins", "vessel_params", "connectivity", "mode", "parallel_subjects",
                  "baseline_foreground", "min_overlap", "allow_fallback_mask"},
                 "config");
  try {
    if (doc.contains("windows")) {
      const auto& w = doc.at("windows");
      if (!w.is_object()) invalid("windows must be an object");
      for (const auto& [key, value] : w.items()) {
        const auto m = parse_modality(key);
        if (!m || std::find(input_channels().begin(), input_channels().end(), *m) == input_channels().end())
          invalid("unknown window modality '" + key + "'");
        const auto [lo, hi] = parse_range(value, "windows." + key);
        if (!(lo < hi)) invalid("windows." + key + " must satisfy lo < hi");
        c.windows[*m] = WindowSpec{*m, lo, hi};
      }
    }
    if (doc.contains("equalize_bins")) {
      c.equalize_bins = static_cast<int>(parse_int(doc.at("equalize_bins"), "equalize_bins"));
      if (c.equalize_bins < 2) invalid("equalize_bins must be >= 2");
    }
    if (doc.contains("vessel_params")) {
      const auto& v = doc.at("vessel_params");
      reject_unknown(v, {"hu_window", "tau_low", "tau_high", "s_min", "connectivity"}, "vessel_params");
      auto& p = c.vessel_params;
      if (v.contains("hu_window")) std::tie(p.hu_lo, p.hu_hi) = parse_range(v.at("hu_window"), "vessel_params.hu_window");
      if (v.contains("tau_low")) p.tau_low = v.at("tau_low").get<double>();
      if (v.contains("tau_high")) p.tau_high = v.at("tau_high").get<double>();
      if (v.contains("s_min")) p.s_min = parse_int(v.at("s_min"), "vessel_params.s_min");
      if (v.contains("connectivity"))
        p.connectivity = connectivity_from_int(static_cast<int>(parse_int(v.at("connectivity"), "vessel_params.connectivity")));
      p.validate();
    }
    if (doc.contains("connectivity"))
      c.connectivity = connectivity_from_int(static_cast<int>(parse_int(doc.at("connectivity"), "connectivity")));
    if (doc.contains("mode")) {
      const auto mode = doc.at("mode").get<std::string>();
      if (mode == "clinical") c.mode = PipelineMode::Clinical;
      else if (mode == "baseline") c.mode = PipelineMode::Baseline;
      else if (mode == "clinical+vessels") c.mode = PipelineMode::ClinicalVessels;
      else invalid("mode must be clinical, baseline or clinical+vessels");
    }
    if (doc.contains("parallel_subjects")) {
      c.parallel_subjects = static_cast<int>(parse_int(doc.at("parallel_subjects"), "parallel_subjects"));
      if (c.parallel_subjects < 1) invalid("parallel_subjects must be >= 1");
    }
    if (doc.contains("baseline_foreground")) {
      const auto fg = doc.at("baseline_foreground").get<std::string>();
      if (fg == "lesion") c.baseline_foreground = BaselineForeground::Lesion;
      else if (fg == "brain") c.baseline_foreground = BaselineForeground::Brain;
      else invalid("baseline_foreground must be lesion or brain");
    }
    if (doc.contains("min_overlap")) {
      c.min_overlap = parse_int(doc.at("min_overlap"), "min_overlap");
      if (c.min_overlap < 1) invalid("min_overlap must be >= 1");
    }
    if (doc.contains("allow_fallback_mask")) c.allow_fallback_mask = doc.at("allow_fallback_mask").get<bool>();
  } catch (const json::exception& e) {
    invalid(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    invalid(e.what());
  }
  return c;
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) invalid("override must be key=value, got '" + std::string(assignment) + "'");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  if (doc.is_null()) doc = json::object();
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) invalid("empty path segment in override key '" + key + "'");
    if (!node->is_object()) invalid("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

PipelineConfig load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) invalid("cannot open config " + path->string());
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) invalid("config " + path->string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(result_affecting_config(config).dump()); }

// ---- manifest -------------------------------------------------------------

std::optional<fs::path> SubjectManifest::path_for(std::string_view key) const {
  const auto canon = canonical_path_key(key);
  if (!canon) return std::nullopt;
  const auto it = paths.find(*canon);
  if (it == paths.end()) return std::nullopt;
  return it->second;
}

std::vector<SubjectManifest> manifest_from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  const json* list = &doc;
  if (doc.is_object()) {
    reject_unknown(doc, {"subjects"}, "manifest");
    if (!doc.contains("subjects")) invalid("manifest has no 'subjects' array");
    list = &doc.at("subjects");
  }
  if (!list->is_array()) invalid("manifest subjects must be an array");

  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  std::vector<SubjectManifest> out;
  std::set<std::string> seen;
  try {
    for (const auto& entry : *list) {
      reject_unknown(entry, {"subject_id", "paths", "outputs_dir"}, "manifest subject");
      SubjectManifest m;
      m.subject_id = entry.at("subject_id").get<std::string>();
      if (m.subject_id.empty()) invalid("empty subject_id");
      if (!seen.insert(m.subject_id).second) invalid("duplicate subject_id '" + m.subject_id + "'");
      const auto& paths = entry.at("paths");
      if (!paths.is_object()) invalid("paths of " + m.subject_id + " must be an object");
      for (const auto& [key, value] : paths.items()) {
        const auto canon = canonical_path_key(key);
        if (!canon) invalid("unknown path key '" + key + "' for subject " + m.subject_id);
        m.paths[*canon] = resolve(value.get<std::string>());
      }
      m.outputs_dir = entry.contains("outputs_dir") ? resolve(entry.at("outputs_dir").get<std::string>())
                                                    : base_dir / "outputs" / m.subject_id;
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    invalid(std::string("manifest: ") + e.what());
  }
  return out;
}

std::vector<SubjectManifest> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open manifest " + path.string());
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) invalid("manifest " + path.string() + " is not valid JSON");
  return manifest_from_json(doc, path.parent_path());
}

nlohmann::json manifest_to_json(const std::vector<SubjectManifest>& subjects) {
  json list = json::array();
  for (const auto& m : subjects) {
    json paths = json::object();
    for (const auto& [key, p] : m.paths) paths[key] = p.string();
    list.push_back({{"subject_id", m.subject_id}, {"paths", paths}, {"outputs_dir", m.outputs_dir.string()}});
  }
  return {{"subjects", list}};
}

std::vector<SubjectManifest> draft_manifest(const fs::path& dir, const fs::path& outputs_root) {
  static const std::vector<std::pair<std::string, std::string>> kSuffixes{
      {"_brain_mask", std::string(kBrainMaskKey)}, {"_brainmask", std::string(kBrainMaskKey)},
      {"_lesion", std::string(kLesionKey)},        {"_ncct", "NCCT"},
      {"_cta", "CTA"},                             {"_cbf", "CBF"},
      {"_cbv", "CBV"},                             {"_mtt", "MTT"},
      {"_tmax", "TMAX"},
  };
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, dir.string() + " is not a directory");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::absolute(e.path()));
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, SubjectManifest> by_id;
  for (const auto& f : files) {
    std::string name = f.filename().string();
    std::string stem;
    if (lower(name).ends_with(".nii.gz")) stem = name.substr(0, name.size() - 7);
    else if (lower(name).ends_with(".nii")) stem = name.substr(0, name.size() - 4);
    else continue;
    const std::string lstem = lower(stem);
    for (const auto& [suffix, key] : kSuffixes) {
      if (lstem.size() > suffix.size() && lstem.ends_with(suffix)) {
        const std::string id = stem.substr(0, stem.size() - suffix.size());
        auto& m = by_id[id];
        m.subject_id = id;
        m.outputs_dir = outputs_root / id;
        m.paths.emplace(key, f);
        break;
      }
    }
  }
  std::vector<SubjectManifest> out;
  for (auto& [_, m] : by_id) out.push_back(std::move(m));
  return out;
}

// ---- preprocessing ------------------------------------------------------------

std::int64_t BatchResult::failures() const {
  return std::count_if(subjects.begin(), subjects.end(), [](const SubjectResult& r) { return !r.ok; });
}

BaselineStatsTable compute_baseline_stats(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config) {
  std::map<Modality, ForegroundPool> pools;
  for (const auto& m : sorted_by_id(subjects)) {
    try {
      BinaryMask3D fg;
      if (config.baseline_foreground == BaselineForeground::Lesion) {
        auto p = m.path_for(kLesionKey);
        if (!p || !fs::exists(*p)) continue;
        fg = load_mask(*p);
      } else {
        bool used_fallback = false;
        fg = load_brain(m, config, load_channel(m, Modality::NCCT), used_fallback);
      }
      std::map<Modality, Volume3D> loaded;
      for (Modality ch : input_channels()) {
        loaded.emplace(ch, load_channel(m, ch));
        require_compatible(loaded.at(ch).header, fg.header, "baseline foreground");
      }
      for (Modality ch : input_channels()) pools[ch].add(loaded.at(ch), fg);
    } catch (const Error&) {
      continue;
    }
  }
  BaselineStatsTable stats;
  for (auto& [ch, pool] : pools) {
    if (pool.size() > 0) stats.emplace(ch, std::move(pool).finish());
  }
  return stats;
}

SubjectResult run_preprocess(const SubjectManifest& manifest, const PipelineConfig& config,
                             const BaselineStatsTable* stats) {
  return guarded(manifest, [&](SubjectResult& r) {
    for (Modality ch : {Modality::NCCT, Modality::CTA, Modality::CBF, Modality::CBV, Modality::MTT, Modality::TMAX})
      require_path(manifest, to_string(ch));

    const Volume3D ncct = load_channel(manifest, Modality::NCCT);
    std::vector<std::pair<std::string, Volume3D>> channels;
    std::optional<BinaryMask3D> vessels;

    if (config.mode == PipelineMode::Baseline) {
      if (stats == nullptr) throw Error(ErrorCode::DegenerateStats, "baseline mode needs dataset statistics");
      for (Modality ch : input_channels()) {
        Volume3D vol = load_channel(manifest, ch);
        require_compatible(ncct.header, vol.header, "baseline channel vs NCCT");
        const auto it = stats->find(ch);
        if (it == stats->end())
          throw Error(ErrorCode::EmptyForeground, "no foreground statistics for " + channel_key(ch));
        channels.emplace_back(lower(to_string(ch)), baseline_normalize(vol, it->second));
      }
    } else {
      const BinaryMask3D brain = load_brain(manifest, config, ncct, r.fallback_mask_used);
      require_compatible(ncct.header, brain.header, "brain mask vs NCCT");
      for (Modality ch : input_channels()) {
        Volume3D vol = load_channel(manifest, ch);
        require_compatible(ncct.header, vol.header, "channel vs NCCT");
        if (ch == Modality::CTA && config.mode == PipelineMode::ClinicalVessels) {
          vessels = segment_vessels(vol, ncct, brain, config.vessel_params);
          channels.emplace_back("vessels", vessel_channel(*vessels));
          continue;
        }
        const auto w = config.windows.find(ch);
        if (w == config.windows.end()) throw Error(ErrorCode::InvalidConfig, "no window for " + channel_key(ch));
        const Volume3D windowed = clinical_window(apply_mask(vol, brain), w->second, brain);
        channels.emplace_back(lower(to_string(ch)),
                              apply_mask(equalize_foreground(windowed, brain, config.equalize_bins), brain));
      }
    }

    fs::create_directories(manifest.outputs_dir);
    for (const auto& [name, vol] : channels) {
      const DataType dt = name == "vessels" ? DataType::UInt8 : DataType::Float32;
      r.outputs.push_back(write_output(vol, manifest.outputs_dir, file_name(manifest, name), name, dt));
    }
    write_text(manifest.outputs_dir / (manifest.subject_id + "_provenance.json"),
               provenance_json(manifest, config, r, "preprocess").dump(2) + "\n");
  });
}

BatchResult run_preprocess_batch(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config) {
  std::optional<BaselineStatsTable> stats;
  if (config.mode == PipelineMode::Baseline) stats = compute_baseline_stats(subjects, config);
  return run_batch(subjects, config.parallel_subjects, [&](const SubjectManifest& m) {
    return run_preprocess(m, config, stats ? &*stats : nullptr);
  });
}

SubjectResult run_vessels(const SubjectManifest& manifest, const PipelineConfig& config) {
  return guarded(manifest, [&](SubjectResult& r) {
    const Volume3D ncct = load_channel(manifest, Modality::NCCT);
    const Volume3D cta = load_channel(manifest, Modality::CTA);
    const BinaryMask3D brain = load_brain(manifest, config, ncct, r.fallback_mask_used);
    const BinaryMask3D vessels = segment_vessels(cta, ncct, brain, config.vessel_params);

    fs::create_directories(manifest.outputs_dir);
    r.outputs.push_back(
        write_output(vessel_channel(vessels), manifest.outputs_dir, file_name(manifest, "vessels"), "vessels", DataType::UInt8));
    write_text(manifest.outputs_dir / (manifest.subject_id + "_vessels_provenance.json"),
               provenance_json(manifest, config, r, "vessels").dump(2) + "\n");
  });
}

BatchResult run_vessels_batch(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config) {
  return run_batch(subjects, config.parallel_subjects,
                   [&](const SubjectManifest& m) { return run_vessels(m, config); });
}

// ---- evaluation ---------------------------------------------------------------

MetricAggregate aggregate_metric(const std::vector<double>& values) {
  MetricAggregate a;
  a.n = static_cast<std::int64_t>(values.size());
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  a.mean = pairwise_sum(values) / n;
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(), [&](double v) { return (v - a.mean) * (v - a.mean); });
  a.sd = std::sqrt(pairwise_sum(sq) / n);
  return a;
}

nlohmann::json report_to_json(const std::string& subject_id, const MetricsReport& r) {
  return {{"subject_id", subject_id},
          {"dice", r.dice},
          {"avd_ml", r.avd_ml},
          {"f1_lesionwise", r.f1_lesionwise},
          {"alcd", r.alcd},
          {"n_pred_lesions", r.n_pred_lesions},
          {"n_gt_lesions", r.n_gt_lesions}};
}

std::string aggregate_csv(const EvaluationSummary& summary) {
  std::ostringstream out;
  out << "metric,mean,sd,n,excluded\n";
  for (const char* name : {"dice", "avd_ml", "f1_lesionwise", "alcd"}) {
    const auto it = summary.aggregate.find(name);
    const MetricAggregate a = it == summary.aggregate.end() ? MetricAggregate{} : it->second;
    out << name << ',' << format_number(a.mean) << ',' << format_number(a.sd) << ',' << a.n << ','
        << summary.excluded.size() << '\n';
  }
  return out.str();
}

EvaluationSummary run_evaluate(const fs::path& pred_dir, const std::vector<SubjectManifest>& gt_manifest,
                               const PipelineConfig& config, const std::optional<fs::path>& out_dir) {
  const auto ordered = sorted_by_id(gt_manifest);
  std::vector<SubjectResult> results(ordered.size());
  std::vector<std::optional<MetricsReport>> reports(ordered.size());
  const MetricsOptions options{config.connectivity, config.min_overlap};

  parallel_for(ordered.size(), config.parallel_subjects, [&](std::size_t i) {
    const auto& m = ordered[i];
    results[i] = guarded(m, [&](SubjectResult&) {
      const fs::path gt_path = require_path(m, kLesionKey);
      std::optional<fs::path> pred_path;
      for (const auto& name : {m.subject_id + ".nii.gz", m.subject_id + ".nii", m.subject_id + "_pred.nii.gz",
                               m.subject_id + "_pred.nii"}) {
        if (fs::exists(pred_dir / name)) {
          pred_path = pred_dir / name;
          break;
        }
      }
      if (!pred_path) throw Error(ErrorCode::MissingPrediction, "no prediction for " + m.subject_id + " in " + pred_dir.string());
      const BinaryMask3D gt = load_mask(gt_path);
      const BinaryMask3D pred = load_mask(*pred_path);
      reports[i] = evaluate(pred, gt, options);
    });
  });

  EvaluationSummary summary;
  std::map<std::string, std::vector<double>> columns;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (!results[i].ok) {
      summary.excluded.push_back(results[i]);
      continue;
    }
    const auto& r = *reports[i];
    summary.reports.emplace_back(ordered[i].subject_id, r);
    columns["dice"].push_back(r.dice);
    columns["avd_ml"].push_back(r.avd_ml);
    columns["f1_lesionwise"].push_back(r.f1_lesionwise);
    columns["alcd"].push_back(static_cast<double>(r.alcd));
  }
  for (const char* name : {"dice", "avd_ml", "f1_lesionwise", "alcd"}) summary.aggregate[name] = aggregate_metric(columns[name]);

  if (out_dir) {
    fs::create_directories(*out_dir);
    for (const auto& [id, r] : summary.reports)
      write_text(*out_dir / (id + "_metrics.json"), report_to_json(id, r).dump(2) + "\n");
    write_text(*out_dir / "aggregate.csv", aggregate_csv(summary));

    json excluded = json::array();
    for (const auto& e : summary.excluded) {
      excluded.push_back({{"subject_id", e.subject_id},
                          {"error", e.error_code ? std::string(to_string(*e.error_code)) : "Unknown"},
                          {"message", e.error}});
    }
    json agg = json::object();
    for (const auto& [name, a] : summary.aggregate) agg[name] = {{"mean", a.mean}, {"sd", a.sd}, {"n", a.n}};
    const json doc{{"evaluated", summary.reports.size()},
                   {"excluded", summary.excluded.size()},
                   {"excluded_subjects", excluded},
                   {"aggregate", agg},
                   {"conventions",
                    {{"sd", "population (divide by N)"},
                     {"dice_both_empty", 1.0},
                     {"f1_both_lesion_free", 1.0},
                     {"min_overlap_voxels", config.min_overlap},
                     {"connectivity", static_cast<int>(config.connectivity)}}}};
    write_text(*out_dir / "summary.json", doc.dump(2) + "\n");
  }
  return summary;
}

// ---- window coverage table ---------------------------------------------------

std::map<Modality, double> published_range_kept() {
  return {{Modality::CTA, 26.0}, {Modality::CBF, 49.2}, {Modality::CBV, 33.7}, {Modality::MTT, 15.9}, {Modality::TMAX, 17.1}};
}

std::vector<Table1Row> run_table1_check(const PipelineConfig& config,
                                        const std::map<Modality, std::pair<double, double>>& nnunet_ranges) {
  const auto published = published_range_kept();
  std::vector<Table1Row> rows;
  for (Modality ch : input_channels()) {
    const auto range = nnunet_ranges.find(ch);
    if (range == nnunet_ranges.end()) throw Error(ErrorCode::MissingModality, "no nnU-Net range for " + channel_key(ch));
    const auto window = config.windows.find(ch);
    if (window == config.windows.end()) throw Error(ErrorCode::MissingModality, "no window for " + channel_key(ch));

    Table1Row row{ch, window->second, range->second};
    row.kept_percent = range_kept_percent(window->second, range->second);
    row.published_percent = published.at(ch);
    // Slack absorbs binary representation error of one-decimal values.
    row.pass = std::abs(row.kept_percent - row.published_percent) <= kTable1Tolerance + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

// ---- workers ------------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& work) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) work(i);
    });
  }
}

}  // namespace ctprep
