// ctprep: batch CLI for CT stroke preprocessing, vessel extraction,
// evaluation and QC rendering.
//
// Exit codes: 0 success, 1 partial failure, 2 invalid config or usage.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "ctprep/pipeline.hpp"
#include "ctprep/qc.hpp"

namespace {

using namespace ctprep;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool allow_fallback_mask = false;

  PipelineConfig load() const {
    std::optional<fs::path> path;
    if (!config_path.empty()) path = config_path;
    auto overrides_with_flags = overrides;
    if (allow_fallback_mask) overrides_with_flags.emplace_back("allow_fallback_mask=true");
    return load_config(path, overrides_with_flags);
  }
};

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--set", opts.overrides, "Override a config field, e.g. --set vessel_params.tau_low=60")
      ->take_all();
  sub->add_flag("--allow-fallback-mask", opts.allow_fallback_mask,
                "Use the threshold+morphology brain mask when a subject has none (not clinically valid)");
}

int report_batch(const BatchResult& batch) {
  for (const auto& r : batch.subjects) {
    if (r.ok) {
      std::cout << "ok    " << r.subject_id << " (" << r.outputs.size() << " outputs"
                << (r.fallback_mask_used ? ", fallback mask" : "") << ")\n";
    } else {
      std::cout << "FAIL  " << r.subject_id << ": " << r.error << "\n";
    }
  }
  std::cout << batch.subjects.size() - batch.failures() << " succeeded, " << batch.failures() << " failed\n";
  return batch.failures() == 0 ? kExitOk : kExitPartial;
}

std::map<Modality, std::pair<double, double>> load_ranges(const std::string& path) {
  if (path.empty()) return published_nnunet_ranges();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::InvalidConfig, path + " is not a JSON object");
  std::map<Modality, std::pair<double, double>> ranges;
  for (const auto& [key, value] : doc.items()) {
    const auto m = parse_modality(key);
    if (!m) throw Error(ErrorCode::InvalidConfig, "unknown modality '" + key + "' in " + path);
    if (!value.is_array() || value.size() != 2) throw Error(ErrorCode::InvalidConfig, key + " must be [lo, hi]");
    ranges[*m] = {value[0].get<double>(), value[1].get<double>()};
  }
  return ranges;
}

template <std::size_t N>
std::array<double, N> parse_tuple(const std::string& text, const char* what) {
  std::array<double, N> out{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto comma = text.find(',', pos);
    if ((i + 1 < N) == (comma == std::string::npos))
      throw Error(ErrorCode::InvalidConfig, std::string(what) + " expects " + std::to_string(N) + " comma-separated values");
    out[i] = std::stod(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CT stroke preprocessing: clinical windowing, vessel extraction, evaluation, QC"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string manifest_path;
  std::string pred_dir;
  std::string out_dir;

  auto* preprocess = app.add_subcommand("preprocess", "Window/equalise (or z-score) the five input channels per subject");
  add_common(preprocess, common);
  preprocess->add_option("--manifest", manifest_path, "Subject manifest JSON")->required()->check(CLI::ExistingFile);

  auto* vessels = app.add_subcommand("vessels", "Extract CTA-NCCT vessel masks per subject");
  add_common(vessels, common);
  vessels->add_option("--manifest", manifest_path, "Subject manifest JSON")->required()->check(CLI::ExistingFile);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predicted lesion masks against ground truth");
  add_common(evaluate_cmd, common);
  evaluate_cmd->add_option("--manifest", manifest_path, "Manifest listing gt_lesion per subject")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--pred-dir", pred_dir, "Directory of <subject>.nii.gz predictions")->required()->check(CLI::ExistingDirectory);
  evaluate_cmd->add_option("--out-dir", out_dir, "Where to write per-subject JSON and aggregate.csv")->required();

  std::string qc_volume, qc_overlay, qc_plane = "axial", qc_slice = "auto", qc_subject = "subject", qc_modality;
  std::string qc_color = "0,255,0", qc_range = "0,1";
  double qc_alpha = 0.5;
  auto* qc = app.add_subcommand("qc", "Render a slice (optionally with a mask overlay) to PPM");
  qc->add_option("--volume", qc_volume, "Volume to render")->required()->check(CLI::ExistingFile);
  qc->add_option("--overlay", qc_overlay, "Binary mask drawn on top")->check(CLI::ExistingFile);
  qc->add_option("--plane", qc_plane, "axial, coronal or sagittal")->check(CLI::IsMember({"axial", "coronal", "sagittal"}));
  qc->add_option("--slice", qc_slice, "Slice index or 'auto' (largest overlay area)");
  qc->add_option("--alpha", qc_alpha, "Overlay opacity in [0,1]")->check(CLI::Range(0.0, 1.0));
  qc->add_option("--color", qc_color, "Overlay colour r,g,b");
  qc->add_option("--range", qc_range, "Grey-level mapping lo,hi");
  qc->add_option("--subject", qc_subject, "Subject id used in the file name");
  qc->add_option("--modality", qc_modality, "Modality used in the file name (default: volume file stem)");
  qc->add_option("--out-dir", out_dir, "Output directory")->required();

  std::string ranges_path;
  auto* table1 = app.add_subcommand("table1-check", "Compare clinical windows with nnU-Net foreground ranges");
  add_common(table1, common);
  table1->add_option("--ranges", ranges_path, "JSON {modality: [lo, hi]}; defaults to the published ranges")
      ->check(CLI::ExistingFile);

  std::string draft_dir, draft_outputs = "outputs", draft_out;
  auto* draft = app.add_subcommand("manifest-draft", "Draft a manifest from *_ncct/_cta/... file names for review");
  draft->add_option("--dir", draft_dir, "Directory to scan")->required()->check(CLI::ExistingDirectory);
  draft->add_option("--outputs-root", draft_outputs, "Parent of per-subject output directories");
  draft->add_option("--out", draft_out, "Write the manifest here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*preprocess) {
      const auto config = common.load();
      const auto batch = run_preprocess_batch(load_manifest(manifest_path), config);
      return report_batch(batch);
    }
    if (*vessels) {
      const auto config = common.load();
      return report_batch(run_vessels_batch(load_manifest(manifest_path), config));
    }
    if (*evaluate_cmd) {
      const auto config = common.load();
      const auto summary = run_evaluate(pred_dir, load_manifest(manifest_path), config, fs::path(out_dir));
      for (const auto& e : summary.excluded) std::cout << "excluded " << e.subject_id << ": " << e.error << "\n";
      std::cout << aggregate_csv(summary);
      std::cout << "(SD is population SD; empty-vs-empty scores dice = 1, F1 = 1)\n";
      return summary.excluded.empty() ? kExitOk : kExitPartial;
    }
    if (*qc) {
      const Volume3D vol = read_volume(qc_volume);
      std::optional<BinaryMask3D> overlay;
      if (!qc_overlay.empty()) overlay = mask_from_volume(read_volume(qc_overlay, Modality::MASK));

      RenderSpec spec;
      spec.plane = *parse_plane(qc_plane);
      if (qc_slice != "auto") spec.slice_index = std::stoll(qc_slice);
      spec.overlay_alpha = qc_alpha;
      const auto color = parse_tuple<3>(qc_color, "--color");
      for (int i = 0; i < 3; ++i) spec.overlay_color[i] = static_cast<std::uint8_t>(std::clamp(color[i], 0.0, 255.0));
      const auto range = parse_tuple<2>(qc_range, "--range");
      spec.value_lo = range[0];
      spec.value_hi = range[1];

      const RgbImage img = render_slice(vol, overlay ? &*overlay : nullptr, spec);
      std::string modality = qc_modality;
      if (modality.empty()) {
        modality = fs::path(qc_volume).filename().string();
        modality = modality.substr(0, modality.find('.'));
      }
      fs::create_directories(out_dir);
      const fs::path out = fs::path(out_dir) / qc_filename(qc_subject, modality, spec.plane, img.slice_index, overlay.has_value());
      write_ppm(img, out);
      std::cout << out.string() << "\n";
      return kExitOk;
    }
    if (*table1) {
      const auto config = common.load();
      const auto rows = run_table1_check(config, load_ranges(ranges_path));
      bool all_pass = true;
      std::printf("%-6s %-16s %-22s %8s %10s %s\n", "chan", "clinical window", "nnU-Net range", "kept %", "published", "result");
      for (const auto& r : rows) {
        char window[64], range[64];
        std::snprintf(window, sizeof window, "(%g, %g)", r.window.lo, r.window.hi);
        std::snprintf(range, sizeof range, "(%g, %g)", r.nnunet_range.first, r.nnunet_range.second);
        std::printf("%-6s %-16s %-22s %8.1f %10.1f %s\n", std::string(to_string(r.modality)).c_str(), window, range,
                    r.kept_percent, r.published_percent, r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
      }
      return all_pass ? kExitOk : kExitPartial;
    }
    if (*draft) {
      const auto subjects = draft_manifest(draft_dir, draft_outputs);
      const std::string text = manifest_to_json(subjects).dump(2) + "\n";
      if (draft_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(draft_out);
        out << text;
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + draft_out);
      }
      std::cerr << "drafted " << subjects.size() << " subjects; suffix matching is a heuristic, review before use\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
