#pragma once

// Manifest-driven batch orchestration: preprocessing, vessel extraction,
// evaluation and the window/range comparison table.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctprep/error.hpp"
#include "ctprep/metrics.hpp"
#include "ctprep/preprocess.hpp"
#include "ctprep/vessel.hpp"

namespace ctprep {

namespace fs = std::filesystem;

enum class PipelineMode { Clinical, Baseline, ClinicalVessels };
enum class BaselineForeground { Lesion, Brain };

std::string_view to_string(PipelineMode m);

struct PipelineConfig {
  WindowTable windows = default_windows();
  int equalize_bins = kDefaultEqualizeBins;
  VesselSegParams vessel_params;
  /// Used for lesion counting in evaluation.
  Connectivity connectivity = Connectivity::TwentySix;
  PipelineMode mode = PipelineMode::Clinical;
  int parallel_subjects = 1;
  /// Which mask defines the foreground for baseline statistics.
  BaselineForeground baseline_foreground = BaselineForeground::Lesion;
  std::int64_t min_overlap = 1;
  bool allow_fallback_mask = false;
};

nlohmann::json config_to_json(const PipelineConfig& config);

/// Merges `overrides` over the defaults. Unknown keys and invalid values
/// raise Error(InvalidConfig).
PipelineConfig config_from_json(const nlohmann::json& overrides);

/// Applies one `dotted.key=value` assignment. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Reads the optional config file, applies `--set` overrides in order.
PipelineConfig load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides);

/// SHA-256 of the canonical JSON form of the config.
std::string config_hash(const PipelineConfig& config);

/// Keys of `paths`: modality names (NCCT, CTA, CBF, CBV, MTT, TMAX) plus
/// "brain_mask" and "gt_lesion".
struct SubjectManifest {
  std::string subject_id;
  std::map<std::string, fs::path> paths;
  fs::path outputs_dir;

  std::optional<fs::path> path_for(std::string_view key) const;
};

inline constexpr std::string_view kBrainMaskKey = "brain_mask";
inline constexpr std::string_view kLesionKey = "gt_lesion";

/// Accepts {"subjects": [...]} or a bare array. Relative paths are resolved
/// against `base_dir`. Duplicate subject ids raise InvalidConfig.
std::vector<SubjectManifest> manifest_from_json(const nlohmann::json& doc, const fs::path& base_dir);
std::vector<SubjectManifest> load_manifest(const fs::path& path);
nlohmann::json manifest_to_json(const std::vector<SubjectManifest>& subjects);

/// Groups `*_ncct`, `*_cta`, `*_cbf`, `*_cbv`, `*_mtt`, `*_tmax`,
/// `*_brain_mask` and `*_lesion` NIfTI files by their shared prefix. The
/// result is a draft for human review, not an authoritative layout.
std::vector<SubjectManifest> draft_manifest(const fs::path& dir, const fs::path& outputs_root);

struct OutputRecord {
  std::string channel;
  std::string file;  // file name inside outputs_dir
  std::string sha256;
  double min = 0.0;
  double max = 0.0;
  std::int64_t voxels = 0;
  std::int64_t nonzero = 0;
};

struct SubjectResult {
  std::string subject_id;
  bool ok = false;
  std::optional<ErrorCode> error_code;
  std::string error;
  std::vector<OutputRecord> outputs;
  bool fallback_mask_used = false;
};

struct BatchResult {
  std::vector<SubjectResult> subjects;  // sorted by subject_id
  std::int64_t failures() const;
};

using BaselineStatsTable = std::map<Modality, ForegroundStats>;

/// One subject. Baseline mode needs dataset-level `stats`; the batch runner
/// computes them first.
SubjectResult run_preprocess(const SubjectManifest& manifest, const PipelineConfig& config,
                             const BaselineStatsTable* stats = nullptr);

/// Pooled foreground statistics per input channel over all subjects that
/// can be loaded. Subjects that fail to load are skipped here; they fail
/// again, and are recorded, in the per-subject pass.
BaselineStatsTable compute_baseline_stats(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config);

BatchResult run_preprocess_batch(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config);

/// Writes `<id>_vessels.nii.gz` (uint8) and a provenance record.
SubjectResult run_vessels(const SubjectManifest& manifest, const PipelineConfig& config);
BatchResult run_vessels_batch(const std::vector<SubjectManifest>& subjects, const PipelineConfig& config);

struct MetricAggregate {
  double mean = 0.0;
  double sd = 0.0;  // population SD
  std::int64_t n = 0;
};

struct EvaluationSummary {
  std::vector<std::pair<std::string, MetricsReport>> reports;  // sorted by subject_id
  std::vector<SubjectResult> excluded;
  std::map<std::string, MetricAggregate> aggregate;  // dice, avd_ml, f1_lesionwise, alcd
};

/// Prediction for subject `id` is the first of `<id>.nii.gz`, `<id>.nii`,
/// `<id>_pred.nii.gz`, `<id>_pred.nii` found in `pred_dir`. When `out_dir`
/// is set, `<id>_metrics.json`, `aggregate.csv` and `summary.json` are written there.
EvaluationSummary run_evaluate(const fs::path& pred_dir, const std::vector<SubjectManifest>& gt_manifest,
                               const PipelineConfig& config, const std::optional<fs::path>& out_dir);

MetricAggregate aggregate_metric(const std::vector<double>& values);
nlohmann::json report_to_json(const std::string& subject_id, const MetricsReport& report);
std::string aggregate_csv(const EvaluationSummary& summary);

struct Table1Row {
  Modality modality;
  WindowSpec window;
  std::pair<double, double> nnunet_range;
  double kept_percent = 0.0;
  double published_percent = 0.0;
  bool pass = false;
};

inline constexpr double kTable1Tolerance = 0.1;

/// Published "% of range kept" column.
std::map<Modality, double> published_range_kept();

/// Requires a range for each of the five input channels (MissingModality otherwise).
std::vector<Table1Row> run_table1_check(const PipelineConfig& config,
                                        const std::map<Modality, std::pair<double, double>>& nnunet_ranges);

/// The five model input channels in output order.
const std::vector<Modality>& input_channels();

/// Runs `work(i)` for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& work);

}  // namespace ctprep
