#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustlab/chain.hpp"
#include "robustlab/degradation.hpp"
#include "robustlab/image.hpp"

namespace robustlab {

enum class TaskKind { MCQ, VQA, CAP };
std::string_view task_name(TaskKind task);

struct BenchmarkItem {
  std::string id;
  std::string image_path;
  std::string question;
  std::string answer;
  std::vector<std::string> choices;
  TaskKind task = TaskKind::MCQ;
};

struct BenchmarkManifest {
  std::vector<BenchmarkItem> items;

  // Enforces: MCQ items carry >= 2 choices and the answer is one of them.
  static BenchmarkManifest load_jsonl(const std::string& path);
  void validate() const;
};

/// One model query. Remote clients use only prompt + image; scripted mocks
/// may key off the item and the total applied intensity.
struct ModelRequest {
  const BenchmarkItem* item = nullptr;
  double total_intensity = 0.0;
  std::string prompt;
  const RasterImage* image = nullptr;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string answer(const ModelRequest& request) = 0;
};

/// Deterministic scripted client: answers correctly iff the total applied
/// intensity is below the threshold, in well-formed chain format.
class ThresholdMockClient : public ModelClient {
 public:
  explicit ThresholdMockClient(double threshold = 0.6) : threshold_(threshold) {}
  std::string answer(const ModelRequest& request) override;

 private:
  double threshold_;
};

struct RemoteModelConfig {
  std::string url;
  std::string auth_env = "ROBUSTLAB_MODEL_TOKEN";
  int timeout_ms = 30000;
  int max_attempts = 3;
};

/// HTTP POST {prompt, image: base64 PNG} -> {"text": ...}.
class RemoteModelClient : public ModelClient {
 public:
  explicit RemoteModelClient(RemoteModelConfig config);
  ~RemoteModelClient() override;
  std::string answer(const ModelRequest& request) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct EvalConfig {
  std::uint64_t seed = 0;
  std::vector<double> factors = {0.0, 0.25, 0.5, 1.0};
  RecipeSamplingConfig sampling;
  // When set, sampled recipe intensities are rescaled proportionally so
  // their sum hits this value (each clamped to 1).
  std::optional<double> normalize_total_intensity;
  int parallelism = 4;
  std::string output_dir;  // used when save_images is set
  bool save_images = false;
};

struct EvalSlot {
  std::string item_id;
  TaskKind task = TaskKind::MCQ;
  double factor = 0.0;
  double total_intensity = 0.0;
  bool client_failed = false;
  std::string failure;
  std::string response;
  std::optional<ReasoningChain> parsed;
  std::optional<ChainParseError> parse_error;
  double distortion = 0.0;
  std::uint64_t image_hash = 0;
  std::uint64_t source_hash = 0;
};

struct EvalRun {
  std::uint64_t seed = 0;
  std::vector<double> factors;
  BenchmarkManifest manifest;
  std::map<std::string, DegradationRecipe> recipes;  // per item, shared across factors
  std::vector<EvalSlot> slots;                       // ordered by (item id, factor)
};

/// Runs the perturb-query-parse loop. One recipe per item is reused across
/// every factor with only the intensities scaled, so the factor axis is the
/// sole variable. Per-item client failures are recorded, not fatal.
EvalRun run_eval(const BenchmarkManifest& manifest, ModelClient& client, const EvalConfig& config);

struct EvalCell {
  std::string task;  // "all", "mcq", "vqa", "cap"
  double factor = 0.0;
  std::size_t evaluated = 0;  // slots with a client response
  std::size_t client_failures = 0;
  double accuracy = 0.0;
  double drop = 0.0;  // accuracy(clean) - accuracy(factor)
  double parse_failure_rate = 0.0;
  double type_misclass_rate = 0.0;
  double intensity_mae = 0.0;
  double mean_chain_len = 0.0;
  double mean_distortion = 0.0;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::vector<double> factors;
  std::size_t items = 0;
  bool clean_fidelity = true;  // factor-0 images hash-identical to sources
  std::vector<EvalCell> cells;

  const EvalCell* cell(std::string_view task, double factor) const;
};

/// Scores a completed run. MCQ: exact match on the ANSWER segment.
/// VQA/CAP: case-insensitive containment of the reference answer in the
/// CONCLUSION segment (a documented proxy for judge-based scoring).
/// Perception stats cover parseable responses only. Throws EmptyRun.
EvalReport score(const EvalRun& run);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_report_to_csv(const EvalReport& report);

}  // namespace robustlab
