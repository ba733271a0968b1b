#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustlab/chain.hpp"
#include "robustlab/degradation.hpp"
#include "robustlab/rng.hpp"

namespace robustlab {

/// One source QA example. Manifest JSONL:
/// {"id", "image_path", "question", "answer", "choices"?}.
struct SourceExample {
  std::string id;
  std::string image_path;
  std::string question;
  std::string answer;
  std::vector<std::string> choices;
};

std::vector<SourceExample> load_source_manifest(const std::string& path);

enum class TemplateName { Influence, Reasoning, Conclusion, LenShort, LenMedium, LenLong };

struct PromptTemplate {
  TemplateName name;
  std::string body;  // named {placeholder} slots
};

/// Substitutes {name} slots; throws InvalidConfig on a slot with no value.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& values);

struct PromptTemplateSet {
  PromptTemplate influence;
  PromptTemplate reasoning;
  PromptTemplate conclusion;
  PromptTemplate len_short;
  PromptTemplate len_medium;
  PromptTemplate len_long;

  static PromptTemplateSet defaults();

  // Every placeholder the pipeline step fills must appear in the body.
  void validate() const;
};

enum class LengthBand { Short, Medium, Long };
std::string_view band_name(LengthBand band);

struct LengthBandConfig {
  double medium_threshold = 0.5;  // total intensity below this -> SHORT
  double long_threshold = 1.5;    // below this -> MEDIUM, else LONG
  int short_words = 60;
  int medium_words = 150;
  int long_words = 300;
};

struct TargetLength {
  LengthBand band;
  int words;
};

/// Piecewise target-length policy: heavier total degradation earns a
/// longer reasoning budget.
TargetLength target_length(double total_intensity, const LengthBandConfig& bands = {});

struct ImagePayload {
  std::string mime = "image/png";
  std::vector<std::uint8_t> bytes;
};

/// Text-generation service abstraction. Implementations must be safe to
/// call from multiple builder threads.
class AnnotatorClient {
 public:
  virtual ~AnnotatorClient() = default;
  virtual std::string generate(const std::string& prompt,
                               const std::vector<ImagePayload>& images) = 0;
};

struct RemoteAnnotatorConfig {
  std::string url;  // full endpoint, e.g. http://host:8080/v1/generate
  std::string model = "gpt-4o";
  std::string auth_env = "ROBUSTLAB_ANNOTATOR_TOKEN";
  int timeout_ms = 30000;
  int max_attempts = 3;
  double requests_per_second = 0.0;  // 0 = uncapped
};

/// HTTP POST {model, prompt, images: [base64 PNG]} -> {"text": ...}, with
/// bearer auth from the configured environment variable, bounded retries,
/// and a shared request-rate cap.
class RemoteAnnotatorClient : public AnnotatorClient {
 public:
  explicit RemoteAnnotatorClient(RemoteAnnotatorConfig config);
  ~RemoteAnnotatorClient() override;
  std::string generate(const std::string& prompt,
                       const std::vector<ImagePayload>& images) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Offline stand-in: fully deterministic given (seed, prompt). Ignores
/// pixels; honors "approximately N words" requests to within 8%.
class MockAnnotatorClient : public AnnotatorClient {
 public:
  explicit MockAnnotatorClient(std::uint64_t seed) : seed_(seed) {}
  std::string generate(const std::string& prompt,
                       const std::vector<ImagePayload>& images) override;

 private:
  std::uint64_t seed_;
};

struct DatasetRecord {
  std::string id;
  std::string original_image_path;
  std::string degraded_image_path;
  DegradationRecipe recipe;
  ReasoningChain chain;
  long target_length = 0;
  std::string split = "train";  // "train" | "val"
};

nlohmann::json record_to_json(const DatasetRecord& record);

struct BuildConfig {
  std::uint64_t seed = 0;
  RecipeSamplingConfig sampling;
  LengthBandConfig bands;
  PromptTemplateSet templates = PromptTemplateSet::defaults();
  double train_fraction = 10.0 / 11.0;
  int parallelism = 4;
  int max_retries = 2;            // extra length-scaling attempts
  std::string output_dir;         // empty = keep degraded images in memory only
  bool attach_original = true;    // send both images for the influence step
};

/// Runs the five annotation steps for one source example. The chain's TYPE
/// entries mirror the sampled recipe (intensities on the 2-decimal grid);
/// the reasoning segment is rescaled until the assembled chain lands within
/// 20% of the intensity-derived target length.
DatasetRecord build_record(const SourceExample& src, RngState& rng, AnnotatorClient& annotator,
                           const BuildConfig& config);

struct BuildFailure {
  std::string id;
  std::string error;
};

struct BuildReport {
  std::size_t total = 0;
  std::size_t built = 0;
  std::size_t failed = 0;
  std::size_t train = 0;
  std::size_t val = 0;
  std::vector<BuildFailure> failures;
  std::array<std::size_t, 10> intensity_histogram{};  // per-spec s, bins of 0.1
  std::map<std::string, std::size_t> band_histogram;
  // Stand-in for perceptual quality validation: per-record
  // (total intensity, MSE distortion) scatter plus its correlation.
  std::vector<std::pair<double, double>> quality_proxy_points;
  double quality_proxy_pearson = 0.0;
};

nlohmann::json report_to_json(const BuildReport& report);

struct BuildResult {
  std::vector<DatasetRecord> records;  // sorted by id
  BuildReport report;
};

/// Builds all records on a bounded thread pool, assigns the seeded
/// hash-based train/val split, and reports per-record failures instead of
/// aborting. Per-record randomness comes from substream(seed, fnv(id)),
/// so output is independent of scheduling.
BuildResult build_dataset(const std::vector<SourceExample>& sources, AnnotatorClient& annotator,
                          const BuildConfig& config);

void write_dataset_jsonl(const std::vector<DatasetRecord>& records, const std::string& path);

}  // namespace robustlab
