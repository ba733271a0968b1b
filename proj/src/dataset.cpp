#include "robustlab/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "robustlab/errors.hpp"
#include "robustlab/image.hpp"
#include "robustlab/util.hpp"

namespace robustlab {

namespace fs = std::filesystem;

std::vector<SourceExample> load_source_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path);
  std::vector<SourceExample> sources;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    SourceExample src;
    src.id = j.at("id").get<std::string>();
    src.image_path = j.at("image_path").get<std::string>();
    src.question = j.at("question").get<std::string>();
    src.answer = j.at("answer").get<std::string>();
    if (j.contains("choices") && !j.at("choices").is_null())
      src.choices = j.at("choices").get<std::vector<std::string>>();
    if (src.id.empty()) throw Error(path + ":" + std::to_string(line_no) + ": empty id");
    if (src.answer.empty())
      throw Error(path + ":" + std::to_string(line_no) + ": empty answer for " + src.id);
    sources.push_back(std::move(src));
  }
  return sources;
}

std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  const std::string& body = tmpl.body;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find('{', pos);
    if (open == std::string::npos) {
      out.append(body, pos, std::string::npos);
      break;
    }
    out.append(body, pos, open - pos);
    auto close = body.find('}', open);
    if (close == std::string::npos) throw InvalidConfig("unterminated placeholder in template");
    std::string key = body.substr(open + 1, close - open - 1);
    auto it = values.find(key);
    if (it == values.end()) throw InvalidConfig("template placeholder {" + key + "} has no value");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

PromptTemplateSet PromptTemplateSet::defaults() {
  PromptTemplateSet t;
  t.influence = {TemplateName::Influence,
                 "You are annotating a degraded photograph. The pristine image is attached as "
                 "{original_image} and the degraded image as {degraded_image}. The applied "
                 "degradations are: {recipe}. The reference answer for the underlying question "
                 "is: {answer}. Describe in plain prose how these degradations alter what a "
                 "viewer can perceive and which visual evidence becomes unreliable. Reply with "
                 "the description only."};
  t.reasoning = {TemplateName::Reasoning,
                 "The degraded image is attached as {degraded_image}. It carries these "
                 "degradations: {recipe}. Their perceptual impact: {influence}. Reconstruct the "
                 "reasoning one would follow on the pristine image to arrive at the answer "
                 "'{answer}', compensating for the degradations. Reply with the reasoning only."};
  t.conclusion = {TemplateName::Conclusion,
                  "Given this pristine reasoning: {reasoning}\nState a conclusion that supports "
                  "the answer '{answer}' in one or two sentences. Reply with the conclusion "
                  "only."};
  t.len_short = {TemplateName::LenShort,
                 "The degradations here are mild, so keep the chain brisk. Rewrite the following "
                 "reasoning to approximately {target_words} words, keeping every load-bearing "
                 "step.\n\nReasoning: {reasoning}\n\nReply with the rewritten reasoning only."};
  t.len_medium = {TemplateName::LenMedium,
                  "The degradations here are moderate. Rewrite the following reasoning to "
                  "approximately {target_words} words, keeping every load-bearing step.\n\n"
                  "Reasoning: {reasoning}\n\nReply with the rewritten reasoning only."};
  t.len_long = {TemplateName::LenLong,
                "The degradations here are severe, so spell out intermediate steps. Rewrite the "
                "following reasoning to approximately {target_words} words.\n\nReasoning: "
                "{reasoning}\n\nReply with the rewritten reasoning only."};
  return t;
}

namespace {

void require_placeholders(const PromptTemplate& tmpl, std::initializer_list<const char*> keys,
                          const char* which) {
  for (const char* key : keys)
    if (tmpl.body.find("{" + std::string(key) + "}") == std::string::npos)
      throw InvalidConfig(std::string(which) + " template is missing {" + key + "}");
}

}  // namespace

void PromptTemplateSet::validate() const {
  require_placeholders(influence, {"degraded_image", "recipe", "answer"}, "influence");
  require_placeholders(reasoning, {"degraded_image", "recipe", "influence", "answer"},
                       "reasoning");
  require_placeholders(conclusion, {"reasoning", "answer"}, "conclusion");
  require_placeholders(len_short, {"reasoning", "target_words"}, "len_short");
  require_placeholders(len_medium, {"reasoning", "target_words"}, "len_medium");
  require_placeholders(len_long, {"reasoning", "target_words"}, "len_long");
}

std::string_view band_name(LengthBand band) {
  switch (band) {
    case LengthBand::Short: return "SHORT";
    case LengthBand::Medium: return "MEDIUM";
    case LengthBand::Long: return "LONG";
  }
  return "?";
}

TargetLength target_length(double total_intensity, const LengthBandConfig& bands) {
  if (total_intensity < bands.medium_threshold) return {LengthBand::Short, bands.short_words};
  if (total_intensity < bands.long_threshold) return {LengthBand::Medium, bands.medium_words};
  return {LengthBand::Long, bands.long_words};
}

// --- Remote annotator ------------------------------------------------------

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidConfig("annotator url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Minimum-interval limiter shared by all worker threads.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second) {
    if (requests_per_second > 0.0)
      interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / requests_per_second));
  }

  void acquire() {
    if (interval_.count() == 0) return;
    std::chrono::steady_clock::time_point wake;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto now = std::chrono::steady_clock::now();
      next_ = std::max(next_, now);
      wake = next_;
      next_ += interval_;
    }
    std::this_thread::sleep_until(wake);
  }

 private:
  std::chrono::steady_clock::duration interval_{};
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace

struct RemoteAnnotatorClient::Impl {
  RemoteAnnotatorConfig config;
  SplitUrl url;
  RateLimiter limiter;

  Impl(RemoteAnnotatorConfig cfg)
      : config(std::move(cfg)), url(split_url(config.url)), limiter(config.requests_per_second) {}
};

RemoteAnnotatorClient::RemoteAnnotatorClient(RemoteAnnotatorConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteAnnotatorClient::~RemoteAnnotatorClient() = default;

std::string RemoteAnnotatorClient::generate(const std::string& prompt,
                                            const std::vector<ImagePayload>& images) {
  nlohmann::json body{{"model", impl_->config.model}, {"prompt", prompt}};
  nlohmann::json imgs = nlohmann::json::array();
  for (const auto& img : images) imgs.push_back(base64_encode(img.bytes));
  body["images"] = std::move(imgs);
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* token = std::getenv(impl_->config.auth_env.c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);

  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt < std::max(1, impl_->config.max_attempts); ++attempt) {
    impl_->limiter.acquire();
    httplib::Client cli(impl_->url.base);
    cli.set_connection_timeout(std::chrono::milliseconds(impl_->config.timeout_ms));
    cli.set_read_timeout(std::chrono::milliseconds(impl_->config.timeout_ms));
    auto res = cli.Post(impl_->url.path, headers, payload, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw AnnotatorUnavailable("annotator rejected request: HTTP " +
                                 std::to_string(res->status));
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("text").get<std::string>();
    } catch (const std::exception& e) {
      throw AnnotatorUnavailable(std::string("annotator response is not {\"text\": ...}: ") +
                                 e.what());
    }
  }
  throw AnnotatorUnavailable("annotator unreachable after " +
                             std::to_string(impl_->config.max_attempts) +
                             " attempts: " + last_error);
}

// --- Mock annotator --------------------------------------------------------

namespace {

// Filler lexicon for synthesized segments.
constexpr std::string_view kLexicon[] = {
    "the",      "scene",   "shows",    "texture",  "edges",     "contrast", "regions",
    "detail",   "visible", "outline",  "subject",  "lighting",  "color",    "pattern",
    "evidence", "remains", "despite",  "partial",  "occlusion", "overall",  "structure",
    "suggests", "content", "reliable", "cues",     "support",   "reading",  "carefully",
    "between",  "areas",
};

std::optional<long> requested_word_count(const std::string& prompt) {
  // Look for "approximately <N> words".
  auto pos = prompt.find("approximately ");
  while (pos != std::string::npos) {
    std::size_t num_start = pos + 14;
    std::size_t num_end = num_start;
    while (num_end < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[num_end])))
      ++num_end;
    if (num_end > num_start && prompt.compare(num_end, 6, " words") == 0)
      return std::stol(prompt.substr(num_start, num_end - num_start));
    pos = prompt.find("approximately ", pos + 1);
  }
  return std::nullopt;
}

}  // namespace

std::string MockAnnotatorClient::generate(const std::string& prompt,
                                          const std::vector<ImagePayload>& images) {
  (void)images;  // the mock never looks at pixels
  RngState rng = RngState::substream(seed_, fnv1a64(prompt));

  long words;
  if (auto target = requested_word_count(prompt)) {
    // Within +-8% of the requested count so assembled chains stay inside
    // the builder's 20% window.
    long jitter = static_cast<long>(round_half_up((rng.u01() * 2.0 - 1.0) * 0.08 *
                                                  static_cast<double>(*target)));
    words = std::max<long>(1, *target + jitter);
  } else {
    words = 18 + static_cast<long>(rng.bounded(8));
  }

  // Mention degradation names that appear in the prompt.
  std::vector<std::string> mentions;
  for (auto type : all_degradation_types()) {
    auto name = type_name(type);
    if (prompt.find(std::string(name)) != std::string::npos)
      mentions.emplace_back(name);
  }

  std::string out;
  constexpr std::size_t lexicon_size = sizeof(kLexicon) / sizeof(kLexicon[0]);
  for (long i = 0; i < words; ++i) {
    if (i) out += ' ';
    if (!mentions.empty() && rng.u01() < 0.08)
      out += mentions[rng.bounded(mentions.size())];
    else
      out += kLexicon[rng.bounded(lexicon_size)];
  }
  return out;
}

// --- Record building -------------------------------------------------------

namespace {

std::string sanitize_for_path(const std::string& id) {
  std::string out;
  bool changed = false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
    changed |= !ok;
  }
  if (changed) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "_%08llx",
                  static_cast<unsigned long long>(fnv1a64(id) & 0xFFFFFFFFULL));
    out += buf;
  }
  return out;
}

std::string recipe_prose(const DegradationRecipe& recipe) {
  std::string out;
  for (std::size_t i = 0; i < recipe.specs.size(); ++i) {
    if (i) out += ", ";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", recipe.specs[i].intensity);
    out += std::string(type_name(recipe.specs[i].type)) + " (" + buf + ")";
  }
  return out;
}

std::string validated(std::string response, const char* step) {
  // Annotators must return plain segment text; assembly adds the tokens.
  static constexpr std::string_view kTokens[] = {"<TYPE>", "<INFLUENCE>", "<REASONING>",
                                                 "<CONCLUSION>", "<ANSWER>"};
  for (auto tok : kTokens)
    if (response.find(tok) != std::string::npos)
      throw Error(std::string(step) + " response contains segment token " + std::string(tok));
  std::string trimmed = trim(response);
  if (trimmed.empty()) throw Error(std::string(step) + " response is empty");
  return trimmed;
}

bool has_discrete_answer(const SourceExample& src) {
  return !src.choices.empty() || word_count(src.answer) <= 5;
}

DatasetRecord build_record_impl(const SourceExample& src, RngState& rng,
                                AnnotatorClient& annotator, const BuildConfig& config,
                                double* mse_out) {
  RasterImage original = read_png(src.image_path);

  // Step 1: synthesize the degradation.
  DegradationRecipe recipe = sample_recipe(rng, config.sampling);
  RasterImage degraded = apply_recipe(original, recipe);
  if (mse_out) *mse_out = distortion_score(original, degraded);

  std::string degraded_path;
  if (!config.output_dir.empty()) {
    fs::path dir = fs::path(config.output_dir) / "images";
    fs::create_directories(dir);
    degraded_path = (dir / (sanitize_for_path(src.id) + ".png")).string();
    write_png(degraded, degraded_path);
  }

  std::vector<ImagePayload> degraded_only;
  degraded_only.push_back({"image/png", encode_png(degraded)});
  std::vector<ImagePayload> both;
  if (config.attach_original) both.push_back({"image/png", encode_png(original)});
  both.push_back({"image/png", encode_png(degraded)});

  const std::string recipe_text = recipe_prose(recipe);

  // Step 2: degradation influence.
  std::string influence = validated(
      annotator.generate(render_template(config.templates.influence,
                                         {{"original_image", "[image 1]"},
                                          {"degraded_image", config.attach_original ? "[image 2]"
                                                                                    : "[image 1]"},
                                          {"recipe", recipe_text},
                                          {"answer", src.answer}}),
                         both),
      "influence");

  // Step 3: pristine semantic reasoning.
  std::string reasoning = validated(
      annotator.generate(render_template(config.templates.reasoning,
                                         {{"degraded_image", "[image 1]"},
                                          {"recipe", recipe_text},
                                          {"influence", influence},
                                          {"answer", src.answer}}),
                         degraded_only),
      "reasoning");

  // Step 4: conclusion.
  std::string conclusion = validated(
      annotator.generate(render_template(config.templates.conclusion,
                                         {{"reasoning", reasoning}, {"answer", src.answer}}),
                         {}),
      "conclusion");

  // Step 5: scale the chain to the intensity-derived length budget by
  // rewriting the reasoning segment (the other segments stay fixed).
  TargetLength target = target_length(recipe.total_intensity(), config.bands);
  const PromptTemplate& len_template = target.band == LengthBand::Short  ? config.templates.len_short
                                       : target.band == LengthBand::Medium
                                           ? config.templates.len_medium
                                           : config.templates.len_long;

  ReasoningChain chain;
  for (const auto& spec : recipe.specs)
    chain.degradations.emplace_back(spec.type, round_intensity2(spec.intensity));
  chain.influence = influence;
  chain.conclusion = conclusion;
  if (has_discrete_answer(src)) chain.answer = src.answer;

  long fixed_words = word_count(influence) + word_count(conclusion);
  long reasoning_target = std::max<long>(8, target.words - fixed_words);

  bool accepted = false;
  for (int attempt = 0; attempt <= config.max_retries && !accepted; ++attempt) {
    std::string prompt = render_template(
        len_template,
        {{"reasoning", reasoning}, {"target_words", std::to_string(reasoning_target)}});
    if (attempt > 0) prompt += "\n(attempt " + std::to_string(attempt + 1) + ")";
    chain.reasoning = validated(annotator.generate(prompt, {}), "length scaling");
    long len = chain_length(chain);
    accepted = std::fabs(static_cast<double>(len) - target.words) <= 0.2 * target.words;
  }
  if (!accepted)
    throw AnnotationLengthViolation("chain length " + std::to_string(chain_length(chain)) +
                                    " missed target " + std::to_string(target.words) + " after " +
                                    std::to_string(config.max_retries + 1) + " attempts");

  DatasetRecord record;
  record.id = src.id;
  record.original_image_path = src.image_path;
  record.degraded_image_path = degraded_path;
  record.recipe = recipe;
  record.chain = std::move(chain);
  record.target_length = target.words;
  return record;
}

}  // namespace

DatasetRecord build_record(const SourceExample& src, RngState& rng, AnnotatorClient& annotator,
                           const BuildConfig& config) {
  return build_record_impl(src, rng, annotator, config, nullptr);
}

nlohmann::json record_to_json(const DatasetRecord& record) {
  return {{"id", record.id},
          {"original_image_path", record.original_image_path},
          {"degraded_image_path", record.degraded_image_path},
          {"recipe", recipe_to_json(record.recipe)},
          {"chain", chain_to_json(record.chain)},
          {"chain_text", serialize_chain(record.chain)},
          {"target_length", record.target_length},
          {"split", record.split}};
}

nlohmann::json report_to_json(const BuildReport& report) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : report.failures) failures.push_back({{"id", f.id}, {"error", f.error}});
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [s, mse] : report.quality_proxy_points) points.push_back({s, mse});
  return {{"counts",
           {{"total", report.total},
            {"built", report.built},
            {"failed", report.failed},
            {"train", report.train},
            {"val", report.val}}},
          {"failures", failures},
          {"intensity_histogram", report.intensity_histogram},
          {"band_histogram", report.band_histogram},
          {"quality_proxy",
           {{"note",
             "MSE-vs-total-intensity scatter; stand-in for perceptual quality "
             "validation"},
            {"points", points},
            {"pearson_r", report.quality_proxy_pearson}}}};
}

BuildResult build_dataset(const std::vector<SourceExample>& sources, AnnotatorClient& annotator,
                          const BuildConfig& config) {
  if (sources.empty()) throw InvalidConfig("build_dataset: no sources");
  config.templates.validate();

  std::vector<SourceExample> ordered = sources;
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i].id == ordered[i - 1].id)
      throw InvalidConfig("duplicate source id: " + ordered[i].id);

  struct Outcome {
    std::optional<DatasetRecord> record;
    double mse = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(ordered.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= ordered.size()) return;
      RngState rng = RngState::substream(config.seed, fnv1a64(ordered[i].id));
      try {
        outcomes[i].record =
            build_record_impl(ordered[i], rng, annotator, config, &outcomes[i].mse);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };

  std::size_t pool = std::max(1, config.parallelism);
  pool = std::min(pool, ordered.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  BuildResult result;
  result.report.total = ordered.size();

  std::vector<DatasetRecord> records;
  std::vector<double> record_mse;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (outcomes[i].record) {
      records.push_back(std::move(*outcomes[i].record));
      record_mse.push_back(outcomes[i].mse);
    } else {
      result.report.failures.push_back({ordered[i].id, outcomes[i].error});
    }
  }
  result.report.built = records.size();
  result.report.failed = result.report.failures.size();

  // Seeded hash split over successful ids: rank by substream key, first
  // round(fraction * n) go to train.
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ka = splitmix64_at(config.seed, fnv1a64(records[a].id));
    auto kb = splitmix64_at(config.seed, fnv1a64(records[b].id));
    return ka != kb ? ka < kb : records[a].id < records[b].id;
  });
  auto n_train = static_cast<std::size_t>(std::llround(
      config.train_fraction * static_cast<double>(records.size())));
  n_train = std::min(n_train, records.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    records[order[rank]].split = rank < n_train ? "train" : "val";

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.split == "train")
      ++result.report.train;
    else
      ++result.report.val;
    for (const auto& spec : rec.recipe.specs) {
      int bin = std::min(9, static_cast<int>(spec.intensity * 10.0));
      ++result.report.intensity_histogram[static_cast<std::size_t>(bin)];
    }
    auto band = target_length(rec.recipe.total_intensity(), config.bands).band;
    ++result.report.band_histogram[std::string(band_name(band))];
    result.report.quality_proxy_points.emplace_back(rec.recipe.total_intensity(), record_mse[i]);
  }

  // Pearson correlation of the quality proxy scatter.
  const auto& pts = result.report.quality_proxy_points;
  if (pts.size() >= 2) {
    double mx = 0, my = 0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (const auto& [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
      syy += (y - my) * (y - my);
    }
    if (sxx > 0 && syy > 0) result.report.quality_proxy_pearson = sxy / std::sqrt(sxx * syy);
  }

  result.records = std::move(records);
  return result;
}

void write_dataset_jsonl(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

}  // namespace robustlab
