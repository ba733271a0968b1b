#include "robustlab/degradation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "robustlab/errors.hpp"

namespace robustlab {

namespace {

struct TypeInfo {
  DegradationType type;
  Stage stage;
  std::string_view name;
};

constexpr std::array<TypeInfo, kDegradationTypeCount> kTypes{{
    {DegradationType::LensBlur, Stage::Acquisition, "lens_blur"},
    {DegradationType::LensFlare, Stage::Acquisition, "lens_flare"},
    {DegradationType::MotionBlur, Stage::Acquisition, "motion_blur"},
    {DegradationType::DirtyLens, Stage::Acquisition, "dirty_lens"},
    {DegradationType::Saturation, Stage::Acquisition, "saturation"},
    {DegradationType::Compression, Stage::Transmission, "compression"},
    {DegradationType::BlockChange, Stage::Transmission, "block_change"},
    {DegradationType::Shifting, Stage::Transmission, "shifting"},
    {DegradationType::ScanLines, Stage::Transmission, "scan_lines"},
    {DegradationType::Darkness, Stage::Environment, "darkness"},
    {DegradationType::AtmosphericTurbulence, Stage::Environment, "atmospheric_turbulence"},
    {DegradationType::Noise, Stage::Environment, "noise"},
    {DegradationType::ColorDiffusion, Stage::Environment, "color_diffusion"},
    {DegradationType::SharpnessChange, Stage::Postprocessing, "sharpness_change"},
    {DegradationType::Graffiti, Stage::Postprocessing, "graffiti"},
    {DegradationType::WatermarkDamage, Stage::Postprocessing, "watermark_damage"},
}};

}  // namespace

Stage stage_of(DegradationType t) { return kTypes[static_cast<int>(t)].stage; }

std::string_view type_name(DegradationType t) { return kTypes[static_cast<int>(t)].name; }

std::optional<DegradationType> type_from_name(std::string_view name) {
  for (const auto& info : kTypes)
    if (info.name == name) return info.type;
  return std::nullopt;
}

const std::array<DegradationType, kDegradationTypeCount>& all_degradation_types() {
  static const auto types = [] {
    std::array<DegradationType, kDegradationTypeCount> a{};
    for (int i = 0; i < kDegradationTypeCount; ++i) a[i] = kTypes[i].type;
    return a;
  }();
  return types;
}

DegradationSpec::DegradationSpec(DegradationType t, double s) : type(t), intensity(s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw InvalidConfig("intensity must be in [0,1], got " + std::to_string(s));
}

DegradationRecipe DegradationRecipe::make(std::vector<DegradationSpec> specs, std::uint64_t seed,
                                          std::size_t max_specs) {
  std::stable_sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) {
    return static_cast<int>(a.type) < static_cast<int>(b.type);
  });
  for (std::size_t i = 1; i < specs.size(); ++i)
    if (specs[i].type == specs[i - 1].type)
      throw InvalidConfig("recipe repeats degradation type " +
                          std::string(type_name(specs[i].type)));
  if (specs.empty() || specs.size() > max_specs)
    throw InvalidConfig("recipe must hold 1.." + std::to_string(max_specs) + " specs");
  DegradationRecipe r;
  r.specs = std::move(specs);
  r.seed = seed;
  return r;
}

double DegradationRecipe::total_intensity() const {
  double sum = 0.0;
  for (const auto& s : specs) sum += s.intensity;
  return sum;
}

nlohmann::json recipe_to_json(const DegradationRecipe& recipe) {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : recipe.specs)
    specs.push_back({{"type", std::string(type_name(s.type))}, {"intensity", s.intensity}});
  return {{"seed", recipe.seed}, {"specs", specs}};
}

DegradationRecipe recipe_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("seed") || !j.contains("specs"))
    throw InvalidConfig("recipe JSON needs {seed, specs}");
  std::vector<DegradationSpec> specs;
  for (const auto& e : j.at("specs")) {
    auto name = e.at("type").get<std::string>();
    auto type = type_from_name(name);
    if (!type) throw InvalidConfig("unknown degradation type: " + name);
    specs.emplace_back(*type, e.at("intensity").get<double>());
  }
  return DegradationRecipe::make(std::move(specs), j.at("seed").get<std::uint64_t>(),
                                 kDegradationTypeCount);
}

RasterImage apply_recipe(const RasterImage& image, const DegradationRecipe& recipe) {
  RasterImage out = image;
  for (std::size_t k = 0; k < recipe.specs.size(); ++k) {
    RngState rng = RngState::substream(recipe.seed, k);
    out = apply_spec(out, recipe.specs[k], rng);
  }
  return out;
}

DegradationRecipe sample_recipe(RngState& rng, const RecipeSamplingConfig& config) {
  std::vector<DegradationType> pool = config.allowed_types;
  if (pool.empty())
    pool.assign(all_degradation_types().begin(), all_degradation_types().end());

  if (config.min_count < 1 || config.min_count > config.max_count ||
      config.max_count > pool.size())
    throw InvalidConfig("need 1 <= min_count <= max_count <= |allowed_types|");

  std::size_t count =
      config.min_count + rng.bounded(config.max_count - config.min_count + 1);

  // Partial Fisher-Yates: type draw then intensity draw, per slot.
  std::vector<DegradationSpec> specs;
  specs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.bounded(pool.size() - i);
    std::swap(pool[i], pool[j]);
    specs.emplace_back(pool[i], rng.u01());
  }
  std::uint64_t seed = rng.next_u64();
  return DegradationRecipe::make(std::move(specs), seed, pool.size());
}

DegradationRecipe scale_recipe(const DegradationRecipe& recipe, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0))
    throw InvalidConfig("intensity scale factor must be in [0,1]");
  DegradationRecipe out = recipe;
  for (auto& s : out.specs) s.intensity *= factor;
  return out;
}

double distortion_score(const RasterImage& original, const RasterImage& degraded) {
  return image_mse(original, degraded);
}

}  // namespace robustlab
