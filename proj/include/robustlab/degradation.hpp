#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustlab/image.hpp"
#include "robustlab/rng.hpp"

namespace robustlab {

// Pipeline stages, in application order.
enum class Stage { Acquisition, Transmission, Environment, Postprocessing };

// The 16 degradation operators, declared in stage order so that sorting by
// enum value yields the canonical recipe order.
enum class DegradationType {
  // Acquisition
  LensBlur,
  LensFlare,
  MotionBlur,
  DirtyLens,
  Saturation,
  // Transmission
  Compression,
  BlockChange,
  Shifting,
  ScanLines,
  // Environment
  Darkness,
  AtmosphericTurbulence,
  Noise,
  ColorDiffusion,
  // Postprocessing
  SharpnessChange,
  Graffiti,
  WatermarkDamage,
};

inline constexpr int kDegradationTypeCount = 16;

Stage stage_of(DegradationType t);
std::string_view type_name(DegradationType t);  // canonical snake_case
std::optional<DegradationType> type_from_name(std::string_view name);
const std::array<DegradationType, kDegradationTypeCount>& all_degradation_types();

/// One (type, intensity) pair, intensity in [0, 1].
struct DegradationSpec {
  DegradationType type;
  double intensity;

  DegradationSpec(DegradationType t, double s);

  bool operator==(const DegradationSpec&) const = default;
};

/// An ordered multi-degradation composition plus the seed that drives all
/// of its randomness. Specs are unique by type and sorted in stage order.
struct DegradationRecipe {
  std::vector<DegradationSpec> specs;
  std::uint64_t seed = 0;

  // Sorts, then validates uniqueness and 1..max_specs length.
  static DegradationRecipe make(std::vector<DegradationSpec> specs, std::uint64_t seed,
                                std::size_t max_specs = 4);

  double total_intensity() const;

  bool operator==(const DegradationRecipe&) const = default;
};

nlohmann::json recipe_to_json(const DegradationRecipe& recipe);
DegradationRecipe recipe_from_json(const nlohmann::json& j);

struct RecipeSamplingConfig {
  std::size_t min_count = 1;
  std::size_t max_count = 3;
  std::vector<DegradationType> allowed_types;  // empty = all 16
};

/// Applies one operator. Identity (bit-exact copy) at intensity 0; all
/// randomness comes from `rng`. Throws UnsupportedImageSize below 8x8.
RasterImage apply_spec(const RasterImage& image, const DegradationSpec& spec, RngState& rng);

/// Applies every spec in stage order; spec k draws from the sub-stream
/// RngState::substream(recipe.seed, k).
RasterImage apply_recipe(const RasterImage& image, const DegradationRecipe& recipe);

/// Uniform count in [min,max], types without replacement, intensities
/// i.i.d. U[0,1]; the recipe seed is drawn from `rng`. Throws InvalidConfig.
DegradationRecipe sample_recipe(RngState& rng, const RecipeSamplingConfig& config);

/// Every intensity multiplied by `factor` (the evaluation 25%/50%/100%
/// scaling); the seed is kept so only intensity varies.
DegradationRecipe scale_recipe(const DegradationRecipe& recipe, double factor);

/// Mean squared sample error. 0 iff bit-identical; symmetric.
double distortion_score(const RasterImage& original, const RasterImage& degraded);

}  // namespace robustlab
