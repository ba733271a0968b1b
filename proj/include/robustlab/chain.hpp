#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustlab/degradation.hpp"

namespace robustlab {

/// The five-segment structured reasoning chain. Wire order:
/// TYPE -> INFLUENCE -> REASONING -> CONCLUSION -> [ANSWER].
struct ReasoningChain {
  std::vector<DegradationSpec> degradations;  // TYPE segment entries
  std::string influence;                      // perceptual impact
  std::string reasoning;                      // pristine semantic reasoning
  std::string conclusion;
  std::optional<std::string> answer;          // discrete task answer

  bool operator==(const ReasoningChain&) const = default;
};

struct ChainParseError {
  enum class Kind {
    MissingSegment,
    OutOfOrder,
    UnterminatedSegment,
    DuplicateSegment,
    MalformedTypeEntry,
    IntensityOutOfRange,
  };

  Kind kind;
  std::size_t position = 0;  // byte offset within the input
  std::string detail;
};

std::string_view parse_error_kind_name(ChainParseError::Kind kind);

struct ChainParseResult {
  std::optional<ReasoningChain> chain;
  std::optional<ChainParseError> error;

  bool ok() const { return chain.has_value(); }
};

/// Parses model output. Text outside segment tokens is ignored, so chat
/// preamble/epilogue is tolerated. Never throws on any input.
ChainParseResult parse_chain(std::string_view text);

/// Canonical form: segments in order, nothing between them, TYPE entries
/// one per line as "<name>: <intensity to 2 decimals>".
std::string serialize_chain(const ReasoningChain& chain);

/// Whitespace-delimited words across influence + reasoning + conclusion.
/// TYPE and ANSWER are structured outputs and do not count.
long chain_length(const ReasoningChain& chain);

/// Intensity rounded to the serialized 2-decimal grid.
double round_intensity2(double s);

nlohmann::json chain_to_json(const ReasoningChain& chain);
ReasoningChain chain_from_json(const nlohmann::json& j);

/// Best-effort segment extraction for scoring: each segment is pulled
/// independently from its first <S>..<S_END> pair; a TYPE body that fails
/// strict entry parsing yields an empty degradation list.
struct LenientChain {
  std::vector<DegradationSpec> degradations;
  std::string influence;
  std::string reasoning;
  std::string conclusion;
  std::optional<std::string> answer;
};

LenientChain extract_chain_lenient(std::string_view text);

}  // namespace robustlab
