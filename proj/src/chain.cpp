#include "robustlab/chain.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "robustlab/errors.hpp"
#include "robustlab/util.hpp"

namespace robustlab {

namespace {

constexpr int kSegmentCount = 5;
constexpr std::array<std::string_view, kSegmentCount> kSegmentNames{
    "TYPE", "INFLUENCE", "REASONING", "CONCLUSION", "ANSWER"};

std::string open_token(int seg) { return "<" + std::string(kSegmentNames[seg]) + ">"; }
std::string end_token(int seg) { return "<" + std::string(kSegmentNames[seg]) + "_END>"; }

std::size_t count_occurrences(std::string_view text, std::string_view needle,
                              std::size_t* second_pos) {
  std::size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    if (n == 1 && second_pos) *second_pos = pos;
    ++n;
    pos += needle.size();
  }
  return n;
}

struct SegmentSpan {
  bool present = false;
  std::size_t open_pos = 0;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;
};

ChainParseError err(ChainParseError::Kind kind, std::size_t pos, std::string detail) {
  return ChainParseError{kind, pos, std::move(detail)};
}

// Parses one "name: intensity" line. Returns the failing error, or the spec.
std::optional<ChainParseError> parse_type_line(std::string_view line, std::size_t line_pos,
                                               std::vector<DegradationSpec>& out) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos)
    return err(ChainParseError::Kind::MalformedTypeEntry, line_pos,
               "expected '<name>: <intensity>', got '" + std::string(line) + "'");
  auto name = trim_view(line.substr(0, colon));
  auto type = type_from_name(name);
  if (!type)
    return err(ChainParseError::Kind::MalformedTypeEntry, line_pos,
               "unknown degradation name '" + std::string(name) + "'");
  auto value_text = trim(line.substr(colon + 1));
  if (value_text.empty())
    return err(ChainParseError::Kind::MalformedTypeEntry, line_pos, "missing intensity value");
  char* end = nullptr;
  double value = std::strtod(value_text.c_str(), &end);
  if (end != value_text.c_str() + value_text.size())
    return err(ChainParseError::Kind::MalformedTypeEntry, line_pos,
               "intensity is not a number: '" + value_text + "'");
  if (!(value >= 0.0 && value <= 1.0))
    return err(ChainParseError::Kind::IntensityOutOfRange, line_pos,
               "intensity " + value_text + " outside [0,1]");
  out.emplace_back(*type, value);
  return std::nullopt;
}

}  // namespace

std::string_view parse_error_kind_name(ChainParseError::Kind kind) {
  switch (kind) {
    case ChainParseError::Kind::MissingSegment: return "MissingSegment";
    case ChainParseError::Kind::OutOfOrder: return "OutOfOrder";
    case ChainParseError::Kind::UnterminatedSegment: return "UnterminatedSegment";
    case ChainParseError::Kind::DuplicateSegment: return "DuplicateSegment";
    case ChainParseError::Kind::MalformedTypeEntry: return "MalformedTypeEntry";
    case ChainParseError::Kind::IntensityOutOfRange: return "IntensityOutOfRange";
  }
  return "?";
}

ChainParseResult parse_chain(std::string_view text) {
  std::array<SegmentSpan, kSegmentCount> spans;

  for (int seg = 0; seg < kSegmentCount; ++seg) {
    const std::string open = open_token(seg);
    const std::string close = end_token(seg);

    std::size_t dup_pos = 0;
    if (count_occurrences(text, open, &dup_pos) > 1)
      return {std::nullopt, err(ChainParseError::Kind::DuplicateSegment, dup_pos,
                                "repeated " + open)};
    std::size_t close_dup = 0;
    if (count_occurrences(text, close, &close_dup) > 1)
      return {std::nullopt, err(ChainParseError::Kind::DuplicateSegment, close_dup,
                                "repeated " + close)};

    std::size_t open_pos = text.find(open);
    std::size_t close_pos = text.find(close);
    if (open_pos == std::string_view::npos) {
      if (close_pos != std::string_view::npos)
        return {std::nullopt, err(ChainParseError::Kind::OutOfOrder, close_pos,
                                  close + " appears without " + open)};
      continue;
    }
    if (close_pos == std::string_view::npos)
      return {std::nullopt, err(ChainParseError::Kind::UnterminatedSegment, open_pos,
                                open + " is never closed")};
    if (close_pos < open_pos)
      return {std::nullopt, err(ChainParseError::Kind::OutOfOrder, close_pos,
                                close + " appears before " + open)};

    spans[seg].present = true;
    spans[seg].open_pos = open_pos;
    spans[seg].body_begin = open_pos + open.size();
    spans[seg].body_end = close_pos;
  }

  // TYPE..CONCLUSION are required; ANSWER is optional.
  for (int seg = 0; seg < 4; ++seg)
    if (!spans[seg].present)
      return {std::nullopt, err(ChainParseError::Kind::MissingSegment, text.size(),
                                "missing segment " + open_token(seg))};

  int prev = -1;
  for (int seg = 0; seg < kSegmentCount; ++seg) {
    if (!spans[seg].present) continue;
    if (prev >= 0 && spans[seg].open_pos < spans[prev].body_end)
      return {std::nullopt,
              err(ChainParseError::Kind::OutOfOrder, spans[seg].open_pos,
                  open_token(seg) + " must follow " + end_token(prev))};
    prev = seg;
  }

  auto body = [&](int seg) {
    return trim(text.substr(spans[seg].body_begin, spans[seg].body_end - spans[seg].body_begin));
  };

  ReasoningChain chain;
  const std::string type_body = body(0);
  if (type_body.empty())
    return {std::nullopt, err(ChainParseError::Kind::MalformedTypeEntry, spans[0].body_begin,
                              "TYPE segment has no entries")};
  std::size_t line_start = 0;
  while (line_start <= type_body.size()) {
    std::size_t line_end = type_body.find('\n', line_start);
    if (line_end == std::string::npos) line_end = type_body.size();
    auto line = trim_view(std::string_view(type_body).substr(line_start, line_end - line_start));
    if (!line.empty()) {
      if (auto e = parse_type_line(line, spans[0].body_begin + line_start, chain.degradations))
        return {std::nullopt, *e};
    }
    line_start = line_end + 1;
  }

  chain.influence = body(1);
  chain.reasoning = body(2);
  chain.conclusion = body(3);
  if (chain.conclusion.empty())
    return {std::nullopt, err(ChainParseError::Kind::MissingSegment, spans[3].body_begin,
                              "CONCLUSION segment is empty")};
  if (spans[4].present) chain.answer = body(4);
  return {std::move(chain), std::nullopt};
}

double round_intensity2(double s) { return std::floor(s * 100.0 + 0.5) / 100.0; }

namespace {

std::string format_intensity2(double s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

std::string render_type_body(const std::vector<DegradationSpec>& specs) {
  std::string body;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i) body += '\n';
    body += std::string(type_name(specs[i].type)) + ": " + format_intensity2(specs[i].intensity);
  }
  return body;
}

}  // namespace

std::string serialize_chain(const ReasoningChain& chain) {
  std::string out;
  out += "<TYPE>" + render_type_body(chain.degradations) + "<TYPE_END>";
  out += "<INFLUENCE>" + chain.influence + "<INFLUENCE_END>";
  out += "<REASONING>" + chain.reasoning + "<REASONING_END>";
  out += "<CONCLUSION>" + chain.conclusion + "<CONCLUSION_END>";
  if (chain.answer) out += "<ANSWER>" + *chain.answer + "<ANSWER_END>";
  return out;
}

long chain_length(const ReasoningChain& chain) {
  return word_count(chain.influence) + word_count(chain.reasoning) +
         word_count(chain.conclusion);
}

nlohmann::json chain_to_json(const ReasoningChain& chain) {
  nlohmann::json degradations = nlohmann::json::array();
  for (const auto& s : chain.degradations)
    degradations.push_back({{"type", std::string(type_name(s.type))}, {"intensity", s.intensity}});
  nlohmann::json j{{"degradations", degradations},
                   {"influence", chain.influence},
                   {"reasoning", chain.reasoning},
                   {"conclusion", chain.conclusion},
                   {"answer", nullptr}};
  if (chain.answer) j["answer"] = *chain.answer;
  return j;
}

ReasoningChain chain_from_json(const nlohmann::json& j) {
  ReasoningChain chain;
  for (const auto& e : j.at("degradations")) {
    auto name = e.at("type").get<std::string>();
    auto type = type_from_name(name);
    if (!type) throw InvalidConfig("unknown degradation type: " + name);
    chain.degradations.emplace_back(*type, e.at("intensity").get<double>());
  }
  chain.influence = j.value("influence", std::string());
  chain.reasoning = j.value("reasoning", std::string());
  chain.conclusion = j.value("conclusion", std::string());
  if (j.contains("answer") && !j.at("answer").is_null())
    chain.answer = j.at("answer").get<std::string>();
  return chain;
}

LenientChain extract_chain_lenient(std::string_view text) {
  auto extract = [&](int seg) -> std::optional<std::string> {
    const std::string open = open_token(seg), close = end_token(seg);
    auto open_pos = text.find(open);
    if (open_pos == std::string_view::npos) return std::nullopt;
    auto close_pos = text.find(close, open_pos + open.size());
    if (close_pos == std::string_view::npos) return std::nullopt;
    return trim(text.substr(open_pos + open.size(), close_pos - open_pos - open.size()));
  };

  LenientChain out;
  if (auto type_body = extract(0)) {
    std::vector<DegradationSpec> specs;
    bool ok = !trim_view(*type_body).empty();
    std::size_t line_start = 0;
    while (ok && line_start <= type_body->size()) {
      std::size_t line_end = type_body->find('\n', line_start);
      if (line_end == std::string::npos) line_end = type_body->size();
      auto line = trim_view(std::string_view(*type_body).substr(line_start, line_end - line_start));
      if (!line.empty() && parse_type_line(line, 0, specs)) ok = false;
      line_start = line_end + 1;
    }
    if (ok) out.degradations = std::move(specs);
  }
  out.influence = extract(1).value_or("");
  out.reasoning = extract(2).value_or("");
  out.conclusion = extract(3).value_or("");
  out.answer = extract(4);
  return out;
}

}  // namespace robustlab
