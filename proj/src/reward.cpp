#include "robustlab/reward.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "robustlab/errors.hpp"
#include "robustlab/util.hpp"

namespace robustlab {

namespace {

double pair_score(const DegradationSpec& a, const DegradationSpec& b) {
  if (a.type != b.type) return -1.0;
  return 1.0 - std::fabs(a.intensity - b.intensity);
}

double literal_score(std::span<const DegradationSpec> predicted,
                     std::span<const DegradationSpec> truth) {
  double sum = 0.0;
  for (const auto& p : predicted)
    for (const auto& t : truth) sum += pair_score(p, t);
  return sum;
}

// Best assignment of the smaller side into the larger, found by exhaustive
// injective enumeration. Matching a pair always beats leaving both entries
// unmatched (>= -1 versus -2), so full matchings dominate partial ones.
double matched_score(std::span<const DegradationSpec> small_side,
                     std::span<const DegradationSpec> large_side) {
  const std::size_t n = small_side.size(), m = large_side.size();
  if (n == 0) return -static_cast<double>(m);

  std::vector<bool> used(m, false);
  double best = -1e300;
  double unmatched_penalty = -static_cast<double>(m - n);

  auto recurse = [&](auto&& self, std::size_t i, double acc) -> void {
    if (i == n) {
      best = std::max(best, acc + unmatched_penalty);
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j]) continue;
      used[j] = true;
      self(self, i + 1, acc + pair_score(small_side[i], large_side[j]));
      used[j] = false;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

}  // namespace

double reward_deg(std::span<const DegradationSpec> predicted,
                  std::span<const DegradationSpec> truth, MatchMode mode) {
  if (truth.empty()) throw Error("reward_deg: truth must be non-empty");
  if (mode == MatchMode::Literal) return literal_score(predicted, truth);

  if (std::max(predicted.size(), truth.size()) > 8)
    throw TooManyEntries("matched mode supports at most 8 entries per side");
  if (predicted.size() <= truth.size()) return matched_score(predicted, truth);
  return matched_score(truth, predicted);
}

double reward_len(long candidate_len, long truth_len) {
  if (truth_len < 1) throw ZeroTruthLength("reward_len: truth length must be >= 1");
  return 1.0 - std::fabs(static_cast<double>(candidate_len) - static_cast<double>(truth_len)) /
                   static_cast<double>(truth_len);
}

RewardBreakdown composite_reward(const ReasoningChain& candidate, const ReasoningChain& truth,
                                 MatchMode mode) {
  RewardBreakdown b;
  b.r_deg = reward_deg(candidate.degradations, truth.degradations, mode);
  b.r_len = reward_len(chain_length(candidate), chain_length(truth));
  b.total = b.r_deg + b.r_len;
  return b;
}

RewardBreakdown score_candidate_text(std::string_view candidate_text, const ReasoningChain& truth,
                                     MatchMode mode) {
  LenientChain lenient = extract_chain_lenient(candidate_text);
  ReasoningChain candidate;
  candidate.degradations = std::move(lenient.degradations);
  candidate.influence = std::move(lenient.influence);
  candidate.reasoning = std::move(lenient.reasoning);
  candidate.conclusion = std::move(lenient.conclusion);
  candidate.answer = std::move(lenient.answer);
  return composite_reward(candidate, truth, mode);
}

AdvantageGroup group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2)
    throw GroupTooSmall("group_advantages: need at least 2 rewards, got " +
                        std::to_string(rewards.size()));

  AdvantageGroup g;
  g.rewards.assign(rewards.begin(), rewards.end());

  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;

  double sq = 0.0;
  for (double r : rewards) sq += (r - g.mean) * (r - g.mean);
  g.stddev = std::sqrt(sq / n);

  g.advantages.resize(rewards.size(), 0.0);
  if (g.stddev > epsilon)
    for (std::size_t i = 0; i < rewards.size(); ++i)
      g.advantages[i] = (rewards[i] - g.mean) / g.stddev;
  return g;
}

namespace {

// Accepts a line as chain text (JSON string), {"candidate"/"truth": text},
// or a structured chain record.
ReasoningChain truth_from_json(const nlohmann::json& j) {
  const nlohmann::json* node = &j;
  if (j.is_object() && j.contains("truth")) node = &j.at("truth");
  if (node->is_string()) {
    auto parsed = parse_chain(node->get<std::string>());
    if (!parsed.ok())
      throw Error("truth chain does not parse: " +
                  std::string(parse_error_kind_name(parsed.error->kind)) + " (" +
                  parsed.error->detail + ")");
    return *parsed.chain;
  }
  return chain_from_json(*node);
}

std::string candidate_from_json(const nlohmann::json& j) {
  const nlohmann::json* node = &j;
  if (j.is_object() && j.contains("candidate")) node = &j.at("candidate");
  if (node->is_string()) return node->get<std::string>();
  return serialize_chain(chain_from_json(*node));
}

}  // namespace

BatchScoreStats score_batch(std::istream& in, std::ostream& out, MatchMode mode) {
  BatchScoreStats stats;
  double sum_deg = 0.0, sum_len = 0.0, sum_total = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim_view(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("candidate") || !j.contains("truth"))
        throw Error("line must be {\"candidate\": ..., \"truth\": ...}");
      ReasoningChain truth = truth_from_json(j.at("truth"));
      if (truth.degradations.empty()) throw Error("truth has no degradations");
      if (chain_length(truth) < 1) throw Error("truth chain length is 0");
      RewardBreakdown b = score_candidate_text(candidate_from_json(j.at("candidate")), truth, mode);
      out << nlohmann::json{{"r_deg", b.r_deg}, {"r_len", b.r_len}, {"total", b.total}}.dump()
          << '\n';
      sum_deg += b.r_deg;
      sum_len += b.r_len;
      sum_total += b.total;
      ++stats.scored;
    } catch (const std::exception& e) {
      out << nlohmann::json{{"error", e.what()}}.dump() << '\n';
      ++stats.failed;
    }
  }
  if (stats.scored + stats.failed == 0) throw EmptyInput("no scoring records in input");
  if (stats.scored > 0) {
    stats.mean_r_deg = sum_deg / static_cast<double>(stats.scored);
    stats.mean_r_len = sum_len / static_cast<double>(stats.scored);
    stats.mean_total = sum_total / static_cast<double>(stats.scored);
  }
  return stats;
}

}  // namespace robustlab
