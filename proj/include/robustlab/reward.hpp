#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "robustlab/chain.hpp"

namespace robustlab {

enum class MatchMode { Literal, Matched };

/// Degradation-parameter reward.
///
/// Literal: the full cross product over (predicted, truth) pairs —
/// +(1 - |ds|) on a type match, -1 on a mismatch. Matched: maximum-score
/// assignment (brute force, sides up to 8 entries) where matched same-type
/// pairs score (1 - |ds|), matched different-type pairs score -1, and
/// every unmatched entry on either side scores -1.
double reward_deg(std::span<const DegradationSpec> predicted,
                  std::span<const DegradationSpec> truth, MatchMode mode);

/// 1 - |candidate - truth| / truth. Unclamped; negative for candidates
/// more than twice the truth length. Throws ZeroTruthLength.
double reward_len(long candidate_len, long truth_len);

struct RewardBreakdown {
  double r_deg = 0.0;
  double r_len = 0.0;
  double total = 0.0;
};

RewardBreakdown composite_reward(const ReasoningChain& candidate, const ReasoningChain& truth,
                                 MatchMode mode = MatchMode::Literal);

/// Scores raw candidate text against a truth chain. Segments that fail to
/// parse are salvaged leniently; an unparseable TYPE segment scores as an
/// empty prediction.
RewardBreakdown score_candidate_text(std::string_view candidate_text,
                                     const ReasoningChain& truth,
                                     MatchMode mode = MatchMode::Literal);

struct AdvantageGroup {
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> advantages;
};

/// Group-relative advantages: (R - mean) / population stddev. Degenerate
/// groups (stddev <= epsilon) get all-zero advantages. Throws GroupTooSmall
/// for fewer than two rewards.
AdvantageGroup group_advantages(std::span<const double> rewards, double epsilon = 1e-8);

struct BatchScoreStats {
  std::size_t scored = 0;
  std::size_t failed = 0;
  double mean_r_deg = 0.0;
  double mean_r_len = 0.0;
  double mean_total = 0.0;
};

/// Batch scoring over JSONL: each input line pairs a candidate chain text
/// with a truth chain; each output line is {"r_deg","r_len","total"} or
/// {"error": ...}. Throws EmptyInput when no line yields a record.
BatchScoreStats score_batch(std::istream& in, std::ostream& out, MatchMode mode);

}  // namespace robustlab
