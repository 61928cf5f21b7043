#ifndef SUMCTX_METRICS_HPP
#define SUMCTX_METRICS_HPP

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sumctx/errors.hpp"
#include "sumctx/tokenizer.hpp"

namespace sumctx {

using TokenList = std::vector<std::string>;

enum class Aggregation { Corpus, MacroAverage };
enum class Smoothing { None, AddEpsilon };

// Numerator substitute for zero clipped-match counts under AddEpsilon.
inline constexpr double kBleuEpsilon = 1e-9;

const char* aggregation_name(Aggregation a);
const char* smoothing_name(Smoothing s);
Aggregation aggregation_from_name(const std::string& name);
Smoothing smoothing_from_name(const std::string& name);

// All contiguous n-grams of `tokens` with multiplicity. Keys are the gram
// tokens joined with '\x1f'. Size of the multiset is max(0, len - n + 1).
std::unordered_map<std::string, int> ngram_counts(std::span<const std::string> tokens, int n);

struct Rouge {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Clipped n-gram overlap, n in {1, 2}. Any 0/0 ratio is defined as 0.
Rouge rouge_n(std::span<const std::string> candidate,
              std::span<const std::string> reference, int n);

// Longest common subsequence length (O(len*len) dynamic program).
int lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// LCS-based precision/recall/F1; 0/0 is 0.
Rouge rouge_l(std::span<const std::string> candidate,
              std::span<const std::string> reference);

// BLEU-4 with exactly one reference per candidate.
//
// Corpus aggregation pools clipped match and candidate n-gram counts over
// all pairs, takes the geometric mean of p_1..p_4, and multiplies by the
// brevity penalty min(1, exp(1 - refLen/candLen)) on pooled lengths.
// MacroAverage computes the same formula per pair and averages.
// AddEpsilon replaces a zero match count with 1e-9 in the numerator; under
// None a zero precision makes the score 0. An empty candidate pool scores 0.
double bleu4(std::span<const TokenList> candidates,
             std::span<const TokenList> references,
             Aggregation aggregation, Smoothing smoothing);

struct PerExampleScore {
    double bleu4 = 0.0;
    double rouge1_f = 0.0;
    double rouge2_f = 0.0;
    double rouge_l_f = 0.0;
};

// Self-describing score bundle: every report records how it was computed.
struct MetricReport {
    double bleu4 = 0.0;
    double rouge1_f = 0.0;
    double rouge2_f = 0.0;
    double rouge_l_f = 0.0;
    Aggregation aggregation = Aggregation::Corpus;
    Smoothing smoothing = Smoothing::AddEpsilon;
    int example_count = 0;
    std::optional<std::vector<PerExampleScore>> per_example;

    std::string to_json() const;
};

// Lowercases (ASCII) and whitespace-tokenizes text for metric computation.
TokenList tokenize_for_metrics(std::string_view text);

// Scores candidate/reference text pairs. The tokenizer spec must be
// Whitespace kind: the external protocol only counts tokens and cannot
// split text, so it cannot feed n-gram metrics. ROUGE F1 values are always
// macro-averaged; BLEU follows `aggregation`.
MetricReport evaluate(std::span<const std::pair<std::string, std::string>> pairs,
                      const TokenizerSpec& tokenizer,
                      Aggregation aggregation = Aggregation::Corpus,
                      Smoothing smoothing = Smoothing::AddEpsilon,
                      bool keep_per_example = false);

// Renders a [0,1] score as a percentage with two decimals: 0.037 -> "3.70".
std::string format_percent(double score);

} // namespace sumctx

#endif // SUMCTX_METRICS_HPP
