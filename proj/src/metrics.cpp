#include "sumctx/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "sumctx/text_util.hpp"

namespace sumctx {

using nlohmann::json;

const char* aggregation_name(Aggregation a) {
    return a == Aggregation::Corpus ? "corpus" : "macro_average";
}

const char* smoothing_name(Smoothing s) {
    return s == Smoothing::None ? "none" : "add_epsilon";
}

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "corpus") return Aggregation::Corpus;
    if (name == "macro_average" || name == "macro") return Aggregation::MacroAverage;
    throw ArgumentError("unknown aggregation \"" + name + "\"");
}

Smoothing smoothing_from_name(const std::string& name) {
    if (name == "none") return Smoothing::None;
    if (name == "add_epsilon" || name == "epsilon") return Smoothing::AddEpsilon;
    throw ArgumentError("unknown smoothing \"" + name + "\"");
}

namespace {

// Joins gram tokens with a separator that cannot appear inside a token
// produced by whitespace splitting.
constexpr char kGramSep = '\x1f';

std::string gram_key(std::span<const std::string> tokens, std::size_t start, int n) {
    std::string key;
    for (int k = 0; k < n; ++k) {
        if (k > 0) key += kGramSep;
        key += tokens[start + static_cast<std::size_t>(k)];
    }
    return key;
}

// Clipped matches and candidate gram total for one order.
struct OrderCounts {
    long long matched = 0;
    long long total = 0;
};

OrderCounts clipped_counts(std::span<const std::string> candidate,
                           std::span<const std::string> reference, int n) {
    OrderCounts counts;
    const long long cand_grams =
        std::max<long long>(0, static_cast<long long>(candidate.size()) - n + 1);
    counts.total = cand_grams;
    if (cand_grams == 0) return counts;
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    for (const auto& [gram, count] : cand) {
        const auto it = ref.find(gram);
        if (it != ref.end()) counts.matched += std::min(count, it->second);
    }
    return counts;
}

double bleu_from_pooled(const std::array<OrderCounts, 4>& orders, long long cand_len,
                        long long ref_len, Smoothing smoothing) {
    if (cand_len == 0) return 0.0;
    double log_sum = 0.0;
    for (const OrderCounts& oc : orders) {
        double numerator = static_cast<double>(oc.matched);
        if (oc.matched == 0) {
            if (smoothing == Smoothing::None) return 0.0;
            numerator = kBleuEpsilon;
        }
        const double denominator = static_cast<double>(std::max<long long>(oc.total, 1));
        log_sum += std::log(numerator / denominator);
    }
    const double bp =
        std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
    return bp * std::exp(log_sum / 4.0);
}

double f1(double precision, double recall) {
    const double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

} // namespace

std::unordered_map<std::string, int> ngram_counts(std::span<const std::string> tokens, int n) {
    if (n < 1) throw ArgumentError("n-gram order must be at least 1");
    std::unordered_map<std::string, int> counts;
    if (static_cast<std::size_t>(n) > tokens.size()) return counts;
    const std::size_t windows = tokens.size() - static_cast<std::size_t>(n) + 1;
    counts.reserve(windows);
    for (std::size_t i = 0; i < windows; ++i) ++counts[gram_key(tokens, i, n)];
    return counts;
}

Rouge rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
              int n) {
    if (n != 1 && n != 2) throw ArgumentError("rouge_n supports n in {1, 2}");
    const OrderCounts counts = clipped_counts(candidate, reference, n);
    const long long ref_grams =
        std::max<long long>(0, static_cast<long long>(reference.size()) - n + 1);
    Rouge r;
    r.precision = counts.total > 0 ? static_cast<double>(counts.matched) / counts.total : 0.0;
    r.recall = ref_grams > 0 ? static_cast<double>(counts.matched) / ref_grams : 0.0;
    r.f1 = f1(r.precision, r.recall);
    return r;
}

int lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<int> prev(b.size() + 1, 0);
    std::vector<int> curr(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                curr[j] = prev[j - 1] + 1;
            else
                curr[j] = std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

Rouge rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    const int lcs = lcs_length(candidate, reference);
    Rouge r;
    r.precision = candidate.empty() ? 0.0 : static_cast<double>(lcs) / candidate.size();
    r.recall = reference.empty() ? 0.0 : static_cast<double>(lcs) / reference.size();
    r.f1 = f1(r.precision, r.recall);
    return r;
}

double bleu4(std::span<const TokenList> candidates, std::span<const TokenList> references,
             Aggregation aggregation, Smoothing smoothing) {
    if (candidates.size() != references.size())
        throw ArgumentError("bleu4 needs exactly one reference per candidate (got " +
                            std::to_string(candidates.size()) + " candidates, " +
                            std::to_string(references.size()) + " references)");
    if (candidates.empty()) throw ArgumentError("bleu4 needs at least one pair");

    if (aggregation == Aggregation::MacroAverage) {
        double sum = 0.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            std::array<OrderCounts, 4> orders;
            for (int n = 1; n <= 4; ++n)
                orders[static_cast<std::size_t>(n - 1)] =
                    clipped_counts(candidates[i], references[i], n);
            sum += bleu_from_pooled(orders, static_cast<long long>(candidates[i].size()),
                                    static_cast<long long>(references[i].size()), smoothing);
        }
        return sum / static_cast<double>(candidates.size());
    }

    std::array<OrderCounts, 4> orders;
    long long cand_len = 0;
    long long ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += static_cast<long long>(candidates[i].size());
        ref_len += static_cast<long long>(references[i].size());
        for (int n = 1; n <= 4; ++n) {
            const OrderCounts oc = clipped_counts(candidates[i], references[i], n);
            orders[static_cast<std::size_t>(n - 1)].matched += oc.matched;
            orders[static_cast<std::size_t>(n - 1)].total += oc.total;
        }
    }
    return bleu_from_pooled(orders, cand_len, ref_len, smoothing);
}

TokenList tokenize_for_metrics(std::string_view text) {
    return split_whitespace(to_lower_ascii(text));
}

MetricReport evaluate(std::span<const std::pair<std::string, std::string>> pairs,
                      const TokenizerSpec& tokenizer, Aggregation aggregation,
                      Smoothing smoothing, bool keep_per_example) {
    if (pairs.empty()) throw ArgumentError("evaluate needs at least one pair");
    if (tokenizer.kind != TokenizerKind::Whitespace)
        throw ArgumentError("evaluate requires a whitespace tokenizer spec: the external "
                            "protocol only counts tokens and cannot split text into n-grams");

    std::vector<TokenList> candidates;
    std::vector<TokenList> references;
    candidates.reserve(pairs.size());
    references.reserve(pairs.size());
    for (const auto& [cand, ref] : pairs) {
        candidates.push_back(tokenize_for_metrics(cand));
        references.push_back(tokenize_for_metrics(ref));
    }

    MetricReport report;
    report.aggregation = aggregation;
    report.smoothing = smoothing;
    report.example_count = static_cast<int>(pairs.size());
    report.bleu4 = bleu4(candidates, references, aggregation, smoothing);

    double r1 = 0.0, r2 = 0.0, rl = 0.0;
    std::vector<PerExampleScore> per_example;
    if (keep_per_example) per_example.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Rouge s1 = rouge_n(candidates[i], references[i], 1);
        const Rouge s2 = rouge_n(candidates[i], references[i], 2);
        const Rouge sl = rouge_l(candidates[i], references[i]);
        r1 += s1.f1;
        r2 += s2.f1;
        rl += sl.f1;
        if (keep_per_example) {
            const TokenList* cand = &candidates[i];
            const TokenList* ref = &references[i];
            per_example.push_back(PerExampleScore{
                bleu4(std::span<const TokenList>(cand, 1), std::span<const TokenList>(ref, 1),
                      Aggregation::Corpus, smoothing),
                s1.f1, s2.f1, sl.f1});
        }
    }
    const double count = static_cast<double>(pairs.size());
    report.rouge1_f = r1 / count;
    report.rouge2_f = r2 / count;
    report.rouge_l_f = rl / count;
    if (keep_per_example) report.per_example = std::move(per_example);
    return report;
}

std::string MetricReport::to_json() const {
    json j;
    j["bleu4"] = bleu4;
    j["rouge1_f"] = rouge1_f;
    j["rouge2_f"] = rouge2_f;
    j["rougeL_f"] = rouge_l_f;
    j["aggregation"] = aggregation_name(aggregation);
    j["smoothing"] = smoothing_name(smoothing);
    j["examples"] = example_count;
    j["percent"] = {{"bleu4", format_percent(bleu4)},
                    {"rouge1", format_percent(rouge1_f)},
                    {"rouge2", format_percent(rouge2_f)},
                    {"rougeL", format_percent(rouge_l_f)}};
    if (per_example) {
        json list = json::array();
        for (const PerExampleScore& s : *per_example)
            list.push_back({{"bleu4", s.bleu4},
                            {"rouge1_f", s.rouge1_f},
                            {"rouge2_f", s.rouge2_f},
                            {"rougeL_f", s.rouge_l_f}});
        j["per_example"] = std::move(list);
    }
    return j.dump(2);
}

std::string format_percent(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", score * 100.0);
    return buf;
}

} // namespace sumctx
