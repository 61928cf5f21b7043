#ifndef SUMCTX_CONTEXT_HPP
#define SUMCTX_CONTEXT_HPP

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sumctx/corpus.hpp"
#include "sumctx/errors.hpp"
#include "sumctx/summarize.hpp"
#include "sumctx/tokenizer.hpp"

namespace sumctx {

// How to realize the model input at each step.
//
// complete_turns (i) is the number of most-recent turns included verbatim;
// it must be even and nonnegative (the request/response structure advances
// history two turns at a time). The grids of interest use i in 0..10.
struct AssemblyConfig {
    int complete_turns = 0;
    bool include_summary = false;
    int max_input_tokens = 1024;
    int max_response_tokens = 200;
    SegmentMarkers markers;
    TokenizerSpec tokenizer;

    void validate() const; // throws ArgumentError on violations
};

// Closed 1-based turn-index range [first, last]; empty when last < first.
struct TurnRange {
    int first = 1;
    int last = 0;

    bool empty() const { return last < first; }
    int size() const { return empty() ? 0 : last - first + 1; }
    bool operator==(const TurnRange&) const = default;
};

// Turn indices replaced by the summary at step n with i complete turns.
//
// Step n is the 1-based index of the turn being generated (always even:
// Speaker 2 responds). Turn n-1 is the request, turns [n-1-i, n-2] are the
// complete window, so the summarized prefix is [1, n-2-i] - empty when
// every prior turn fits in the window. Throws ArgumentError when n is odd,
// n < 2, or i < 0.
TurnRange omitted_range(int step, int complete_turns);

// The Speaker-2 turns inside `range`, in chronological order. A non-empty
// range must lie within the dialogue, else ArgumentError.
std::vector<Turn> speaker2_turns(const Dialogue& dialogue, TurnRange range);

// The realized model input for one step.
struct ContextAssembly {
    std::string dialogue_id;
    int step = 0;
    Persona persona;
    std::optional<std::string> summary_text;
    std::vector<Turn> complete_turn_slice;
    std::string request_text;
    std::map<std::string, int> segment_token_counts;
    int total_tokens = 0;
    std::vector<int> dropped_turn_indices;
    bool summary_dropped = false;
};

struct LengthStats {
    double avg_tokens = 0.0;
    int max_tokens = 0;
    int count = 0;
};

// Arithmetic mean and maximum of total_tokens. Empty input -> ArgumentError.
LengthStats length_stats(std::span<const ContextAssembly> assemblies);

// Segments concatenated in persona, summary?, turns, request order, each
// prefixed by its marker and separated by single spaces. Splitting on the
// markers recovers the fields (see split_assembly).
std::string serialize_assembly(const ContextAssembly& assembly,
                               const SegmentMarkers& markers);

struct SplitAssembly {
    std::string persona_text; // sentences joined by " "
    std::optional<std::string> summary_text;
    std::vector<std::pair<Speaker, std::string>> turns;
    std::string request_text;
};

// Inverse of serialize_assembly for corpora whose text is marker-free.
SplitAssembly split_assembly(const std::string& serialized,
                             const SegmentMarkers& markers);

// JSONL export, one object per assembly, all fields plus droppedTurnIndices.
std::string assemblies_to_jsonl(std::span<const ContextAssembly> assemblies);
std::string assembly_to_json(const ContextAssembly& assembly);

// Builds ContextAssembly values for one configuration.
//
// Segment token accounting: every marker counts as exactly 1 token under
// any tokenizer spec; segment text is counted by the configured tokenizer.
// If the total exceeds max_input_tokens, the oldest complete turns are
// dropped one at a time (recorded in dropped_turn_indices), then the
// summary segment (summary_dropped); persona and request are never dropped.
// A budget that still cannot be met raises BudgetError.
class ContextBuilder {
public:
    // `cache`, when given, memoizes summaries per (dialogue, prefix, backend).
    ContextBuilder(AssemblyConfig config, SummarizerBackend& summarizer,
                   SummaryCache* cache = nullptr);

    const AssemblyConfig& config() const { return config_; }
    const Tokenizer& tokenizer() const { return *tokenizer_; }

    // Assembles the input for generating turn `step` of `dialogue`.
    // Requires step even, the dialogue to hold at least step-1 turns, and
    // turn step-1 to be a Speaker 1 request. Summarizer failures surface
    // as BackendError naming the dialogue and omitted range.
    ContextAssembly build(const Dialogue& dialogue, int step) const;

private:
    AssemblyConfig config_;
    SummarizerBackend& summarizer_;
    SummaryCache* cache_;
    std::shared_ptr<Tokenizer> tokenizer_;
};

// One-shot convenience wrapper around ContextBuilder.
ContextAssembly build_context(const Dialogue& dialogue, int step,
                              const AssemblyConfig& config,
                              SummarizerBackend& summarizer,
                              SummaryCache* cache = nullptr);

} // namespace sumctx

#endif // SUMCTX_CONTEXT_HPP
