#ifndef SUMCTX_HARNESS_HPP
#define SUMCTX_HARNESS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sumctx/context.hpp"
#include "sumctx/corpus.hpp"
#include "sumctx/metrics.hpp"
#include "sumctx/summarize.hpp"

namespace sumctx {

enum class GeneratorKind { Echo, Retrieval, Remote };

struct GeneratorDescriptor {
    std::string id;
    GeneratorKind kind = GeneratorKind::Echo;
    bool deterministic = true;
};

// Maps an assembled input to a response string. `serialized` is the
// marker-joined form of `assembly`. Implementations need not enforce the
// response token cap; the harness truncates to whole tokens afterwards.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string generate(const ContextAssembly& assembly,
                                 const std::string& serialized,
                                 int max_response_tokens) = 0;
    virtual const GeneratorDescriptor& descriptor() const = 0;
};

// Returns the request text verbatim, truncated to max_response_tokens
// whole whitespace tokens.
class EchoGenerator : public GenerationBackend {
public:
    EchoGenerator();
    std::string generate(const ContextAssembly& assembly, const std::string& serialized,
                         int max_response_tokens) override;
    const GeneratorDescriptor& descriptor() const override { return descriptor_; }

private:
    GeneratorDescriptor descriptor_;
};

// Returns the pool response with maximal unigram-TF cosine similarity to
// the serialized assembly; ties (including all-zero similarity) break to
// the lowest pool index. The pool must be non-empty.
class RetrievalGenerator : public GenerationBackend {
public:
    explicit RetrievalGenerator(std::vector<std::string> pool);
    std::string generate(const ContextAssembly& assembly, const std::string& serialized,
                         int max_response_tokens) override;
    const GeneratorDescriptor& descriptor() const override { return descriptor_; }

    // Index the pool entry the generator would pick for `serialized`.
    int best_index(const std::string& serialized) const;

private:
    std::vector<std::string> pool_;
    std::vector<std::map<std::string, int>> pool_tf_;
    GeneratorDescriptor descriptor_;
};

// Speaker-2 turns of the corpus in dialogue order - the default retrieval pool.
std::vector<std::string> speaker2_response_pool(std::span<const Dialogue> corpus);

// POSTs {endpoint}/generate with {"input": serialized, "max_tokens": N}
// and returns the "response" field; retry policy as the remote summarizer.
class RemoteGenerator : public GenerationBackend {
public:
    RemoteGenerator(std::string endpoint, RetryPolicy retry = {}, std::string id = "remote");
    std::string generate(const ContextAssembly& assembly, const std::string& serialized,
                         int max_response_tokens) override;
    const GeneratorDescriptor& descriptor() const override { return descriptor_; }

private:
    std::string endpoint_;
    RetryPolicy retry_;
    GeneratorDescriptor descriptor_;
};

// The experiment grid: one cell per (complete turns, summary mode).
struct GridConfig {
    std::vector<int> complete_turns_list = {0, 2, 4, 6, 8, 10};
    std::vector<bool> summary_modes = {false, true};
    std::vector<int> context_size_bins = {0, 2, 4, 6, 8, 10, 12};
    int max_input_tokens = 1024;
    int max_response_tokens = 200;
    SegmentMarkers markers;
    TokenizerSpec tokenizer;
    Aggregation aggregation = Aggregation::Corpus;
    Smoothing smoothing = Smoothing::AddEpsilon;
    std::uint64_t seed = 0;   // recorded in the manifest; deterministic backends ignore it
    int max_dialogues = 0;    // 0 = whole corpus
    int jobs = 1;

    void validate() const; // throws ArgumentError on violations
};

// One evaluated example inside a cell.
struct GenerationRecord {
    std::string dialogue_id;
    int step = 0;
    ContextAssembly assembly;
    std::string candidate;
    std::string reference;
    int context_size = 0; // turns preceding the request: step - 2
};

struct BinScore {
    double bleu4 = 0.0;
    int count = 0;
};

struct CellResult {
    int complete_turns = 0;
    bool include_summary = false;
    MetricReport metric_report;
    LengthStats length_stats;
    // bin -> BLEU/count; for summary cells, bins <= i are omitted (no
    // summary is possible there, so the breakdown has no entry).
    std::map<int, BinScore> per_context_size;
    int total_examples = 0;
    int omitted_examples = 0; // examples whose bin is omitted (summary cells)
    int clipped_examples = 0; // context sizes beyond the last bin, folded into it
    bool aborted = false;
    std::string abort_reason;
};

// All (dialogue index, step) pairs the grid evaluates: every even step n
// with a gold Speaker-2 turn n, in corpus order.
std::vector<std::pair<int, int>> evaluation_steps(std::span<const Dialogue> corpus);

// Runs one cell. Backend errors abort the cell (aborted/abort_reason set)
// rather than throwing. `records`, when non-null, receives the cell's
// generation records.
CellResult run_cell(std::span<const Dialogue> corpus, const GridConfig& grid,
                    int complete_turns, bool include_summary,
                    SummarizerBackend& summarizer, GenerationBackend& generator,
                    SummaryCache* cache = nullptr,
                    std::vector<GenerationRecord>* records = nullptr);

// Every (i, summary mode) cell in list order. Cells run on `grid.jobs`
// workers; results keep a fixed order so reruns are byte-identical.
std::vector<CellResult> run_grid(std::span<const Dialogue> corpus, const GridConfig& grid,
                                 SummarizerBackend& summarizer, GenerationBackend& generator,
                                 SummaryCache* cache = nullptr);

// Table renderers. Omitted per-context cells render as "-".
std::string render_table1_markdown(std::span<const CellResult> cells);
std::string render_table1_csv(std::span<const CellResult> cells);
std::string render_table2_markdown(std::span<const CellResult> cells,
                                   std::span<const int> bins);
std::string render_table2_csv(std::span<const CellResult> cells,
                              std::span<const int> bins);

struct ReportFiles {
    std::string table1_md;
    std::string table1_csv;
    std::string table2_md;
    std::string table2_csv;
};

ReportFiles render_report(std::span<const CellResult> cells, std::span<const int> bins);

// results.json payload (all cell results plus the bin axis) and its inverse.
struct GridResults {
    std::vector<CellResult> cells;
    std::vector<int> context_size_bins;
};

std::string results_to_json(std::span<const CellResult> cells, std::span<const int> bins);
GridResults results_from_json(const std::string& json_text);

// Reproducibility manifest: tokenizer, smoothing, aggregation, markers,
// backend ids, grid shape.
std::string manifest_json(const GridConfig& grid, const BackendDescriptor& summarizer,
                          const GeneratorDescriptor& generator);

// Whole truncated tokens of `text` under `tokenizer`, at most `max_tokens`.
std::string truncate_to_tokens(const std::string& text, int max_tokens,
                               const Tokenizer& tokenizer);

} // namespace sumctx

#endif // SUMCTX_HARNESS_HPP
