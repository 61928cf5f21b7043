#ifndef SUMCTX_SUMMARIZE_HPP
#define SUMCTX_SUMMARIZE_HPP

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sumctx/corpus.hpp"
#include "sumctx/errors.hpp"
#include "sumctx/metrics.hpp"
#include "sumctx/tokenizer.hpp"

namespace sumctx {

enum class BackendKind { Extractive, Remote };

struct BackendDescriptor {
    std::string id;
    BackendKind kind = BackendKind::Extractive;
    bool deterministic = true;
    int max_summary_tokens = 60;
};

// Maps a list of Speaker-2 turns to a summary string.
class SummarizerBackend {
public:
    virtual ~SummarizerBackend() = default;
    virtual std::string summarize(std::span<const Turn> turns) = 0;
    virtual const BackendDescriptor& descriptor() const = 0;
};

// Concatenates "Speaker 2: {text}" fragments oldest-first, separated by a
// single space, greedily including whole turns while the token budget
// allows. If the first turn alone exceeds the budget it is still included;
// no fragment is ever truncated mid-turn. Empty input yields "".
std::string summarize_extractive(std::span<const Turn> turns,
                                 int max_summary_tokens,
                                 const Tokenizer& tokenizer);

class ExtractiveSummarizer : public SummarizerBackend {
public:
    explicit ExtractiveSummarizer(std::shared_ptr<Tokenizer> tokenizer,
                                  int max_summary_tokens = 60,
                                  std::string id = "extractive");

    std::string summarize(std::span<const Turn> turns) override;
    const BackendDescriptor& descriptor() const override { return descriptor_; }

private:
    std::shared_ptr<Tokenizer> tokenizer_;
    BackendDescriptor descriptor_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
};

// POSTs {endpoint}/summarize with {"turns":[{"speaker","text"},...],
// "max_tokens": N} and returns the "summary" field. Network failures,
// non-2xx statuses, and schema violations all count as failed attempts;
// after `attempts` failures a BackendError is raised. In-flight requests
// across all remote backends are bounded by a process-wide semaphore
// (set_remote_concurrency_cap, default 4).
class RemoteSummarizer : public SummarizerBackend {
public:
    RemoteSummarizer(std::string endpoint,
                     RetryPolicy retry = {},
                     int max_summary_tokens = 60,
                     std::string id = "remote");

    std::string summarize(std::span<const Turn> turns) override;
    const BackendDescriptor& descriptor() const override { return descriptor_; }

private:
    std::string endpoint_;
    RetryPolicy retry_;
    BackendDescriptor descriptor_;
};

void set_remote_concurrency_cap(int cap);

// Shared by the remote summarizer and generator clients: POST `path` on
// `endpoint` with a JSON body and return the string field `field` of the
// JSON reply. Every failure mode - network, non-2xx, reply that is not
// JSON or lacks the field - consumes one attempt; after the last attempt
// a BackendError describing the final failure is thrown.
std::string remote_fetch_field(const std::string& endpoint, const std::string& path,
                               const std::string& body, const std::string& field,
                               const RetryPolicy& retry);

struct SummaryRecord {
    std::string dialogue_id;
    int range_end = 0; // summarized turn range is always [1, range_end]
    std::string backend_id;
    std::string text;
    std::string created_at; // ISO-8601 UTC
};

// Prefix-keyed summary cache with optional append-only JSONL persistence.
// The key is (dialogue id, range end, backend id). When a file path is
// given, existing records are loaded at construction (last line wins per
// key) and every store appends one line. get_or_compute on distinct keys
// is safe concurrently; racing computes of one key converge last-write-wins.
class SummaryCache {
public:
    SummaryCache() = default; // in-memory only
    explicit SummaryCache(std::filesystem::path file);

    // Returns the cached record, or computes the summary of the Speaker-2
    // turns inside [1, range_end] via `backend`, stores it, and returns it.
    // range_end <= 0 or a range without Speaker-2 turns yields an empty
    // summary without calling the backend.
    SummaryRecord get_or_compute(const Dialogue& dialogue, int range_end,
                                 SummarizerBackend& backend);

    std::size_t size() const;

private:
    std::optional<SummaryRecord> find(const std::string& dialogue_id, int range_end,
                                      const std::string& backend_id) const;
    void store(const SummaryRecord& record);

    mutable std::mutex mutex_;
    std::map<std::tuple<std::string, int, std::string>, SummaryRecord> records_;
    std::filesystem::path file_;
    bool persistent_ = false;
};

struct SummarizerScore {
    MetricReport report;
    int evaluated = 0;
    int skipped = 0;
    std::vector<std::string> warnings;
};

// Splits "Name: text" lines into turns. The first distinct name becomes
// Speaker 1, the second Speaker 2, later names fold into Speaker 1. Blank
// lines are skipped. Throws ParseError when a line has no "Name:" prefix
// or no turn survives.
std::vector<Turn> parse_name_text_dialogue(const std::string& text);

// Runs the backend on the Speaker-2 turns of each parsed pair and scores
// the output against the reference summaries (macro-averaged ROUGE via the
// metrics module). Unparseable pairs are skipped with a warning and counted.
SummarizerScore score_summarizer(SummarizerBackend& backend,
                                 std::span<const SummPair> pairs);

} // namespace sumctx

#endif // SUMCTX_SUMMARIZE_HPP
