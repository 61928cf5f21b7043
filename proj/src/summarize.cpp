#include "sumctx/summarize.hpp"

#include <condition_variable>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sumctx/context.hpp"
#include "sumctx/text_util.hpp"

namespace sumctx {

using nlohmann::json;

std::string summarize_extractive(std::span<const Turn> turns, int max_summary_tokens,
                                 const Tokenizer& tokenizer) {
    std::string summary;
    int used_tokens = 0;
    for (const Turn& turn : turns) {
        const std::string fragment = "Speaker 2: " + turn.text;
        const int cost = tokenizer.count(fragment);
        if (!summary.empty() && used_tokens + cost > max_summary_tokens) break;
        if (!summary.empty()) summary += ' ';
        summary += fragment;
        used_tokens += cost;
        if (used_tokens > max_summary_tokens) break; // first turn may overrun on its own
    }
    return summary;
}

ExtractiveSummarizer::ExtractiveSummarizer(std::shared_ptr<Tokenizer> tokenizer,
                                           int max_summary_tokens, std::string id)
    : tokenizer_(std::move(tokenizer)) {
    if (!tokenizer_) throw ArgumentError("extractive summarizer needs a tokenizer");
    if (max_summary_tokens < 1) throw ArgumentError("max_summary_tokens must be positive");
    descriptor_ = BackendDescriptor{std::move(id), BackendKind::Extractive, true,
                                    max_summary_tokens};
}

std::string ExtractiveSummarizer::summarize(std::span<const Turn> turns) {
    return summarize_extractive(turns, descriptor_.max_summary_tokens, *tokenizer_);
}

namespace {

// Adjustable cap on in-flight remote requests, shared by all remote backends.
class RequestGate {
public:
    void set_cap(int cap) {
        std::lock_guard<std::mutex> lock(mutex_);
        cap_ = cap < 1 ? 1 : cap;
        cv_.notify_all();
    }

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ < cap_; });
        ++in_flight_;
    }

    void release() {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int cap_ = 4;
    int in_flight_ = 0;
};

RequestGate& request_gate() {
    static RequestGate gate;
    return gate;
}

struct GateGuard {
    GateGuard() { request_gate().acquire(); }
    ~GateGuard() { request_gate().release(); }
};

} // namespace

void set_remote_concurrency_cap(int cap) { request_gate().set_cap(cap); }

std::string remote_fetch_field(const std::string& endpoint, const std::string& path,
                               const std::string& body, const std::string& field,
                               const RetryPolicy& retry) {
    if (retry.attempts < 1) throw ArgumentError("retry policy needs at least one attempt");

    std::string last_failure = "no attempt made";
    auto backoff = retry.initial_backoff;
    for (int attempt = 1; attempt <= retry.attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(backoff.count()) *
                                       retry.backoff_factor));
        }

        GateGuard gate;
        httplib::Client client(endpoint);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(30, 0);
        auto result = client.Post(path, body, "application/json");
        if (!result) {
            last_failure = "network error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            last_failure = "HTTP status " + std::to_string(result->status);
            continue;
        }
        json reply = json::parse(result->body, nullptr, false);
        if (reply.is_discarded() || !reply.is_object() || !reply.contains(field) ||
            !reply[field].is_string()) {
            last_failure = "reply does not carry a string field \"" + field + "\"";
            continue;
        }
        return reply[field].get<std::string>();
    }
    throw BackendError("POST " + endpoint + path + " failed after " +
                       std::to_string(retry.attempts) + " attempts; last failure: " +
                       last_failure);
}

RemoteSummarizer::RemoteSummarizer(std::string endpoint, RetryPolicy retry,
                                   int max_summary_tokens, std::string id)
    : endpoint_(std::move(endpoint)), retry_(retry) {
    if (endpoint_.empty()) throw ArgumentError("remote summarizer needs an endpoint");
    descriptor_ = BackendDescriptor{std::move(id), BackendKind::Remote, false,
                                    max_summary_tokens};
}

std::string RemoteSummarizer::summarize(std::span<const Turn> turns) {
    json body;
    body["turns"] = json::array();
    for (const Turn& turn : turns)
        body["turns"].push_back(
            {{"speaker", turn.speaker == Speaker::One ? 1 : 2}, {"text", turn.text}});
    body["max_tokens"] = descriptor_.max_summary_tokens;
    return remote_fetch_field(endpoint_, "/summarize", body.dump(), "summary", retry_);
}

namespace {

std::string iso8601_now() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

SummaryRecord record_from_json(const json& j, std::size_t line_no) {
    for (const char* key : {"dialogueId", "rangeEnd", "backendId", "text", "createdAt"})
        if (!j.contains(key))
            throw CacheIoError("cache line " + std::to_string(line_no) +
                               " is missing field \"" + key + "\"");
    SummaryRecord r;
    r.dialogue_id = j["dialogueId"].get<std::string>();
    r.range_end = j["rangeEnd"].get<int>();
    r.backend_id = j["backendId"].get<std::string>();
    r.text = j["text"].get<std::string>();
    r.created_at = j["createdAt"].get<std::string>();
    return r;
}

json record_to_json(const SummaryRecord& r) {
    return {{"dialogueId", r.dialogue_id},
            {"rangeEnd", r.range_end},
            {"backendId", r.backend_id},
            {"text", r.text},
            {"createdAt", r.created_at}};
}

} // namespace

SummaryCache::SummaryCache(std::filesystem::path file)
    : file_(std::move(file)), persistent_(true) {
    std::ifstream in(file_);
    if (!in.is_open()) return; // fresh cache file, created on first store
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw CacheIoError("cache line " + std::to_string(line_no) + " is not a JSON object");
        SummaryRecord r = record_from_json(j, line_no);
        // Later lines win: an append-only file may carry superseded entries.
        records_[{r.dialogue_id, r.range_end, r.backend_id}] = std::move(r);
    }
}

std::optional<SummaryRecord> SummaryCache::find(const std::string& dialogue_id, int range_end,
                                                const std::string& backend_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = records_.find({dialogue_id, range_end, backend_id});
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void SummaryCache::store(const SummaryRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_[{record.dialogue_id, record.range_end, record.backend_id}] = record;
    if (!persistent_) return;
    std::ofstream out(file_, std::ios::app);
    if (!out.is_open())
        throw CacheIoError("cannot open cache file for append: " + file_.string());
    out << record_to_json(record).dump() << '\n';
    if (!out)
        throw CacheIoError("failed to append to cache file: " + file_.string());
}

SummaryRecord SummaryCache::get_or_compute(const Dialogue& dialogue, int range_end,
                                           SummarizerBackend& backend) {
    const std::string& backend_id = backend.descriptor().id;
    if (auto hit = find(dialogue.id, range_end, backend_id)) return *hit;

    SummaryRecord record;
    record.dialogue_id = dialogue.id;
    record.range_end = range_end;
    record.backend_id = backend_id;
    record.created_at = iso8601_now();
    const std::vector<Turn> turns =
        range_end >= 1 ? speaker2_turns(dialogue, TurnRange{1, range_end}) : std::vector<Turn>{};
    // An empty turn list summarizes to the empty string without a backend call.
    record.text = turns.empty() ? std::string{} : backend.summarize(turns);
    store(record);
    return record;
}

std::size_t SummaryCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

std::vector<Turn> parse_name_text_dialogue(const std::string& text) {
    std::vector<Turn> turns;
    std::vector<std::string> names; // order of first appearance
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError(line_no, "expected \"Name: text\"");
        const std::string name{trim(std::string_view(line).substr(0, colon))};
        const std::string utterance{trim(std::string_view(line).substr(colon + 1))};
        if (name.empty() || utterance.empty())
            throw ParseError(line_no, "expected \"Name: text\"");

        std::size_t name_pos = names.size();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) name_pos = i;
        if (name_pos == names.size()) names.push_back(name);

        // Second distinct name is the answering speaker; everyone else folds
        // into Speaker 1 so multi-party chats stay usable.
        const Speaker speaker = name_pos == 1 ? Speaker::Two : Speaker::One;
        turns.push_back(Turn{static_cast<int>(turns.size()) + 1, speaker, utterance});
    }
    if (turns.empty()) throw ParseError(0, "dialogue text has no \"Name: text\" lines");
    return turns;
}

SummarizerScore score_summarizer(SummarizerBackend& backend, std::span<const SummPair> pairs) {
    if (pairs.empty()) throw ArgumentError("score_summarizer needs at least one pair");

    SummarizerScore score;
    std::vector<std::pair<std::string, std::string>> scored;
    scored.reserve(pairs.size());
    for (const SummPair& pair : pairs) {
        std::vector<Turn> turns;
        try {
            turns = parse_name_text_dialogue(pair.dialogue_text);
        } catch (const ParseError& e) {
            ++score.skipped;
            score.warnings.push_back("pair \"" + pair.id + "\" skipped: " + e.what());
            continue;
        }
        std::vector<Turn> speaker2;
        for (const Turn& t : turns)
            if (t.speaker == Speaker::Two) speaker2.push_back(t);
        scored.emplace_back(backend.summarize(speaker2), pair.reference_summary);
        ++score.evaluated;
    }

    if (!scored.empty())
        score.report = evaluate(scored, TokenizerSpec{}, Aggregation::MacroAverage,
                                Smoothing::AddEpsilon);
    return score;
}

} // namespace sumctx
