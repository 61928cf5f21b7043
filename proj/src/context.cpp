#include "sumctx/context.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "sumctx/text_util.hpp"

namespace sumctx {

using nlohmann::json;

void AssemblyConfig::validate() const {
    if (complete_turns < 0)
        throw ArgumentError("complete_turns must be nonnegative");
    if (complete_turns % 2 != 0)
        throw ArgumentError("complete_turns must be even (history advances in "
                            "request/response pairs)");
    if (max_input_tokens < 1) throw ArgumentError("max_input_tokens must be positive");
    if (max_response_tokens < 1) throw ArgumentError("max_response_tokens must be positive");
    markers.validate();
}

TurnRange omitted_range(int step, int complete_turns) {
    if (step < 2) throw ArgumentError("step must be at least 2");
    if (step % 2 != 0)
        throw ArgumentError("step must be even: Speaker 2 turns are the generated ones");
    if (complete_turns < 0) throw ArgumentError("complete_turns must be nonnegative");
    const int last = step - 2 - complete_turns;
    return last >= 1 ? TurnRange{1, last} : TurnRange{1, 0};
}

std::vector<Turn> speaker2_turns(const Dialogue& dialogue, TurnRange range) {
    if (range.empty()) return {};
    if (range.first < 1 || range.last > static_cast<int>(dialogue.turns.size()))
        throw ArgumentError("turn range [" + std::to_string(range.first) + ", " +
                            std::to_string(range.last) + "] is out of bounds for dialogue \"" +
                            dialogue.id + "\" with " + std::to_string(dialogue.turns.size()) +
                            " turns");
    std::vector<Turn> result;
    for (int index = range.first; index <= range.last; ++index) {
        const Turn& turn = dialogue.turns[static_cast<std::size_t>(index - 1)];
        if (turn.speaker == Speaker::Two) result.push_back(turn);
    }
    return result;
}

LengthStats length_stats(std::span<const ContextAssembly> assemblies) {
    if (assemblies.empty()) throw ArgumentError("length_stats needs at least one assembly");
    LengthStats stats;
    stats.count = static_cast<int>(assemblies.size());
    long long sum = 0;
    for (const ContextAssembly& a : assemblies) {
        sum += a.total_tokens;
        stats.max_tokens = std::max(stats.max_tokens, a.total_tokens);
    }
    stats.avg_tokens = static_cast<double>(sum) / static_cast<double>(assemblies.size());
    return stats;
}

namespace {

std::string join_sentences(const std::vector<std::string>& sentences) {
    std::string joined;
    for (const std::string& s : sentences) {
        if (!joined.empty()) joined += ' ';
        joined += s;
    }
    return joined;
}

void append_segment(std::string& out, const std::string& marker, const std::string& text) {
    if (!out.empty()) out += ' ';
    out += marker;
    if (!text.empty()) {
        out += ' ';
        out += text;
    }
}

} // namespace

std::string serialize_assembly(const ContextAssembly& assembly, const SegmentMarkers& markers) {
    std::string out;
    append_segment(out, markers.persona, join_sentences(assembly.persona.sentences));
    if (assembly.summary_text)
        append_segment(out, markers.summary, *assembly.summary_text);
    for (const Turn& turn : assembly.complete_turn_slice)
        append_segment(out, turn.speaker == Speaker::One ? markers.sp1 : markers.sp2, turn.text);
    append_segment(out, markers.request, assembly.request_text);
    return out;
}

SplitAssembly split_assembly(const std::string& serialized, const SegmentMarkers& markers) {
    markers.validate();

    struct Hit {
        std::size_t pos;
        enum class Kind { Persona, Summary, Sp1, Sp2, Request } kind;
        std::size_t len;
    };
    using Kind = Hit::Kind;
    const std::vector<std::pair<const std::string*, Kind>> table = {
        {&markers.persona, Kind::Persona},
        {&markers.summary, Kind::Summary},
        {&markers.sp1, Kind::Sp1},
        {&markers.sp2, Kind::Sp2},
        {&markers.request, Kind::Request},
    };

    std::vector<Hit> hits;
    std::size_t pos = 0;
    while (pos < serialized.size()) {
        const Hit* best = nullptr;
        Hit candidate{};
        for (const auto& [marker, kind] : table) {
            if (serialized.compare(pos, marker->size(), *marker) == 0) {
                if (!best || marker->size() > candidate.len) {
                    candidate = Hit{pos, kind, marker->size()};
                    best = &candidate;
                }
            }
        }
        if (best) {
            hits.push_back(candidate);
            pos += candidate.len;
        } else {
            ++pos;
        }
    }

    if (hits.empty() || hits.front().kind != Kind::Persona)
        throw ParseError(0, "serialized assembly must start with the persona marker");
    if (hits.back().kind != Kind::Request)
        throw ParseError(0, "serialized assembly must end with a request segment");

    auto field_after = [&](std::size_t i) {
        const std::size_t start = hits[i].pos + hits[i].len;
        const std::size_t end = i + 1 < hits.size() ? hits[i + 1].pos : serialized.size();
        return std::string(trim(std::string_view(serialized).substr(start, end - start)));
    };

    SplitAssembly split;
    split.persona_text = field_after(0);
    for (std::size_t i = 1; i < hits.size(); ++i) {
        switch (hits[i].kind) {
        case Kind::Persona:
            throw ParseError(0, "duplicate persona marker in serialized assembly");
        case Kind::Summary:
            if (split.summary_text || !split.turns.empty())
                throw ParseError(0, "summary marker out of order in serialized assembly");
            split.summary_text = field_after(i);
            break;
        case Kind::Sp1:
            split.turns.emplace_back(Speaker::One, field_after(i));
            break;
        case Kind::Sp2:
            split.turns.emplace_back(Speaker::Two, field_after(i));
            break;
        case Kind::Request:
            if (i + 1 != hits.size())
                throw ParseError(0, "request segment must be last in serialized assembly");
            split.request_text = field_after(i);
            break;
        }
    }
    return split;
}

std::string assembly_to_json(const ContextAssembly& assembly) {
    json j;
    j["dialogueId"] = assembly.dialogue_id;
    j["step"] = assembly.step;
    j["persona"] = assembly.persona.sentences;
    if (assembly.summary_text)
        j["summaryText"] = *assembly.summary_text;
    else
        j["summaryText"] = nullptr;
    json turns = json::array();
    for (const Turn& t : assembly.complete_turn_slice)
        turns.push_back({{"index", t.index},
                         {"speaker", t.speaker == Speaker::One ? 1 : 2},
                         {"text", t.text}});
    j["completeTurns"] = std::move(turns);
    j["requestText"] = assembly.request_text;
    j["segmentTokenCounts"] = assembly.segment_token_counts;
    j["totalTokens"] = assembly.total_tokens;
    j["droppedTurnIndices"] = assembly.dropped_turn_indices;
    j["summaryDropped"] = assembly.summary_dropped;
    return j.dump();
}

std::string assemblies_to_jsonl(std::span<const ContextAssembly> assemblies) {
    std::string out;
    for (const ContextAssembly& a : assemblies) {
        out += assembly_to_json(a);
        out += '\n';
    }
    return out;
}

ContextBuilder::ContextBuilder(AssemblyConfig config, SummarizerBackend& summarizer,
                               SummaryCache* cache)
    : config_(std::move(config)), summarizer_(summarizer), cache_(cache) {
    config_.validate();
    tokenizer_ = make_tokenizer(config_.tokenizer);
}

ContextAssembly ContextBuilder::build(const Dialogue& dialogue, int step) const {
    if (step < 2 || step % 2 != 0)
        throw ArgumentError("step must be an even number >= 2, got " + std::to_string(step));
    const int prior_turns = step - 1;
    if (static_cast<int>(dialogue.turns.size()) < prior_turns)
        throw ArgumentError("dialogue \"" + dialogue.id + "\" has " +
                            std::to_string(dialogue.turns.size()) + " turns; step " +
                            std::to_string(step) + " needs " + std::to_string(prior_turns));
    const Turn& request = dialogue.turns[static_cast<std::size_t>(prior_turns - 1)];
    if (request.speaker != Speaker::One)
        throw ArgumentError("dialogue \"" + dialogue.id + "\": turn " +
                            std::to_string(prior_turns) + " must be a Speaker 1 request");

    ContextAssembly assembly;
    assembly.dialogue_id = dialogue.id;
    assembly.step = step;
    assembly.persona = dialogue.persona;
    assembly.request_text = request.text;

    const int window = std::min(config_.complete_turns, step - 2);
    for (int index = prior_turns - window; index <= prior_turns - 1; ++index)
        assembly.complete_turn_slice.push_back(dialogue.turns[static_cast<std::size_t>(index - 1)]);

    const TurnRange omitted = omitted_range(step, config_.complete_turns);
    if (config_.include_summary && !omitted.empty()) {
        try {
            if (cache_) {
                assembly.summary_text = cache_->get_or_compute(dialogue, omitted.last,
                                                               summarizer_).text;
            } else {
                const std::vector<Turn> turns = speaker2_turns(dialogue, omitted);
                assembly.summary_text = turns.empty() ? std::string{}
                                                      : summarizer_.summarize(turns);
            }
        } catch (const BackendError& e) {
            throw BackendError("summarizer failed for dialogue \"" + dialogue.id +
                               "\", omitted turns [1, " + std::to_string(omitted.last) +
                               "]: " + e.what());
        }
    }

    // Token accounting: each marker is exactly 1 token under any spec;
    // segment text is counted by the configured tokenizer.
    const Tokenizer& tok = *tokenizer_;
    const int persona_cost = 1 + tok.count(join_sentences(assembly.persona.sentences));
    const int request_cost = 1 + tok.count(assembly.request_text);
    int summary_cost = assembly.summary_text ? 1 + tok.count(*assembly.summary_text) : 0;
    std::vector<int> turn_costs;
    turn_costs.reserve(assembly.complete_turn_slice.size());
    int turns_cost = 0;
    for (const Turn& turn : assembly.complete_turn_slice) {
        turn_costs.push_back(1 + tok.count(turn.text));
        turns_cost += turn_costs.back();
    }

    int total = persona_cost + summary_cost + turns_cost + request_cost;

    // Over budget: drop oldest complete turns first, then the summary.
    std::size_t dropped = 0;
    while (total > config_.max_input_tokens && dropped < turn_costs.size()) {
        assembly.dropped_turn_indices.push_back(
            assembly.complete_turn_slice[dropped].index);
        total -= turn_costs[dropped];
        turns_cost -= turn_costs[dropped];
        ++dropped;
    }
    if (dropped > 0)
        assembly.complete_turn_slice.erase(assembly.complete_turn_slice.begin(),
                                           assembly.complete_turn_slice.begin() +
                                               static_cast<std::ptrdiff_t>(dropped));
    if (total > config_.max_input_tokens && assembly.summary_text) {
        total -= summary_cost;
        summary_cost = 0;
        assembly.summary_text.reset();
        assembly.summary_dropped = true;
    }
    if (total > config_.max_input_tokens)
        throw BudgetError("assembly for dialogue \"" + dialogue.id + "\" step " +
                          std::to_string(step) + " needs " + std::to_string(total) +
                          " tokens with all complete turns and the summary dropped; budget is " +
                          std::to_string(config_.max_input_tokens));

    assembly.segment_token_counts["persona"] = persona_cost;
    if (assembly.summary_text) assembly.segment_token_counts["summary"] = summary_cost;
    assembly.segment_token_counts["turns"] = turns_cost;
    assembly.segment_token_counts["request"] = request_cost;
    assembly.total_tokens = total;
    return assembly;
}

ContextAssembly build_context(const Dialogue& dialogue, int step, const AssemblyConfig& config,
                              SummarizerBackend& summarizer, SummaryCache* cache) {
    return ContextBuilder(config, summarizer, cache).build(dialogue, step);
}

} // namespace sumctx
