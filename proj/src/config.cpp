#include "sumctx/config.hpp"

#include <json.hpp>

namespace sumctx {

using nlohmann::json;

namespace {

json parse_object(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ArgumentError(std::string(what) + " must be a JSON object");
    return j;
}

void reject_unknown(const json& object, std::initializer_list<const char*> keys,
                    const char* what) {
    for (const auto& item : object.items()) {
        bool known = false;
        for (const char* key : keys)
            if (item.key() == key) known = true;
        if (!known)
            throw ArgumentError(std::string(what) + " has unknown key \"" + item.key() + "\"");
    }
}

TokenizerSpec tokenizer_from_json(const json& j) {
    reject_unknown(j, {"id", "kind", "command"}, "tokenizer config");
    TokenizerSpec spec;
    if (j.contains("id")) spec.id = j.at("id").get<std::string>();
    if (j.contains("kind")) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "whitespace")
            spec.kind = TokenizerKind::Whitespace;
        else if (kind == "external")
            spec.kind = TokenizerKind::External;
        else
            throw ArgumentError("tokenizer kind must be \"whitespace\" or \"external\"");
    }
    if (j.contains("command")) spec.command = j.at("command").get<std::string>();
    return spec;
}

SegmentMarkers markers_from_json(const json& j, SegmentMarkers markers) {
    reject_unknown(j, {"persona", "summary", "sp1", "sp2", "request"}, "markers config");
    if (j.contains("persona")) markers.persona = j.at("persona").get<std::string>();
    if (j.contains("summary")) markers.summary = j.at("summary").get<std::string>();
    if (j.contains("sp1")) markers.sp1 = j.at("sp1").get<std::string>();
    if (j.contains("sp2")) markers.sp2 = j.at("sp2").get<std::string>();
    if (j.contains("request")) markers.request = j.at("request").get<std::string>();
    return markers;
}

} // namespace

void GlobalConfig::validate() const {
    markers.validate();
    if (tokenizer.id.empty()) throw ArgumentError("tokenizer id must be non-empty");
    if (tokenizer.kind == TokenizerKind::External && tokenizer.command.empty())
        throw ArgumentError("external tokenizer needs a command");
    if (jobs < 1) throw ArgumentError("jobs must be at least 1");
    if (remote_concurrency < 1) throw ArgumentError("remote_concurrency must be at least 1");
}

GlobalConfig apply_config_json(const GlobalConfig& base, const std::string& json_text) {
    const json j = parse_object(json_text, "config file");
    reject_unknown(j,
                   {"tokenizer", "markers", "summarizer_endpoint", "generator_endpoint",
                    "cache_path", "jobs", "remote_concurrency", "verbosity"},
                   "config file");

    GlobalConfig config = base;
    if (j.contains("tokenizer")) config.tokenizer = tokenizer_from_json(j.at("tokenizer"));
    if (j.contains("markers")) config.markers = markers_from_json(j.at("markers"), base.markers);
    if (j.contains("summarizer_endpoint"))
        config.summarizer_endpoint = j.at("summarizer_endpoint").get<std::string>();
    if (j.contains("generator_endpoint"))
        config.generator_endpoint = j.at("generator_endpoint").get<std::string>();
    if (j.contains("cache_path")) config.cache_path = j.at("cache_path").get<std::string>();
    if (j.contains("jobs")) config.jobs = j.at("jobs").get<int>();
    if (j.contains("remote_concurrency"))
        config.remote_concurrency = j.at("remote_concurrency").get<int>();
    if (j.contains("verbosity")) config.verbosity = j.at("verbosity").get<int>();
    config.validate();
    return config;
}

GridConfig apply_grid_json(const GridConfig& base, const std::string& json_text) {
    const json j = parse_object(json_text, "grid config");
    reject_unknown(j,
                   {"complete_turns", "summary_modes", "context_size_bins", "max_input_tokens",
                    "max_response_tokens", "aggregation", "smoothing", "seed", "max_dialogues",
                    "jobs", "markers", "tokenizer"},
                   "grid config");

    GridConfig grid = base;
    if (j.contains("complete_turns"))
        grid.complete_turns_list = j.at("complete_turns").get<std::vector<int>>();
    if (j.contains("summary_modes"))
        grid.summary_modes = j.at("summary_modes").get<std::vector<bool>>();
    if (j.contains("context_size_bins"))
        grid.context_size_bins = j.at("context_size_bins").get<std::vector<int>>();
    if (j.contains("max_input_tokens"))
        grid.max_input_tokens = j.at("max_input_tokens").get<int>();
    if (j.contains("max_response_tokens"))
        grid.max_response_tokens = j.at("max_response_tokens").get<int>();
    if (j.contains("aggregation"))
        grid.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
    if (j.contains("smoothing"))
        grid.smoothing = smoothing_from_name(j.at("smoothing").get<std::string>());
    if (j.contains("seed")) grid.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_dialogues")) grid.max_dialogues = j.at("max_dialogues").get<int>();
    if (j.contains("jobs")) grid.jobs = j.at("jobs").get<int>();
    if (j.contains("markers")) grid.markers = markers_from_json(j.at("markers"), base.markers);
    if (j.contains("tokenizer")) grid.tokenizer = tokenizer_from_json(j.at("tokenizer"));
    grid.validate();
    return grid;
}

} // namespace sumctx
