#include "sumctx/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "sumctx/text_util.hpp"

namespace sumctx {

using nlohmann::json;

namespace {

const char* generator_kind_name(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::Echo: return "echo";
    case GeneratorKind::Retrieval: return "retrieval";
    case GeneratorKind::Remote: return "remote";
    }
    return "unknown";
}

const char* backend_kind_name(BackendKind kind) {
    return kind == BackendKind::Extractive ? "extractive" : "remote";
}

std::string join_tokens(std::span<const std::string> tokens, std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count && i < tokens.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += tokens[i];
    }
    return out;
}

} // namespace

std::string truncate_to_tokens(const std::string& text, int max_tokens,
                               const Tokenizer& tokenizer) {
    if (max_tokens < 0) throw ArgumentError("max_tokens must be nonnegative");
    if (tokenizer.count(text) <= max_tokens) return text;
    const std::vector<std::string> tokens = split_whitespace(text);
    std::size_t keep = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_tokens));
    std::string out = join_tokens(tokens, keep);
    while (keep > 0 && tokenizer.count(out) > max_tokens) {
        --keep;
        out = join_tokens(tokens, keep);
    }
    return out;
}

EchoGenerator::EchoGenerator() : descriptor_{"echo", GeneratorKind::Echo, true} {}

std::string EchoGenerator::generate(const ContextAssembly& assembly, const std::string&,
                                    int max_response_tokens) {
    const std::vector<std::string> tokens = split_whitespace(assembly.request_text);
    if (static_cast<int>(tokens.size()) <= max_response_tokens) return assembly.request_text;
    return join_tokens(tokens, static_cast<std::size_t>(max_response_tokens));
}

namespace {

std::map<std::string, int> term_frequencies(const std::string& text) {
    std::map<std::string, int> tf;
    for (const std::string& token : split_whitespace(to_lower_ascii(text))) ++tf[token];
    return tf;
}

double cosine_similarity(const std::map<std::string, int>& a,
                         const std::map<std::string, int>& b) {
    double dot = 0.0;
    for (const auto& [term, count] : a) {
        const auto it = b.find(term);
        if (it != b.end()) dot += static_cast<double>(count) * it->second;
    }
    if (dot == 0.0) return 0.0;
    auto norm = [](const std::map<std::string, int>& v) {
        double sq = 0.0;
        for (const auto& [term, count] : v) sq += static_cast<double>(count) * count;
        return std::sqrt(sq);
    };
    return dot / (norm(a) * norm(b));
}

} // namespace

RetrievalGenerator::RetrievalGenerator(std::vector<std::string> pool)
    : pool_(std::move(pool)), descriptor_{"retrieval", GeneratorKind::Retrieval, true} {
    if (pool_.empty()) throw ArgumentError("retrieval generator needs a non-empty pool");
    pool_tf_.reserve(pool_.size());
    for (const std::string& response : pool_) pool_tf_.push_back(term_frequencies(response));
}

int RetrievalGenerator::best_index(const std::string& serialized) const {
    const std::map<std::string, int> query = term_frequencies(serialized);
    int best = 0;
    double best_similarity = cosine_similarity(query, pool_tf_[0]);
    for (std::size_t i = 1; i < pool_tf_.size(); ++i) {
        const double similarity = cosine_similarity(query, pool_tf_[i]);
        if (similarity > best_similarity) {
            best_similarity = similarity;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::string RetrievalGenerator::generate(const ContextAssembly&, const std::string& serialized,
                                         int) {
    return pool_[static_cast<std::size_t>(best_index(serialized))];
}

std::vector<std::string> speaker2_response_pool(std::span<const Dialogue> corpus) {
    std::vector<std::string> pool;
    for (const Dialogue& d : corpus)
        for (const Turn& t : d.turns)
            if (t.speaker == Speaker::Two) pool.push_back(t.text);
    return pool;
}

RemoteGenerator::RemoteGenerator(std::string endpoint, RetryPolicy retry, std::string id)
    : endpoint_(std::move(endpoint)), retry_(retry),
      descriptor_{std::move(id), GeneratorKind::Remote, false} {
    if (endpoint_.empty()) throw ArgumentError("remote generator needs an endpoint");
}

std::string RemoteGenerator::generate(const ContextAssembly&, const std::string& serialized,
                                      int max_response_tokens) {
    json body;
    body["input"] = serialized;
    body["max_tokens"] = max_response_tokens;
    return remote_fetch_field(endpoint_, "/generate", body.dump(), "response", retry_);
}

void GridConfig::validate() const {
    if (complete_turns_list.empty()) throw ArgumentError("complete_turns_list must be non-empty");
    for (int i : complete_turns_list)
        if (i < 0 || i % 2 != 0)
            throw ArgumentError("complete turns values must be even and nonnegative");
    if (summary_modes.empty()) throw ArgumentError("summary_modes must be non-empty");
    if (context_size_bins.empty()) throw ArgumentError("context_size_bins must be non-empty");
    for (std::size_t i = 1; i < context_size_bins.size(); ++i)
        if (context_size_bins[i] <= context_size_bins[i - 1])
            throw ArgumentError("context_size_bins must be strictly increasing");
    if (max_input_tokens < 1) throw ArgumentError("max_input_tokens must be positive");
    if (max_response_tokens < 1) throw ArgumentError("max_response_tokens must be positive");
    if (max_dialogues < 0) throw ArgumentError("max_dialogues must be nonnegative");
    if (jobs < 1) throw ArgumentError("jobs must be at least 1");
    markers.validate();
}

std::vector<std::pair<int, int>> evaluation_steps(std::span<const Dialogue> corpus) {
    std::vector<std::pair<int, int>> steps;
    for (std::size_t d = 0; d < corpus.size(); ++d)
        for (int n = 2; n <= static_cast<int>(corpus[d].turns.size()); n += 2)
            steps.emplace_back(static_cast<int>(d), n);
    return steps;
}

CellResult run_cell(std::span<const Dialogue> corpus, const GridConfig& grid, int complete_turns,
                    bool include_summary, SummarizerBackend& summarizer,
                    GenerationBackend& generator, SummaryCache* cache,
                    std::vector<GenerationRecord>* records) {
    CellResult cell;
    cell.complete_turns = complete_turns;
    cell.include_summary = include_summary;

    try {
        AssemblyConfig config;
        config.complete_turns = complete_turns;
        config.include_summary = include_summary;
        config.max_input_tokens = grid.max_input_tokens;
        config.max_response_tokens = grid.max_response_tokens;
        config.markers = grid.markers;
        config.tokenizer = grid.tokenizer;
        const ContextBuilder builder(config, summarizer, cache);

        std::span<const Dialogue> slice = corpus;
        if (grid.max_dialogues > 0 &&
            static_cast<std::size_t>(grid.max_dialogues) < corpus.size())
            slice = corpus.first(static_cast<std::size_t>(grid.max_dialogues));

        std::vector<ContextAssembly> assemblies;
        std::vector<std::pair<std::string, std::string>> pairs;
        std::map<int, std::vector<std::size_t>> bin_members; // bin -> pair indices

        for (const auto& [dialogue_index, step] : evaluation_steps(slice)) {
            const Dialogue& dialogue = slice[static_cast<std::size_t>(dialogue_index)];
            ContextAssembly assembly = builder.build(dialogue, step);
            const std::string serialized = serialize_assembly(assembly, grid.markers);
            std::string candidate =
                generator.generate(assembly, serialized, grid.max_response_tokens);
            candidate = truncate_to_tokens(candidate, grid.max_response_tokens,
                                           builder.tokenizer());
            const std::string& reference =
                dialogue.turns[static_cast<std::size_t>(step - 1)].text;
            const int context_size = step - 2;

            ++cell.total_examples;
            const std::size_t pair_index = pairs.size();
            pairs.emplace_back(candidate, reference);

            // Fold the context size onto the bin axis: largest bin <= size,
            // clipping beyond the last bin into it.
            int bin = grid.context_size_bins.front();
            for (int b : grid.context_size_bins)
                if (b <= context_size) bin = b;
            if (context_size > grid.context_size_bins.back()) ++cell.clipped_examples;

            if (include_summary && bin <= complete_turns)
                ++cell.omitted_examples; // no summary is possible at this bin
            else
                bin_members[bin].push_back(pair_index);

            if (records)
                records->push_back(GenerationRecord{dialogue.id, step, assembly, candidate,
                                                    reference, context_size});
            assemblies.push_back(std::move(assembly));
        }

        if (!pairs.empty()) {
            cell.metric_report =
                evaluate(pairs, grid.tokenizer, grid.aggregation, grid.smoothing);
            cell.length_stats = length_stats(assemblies);
        }
        for (const auto& [bin, members] : bin_members) {
            std::vector<TokenList> candidates;
            std::vector<TokenList> references;
            candidates.reserve(members.size());
            references.reserve(members.size());
            for (std::size_t index : members) {
                candidates.push_back(tokenize_for_metrics(pairs[index].first));
                references.push_back(tokenize_for_metrics(pairs[index].second));
            }
            cell.per_context_size[bin] =
                BinScore{bleu4(candidates, references, grid.aggregation, grid.smoothing),
                         static_cast<int>(members.size())};
        }
    } catch (const Error& e) {
        cell.aborted = true;
        cell.abort_reason = e.what();
    } catch (const std::exception& e) {
        cell.aborted = true;
        cell.abort_reason = std::string("unexpected error: ") + e.what();
    }
    return cell;
}

std::vector<CellResult> run_grid(std::span<const Dialogue> corpus, const GridConfig& grid,
                                 SummarizerBackend& summarizer, GenerationBackend& generator,
                                 SummaryCache* cache) {
    grid.validate();
    if (corpus.empty()) throw ArgumentError("run_grid needs a non-empty corpus");

    std::vector<std::pair<int, bool>> cells;
    for (bool mode : grid.summary_modes)
        for (int i : grid.complete_turns_list) cells.emplace_back(i, mode);

    std::vector<CellResult> results(cells.size());
    const int workers =
        std::max(1, std::min<int>(grid.jobs, static_cast<int>(cells.size())));
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= cells.size()) break;
            results[index] = run_cell(corpus, grid, cells[index].first, cells[index].second,
                                      summarizer, generator, cache);
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    return results;
}

namespace {

std::string format_length(double avg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", avg);
    return buf;
}

std::vector<const CellResult*> sorted_cells(std::span<const CellResult> cells, bool by_turns_first) {
    std::vector<const CellResult*> ptrs;
    ptrs.reserve(cells.size());
    for (const CellResult& c : cells) ptrs.push_back(&c);
    std::stable_sort(ptrs.begin(), ptrs.end(),
                     [by_turns_first](const CellResult* a, const CellResult* b) {
                         if (by_turns_first) {
                             if (a->complete_turns != b->complete_turns)
                                 return a->complete_turns < b->complete_turns;
                             return a->include_summary < b->include_summary;
                         }
                         if (a->include_summary != b->include_summary)
                             return a->include_summary < b->include_summary;
                         return a->complete_turns < b->complete_turns;
                     });
    return ptrs;
}

} // namespace

std::string render_table1_markdown(std::span<const CellResult> cells) {
    std::string out = "| Complete Turns | Includes Summary? | BLEU-4 (%) | ROUGE-1 (%) | "
                      "ROUGE-2 (%) | ROUGE-L (%) | Avg. Length | Max. Length |\n"
                      "|---|---|---|---|---|---|---|---|\n";
    for (const CellResult* cell : sorted_cells(cells, false)) {
        out += "| " + std::to_string(cell->complete_turns) + " | " +
               (cell->include_summary ? "Yes" : "No") + " | ";
        if (cell->aborted) {
            out += "- | - | - | - | - | - |\n";
            continue;
        }
        out += format_percent(cell->metric_report.bleu4) + " | " +
               format_percent(cell->metric_report.rouge1_f) + " | " +
               format_percent(cell->metric_report.rouge2_f) + " | " +
               format_percent(cell->metric_report.rouge_l_f) + " | " +
               format_length(cell->length_stats.avg_tokens) + " | " +
               std::to_string(cell->length_stats.max_tokens) + " |\n";
    }
    return out;
}

std::string render_table1_csv(std::span<const CellResult> cells) {
    std::string out = "complete_turns,includes_summary,bleu4_pct,rouge1_pct,rouge2_pct,"
                      "rougeL_pct,avg_length,max_length\n";
    for (const CellResult* cell : sorted_cells(cells, false)) {
        out += std::to_string(cell->complete_turns) + ',' +
               (cell->include_summary ? "yes" : "no") + ',';
        if (cell->aborted) {
            out += ",,,,,\n";
            continue;
        }
        out += format_percent(cell->metric_report.bleu4) + ',' +
               format_percent(cell->metric_report.rouge1_f) + ',' +
               format_percent(cell->metric_report.rouge2_f) + ',' +
               format_percent(cell->metric_report.rouge_l_f) + ',' +
               format_length(cell->length_stats.avg_tokens) + ',' +
               std::to_string(cell->length_stats.max_tokens) + '\n';
    }
    return out;
}

namespace {

std::string table2_cell_text(const CellResult& cell, int bin) {
    const auto it = cell.per_context_size.find(bin);
    if (cell.aborted || it == cell.per_context_size.end() || it->second.count == 0) return "-";
    return format_percent(it->second.bleu4);
}

} // namespace

std::string render_table2_markdown(std::span<const CellResult> cells,
                                   std::span<const int> bins) {
    std::string out = "| Complete Turns | Includes Summary? |";
    for (int bin : bins) out += " " + std::to_string(bin) + " |";
    out += "\n|---|---|";
    for (std::size_t i = 0; i < bins.size(); ++i) out += "---|";
    out += "\n";
    for (const CellResult* cell : sorted_cells(cells, true)) {
        out += "| " + std::to_string(cell->complete_turns) + " | " +
               (cell->include_summary ? "Yes" : "No") + " |";
        for (int bin : bins) out += " " + table2_cell_text(*cell, bin) + " |";
        out += "\n";
    }
    return out;
}

std::string render_table2_csv(std::span<const CellResult> cells, std::span<const int> bins) {
    std::string out = "complete_turns,includes_summary";
    for (int bin : bins) out += ",context_" + std::to_string(bin);
    out += "\n";
    for (const CellResult* cell : sorted_cells(cells, true)) {
        out += std::to_string(cell->complete_turns) + ',' +
               (cell->include_summary ? "yes" : "no");
        for (int bin : bins) out += ',' + table2_cell_text(*cell, bin);
        out += "\n";
    }
    return out;
}

ReportFiles render_report(std::span<const CellResult> cells, std::span<const int> bins) {
    return ReportFiles{render_table1_markdown(cells), render_table1_csv(cells),
                       render_table2_markdown(cells, bins), render_table2_csv(cells, bins)};
}

namespace {

json metric_report_to_json_obj(const MetricReport& report) {
    return json::parse(report.to_json());
}

MetricReport metric_report_from_json(const json& j) {
    MetricReport report;
    report.bleu4 = j.at("bleu4").get<double>();
    report.rouge1_f = j.at("rouge1_f").get<double>();
    report.rouge2_f = j.at("rouge2_f").get<double>();
    report.rouge_l_f = j.at("rougeL_f").get<double>();
    report.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
    report.smoothing = smoothing_from_name(j.at("smoothing").get<std::string>());
    report.example_count = j.at("examples").get<int>();
    return report;
}

} // namespace

std::string results_to_json(std::span<const CellResult> cells, std::span<const int> bins) {
    json root;
    root["contextSizeBins"] = std::vector<int>(bins.begin(), bins.end());
    json list = json::array();
    for (const CellResult& cell : cells) {
        json j;
        j["completeTurns"] = cell.complete_turns;
        j["includesSummary"] = cell.include_summary;
        j["metricReport"] = metric_report_to_json_obj(cell.metric_report);
        j["lengthStats"] = {{"avgTokens", cell.length_stats.avg_tokens},
                            {"maxTokens", cell.length_stats.max_tokens},
                            {"count", cell.length_stats.count}};
        json bins_json = json::array();
        for (const auto& [bin, score] : cell.per_context_size)
            bins_json.push_back({{"bin", bin}, {"bleu4", score.bleu4}, {"count", score.count}});
        j["perContextSize"] = std::move(bins_json);
        j["totalExamples"] = cell.total_examples;
        j["omittedExamples"] = cell.omitted_examples;
        j["clippedExamples"] = cell.clipped_examples;
        j["aborted"] = cell.aborted;
        j["abortReason"] = cell.abort_reason;
        list.push_back(std::move(j));
    }
    root["cells"] = std::move(list);
    return root.dump(2);
}

GridResults results_from_json(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object() || !root.contains("cells"))
        throw ParseError(0, "results file is not a grid results JSON object");
    GridResults results;
    for (const auto& b : root.at("contextSizeBins"))
        results.context_size_bins.push_back(b.get<int>());
    for (const auto& j : root.at("cells")) {
        CellResult cell;
        cell.complete_turns = j.at("completeTurns").get<int>();
        cell.include_summary = j.at("includesSummary").get<bool>();
        cell.metric_report = metric_report_from_json(j.at("metricReport"));
        cell.length_stats.avg_tokens = j.at("lengthStats").at("avgTokens").get<double>();
        cell.length_stats.max_tokens = j.at("lengthStats").at("maxTokens").get<int>();
        cell.length_stats.count = j.at("lengthStats").at("count").get<int>();
        for (const auto& b : j.at("perContextSize"))
            cell.per_context_size[b.at("bin").get<int>()] =
                BinScore{b.at("bleu4").get<double>(), b.at("count").get<int>()};
        cell.total_examples = j.at("totalExamples").get<int>();
        cell.omitted_examples = j.at("omittedExamples").get<int>();
        cell.clipped_examples = j.at("clippedExamples").get<int>();
        cell.aborted = j.at("aborted").get<bool>();
        cell.abort_reason = j.at("abortReason").get<std::string>();
        results.cells.push_back(std::move(cell));
    }
    return results;
}

std::string manifest_json(const GridConfig& grid, const BackendDescriptor& summarizer,
                          const GeneratorDescriptor& generator) {
    json j;
    j["tokenizer"] = {{"id", grid.tokenizer.id},
                      {"kind", grid.tokenizer.kind == TokenizerKind::Whitespace ? "whitespace"
                                                                                : "external"},
                      {"command", grid.tokenizer.command}};
    j["markers"] = {{"persona", grid.markers.persona},
                    {"summary", grid.markers.summary},
                    {"sp1", grid.markers.sp1},
                    {"sp2", grid.markers.sp2},
                    {"request", grid.markers.request}};
    j["aggregation"] = aggregation_name(grid.aggregation);
    j["smoothing"] = smoothing_name(grid.smoothing);
    j["maxInputTokens"] = grid.max_input_tokens;
    j["maxResponseTokens"] = grid.max_response_tokens;
    j["completeTurnsList"] = grid.complete_turns_list;
    j["summaryModes"] = grid.summary_modes;
    j["contextSizeBins"] = grid.context_size_bins;
    j["seed"] = grid.seed;
    j["maxDialogues"] = grid.max_dialogues;
    j["jobs"] = grid.jobs;
    j["summarizer"] = {{"id", summarizer.id},
                       {"kind", backend_kind_name(summarizer.kind)},
                       {"deterministic", summarizer.deterministic},
                       {"maxSummaryTokens", summarizer.max_summary_tokens}};
    j["generator"] = {{"id", generator.id},
                      {"kind", generator_kind_name(generator.kind)},
                      {"deterministic", generator.deterministic}};
    return j.dump(2);
}

} // namespace sumctx
