#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sumctx/config.hpp"
#include "sumctx/context.hpp"
#include "sumctx/corpus.hpp"
#include "sumctx/harness.hpp"
#include "sumctx/metrics.hpp"
#include "sumctx/summarize.hpp"
#include "sumctx/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw sumctx::Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw sumctx::Error("cannot write " + path.string());
    out << content;
    if (!out) throw sumctx::Error("failed while writing " + path.string());
}

std::vector<sumctx::Dialogue> load_corpus(const fs::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw sumctx::Error("cannot open corpus " + path.string());
    return sumctx::parse_dialogues_jsonl(in);
}

struct CommonArgs {
    std::string config_path;
    sumctx::GlobalConfig config;

    void finalize() {
        if (!config_path.empty())
            config = sumctx::apply_config_json(config, read_file(config_path));
        config.validate();
        sumctx::set_remote_concurrency_cap(config.remote_concurrency);
    }
};

std::unique_ptr<sumctx::SummarizerBackend>
make_summarizer(const std::string& id, const sumctx::GlobalConfig& config,
                int max_summary_tokens) {
    if (id == "extractive")
        return std::make_unique<sumctx::ExtractiveSummarizer>(
            sumctx::make_tokenizer(config.tokenizer), max_summary_tokens);
    if (id == "remote")
        return std::make_unique<sumctx::RemoteSummarizer>(config.summarizer_endpoint,
                                                          sumctx::RetryPolicy{},
                                                          max_summary_tokens);
    throw sumctx::ArgumentError("unknown summarizer backend \"" + id +
                                "\" (expected extractive or remote)");
}

std::unique_ptr<sumctx::GenerationBackend>
make_generator(const std::string& id, const sumctx::GlobalConfig& config,
               std::span<const sumctx::Dialogue> corpus) {
    if (id == "echo") return std::make_unique<sumctx::EchoGenerator>();
    if (id == "retrieval")
        return std::make_unique<sumctx::RetrievalGenerator>(
            sumctx::speaker2_response_pool(corpus));
    if (id == "remote")
        return std::make_unique<sumctx::RemoteGenerator>(config.generator_endpoint);
    throw sumctx::ArgumentError("unknown generator backend \"" + id +
                                "\" (expected echo, retrieval, or remote)");
}

int cmd_ingest(const CommonArgs& common, const std::string& format, const fs::path& in_path,
               const fs::path& out_path) {
    (void)common;
    if (format == "samsum") {
        std::ifstream in(in_path);
        if (!in.is_open()) throw sumctx::Error("cannot open " + in_path.string());
        const auto pairs = sumctx::parse_samsum_json(in);
        json out = json::array();
        for (const auto& p : pairs)
            out.push_back({{"id", p.id}, {"dialogue", p.dialogue_text},
                           {"summary", p.reference_summary}});
        write_file(out_path, out.dump(2) + "\n");
        std::cout << pairs.size() << " pairs\n";
        return 0;
    }

    std::vector<sumctx::Dialogue> dialogues;
    std::ifstream in(in_path);
    if (!in.is_open()) throw sumctx::Error("cannot open " + in_path.string());
    if (format == "native")
        dialogues = sumctx::parse_personachat_native(in);
    else if (format == "jsonl")
        dialogues = sumctx::parse_dialogues_jsonl(in);
    else
        throw sumctx::ArgumentError("unknown format \"" + format + "\"");

    write_file(out_path, sumctx::write_dialogues_jsonl(dialogues));
    std::size_t turn_count = 0;
    for (const auto& d : dialogues) turn_count += d.turns.size();
    std::cout << dialogues.size() << " dialogues, " << turn_count << " turns\n";
    for (const std::string& id : sumctx::persona_warnings(dialogues))
        std::cerr << "warning: dialogue \"" << id << "\" has fewer than 5 persona sentences\n";
    return 0;
}

int cmd_build_context(const CommonArgs& common, const fs::path& corpus_path,
                      const std::string& dialogue_id, int step, int turns,
                      const std::string& summary_mode, const std::string& summarizer_id,
                      int max_input, int max_response, int max_summary_tokens,
                      const std::string& cache_path, bool as_json) {
    const auto corpus = load_corpus(corpus_path);
    const sumctx::Dialogue* dialogue = nullptr;
    for (const auto& d : corpus)
        if (d.id == dialogue_id) dialogue = &d;
    if (!dialogue)
        throw sumctx::ArgumentError("dialogue \"" + dialogue_id + "\" not found in " +
                                    corpus_path.string());

    sumctx::AssemblyConfig config;
    config.complete_turns = turns;
    config.include_summary = summary_mode == "on";
    config.max_input_tokens = max_input;
    config.max_response_tokens = max_response;
    config.markers = common.config.markers;
    config.tokenizer = common.config.tokenizer;

    auto summarizer = make_summarizer(summarizer_id, common.config, max_summary_tokens);
    std::unique_ptr<sumctx::SummaryCache> cache;
    if (!cache_path.empty()) cache = std::make_unique<sumctx::SummaryCache>(cache_path);

    const auto assembly =
        sumctx::build_context(*dialogue, step, config, *summarizer, cache.get());
    if (as_json)
        std::cout << sumctx::assembly_to_json(assembly) << "\n";
    else
        std::cout << sumctx::serialize_assembly(assembly, config.markers) << "\n";
    return 0;
}

int cmd_summarize(const CommonArgs& common, const std::string& backend_id,
                  const fs::path& corpus_path, const fs::path& cache_path,
                  int max_summary_tokens) {
    const auto corpus = load_corpus(corpus_path);
    auto backend = make_summarizer(backend_id, common.config, max_summary_tokens);
    sumctx::SummaryCache cache(cache_path);
    const std::size_t before = cache.size();

    std::size_t requested = 0;
    for (const auto& dialogue : corpus) {
        const int total = static_cast<int>(dialogue.turns.size());
        int max_step = total + 1;
        if (max_step % 2 != 0) --max_step;
        for (int range_end = 2; range_end <= max_step - 2; range_end += 2) {
            cache.get_or_compute(dialogue, range_end, *backend);
            ++requested;
        }
    }
    std::cout << "cached " << requested << " summaries (" << (cache.size() - before)
              << " new) -> " << cache_path.string() << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const fs::path& pairs_path, const fs::path& out_path,
                 const std::string& aggregation, const std::string& smoothing,
                 bool per_example) {
    std::ifstream in(pairs_path);
    if (!in.is_open()) throw sumctx::Error("cannot open " + pairs_path.string());
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("candidate") ||
            !j.contains("reference"))
            throw sumctx::ParseError(line_no,
                                     "expected {\"candidate\": str, \"reference\": str}");
        pairs.emplace_back(j["candidate"].get<std::string>(),
                           j["reference"].get<std::string>());
    }

    const auto report = sumctx::evaluate(pairs, common.config.tokenizer,
                                         sumctx::aggregation_from_name(aggregation),
                                         sumctx::smoothing_from_name(smoothing), per_example);
    write_file(out_path, report.to_json() + "\n");
    std::cout << "evaluated " << pairs.size() << " pairs: BLEU-4 "
              << sumctx::format_percent(report.bleu4) << "%, ROUGE-1 "
              << sumctx::format_percent(report.rouge1_f) << "%, ROUGE-2 "
              << sumctx::format_percent(report.rouge2_f) << "%, ROUGE-L "
              << sumctx::format_percent(report.rouge_l_f) << "%\n";
    return 0;
}

int cmd_experiment(const CommonArgs& common, const fs::path& corpus_path,
                   const std::string& grid_path, const std::string& summarizer_id,
                   const std::string& generator_id, const fs::path& out_dir, int jobs,
                   const std::string& cache_path, int max_dialogues) {
    const auto corpus = load_corpus(corpus_path);

    sumctx::GridConfig grid;
    grid.markers = common.config.markers;
    grid.tokenizer = common.config.tokenizer;
    grid.jobs = common.config.jobs;
    if (!grid_path.empty()) grid = sumctx::apply_grid_json(grid, read_file(grid_path));
    if (jobs > 0) grid.jobs = jobs;
    if (max_dialogues >= 0) grid.max_dialogues = max_dialogues;
    grid.validate();

    const auto collisions = sumctx::validate_markers(grid.markers, corpus);
    if (!collisions.empty()) {
        std::string what = "segment markers collide with corpus text at";
        for (std::size_t i = 0; i < collisions.size() && i < 5; ++i)
            what += " (" + collisions[i].dialogue_id + ", turn " +
                    std::to_string(collisions[i].turn_index) + ")";
        throw sumctx::ArgumentError(what);
    }

    auto summarizer = make_summarizer(summarizer_id, common.config, 60);
    auto generator = make_generator(generator_id, common.config, corpus);
    std::unique_ptr<sumctx::SummaryCache> cache;
    if (!cache_path.empty()) cache = std::make_unique<sumctx::SummaryCache>(cache_path);

    const auto cells = sumctx::run_grid(corpus, grid, *summarizer, *generator, cache.get());

    fs::create_directories(out_dir);
    const auto report = sumctx::render_report(cells, grid.context_size_bins);
    write_file(out_dir / "results.json",
               sumctx::results_to_json(cells, grid.context_size_bins) + "\n");
    write_file(out_dir / "table1.md", report.table1_md);
    write_file(out_dir / "table1.csv", report.table1_csv);
    write_file(out_dir / "table2.md", report.table2_md);
    write_file(out_dir / "table2.csv", report.table2_csv);
    write_file(out_dir / "manifest.json",
               sumctx::manifest_json(grid, summarizer->descriptor(),
                                     generator->descriptor()) + "\n");

    std::size_t aborted = 0;
    for (const auto& cell : cells)
        if (cell.aborted) ++aborted;
    std::cout << cells.size() << " cells (" << aborted << " aborted) -> "
              << out_dir.string() << "\n";
    for (const auto& cell : cells)
        if (cell.aborted)
            std::cerr << "warning: cell i=" << cell.complete_turns << " summary="
                      << (cell.include_summary ? "yes" : "no") << " aborted: "
                      << cell.abort_reason << "\n";
    return 0;
}

int cmd_report(const fs::path& results_path, const fs::path& out_dir) {
    const auto results = sumctx::results_from_json(read_file(results_path));
    fs::create_directories(out_dir);
    const auto report = sumctx::render_report(results.cells, results.context_size_bins);
    write_file(out_dir / "table1.md", report.table1_md);
    write_file(out_dir / "table1.csv", report.table1_csv);
    write_file(out_dir / "table2.md", report.table2_md);
    write_file(out_dir / "table2.csv", report.table2_csv);
    std::cout << "rendered " << results.cells.size() << " cells -> " << out_dir.string()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Summary-substituted dialogue context assembly and evaluation"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--config", common.config_path, "Global JSON config file")
        ->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert a corpus to canonical JSONL");
    std::string ingest_format = "native";
    std::string ingest_in, ingest_out;
    ingest->add_option("--format", ingest_format, "native, jsonl, or samsum")
        ->check(CLI::IsMember({"native", "jsonl", "samsum"}));
    ingest->add_option("--in", ingest_in, "Input file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", ingest_out, "Output file")->required();

    // build-context
    auto* build = app.add_subcommand("build-context", "Print the assembled input for one step");
    std::string bc_corpus, bc_dialogue, bc_summary = "on", bc_summarizer = "extractive",
                bc_cache;
    int bc_step = 2, bc_turns = 2, bc_max_input = 1024, bc_max_response = 200,
        bc_max_summary = 60;
    bool bc_json = false;
    build->add_option("--corpus", bc_corpus, "Corpus JSONL")->required()
        ->check(CLI::ExistingFile);
    build->add_option("--dialogue", bc_dialogue, "Dialogue id")->required();
    build->add_option("--step", bc_step, "Even generation step (>= 2)")->required()
        ->check([](const std::string& value) -> std::string {
            try {
                const int v = std::stoi(value);
                if (v < 2 || v % 2 != 0) return "step must be an even number >= 2";
            } catch (...) {
                return "step must be an integer";
            }
            return {};
        });
    build->add_option("--turns", bc_turns, "Complete turns i (even, >= 0)");
    build->add_option("--summary", bc_summary, "on or off")
        ->check(CLI::IsMember({"on", "off"}));
    build->add_option("--summarizer", bc_summarizer, "extractive or remote");
    build->add_option("--max-input", bc_max_input, "Input token budget");
    build->add_option("--max-response", bc_max_response, "Response token budget");
    build->add_option("--max-summary-tokens", bc_max_summary, "Summary token budget");
    build->add_option("--cache", bc_cache, "Summary cache JSONL");
    build->add_flag("--json", bc_json, "Print the assembly as JSON");

    // summarize
    auto* summ = app.add_subcommand("summarize", "Precompute prefix summaries into a cache");
    std::string sm_backend = "extractive", sm_corpus, sm_out;
    int sm_max_tokens = 60;
    summ->add_option("--backend", sm_backend, "extractive or remote");
    summ->add_option("--corpus", sm_corpus, "Corpus JSONL")->required()
        ->check(CLI::ExistingFile);
    summ->add_option("--out", sm_out, "Cache JSONL path")->required();
    summ->add_option("--max-summary-tokens", sm_max_tokens, "Summary token budget");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Score candidate/reference pairs");
    std::string ev_pairs, ev_out, ev_aggregation = "corpus", ev_smoothing = "add_epsilon";
    bool ev_per_example = false;
    eval->add_option("--pairs", ev_pairs, "JSONL of {candidate, reference}")->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", ev_out, "Report JSON path")->required();
    eval->add_option("--aggregation", ev_aggregation, "corpus or macro");
    eval->add_option("--smoothing", ev_smoothing, "none or epsilon");
    eval->add_flag("--per-example", ev_per_example, "Keep per-example scores");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run the full grid and render reports");
    std::string ex_corpus, ex_grid, ex_summarizer = "extractive", ex_generator = "echo",
                ex_out, ex_cache;
    int ex_jobs = 0, ex_max_dialogues = -1;
    exp->add_option("--corpus", ex_corpus, "Corpus JSONL")->required()
        ->check(CLI::ExistingFile);
    exp->add_option("--grid", ex_grid, "Grid config JSON")->check(CLI::ExistingFile);
    exp->add_option("--summarizer", ex_summarizer, "extractive or remote");
    exp->add_option("--generator", ex_generator, "echo, retrieval, or remote");
    exp->add_option("--out", ex_out, "Output directory")->required();
    exp->add_option("--jobs", ex_jobs, "Worker threads");
    exp->add_option("--cache", ex_cache, "Summary cache JSONL");
    exp->add_option("--max-dialogues", ex_max_dialogues, "Limit corpus size (0 = all)");

    // report
    auto* rep = app.add_subcommand("report", "Re-render tables from results.json");
    std::string rp_results, rp_out;
    rep->add_option("--results", rp_results, "results.json")->required()
        ->check(CLI::ExistingFile);
    rep->add_option("--out", rp_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        common.finalize();
        if (app.got_subcommand(ingest))
            return cmd_ingest(common, ingest_format, ingest_in, ingest_out);
        if (app.got_subcommand(build))
            return cmd_build_context(common, bc_corpus, bc_dialogue, bc_step, bc_turns,
                                     bc_summary, bc_summarizer, bc_max_input, bc_max_response,
                                     bc_max_summary, bc_cache, bc_json);
        if (app.got_subcommand(summ))
            return cmd_summarize(common, sm_backend, sm_corpus, sm_out, sm_max_tokens);
        if (app.got_subcommand(eval))
            return cmd_evaluate(common, ev_pairs, ev_out, ev_aggregation, ev_smoothing,
                                ev_per_example);
        if (app.got_subcommand(exp))
            return cmd_experiment(common, ex_corpus, ex_grid, ex_summarizer, ex_generator,
                                  ex_out, ex_jobs, ex_cache, ex_max_dialogues);
        if (app.got_subcommand(rep)) return cmd_report(rp_results, rp_out);
    } catch (const sumctx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
