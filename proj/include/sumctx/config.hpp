#ifndef SUMCTX_CONFIG_HPP
#define SUMCTX_CONFIG_HPP

#include <string>

#include "sumctx/harness.hpp"
#include "sumctx/tokenizer.hpp"

namespace sumctx {

// Process-wide settings shared by all subcommands. Precedence is
// flags > config file > defaults; the file is JSON and unknown keys
// are rejected.
struct GlobalConfig {
    TokenizerSpec tokenizer;
    SegmentMarkers markers;
    std::string summarizer_endpoint = "http://127.0.0.1:8601";
    std::string generator_endpoint = "http://127.0.0.1:8601";
    std::string cache_path;
    int jobs = 1;
    int remote_concurrency = 4;
    int verbosity = 0;

    void validate() const; // throws ArgumentError on violations
};

// Parses a config file's JSON text over `base` (file values win).
// Unknown keys raise ArgumentError naming the key.
GlobalConfig apply_config_json(const GlobalConfig& base, const std::string& json_text);

// Parses a grid config file's JSON text over the given defaults.
// Unknown keys raise ArgumentError naming the key.
GridConfig apply_grid_json(const GridConfig& base, const std::string& json_text);

} // namespace sumctx

#endif // SUMCTX_CONFIG_HPP
