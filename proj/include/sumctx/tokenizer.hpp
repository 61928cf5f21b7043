#ifndef SUMCTX_TOKENIZER_HPP
#define SUMCTX_TOKENIZER_HPP

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sumctx/corpus.hpp"
#include "sumctx/errors.hpp"

namespace sumctx {

enum class TokenizerKind { Whitespace, External };

// Configuration for a token counter. Whitespace counts maximal
// non-whitespace runs. External shells out to `command` with a
// one-request-per-line protocol: each stdin line is the text with
// backslashes escaped as "\\" and newlines as "\n"; the reply line is a
// decimal count. Counts must be deterministic for a fixed spec.
struct TokenizerSpec {
    std::string id = "whitespace";
    TokenizerKind kind = TokenizerKind::Whitespace;
    std::string command;

    bool operator==(const TokenizerSpec&) const = default;
};

// Live token counter for a spec. Whitespace counting is pure. External
// counting keeps one subprocess alive and serializes requests internally,
// so concurrent calls are safe either way.
class Tokenizer {
public:
    explicit Tokenizer(TokenizerSpec spec);
    ~Tokenizer();

    Tokenizer(const Tokenizer&) = delete;
    Tokenizer& operator=(const Tokenizer&) = delete;

    const TokenizerSpec& spec() const { return spec_; }

    // Number of tokens in `text`; count("") == 0. Throws TokenizerError if
    // the external backend is unreachable or replies with a non-count.
    int count(std::string_view text) const;

private:
    struct Process;

    int count_external(std::string_view text) const;

    TokenizerSpec spec_;
    mutable std::mutex mutex_;
    mutable std::unique_ptr<Process> process_;
};

std::shared_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec);

// Marker strings prefixing each input segment. All five must be pairwise
// distinct, non-empty, and absent from corpus text (see validate_markers).
struct SegmentMarkers {
    std::string persona = "<persona>";
    std::string summary = "<summary>";
    std::string sp1 = "<sp1>";
    std::string sp2 = "<sp2>";
    std::string request = "<request>";

    bool operator==(const SegmentMarkers&) const = default;

    // Throws ArgumentError unless markers are non-empty and pairwise distinct.
    void validate() const;
};

struct MarkerCollision {
    std::string dialogue_id;
    int turn_index = 0;

    bool operator==(const MarkerCollision&) const = default;
};

// Every (dialogue id, turn index) whose text contains any marker string.
// Empty result means the markers are safe for this corpus.
std::vector<MarkerCollision> validate_markers(const SegmentMarkers& markers,
                                              std::span<const Dialogue> corpus);

} // namespace sumctx

#endif // SUMCTX_TOKENIZER_HPP
