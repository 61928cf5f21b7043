#ifndef SUMCTX_CORPUS_HPP
#define SUMCTX_CORPUS_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sumctx/errors.hpp"

namespace sumctx {

enum class Speaker { One = 1, Two = 2 };

// One utterance. Turn indices are 1-based; within a dialogue speakers
// strictly alternate starting with Speaker 1, so odd index => Speaker 1.
struct Turn {
    int index = 0;
    Speaker speaker = Speaker::One;
    std::string text;

    bool operator==(const Turn&) const = default;
};

// Speaker 2's profile sentences.
struct Persona {
    std::vector<std::string> sentences;

    bool operator==(const Persona&) const = default;
};

struct Dialogue {
    std::string id;
    Persona persona;
    std::vector<Turn> turns;

    bool operator==(const Dialogue&) const = default;
};

// A dialogue/reference-summary pair in SAMSum shape.
struct SummPair {
    std::string id;
    std::string dialogue_text;
    std::string reference_summary;

    bool operator==(const SummPair&) const = default;
};

// Throws ParseError/ArgumentError if the dialogue violates an invariant:
// empty turn list, empty persona, blank turn text, bad indices, or broken
// speaker alternation. Error messages name the dialogue id and turn index.
void validate_dialogue(const Dialogue& dialogue);

// Reads the numbered-line Persona-Chat text format:
//   "K your persona: <sentence>"           persona sentence
//   "K <utterance 1>\t<utterance 2>[\t..]" one Speaker1/Speaker2 turn pair
// A line number reset to 1 starts a new dialogue. "partner's persona:" lines
// are ignored. Extra tab-separated fields are discarded. Dialogues receive
// sequential ids "pc-0001", "pc-0002", ...
std::vector<Dialogue> parse_personachat_native(std::istream& in);

// Canonical JSONL: one {"id","persona","turns"} object per line, turns as
// {"speaker": 1|2, "text": str}. Rejects unknown fields, duplicate ids, and
// alternation violations; errors name the offending line and field.
std::vector<Dialogue> parse_dialogues_jsonl(std::istream& in);

// Inverse of parse_dialogues_jsonl: parse(write(x)) == x.
std::string write_dialogues_jsonl(std::span<const Dialogue> dialogues);

// JSON array of {"id","dialogue","summary"}; order preserved.
// Missing or non-string fields raise ParseError naming the record index.
std::vector<SummPair> parse_samsum_json(std::istream& in);

// Ids of dialogues whose persona has fewer than 5 sentences. A warning,
// not an error.
std::vector<std::string> persona_warnings(std::span<const Dialogue> dialogues);

} // namespace sumctx

#endif // SUMCTX_CORPUS_HPP
