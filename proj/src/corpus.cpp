#include "sumctx/corpus.hpp"

#include <cstdio>
#include <istream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sumctx/text_util.hpp"

namespace sumctx {

using nlohmann::json;

namespace {

constexpr const char* kYourPersonaPrefix = "your persona: ";
constexpr const char* kPartnerPersonaPrefix = "partner's persona: ";

std::string format_id(std::size_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "pc-%04zu", n);
    return buf;
}

Speaker expected_speaker(int index) {
    return index % 2 == 1 ? Speaker::One : Speaker::Two;
}

} // namespace

void validate_dialogue(const Dialogue& dialogue) {
    if (dialogue.id.empty())
        throw ArgumentError("dialogue has empty id");
    if (dialogue.persona.sentences.empty())
        throw ArgumentError("dialogue \"" + dialogue.id + "\" has no persona sentences");
    for (const auto& sentence : dialogue.persona.sentences)
        if (trim(sentence).empty())
            throw ArgumentError("dialogue \"" + dialogue.id + "\" has a blank persona sentence");
    if (dialogue.turns.empty())
        throw ArgumentError("dialogue \"" + dialogue.id + "\" has no turns");
    for (std::size_t pos = 0; pos < dialogue.turns.size(); ++pos) {
        const Turn& turn = dialogue.turns[pos];
        const int expected_index = static_cast<int>(pos) + 1;
        if (turn.index != expected_index)
            throw ArgumentError("dialogue \"" + dialogue.id + "\": turn at position " +
                                std::to_string(expected_index) + " has index " +
                                std::to_string(turn.index));
        if (trim(turn.text).empty())
            throw ArgumentError("dialogue \"" + dialogue.id + "\": turn " +
                                std::to_string(turn.index) + " has empty text");
        if (turn.speaker != expected_speaker(turn.index))
            throw ArgumentError("dialogue \"" + dialogue.id + "\": turn " +
                                std::to_string(turn.index) +
                                " breaks speaker alternation (odd turns are Speaker 1)");
    }
}

std::vector<Dialogue> parse_personachat_native(std::istream& in) {
    std::vector<Dialogue> dialogues;

    Dialogue current;
    bool current_has_content = false;
    bool current_has_turns = false;
    std::size_t current_first_line = 0;

    auto flush = [&](std::size_t line_no) {
        if (!current_has_content) return;
        current.id = format_id(dialogues.size() + 1);
        if (current.persona.sentences.empty())
            throw ParseError(current_first_line, "dialogue starting here has no persona sentences");
        if (current.turns.empty())
            throw ParseError(line_no, "dialogue starting at line " +
                                          std::to_string(current_first_line) + " has no turns");
        validate_dialogue(current);
        dialogues.push_back(std::move(current));
        current = Dialogue{};
        current_has_content = false;
        current_has_turns = false;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        // Leading line number.
        std::size_t pos = 0;
        while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos == 0)
            throw ParseError(line_no, "expected a leading line number");
        const long number = std::stol(line.substr(0, pos));
        if (pos >= line.size() || line[pos] != ' ')
            throw ParseError(line_no, "expected a space after the line number");
        std::string_view rest{line};
        rest.remove_prefix(pos + 1);

        if (number == 1) {
            flush(line_no);
            if (!current_has_content) current_first_line = line_no;
        }
        if (!current_has_content) current_first_line = line_no;

        if (rest.starts_with(kPartnerPersonaPrefix))
            continue; // Speaker 1 personas are out of scope
        if (rest.starts_with(kYourPersonaPrefix)) {
            if (current_has_turns)
                throw ParseError(line_no, "persona sentence after dialogue turns");
            std::string_view sentence = trim(rest.substr(std::string_view(kYourPersonaPrefix).size()));
            if (sentence.empty())
                throw ParseError(line_no, "empty persona sentence");
            current.persona.sentences.emplace_back(sentence);
            current_has_content = true;
            continue;
        }

        // Turn pair: speaker-1 utterance TAB speaker-2 utterance [TAB extras].
        const std::size_t tab = rest.find('\t');
        if (tab == std::string_view::npos)
            throw ParseError(line_no, "expected a persona sentence or a tab-separated turn pair");
        std::string_view first = trim(rest.substr(0, tab));
        std::string_view second = rest.substr(tab + 1);
        const std::size_t next_tab = second.find('\t');
        if (next_tab != std::string_view::npos)
            second = second.substr(0, next_tab); // candidate lists etc. are discarded
        second = trim(second);
        if (first.empty() || second.empty())
            throw ParseError(line_no, "turn pair with an empty utterance");

        const int base = static_cast<int>(current.turns.size());
        current.turns.push_back(Turn{base + 1, Speaker::One, std::string(first)});
        current.turns.push_back(Turn{base + 2, Speaker::Two, std::string(second)});
        current_has_content = true;
        current_has_turns = true;
    }
    flush(line_no + 1);
    return dialogues;
}

namespace {

[[noreturn]] void field_error(std::size_t line_no, const std::string& what) {
    throw ParseError(line_no, what);
}

void require_keys(const json& object, std::initializer_list<const char*> keys,
                  std::size_t line_no, const std::string& where) {
    for (const char* key : keys)
        if (!object.contains(key))
            field_error(line_no, where + " is missing field \"" + key + "\"");
    for (const auto& item : object.items()) {
        bool known = false;
        for (const char* key : keys)
            if (item.key() == key) known = true;
        if (!known)
            field_error(line_no, where + " has unknown field \"" + item.key() + "\"");
    }
}

} // namespace

std::vector<Dialogue> parse_dialogues_jsonl(std::istream& in) {
    std::vector<Dialogue> dialogues;
    std::set<std::string> seen_ids;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) field_error(line_no, "dialogue record");
        require_keys(j, {"id", "persona", "turns"}, line_no, "dialogue record");

        Dialogue d;
        if (!j["id"].is_string() || j["id"].get<std::string>().empty())
            field_error(line_no, "field \"id\" must be a non-empty string");
        d.id = j["id"].get<std::string>();
        if (!seen_ids.insert(d.id).second)
            field_error(line_no, "duplicate dialogue id \"" + d.id + "\"");

        if (!j["persona"].is_array() || j["persona"].empty())
            field_error(line_no, "field \"persona\" must be a non-empty array of strings");
        for (const auto& s : j["persona"]) {
            if (!s.is_string())
                field_error(line_no, "field \"persona\" must contain only strings");
            d.persona.sentences.push_back(s.get<std::string>());
        }

        if (!j["turns"].is_array() || j["turns"].empty())
            field_error(line_no, "field \"turns\" must be a non-empty array");
        int index = 0;
        for (const auto& t : j["turns"]) {
            ++index;
            if (!t.is_object())
                field_error(line_no, "turn " + std::to_string(index) + " must be an object");
            require_keys(t, {"speaker", "text"}, line_no, "turn " + std::to_string(index));
            if (!t["speaker"].is_number_integer())
                field_error(line_no, "turn " + std::to_string(index) + ": field \"speaker\" must be 1 or 2");
            const int sp = t["speaker"].get<int>();
            if (sp != 1 && sp != 2)
                field_error(line_no, "turn " + std::to_string(index) + ": field \"speaker\" must be 1 or 2");
            if (!t["text"].is_string())
                field_error(line_no, "turn " + std::to_string(index) + ": field \"text\" must be a string");
            d.turns.push_back(Turn{index, sp == 1 ? Speaker::One : Speaker::Two,
                                   t["text"].get<std::string>()});
        }

        try {
            validate_dialogue(d);
        } catch (const ArgumentError& e) {
            throw ParseError(line_no, e.what());
        }
        dialogues.push_back(std::move(d));
    }
    return dialogues;
}

std::string write_dialogues_jsonl(std::span<const Dialogue> dialogues) {
    std::string out;
    for (const Dialogue& d : dialogues) {
        validate_dialogue(d);
        json j;
        j["id"] = d.id;
        j["persona"] = d.persona.sentences;
        json turns = json::array();
        for (const Turn& t : d.turns)
            turns.push_back({{"speaker", t.speaker == Speaker::One ? 1 : 2}, {"text", t.text}});
        j["turns"] = std::move(turns);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<SummPair> parse_samsum_json(std::istream& in) {
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_array())
        throw ParseError(0, "expected a top-level JSON array");

    std::vector<SummPair> pairs;
    std::size_t index = 0;
    for (const auto& rec : root) {
        ++index;
        const std::string where = "record " + std::to_string(index);
        if (!rec.is_object())
            throw ParseError(0, where + " must be an object");
        for (const char* key : {"id", "dialogue", "summary"}) {
            if (!rec.contains(key))
                throw ParseError(0, where + " is missing field \"" + key + "\"");
            if (!rec[key].is_string())
                throw ParseError(0, where + ": field \"" + key + "\" must be a string");
        }
        SummPair p{rec["id"].get<std::string>(), rec["dialogue"].get<std::string>(),
                   rec["summary"].get<std::string>()};
        if (trim(p.dialogue_text).empty())
            throw ParseError(0, where + ": field \"dialogue\" is empty");
        if (trim(p.reference_summary).empty())
            throw ParseError(0, where + ": field \"summary\" is empty");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<std::string> persona_warnings(std::span<const Dialogue> dialogues) {
    std::vector<std::string> ids;
    for (const Dialogue& d : dialogues)
        if (d.persona.sentences.size() < 5) ids.push_back(d.id);
    return ids;
}

} // namespace sumctx
