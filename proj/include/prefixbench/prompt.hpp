#pragma once

#include <string>
#include <variant>
#include <vector>

#include "prefixbench/errors.hpp"
#include "prefixbench/simworld.hpp"

namespace pbench {

// Toy word-level tokenizer. Specials come first; every ordinary word is
// eligible for adversarial prefixes.

struct Vocab {
    std::vector<std::string> tokens;
    int pad_id = 0;
    int eos_id = 1;
    int obj_placeholder_id = 2;
    int extra_id_0 = 3;
    std::vector<int> attackable_ids;

    int size() const { return static_cast<int>(tokens.size()); }

    bool is_special(int id) const {
        return id == pad_id || id == eos_id || id == obj_placeholder_id || id == extra_id_0;
    }

    int id_of(const std::string& word) const {
        for (int i = 0; i < size(); ++i)
            if (tokens[i] == word) return i;
        throw TokenizeError("word not in vocabulary: '" + word + "'");
    }

    static const Vocab& standard() {
        static const Vocab v = [] {
            Vocab vb;
            vb.tokens = {"[pad]", "[eos]", "[obj]", "[extra_id_0]"};
            const char* words[] = {
                // instruction template words
                "put", "into", "move", "to", "and", "same", "shape", "as", "from", "then",
                // attribute words
                "red", "yellow", "blue", "green", "purple",
                "square", "circle", "triangle", "star", "hexagon",
                // filler vocabulary
                "robot", "arm", "table", "pick", "place", "drop", "lift", "hold", "push", "pull",
                "slide", "fast", "slow", "left", "right", "up", "down", "near", "far", "big",
                "small", "stop", "go", "now", "here", "there", "first", "second"};
            for (const char* w : words) vb.tokens.push_back(w);
            for (int i = 4; i < vb.size(); ++i) vb.attackable_ids.push_back(i);
            return vb;
        }();
        return v;
    }
};

struct TextToken {
    int id = 0;
};
struct ObjectToken {
    int shape_id = 0;
    int color_id = 0;
    double x = 0.0, y = 0.0;
};
using PromptElem = std::variant<TextToken, ObjectToken>;

struct PromptSequence {
    std::vector<PromptElem> elements;

    std::size_t size() const { return elements.size(); }
};

// Instruction -> prompt: word-per-token, object refs inlined, terminated by
// [extra_id_0].
inline PromptSequence tokenize(const Vocab& vocab, const std::vector<sim::InstrElem>& instruction) {
    PromptSequence p;
    for (const sim::InstrElem& e : instruction) {
        if (const sim::Word* w = std::get_if<sim::Word>(&e))
            p.elements.push_back(TextToken{vocab.id_of(w->text)});
        else {
            const sim::ObjRef& r = std::get<sim::ObjRef>(e);
            p.elements.push_back(ObjectToken{r.shape_id, r.color_id, r.x, r.y});
        }
    }
    p.elements.push_back(TextToken{vocab.extra_id_0});
    return p;
}

inline std::string detokenize(const Vocab& vocab, const PromptSequence& p) {
    std::string out;
    for (const PromptElem& e : p.elements) {
        if (const TextToken* t = std::get_if<TextToken>(&e)) {
            if (t->id == vocab.extra_id_0) continue;
            if (!out.empty()) out += ' ';
            out += vocab.tokens[t->id];
        } else {
            const ObjectToken& o = std::get<ObjectToken>(e);
            if (!out.empty()) out += ' ';
            out += std::string("<obj:") + sim::kShapeNames[o.shape_id] + "," +
                   sim::kColorNames[o.color_id] + ">";
        }
    }
    return out;
}

// Prefix token ids prepended strictly before every instruction element.
inline PromptSequence with_prefix(const Vocab& vocab, const std::vector<int>& prefix_ids,
                                  const PromptSequence& p) {
    PromptSequence out;
    out.elements.reserve(prefix_ids.size() + p.elements.size());
    for (int id : prefix_ids) {
        if (id < 0 || id >= vocab.size() || vocab.is_special(id))
            throw ContractError("prefix token id " + std::to_string(id) + " is not attackable");
        out.elements.push_back(TextToken{id});
    }
    out.elements.insert(out.elements.end(), p.elements.begin(), p.elements.end());
    return out;
}

}  // namespace pbench
