/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Templated natural-language instructions. Every instruction names the task,
// the target object, the speed level and the gait; the wording lives in a
// versioned data file (data/templates.json) with identical built-in defaults.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "quard/error.hpp"
#include "quard/types.hpp"

namespace quard {

struct Instruction {
    std::string text;
    TaskSpec spec;
    std::string template_id;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct Paraphrase {
    std::string phrase;   // e.g. "navigate to target"
    std::string pattern;  // full template using the same slots as the canonical one
};

class TemplateTable {
public:
    int version = 1;
    std::map<SpeedLevel, std::string> speed_adverbs;
    std::map<Skill, std::string> templates;
    std::map<Skill, std::vector<Paraphrase>> paraphrases;

    static const TemplateTable& builtin() {
        static const TemplateTable table = [] {
            TemplateTable t = from_json(default_json());
            return t;
        }();
        return table;
    }

    static nlohmann::json default_json() {
        return nlohmann::json::parse(R"({
  "version": 1,
  "speed_adverbs": {"slow": "slowly", "normal": "at normal speed", "fast": "quickly"},
  "templates": {
    "distinguish": "distinguish the letter {letter} on the {color} box {speed} with {gait} gait",
    "go_to": "go to the {color} {object} {speed} with {gait} gait",
    "go_avoid": "go to the {color} {object} and avoid the obstacle {speed} with {gait} gait",
    "go_through": "go through the {color} {object} tunnel {speed} with {gait} gait",
    "crawl": "crawl under the bar to the {color} {object} {speed} with {gait} gait",
    "unload": "unload the ball into the {color} {object} {speed} with {gait} gait"
  },
  "paraphrases": {
    "distinguish": [{"phrase": "identify letter",
                     "template": "identify letter {letter} on the {color} box {speed} with {gait} gait"}],
    "go_to": [{"phrase": "navigate to target",
               "template": "navigate to target: the {color} {object} {speed} with {gait} gait"}],
    "crawl": [{"phrase": "move under barrier",
               "template": "move under barrier to the {color} {object} {speed} with {gait} gait"}],
    "unload": [{"phrase": "deposit object into container",
                "template": "deposit object into container: the {color} {object} {speed} with {gait} gait"}]
  }
})");
    }

    static TemplateTable from_json(const nlohmann::json& j) {
        TemplateTable t;
        try {
            t.version = j.value("version", 1);
            for (const auto& [k, v] : j.at("speed_adverbs").items()) {
                t.speed_adverbs[speed_from_name(k)] = v.get<std::string>();
            }
            for (const auto& [k, v] : j.at("templates").items()) {
                t.templates[skill_from_name(k)] = v.get<std::string>();
            }
            if (j.contains("paraphrases")) {
                for (const auto& [k, list] : j.at("paraphrases").items()) {
                    auto& out = t.paraphrases[skill_from_name(k)];
                    for (const auto& p : list) {
                        out.push_back({p.at("phrase").get<std::string>(),
                                       p.at("template").get<std::string>()});
                    }
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("template table: ") + e.what());
        }
        for (Skill s : kAllSkills) {
            if (!t.templates.count(s)) {
                throw ConfigError("template table lacks skill " + std::string(name(s)));
            }
        }
        for (SpeedLevel s : kAllSpeeds) {
            if (!t.speed_adverbs.count(s)) {
                throw ConfigError("template table lacks speed " + std::string(name(s)));
            }
        }
        t.check_paraphrases_disjoint();
        t.compile();
        return t;
    }

    static TemplateTable load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open template table " + path.string());
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("template table " + path.string() + ": " + e.what());
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = version;
        for (const auto& [k, v] : speed_adverbs) j["speed_adverbs"][std::string(name(k))] = v;
        for (const auto& [k, v] : templates) j["templates"][std::string(name(k))] = v;
        for (const auto& [k, list] : paraphrases) {
            auto& arr = j["paraphrases"][std::string(name(k))];
            arr = nlohmann::json::array();
            for (const auto& p : list) arr.push_back({{"phrase", p.phrase}, {"template", p.pattern}});
        }
        return j;
    }

    struct Compiled {
        Skill skill;
        std::string id;
        std::string pattern;
        std::vector<std::string> slots;
        std::regex re;
        bool paraphrase;
    };

    const std::vector<Compiled>& compiled() const { return compiled_; }

private:
    std::vector<Compiled> compiled_;

    void check_paraphrases_disjoint() const {
        std::set<std::string> seen;
        for (const auto& [skill, list] : paraphrases) {
            for (const auto& p : list) {
                if (!seen.insert(p.phrase).second) {
                    throw ConfigError("paraphrase '" + p.phrase + "' used by more than one skill");
                }
            }
        }
    }

    static std::string escape(const std::string& s) {
        static const std::string special = R"(\^$.|?*+()[]{}-)";
        std::string out;
        for (char c : s) {
            if (special.find(c) != std::string::npos) out += '\\';
            out += c;
        }
        return out;
    }

    std::string alternation(Skill skill, const std::string& slot) const {
        std::vector<std::string> words;
        if (slot == "color") {
            for (Color c : kSeenColors) words.emplace_back(name(c));
            for (Color c : kUnseenColors) words.emplace_back(name(c));
        } else if (slot == "object") {
            for (const auto& e : catalog_for(skill)) words.emplace_back(e.category);
        } else if (slot == "letter") {
            for (char l : kLetters) words.emplace_back(1, l);
        } else if (slot == "speed") {
            for (const auto& [k, v] : speed_adverbs) words.push_back(v);
        } else if (slot == "gait") {
            for (Gait g : kAllGaits) words.emplace_back(name(g));
        } else {
            throw ConfigError("unknown template slot {" + slot + "}");
        }
        // Longest first so alternation never stops at a prefix.
        std::sort(words.begin(), words.end(),
                  [](const auto& a, const auto& b) { return a.size() > b.size(); });
        std::string out = "(";
        for (std::size_t i = 0; i < words.size(); ++i) out += (i ? "|" : "") + escape(words[i]);
        return out + ")";
    }

    void compile_one(Skill skill, const std::string& id, const std::string& pattern, bool para) {
        static const std::regex slot_re(R"(\{([a-z]+)\})");
        Compiled c{skill, id, pattern, {}, {}, para};
        std::string re;
        std::size_t last = 0;
        for (auto it = std::sregex_iterator(pattern.begin(), pattern.end(), slot_re);
             it != std::sregex_iterator(); ++it) {
            re += escape(pattern.substr(last, static_cast<std::size_t>(it->position()) - last));
            c.slots.push_back((*it)[1]);
            re += alternation(skill, c.slots.back());
            last = static_cast<std::size_t>(it->position() + it->length());
        }
        re += escape(pattern.substr(last));
        c.re = std::regex(re, std::regex::icase | std::regex::ECMAScript);
        compiled_.push_back(std::move(c));
    }

    void compile() {
        compiled_.clear();
        for (const auto& [skill, pattern] : templates) {
            compile_one(skill, std::string(name(skill)) + ".v" + std::to_string(version), pattern,
                        false);
        }
        for (const auto& [skill, list] : paraphrases) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                compile_one(skill,
                            std::string(name(skill)) + ".para" + std::to_string(i) + ".v" +
                                std::to_string(version),
                            list[i].pattern, true);
            }
        }
    }
};

// Throws ConfigError when the task cannot be phrased (wrong object for the
// skill, missing letter, clutter color).
inline void validate_task(const TaskSpec& spec) {
    const auto& obj = spec.object;
    if (obj.color == Color::Gray) throw ConfigError("gray is not a target color");
    require_catalog(spec.skill, obj.category);
    if (spec.skill == Skill::Distinguish) {
        if (std::find(kLetters.begin(), kLetters.end(), obj.letter) == kLetters.end()) {
            throw ConfigError("distinguish task needs a letter in A-F");
        }
    } else if (obj.letter != 0) {
        throw ConfigError("only distinguish tasks carry a letter");
    }
}

inline bool is_unseen_object(const TaskSpec& spec) {
    const auto entry = find_catalog(spec.skill, spec.object.category);
    return !is_seen_color(spec.object.color) || !entry || entry->tier != CatalogTier::Seen;
}

namespace detail {

inline std::string fill_template(const std::string& pattern, const TaskSpec& spec,
                                 const TemplateTable& table) {
    std::string out;
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            const auto close = pattern.find('}', i);
            const std::string slot = pattern.substr(i + 1, close - i - 1);
            if (slot == "color") out += name(spec.object.color);
            else if (slot == "object") out += spec.object.category;
            else if (slot == "letter") out += spec.object.letter;
            else if (slot == "speed") out += table.speed_adverbs.at(spec.speed);
            else if (slot == "gait") out += name(spec.gait);
            else throw ConfigError("unknown template slot {" + slot + "}");
            i = close + 1;
        } else {
            out += pattern[i++];
        }
    }
    return out;
}

inline std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

// Canonical phrasing; UnseenVerbal specs use the first paraphrase when the
// skill has one.
inline Instruction render_instruction(const TaskSpec& spec,
                                      const TemplateTable& table = TemplateTable::builtin()) {
    validate_task(spec);
    const auto v = std::to_string(table.version);
    if (spec.split == Split::UnseenVerbal) {
        auto it = table.paraphrases.find(spec.skill);
        if (it != table.paraphrases.end() && !it->second.empty()) {
            return {detail::fill_template(it->second.front().pattern, spec, table), spec,
                    std::string(name(spec.skill)) + ".para0.v" + v};
        }
    }
    return {detail::fill_template(table.templates.at(spec.skill), spec, table), spec,
            std::string(name(spec.skill)) + ".v" + v};
}

// Inverse of render_instruction. The split is inferred: a paraphrase gives
// UnseenVerbal, an unseen color or category gives UnseenObject, otherwise
// SeenSim.
inline TaskSpec parse_instruction(const std::string& raw,
                                  const TemplateTable& table = TemplateTable::builtin()) {
    std::string text = raw;
    text.erase(0, text.find_first_not_of(" \t\r\n"));
    text.erase(text.find_last_not_of(" \t\r\n.") + 1);

    for (const auto& c : table.compiled()) {
        std::smatch m;
        if (!std::regex_match(text, m, c.re)) continue;
        TaskSpec spec;
        spec.skill = c.skill;
        for (std::size_t i = 0; i < c.slots.size(); ++i) {
            std::string val = m[i + 1].str();
            const auto& slot = c.slots[i];
            std::string lower = val;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            if (slot == "color") {
                spec.object.color = color_from_name(lower);
            } else if (slot == "object") {
                spec.object.category = lower;
            } else if (slot == "letter") {
                spec.object.letter = static_cast<char>(std::toupper(static_cast<unsigned char>(val[0])));
            } else if (slot == "speed") {
                for (const auto& [k, adverb] : table.speed_adverbs) {
                    if (adverb == lower) spec.speed = k;
                }
            } else if (slot == "gait") {
                spec.gait = gait_from_name(lower);
            }
        }
        if (spec.skill == Skill::Distinguish) spec.object.category = std::string(kLetterBoxCategory);
        spec.split = c.paraphrase           ? Split::UnseenVerbal
                     : is_unseen_object(spec) ? Split::UnseenObject
                                              : Split::SeenSim;
        return spec;
    }

    // Nearest template by shared literal words.
    const auto words = detail::words_of(text);
    const std::set<std::string> have(words.begin(), words.end());
    const TemplateTable::Compiled* best = nullptr;
    double best_score = -1.0;
    for (const auto& c : table.compiled()) {
        std::string literal;
        std::size_t i = 0;
        while (i < c.pattern.size()) {
            if (c.pattern[i] == '{') {
                i = c.pattern.find('}', i) + 1;
                literal += ' ';
            } else {
                literal += c.pattern[i++];
            }
        }
        const auto lw = detail::words_of(literal);
        double hits = 0;
        for (const auto& w : lw) hits += have.count(w);
        const double score = lw.empty() ? 0.0 : hits / static_cast<double>(lw.size());
        if (score > best_score) {
            best_score = score;
            best = &c;
        }
    }
    throw ParseError("unrecognized instruction '" + raw + "'; nearest template: '" +
                     (best ? best->pattern : std::string()) + "'");
}

// Skill of a full instruction, or of a bare paraphrase phrase such as
// "Deposit Object into container" that carries no slot values.
inline Skill classify_skill(const std::string& raw, const TemplateTable& table = TemplateTable::builtin()) {
    try {
        return parse_instruction(raw, table).skill;
    } catch (const ParseError&) {
    }
    const auto words = detail::words_of(raw);
    for (const auto& [skill, list] : table.paraphrases) {
        for (const auto& p : list) {
            const auto pw = detail::words_of(p.phrase);
            if (!pw.empty() && words.size() >= pw.size() && std::equal(pw.begin(), pw.end(), words.begin())) {
                return skill;
            }
        }
    }
    throw ParseError("no skill matches '" + raw + "'");
}

inline std::vector<std::string> paraphrase_set(Skill skill,
                                               const TemplateTable& table = TemplateTable::builtin()) {
    std::vector<std::string> out;
    auto it = table.paraphrases.find(skill);
    if (it == table.paraphrases.end()) return out;
    for (const auto& p : it->second) out.push_back(p.phrase);
    return out;
}

} // namespace quard
