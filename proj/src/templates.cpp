#include "mia/templates.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include "mia/errors.hpp"
#include "mia/hash.hpp"

namespace mia {

namespace {

struct Builtin {
    std::string_view name;
    std::string_view text;
};

// Generated from templates/*.txt at configure time.
constexpr Builtin kBuiltins[] = {
#include "default_templates.inc"
};

constexpr std::array<TemplateId, 10> kAll = {
    TemplateId::probing,    TemplateId::probing_unframed, TemplateId::ncq_all,
    TemplateId::ncq_single, TemplateId::decop_arxiv,      TemplateId::decop_wikipedia,
    TemplateId::fr_rank_3,  TemplateId::fr_score_3,       TemplateId::fr_score_5,
    TemplateId::paraphrase};

std::vector<std::string_view> required_placeholders(TemplateId id) {
    switch (id) {
        case TemplateId::probing:
        case TemplateId::probing_unframed: return {"{title}", "{prefix}"};
        case TemplateId::ncq_all:
        case TemplateId::ncq_single:
        case TemplateId::paraphrase: return {"{input}"};
        case TemplateId::decop_arxiv:
        case TemplateId::decop_wikipedia: return {"{document_name}"};
        case TemplateId::fr_rank_3:
        case TemplateId::fr_score_3:
        case TemplateId::fr_score_5: return {"{title}", "{chunks}"};
    }
    return {};
}

std::string strip_final_newline(std::string s) {
    if (s.ends_with("\r\n")) s.resize(s.size() - 2);
    else if (s.ends_with('\n')) s.pop_back();
    return s;
}

void check(TemplateId id, const std::string& text) {
    for (auto p : required_placeholders(id))
        if (text.find(p) == std::string::npos)
            throw FatalConfigError("template '" + std::string(template_name(id)) +
                                   "' is missing placeholder " + std::string(p));
}

}  // namespace

std::string_view template_name(TemplateId id) {
    switch (id) {
        case TemplateId::probing: return "probing";
        case TemplateId::probing_unframed: return "probing_unframed";
        case TemplateId::ncq_all: return "ncq_all";
        case TemplateId::ncq_single: return "ncq_single";
        case TemplateId::decop_arxiv: return "decop_arxiv";
        case TemplateId::decop_wikipedia: return "decop_wikipedia";
        case TemplateId::fr_rank_3: return "fr_rank_3";
        case TemplateId::fr_score_3: return "fr_score_3";
        case TemplateId::fr_score_5: return "fr_score_5";
        case TemplateId::paraphrase: return "paraphrase";
    }
    return "?";
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    for (auto id : kAll) {
        for (const auto& b : kBuiltins)
            if (b.name == template_name(id)) t.text_[id] = strip_final_newline(std::string(b.text));
        if (!t.text_.contains(id))
            throw FatalConfigError("built-in template '" + std::string(template_name(id)) + "' missing");
        check(id, t.text_[id]);
    }
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw FatalConfigError("template directory '" + dir.string() + "' does not exist");
    auto t = defaults();
    for (auto id : kAll) {
        auto path = dir / (std::string(template_name(id)) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) continue;
        std::ostringstream ss;
        ss << in.rdbuf();
        auto text = strip_final_newline(ss.str());
        check(id, text);
        t.text_[id] = std::move(text);
    }
    return t;
}

const std::string& PromptTemplates::get(TemplateId id) const { return text_.at(id); }

std::string PromptTemplates::hash(TemplateId id) const { return sha256_hex(get(id)); }

std::map<std::string, std::string> PromptTemplates::hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [id, text] : text_) out.emplace(template_name(id), sha256_hex(text));
    return out;
}

std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            auto close = tpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tpl[i++]);
    }
    return out;
}

}  // namespace mia
