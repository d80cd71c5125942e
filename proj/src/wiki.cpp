// Wikipedia snapshot -> single-section Document.

#include <json.hpp>

#include "mia/corpus.hpp"
#include "mia/errors.hpp"
#include "mia/text.hpp"

namespace mia {

namespace {

std::string remove_nested(std::string_view s, std::string_view open, std::string_view close) {
    std::string out;
    int depth = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.substr(i, open.size()) == open) {
            ++depth;
            i += open.size();
        } else if (depth > 0 && s.substr(i, close.size()) == close) {
            --depth;
            i += close.size();
        } else {
            if (depth == 0) out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

std::string remove_between(std::string_view s, std::string_view open, std::string_view close) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto b = s.find(open, i);
        if (b == std::string_view::npos) {
            out.append(s.substr(i));
            break;
        }
        out.append(s.substr(i, b - i));
        auto e = s.find(close, b + open.size());
        i = e == std::string_view::npos ? s.size() : e + close.size();
    }
    return out;
}

// <ref>...</ref>, <ref name=x/>, then any other tag.
std::string strip_tags(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '<') {
            out.push_back(s[i++]);
            continue;
        }
        auto e = s.find('>', i);
        if (e == std::string_view::npos) {
            out.append(s.substr(i));
            break;
        }
        std::string_view tag = s.substr(i, e - i + 1);
        bool self_closing = tag.size() >= 2 && tag[tag.size() - 2] == '/';
        if (text::starts_with_icase(tag, "<ref") && !self_closing) {
            auto close = text::to_lower_ascii(s.substr(e + 1)).find("</ref>");
            i = close == std::string::npos ? s.size() : e + 1 + close + 6;
        } else {
            i = e + 1;
        }
        out.push_back(' ');
    }
    return out;
}

// [[target|label]] -> label, [[target]] -> target, [[File:...]] -> nothing.
std::string resolve_links(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.substr(i, 2) == "[[") {
            int depth = 0;
            std::size_t j = i;
            for (; j + 1 < s.size(); ++j) {
                if (s.substr(j, 2) == "[[") {
                    ++depth;
                    ++j;
                } else if (s.substr(j, 2) == "]]") {
                    if (--depth == 0) break;
                    ++j;
                }
            }
            std::string_view inner = s.substr(i + 2, std::min(j, s.size()) - i - 2);
            i = std::min(j + 2, s.size());
            for (std::string_view ns : {"file:", "image:", "category:"})
                if (text::starts_with_icase(inner, ns)) inner = {};
            auto bar = inner.rfind('|');
            if (bar != std::string_view::npos) inner = inner.substr(bar + 1);
            out.append(inner);
            continue;
        }
        if (s[i] == '[') {
            // external link: [http://x label]
            auto e = s.find(']', i);
            std::string_view inner = s.substr(i + 1, e == std::string_view::npos ? 0 : e - i - 1);
            if (inner.starts_with("http") || inner.starts_with("//")) {
                auto sp = inner.find(' ');
                out.append(sp == std::string_view::npos ? std::string_view{} : inner.substr(sp + 1));
                i = e + 1;
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

std::string clean_wikitext(std::string_view raw) {
    std::string s = remove_between(raw, "<!--", "-->");
    s = strip_tags(s);
    s = remove_nested(s, "{{", "}}");
    s = remove_nested(s, "{|", "|}");
    s = resolve_links(s);
    s = text::replace_all(std::move(s), "'''", "");
    s = text::replace_all(std::move(s), "''", "");
    s = text::replace_all(std::move(s), "&nbsp;", " ");
    s = text::replace_all(std::move(s), "&amp;", "&");

    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto e = s.find('\n', i);
        if (e == std::string::npos) e = s.size();
        std::string_view line = text::trim(std::string_view(s).substr(i, e - i));
        i = e + 1;
        if (line.starts_with("=") && line.ends_with("=")) continue;  // heading
        while (!line.empty() && (line[0] == '*' || line[0] == '#' || line[0] == ':' ||
                                 line[0] == ';'))
            line.remove_prefix(1);
        out.append(line);
        out.push_back('\n');
    }
    return text::collapse_whitespace(out);
}

}  // namespace

Document ingest_wiki(std::string_view raw, std::string doc_id, Date snapshot_date) {
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.source = Source::wikipedia;
    doc.snapshot_date = snapshot_date;

    std::string_view body = raw;
    std::string json_text;
    auto trimmed = text::trim(raw);
    if (trimmed.starts_with('{')) {
        auto j = nlohmann::json::parse(trimmed, nullptr, /*allow_exceptions=*/false);
        if (j.is_object()) {
            if (j.contains("title") && j["title"].is_string()) doc.title = j["title"];
            for (const char* key : {"text", "content", "body"}) {
                if (j.contains(key) && j[key].is_string()) {
                    json_text = j[key].get<std::string>();
                    break;
                }
            }
            body = json_text;
        }
    }
    if (doc.title.empty()) {
        // optional title line: "Title: X" or "= X ="
        auto t = text::trim(body);
        auto nl = t.find('\n');
        auto first = text::trim(t.substr(0, nl));
        if (text::starts_with_icase(first, "title:")) {
            doc.title = std::string(text::trim(first.substr(6)));
            body = nl == std::string_view::npos ? std::string_view{} : t.substr(nl + 1);
        } else if (first.size() > 2 && first.starts_with('=') && first.ends_with('=')) {
            auto inner = first;
            while (inner.starts_with('=')) inner.remove_prefix(1);
            while (inner.ends_with('=')) inner.remove_suffix(1);
            doc.title = std::string(text::trim(inner));
            body = nl == std::string_view::npos ? std::string_view{} : t.substr(nl + 1);
        }
    }
    if (doc.title.empty()) doc.title = doc.doc_id;

    auto prose = clean_wikitext(body);
    if (prose.empty()) throw UnparseableDocument(doc.doc_id + ": empty article body");
    doc.sections.push_back({"Article", std::move(prose)});
    return doc;
}

}  // namespace mia
