// LaTeX source -> sectioned plain prose.

#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "mia/corpus.hpp"
#include "mia/errors.hpp"
#include "mia/text.hpp"

namespace mia {

namespace {

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_escaped(std::string_view s, std::size_t pos) {
    std::size_t n = 0;
    while (pos > n && s[pos - n - 1] == '\\') ++n;
    return n % 2 == 1;
}

std::string strip_comments(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '%' && !is_escaped(s, i)) {
            while (i < s.size() && s[i] != '\n') ++i;
            if (i < s.size()) ++i;  // the newline belongs to the comment
            while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

// Reads a balanced group starting at s[pos] == open. Returns the content and
// moves pos past the closing delimiter. An unbalanced group runs to the end.
std::string_view read_group(std::string_view s, std::size_t& pos, char open, char close) {
    std::size_t start = pos + 1;
    int depth = 0;
    for (std::size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            continue;
        }
        if (s[i] == open) ++depth;
        if (s[i] == close && --depth == 0) {
            pos = i + 1;
            return s.substr(start, i - start);
        }
    }
    pos = s.size();
    return s.substr(start);
}

void skip_spaces(std::string_view s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n')) ++pos;
}

void skip_optional_args(std::string_view s, std::size_t& pos) {
    for (;;) {
        std::size_t p = pos;
        skip_spaces(s, p);
        if (p < s.size() && s[p] == '[') {
            read_group(s, p, '[', ']');
            pos = p;
        } else {
            return;
        }
    }
}

// Finds the next `\begin{name}` ... matching `\end{name}`, nesting-aware.
std::size_t find_env_end(std::string_view s, std::size_t from, std::string_view name) {
    const std::string open = "\\begin{" + std::string(name) + "}";
    const std::string close = "\\end{" + std::string(name) + "}";
    int depth = 1;
    std::size_t i = from;
    while (i < s.size()) {
        auto o = s.find(open, i);
        auto c = s.find(close, i);
        if (c == std::string_view::npos) return s.size();
        if (o != std::string_view::npos && o < c) {
            ++depth;
            i = o + open.size();
        } else {
            if (--depth == 0) return c + close.size();
            i = c + close.size();
        }
    }
    return s.size();
}

const std::unordered_set<std::string>& dropped_environments() {
    static const std::unordered_set<std::string> envs = {
        "figure", "figure*", "table", "table*", "tabular", "tabular*", "tabularx", "longtable",
        "equation", "equation*", "align", "align*", "alignat", "alignat*", "eqnarray",
        "eqnarray*", "gather", "gather*", "multline", "multline*", "flalign", "flalign*",
        "displaymath", "math", "split", "verbatim", "verbatim*", "lstlisting", "minted",
        "algorithm", "algorithm*", "algorithmic", "tikzpicture", "thebibliography", "comment",
        "wrapfigure", "wraptable", "subfigure", "titlepage", "CJK", "keywords", "acks"};
    return envs;
}

// Removes dropped environments; returns text with `\begin{abstract}` turned
// into a section heading.
std::string drop_environments(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto b = s.find("\\begin{", i);
        if (b == std::string_view::npos) {
            out.append(s.substr(i));
            break;
        }
        out.append(s.substr(i, b - i));
        std::size_t p = b + 6;
        std::string name(read_group(s, p, '{', '}'));
        if (dropped_environments().contains(name)) {
            i = find_env_end(s, p, name);
            out.push_back(' ');
        } else if (name == "abstract") {
            out.append("\\section{Abstract}");
            i = p;
        } else {
            i = p;  // keep the environment body, drop the marker
            skip_optional_args(s, i);
            out.push_back(' ');
        }
    }
    return out;
}

enum class ArgPolicy { drop, keep };

struct CommandRule {
    ArgPolicy policy;
    int args;  // mandatory brace groups to consume
};

const std::unordered_map<std::string, CommandRule>& command_rules() {
    static const std::unordered_map<std::string, CommandRule> rules = {
        // dropped with their argument(s)
        {"cite", {ArgPolicy::drop, 1}}, {"citep", {ArgPolicy::drop, 1}},
        {"citet", {ArgPolicy::drop, 1}}, {"citealp", {ArgPolicy::drop, 1}},
        {"citealt", {ArgPolicy::drop, 1}}, {"citeauthor", {ArgPolicy::drop, 1}},
        {"citeyear", {ArgPolicy::drop, 1}}, {"nocite", {ArgPolicy::drop, 1}},
        {"ref", {ArgPolicy::drop, 1}}, {"eqref", {ArgPolicy::drop, 1}},
        {"autoref", {ArgPolicy::drop, 1}}, {"cref", {ArgPolicy::drop, 1}},
        {"Cref", {ArgPolicy::drop, 1}}, {"pageref", {ArgPolicy::drop, 1}},
        {"label", {ArgPolicy::drop, 1}}, {"footnote", {ArgPolicy::drop, 1}},
        {"footnotetext", {ArgPolicy::drop, 1}}, {"thanks", {ArgPolicy::drop, 1}},
        {"url", {ArgPolicy::drop, 1}}, {"includegraphics", {ArgPolicy::drop, 1}},
        {"vspace", {ArgPolicy::drop, 1}}, {"hspace", {ArgPolicy::drop, 1}},
        {"bibliographystyle", {ArgPolicy::drop, 1}}, {"bibliography", {ArgPolicy::drop, 1}},
        {"usepackage", {ArgPolicy::drop, 1}}, {"documentclass", {ArgPolicy::drop, 1}},
        {"input", {ArgPolicy::drop, 1}}, {"include", {ArgPolicy::drop, 1}},
        {"caption", {ArgPolicy::drop, 1}}, {"author", {ArgPolicy::drop, 1}},
        {"affiliation", {ArgPolicy::drop, 1}}, {"email", {ArgPolicy::drop, 1}},
        {"date", {ArgPolicy::drop, 1}}, {"title", {ArgPolicy::drop, 1}},
        {"begin", {ArgPolicy::drop, 1}}, {"end", {ArgPolicy::drop, 1}},
        {"newcommand", {ArgPolicy::drop, 2}}, {"renewcommand", {ArgPolicy::drop, 2}},
        {"providecommand", {ArgPolicy::drop, 2}}, {"DeclareMathOperator", {ArgPolicy::drop, 2}},
        {"setlength", {ArgPolicy::drop, 2}}, {"setcounter", {ArgPolicy::drop, 2}},
        {"addtolength", {ArgPolicy::drop, 2}}, {"definecolor", {ArgPolicy::drop, 3}},
        {"color", {ArgPolicy::drop, 1}}, {"pagestyle", {ArgPolicy::drop, 1}},
        {"thispagestyle", {ArgPolicy::drop, 1}}, {"graphicspath", {ArgPolicy::drop, 1}},
        {"hypersetup", {ArgPolicy::drop, 1}},
        // argument kept as prose
        {"textbf", {ArgPolicy::keep, 1}}, {"textit", {ArgPolicy::keep, 1}},
        {"emph", {ArgPolicy::keep, 1}}, {"texttt", {ArgPolicy::keep, 1}},
        {"textsc", {ArgPolicy::keep, 1}}, {"textrm", {ArgPolicy::keep, 1}},
        {"textsf", {ArgPolicy::keep, 1}}, {"textnormal", {ArgPolicy::keep, 1}},
        {"underline", {ArgPolicy::keep, 1}}, {"uline", {ArgPolicy::keep, 1}},
        {"mbox", {ArgPolicy::keep, 1}}, {"text", {ArgPolicy::keep, 1}},
        {"textup", {ArgPolicy::keep, 1}}, {"textsl", {ArgPolicy::keep, 1}},
        {"textcolor", {ArgPolicy::keep, 2}}, {"href", {ArgPolicy::keep, 2}}};
    return rules;
}

const std::unordered_map<std::string, std::string>& command_literals() {
    static const std::unordered_map<std::string, std::string> lits = {
        {"LaTeX", "LaTeX"}, {"TeX", "TeX"}, {"etal", "et al."}, {"ie", "i.e."},
        {"eg", "e.g."},     {"ldots", "..."}, {"dots", "..."},  {"textendash", "-"},
        {"textemdash", "-"}, {"S", "Section"}, {"%", "%"},      {"&", "&"},
        {"_", "_"},          {"#", "#"},      {"$", "$"},      {"{", "{"},
        {"}", "}"}};
    return lits;
}

bool is_accent(char c) {
    return c == '\'' || c == '"' || c == '^' || c == '`' || c == '~' || c == '=' || c == '.';
}

std::string clean_inline(std::string_view s);

// Removes inline and display math delimited by $, $$, \( \) and \[ \].
std::string drop_math(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '$' && !is_escaped(s, i)) {
            bool display = i + 1 < s.size() && s[i + 1] == '$';
            std::size_t j = i + (display ? 2 : 1);
            while (j < s.size()) {
                if (s[j] == '$' && !is_escaped(s, j)) break;
                ++j;
            }
            i = j + (display ? 2 : 1);
            out.push_back(' ');
            continue;
        }
        if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '(' || s[i + 1] == '[') &&
            !is_escaped(s, i)) {
            const char* close = s[i + 1] == '(' ? "\\)" : "\\]";
            auto j = s.find(close, i + 2);
            i = j == std::string_view::npos ? s.size() : j + 2;
            out.push_back(' ');
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

std::string clean_commands(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '~') {
            out.push_back(' ');
            ++i;
            continue;
        }
        if (c == '{' || c == '}') {
            ++i;
            continue;
        }
        if (c != '\\') {
            out.push_back(c);
            ++i;
            continue;
        }
        // backslash
        if (i + 1 >= s.size()) break;
        char n = s[i + 1];
        if (n == '\\' || n == ',' || n == ';' || n == '!' || n == ' ' || n == ':' || n == '\n') {
            out.push_back(' ');
            i += 2;
            continue;
        }
        if (is_accent(n)) {
            // \'e, \"{o}: keep the base letter
            std::size_t p = i + 2;
            if (p < s.size() && s[p] == '{') {
                out.append(clean_commands(read_group(s, p, '{', '}')));
            } else if (p < s.size()) {
                out.push_back(s[p++]);
            }
            i = p;
            continue;
        }
        if (!is_alpha(n)) {
            auto lit = command_literals().find(std::string(1, n));
            if (lit != command_literals().end()) out.append(lit->second);
            i += 2;
            continue;
        }
        std::size_t p = i + 1;
        while (p < s.size() && is_alpha(s[p])) ++p;
        std::string name(s.substr(i + 1, p - i - 1));
        if (p < s.size() && s[p] == '*') ++p;

        if (auto lit = command_literals().find(name); lit != command_literals().end()) {
            out.append(lit->second);
            i = p;
            // a control word swallows the following space; keep one
            if (i < s.size() && s[i] == ' ') out.push_back(' ');
            continue;
        }
        auto rule = command_rules().find(name);
        if (rule != command_rules().end()) {
            skip_optional_args(s, p);
            std::vector<std::string_view> args;
            for (int a = 0; a < rule->second.args; ++a) {
                std::size_t q = p;
                skip_spaces(s, q);
                if (q >= s.size() || s[q] != '{') break;
                args.push_back(read_group(s, q, '{', '}'));
                p = q;
                skip_optional_args(s, p);
            }
            if (rule->second.policy == ArgPolicy::keep && !args.empty())
                out.append(clean_commands(args.back()));
            i = p;
            continue;
        }
        // Unknown command: keep the content of a directly attached brace group.
        i = p;
        if (i < s.size() && s[i] == '{') {
            out.append(clean_commands(read_group(s, i, '{', '}')));
        }
    }
    return out;
}

std::string clean_inline(std::string_view s) {
    return text::collapse_whitespace(clean_commands(drop_math(s)));
}

struct Heading {
    std::size_t begin;  // position of the backslash
    std::size_t end;    // first position after the heading argument
    std::string name;
    bool top_level;
};

std::vector<Heading> find_headings(std::string_view s) {
    static constexpr std::array<std::pair<std::string_view, bool>, 6> kinds = {{
        {"chapter", true},
        {"section", true},
        {"subsection", false},
        {"subsubsection", false},
        {"paragraph", false},
        {"subparagraph", false},
    }};
    std::vector<Heading> out;
    std::size_t i = 0;
    while ((i = s.find('\\', i)) != std::string_view::npos) {
        if (is_escaped(s, i)) {
            ++i;
            continue;
        }
        std::size_t p = i + 1;
        while (p < s.size() && is_alpha(s[p])) ++p;
        std::string_view word = s.substr(i + 1, p - i - 1);
        bool matched = false;
        for (auto [kind, top] : kinds) {
            if (word != kind) continue;
            if (p < s.size() && s[p] == '*') ++p;
            skip_optional_args(s, p);
            skip_spaces(s, p);
            if (p < s.size() && s[p] == '{') {
                auto name = read_group(s, p, '{', '}');
                out.push_back({i, p, clean_inline(name), top});
                matched = true;
            }
            break;
        }
        i = matched ? p : i + 1;
    }
    return out;
}

std::string extract_title(std::string_view s) {
    std::size_t pos = s.find("\\title");
    while (pos != std::string_view::npos) {
        std::size_t p = pos + 6;
        if (p < s.size() && is_alpha(s[p])) {  // \titlerunning etc.
            pos = s.find("\\title", p);
            continue;
        }
        skip_optional_args(s, p);
        skip_spaces(s, p);
        if (p < s.size() && s[p] == '{') return clean_inline(read_group(s, p, '{', '}'));
        pos = s.find("\\title", p);
    }
    return {};
}

std::string_view body_of(std::string_view s) {
    auto b = s.find("\\begin{document}");
    if (b != std::string_view::npos) s = s.substr(b + 16);
    for (std::string_view stop :
         {"\\end{document}", "\\begin{thebibliography}", "\\bibliography{", "\\printbibliography"}) {
        auto e = s.find(stop);
        if (e != std::string_view::npos) s = s.substr(0, e);
    }
    return s;
}

}  // namespace

Document ingest_latex(std::string_view raw, std::string doc_id, Date snapshot_date) {
    if (text::trim(raw).empty()) throw UnparseableDocument(doc_id + ": empty source");
    const std::string source = strip_comments(raw);

    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.source = Source::arxiv;
    doc.snapshot_date = snapshot_date;
    doc.title = extract_title(source);

    const std::string body = drop_environments(body_of(source));
    const auto headings = find_headings(body);

    auto emit = [&](std::string name, std::string_view raw_body) {
        auto prose = clean_inline(raw_body);
        if (prose.empty()) return;
        if (!doc.sections.empty() && doc.sections.back().name == name) {
            doc.sections.back().body += " " + prose;
        } else {
            doc.sections.push_back({std::move(name), std::move(prose)});
        }
    };

    std::string current = "Untitled";
    std::string pending;
    std::size_t cursor = 0;
    for (const auto& h : headings) {
        pending.append(body, cursor, h.begin - cursor);
        pending.push_back(' ');
        if (h.top_level) {
            emit(current, pending);
            pending.clear();
            current = h.name;
        }
        cursor = h.end;
    }
    pending.append(body, cursor, std::string::npos);
    emit(current, pending);

    if (doc.sections.empty())
        throw UnparseableDocument(doc.doc_id + ": no prose survives markup stripping");
    if (doc.title.empty()) doc.title = doc.doc_id;
    return doc;
}

}  // namespace mia
