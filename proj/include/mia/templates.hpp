#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace mia {

enum class TemplateId {
    probing,
    probing_unframed,
    ncq_all,
    ncq_single,
    decop_arxiv,
    decop_wikipedia,
    fr_rank_3,
    fr_score_3,
    fr_score_5,
    paraphrase,
};

std::string_view template_name(TemplateId id);

/// Prompt templates with `{title}`, `{chunks}`, `{input}`, `{document_name}`
/// and `{prefix}` placeholders. The built-in set is compiled from the files
/// under templates/; a directory of `<name>.txt` files overrides any subset.
class PromptTemplates {
public:
    static PromptTemplates defaults();
    /// Throws FatalConfigError when an override lacks a required placeholder.
    static PromptTemplates load(const std::filesystem::path& dir);

    const std::string& get(TemplateId id) const;
    std::string hash(TemplateId id) const;
    /// name -> sha256, for the run manifest.
    std::map<std::string, std::string> hashes() const;

private:
    std::map<TemplateId, std::string> text_;
};

/// Replaces `{key}` occurrences in one left-to-right pass; inserted values are
/// never rescanned, and unknown `{...}` runs are left as-is.
std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values);

}  // namespace mia
