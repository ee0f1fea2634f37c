#pragma once

#include "poolforge/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace poolforge {

// One prompt condition: an opaque id, its task family, the task template
// file it renders, and template parameters (e.g. the AUT object).
struct PromptCondition {
    std::string id;
    Family family = Family::stories;
    std::string template_name;
    std::map<std::string, std::string> params;
};

// User-editable list of prompt conditions. New tasks are a manifest edit,
// not a code change.
class TaskManifest {
public:
    static TaskManifest load(const std::string& json_path);
    static TaskManifest from_json_text(const std::string& json_text);

    Family family_of(const std::string& prompt_id) const;
    const PromptCondition& condition(const std::string& prompt_id) const;
    bool contains(const std::string& prompt_id) const;
    const std::vector<PromptCondition>& conditions() const { return conditions_; }
    std::vector<std::string> prompt_ids() const;

private:
    std::vector<PromptCondition> conditions_;
};

} // namespace poolforge
