#pragma once

#include <string>
#include <vector>

#include "kacflow/base_dynamics.hpp"

namespace kacflow::cli {

struct CatalogEntry {
    std::string name;
    std::string parameters;
    std::string entropy_text; ///< closed form of the entropy, e.g. "log 2"
    BaseSystem system;
};

const std::vector<CatalogEntry>& catalog();

/// Entry by name; throws ConfigurationError listing the known names.
const CatalogEntry& preset(const std::string& name);

/// The table printed by `list-systems`.
std::string format_catalog();

} // namespace kacflow::cli
