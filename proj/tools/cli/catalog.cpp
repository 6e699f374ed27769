#include "cli/catalog.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>

#include "kacflow/errors.hpp"

namespace kacflow::cli {

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries{
        {"doubling", "m=2 p=(1/2,1/2)", "log 2", BaseSystem::doubling()},
        {"tripling", "m=3 p=(1/3,1/3,1/3)", "log 3", BaseSystem::expanding(3, {})},
        {"bernoulli-0.3", "m=2 p=(0.3,0.7)", "-0.3 log 0.3 - 0.7 log 0.7", BaseSystem::expanding(2, {0.3, 0.7})},
        {"golden-rotation", "alpha=0.6180339887", "0", BaseSystem::rotation(0.6180339887)},
        {"three-cycle", "0->1->2->0 w=(1/3,1/3,1/3)", "0", BaseSystem::cycle(3)},
        {"four-cycle", "0->1->2->3->0 w=(1/4,1/4,1/4,1/4)", "0", BaseSystem::cycle(4)},
    };
    return entries;
}

const CatalogEntry& preset(const std::string& name) {
    std::string known;
    for (const auto& e : catalog()) {
        if (e.name == name) return e;
        known += (known.empty() ? "" : ", ") + e.name;
    }
    throw ConfigurationError("unknown system preset '" + name + "' (known: " + known + ")");
}

std::string format_catalog() {
    std::ostringstream os;
    os << std::left << std::setw(17) << "name" << std::setw(12) << "kind" << std::setw(36) << "parameters"
       << std::setw(28) << "entropy" << "entropy_value\n";
    for (const auto& e : catalog()) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, e.system.entropy());
        os << std::setw(17) << e.name << std::setw(12) << to_string(e.system.kind()) << std::setw(36) << e.parameters
           << std::setw(28) << e.entropy_text << std::string(buf, res.ptr) << '\n';
    }
    return os.str();
}

} // namespace kacflow::cli
