#include <string>
#include <utility>
#include <vector>

#include "eac/blueprint.hpp"
#include "eac/errors.hpp"

namespace eac::blueprint {

namespace {

// Generated at configure time from data/blueprints/*.json.
const std::vector<std::pair<const char*, const char*>> kEmbedded = {
#include "builtin_blueprint_data.inc"
};

}  // namespace

const std::vector<BlueprintPtr>& builtin_blueprints() {
  static const std::vector<BlueprintPtr> all = [] {
    std::vector<BlueprintPtr> out;
    for (const auto& [file, text] : kEmbedded) {
      try {
        out.push_back(blueprint_from_json(nlohmann::json::parse(text)));
      } catch (const std::exception& e) {
        throw ParseError(std::string("embedded blueprint ") + file + ": " + e.what());
      }
    }
    return out;
  }();
  return all;
}

BlueprintPtr builtin_blueprint(const std::string& blueprint_id) {
  std::string ids;
  for (const auto& bp : builtin_blueprints()) {
    if (bp->blueprint_id == blueprint_id) return bp;
    ids += (ids.empty() ? "" : ", ") + bp->blueprint_id;
  }
  throw NotFoundError("unknown blueprint '" + blueprint_id + "' (valid: " + ids + ")");
}

}  // namespace eac::blueprint
