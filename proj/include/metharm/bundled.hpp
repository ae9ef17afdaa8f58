#pragma once

// Access to the fixture manifests embedded at build time. Requires the
// metharm_fixtures target.

#include <optional>
#include <string>
#include <vector>

#include "metharm/bundled_fixtures.hpp"
#include "metharm/manifest.hpp"

namespace metharm {

inline std::optional<std::string> bundled_text(const std::string& name) {
  for (const auto& f : bundled::kFixtureFiles)
    if (f.name == name || std::string(f.name) == name + ".yaml") return std::string(f.text);
  return std::nullopt;
}

inline std::vector<std::string> bundled_names() {
  std::vector<std::string> out;
  for (const auto& f : bundled::kFixtureFiles) out.emplace_back(f.name);
  return out;
}

inline Manifest load_bundled(const std::string& name) {
  std::optional<std::string> text = bundled_text(name);
  if (!text) throw ManifestError(name + ": no bundled fixture of that name");
  std::string origin = name.size() > 5 && name.substr(name.size() - 5) == ".yaml" ? name : name + ".yaml";
  return load_manifest_text(*text, origin, bundled_text);
}

}  // namespace metharm
