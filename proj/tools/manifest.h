// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_TOOLS_MANIFEST_H_
#define DPS_TOOLS_MANIFEST_H_

#include <string>
#include <vector>

#include "json.hpp"

namespace dps::tools {

// Run record written next to every output. Keys serialize in sorted order,
// so identical runs produce identical manifests.
struct RunManifest {
  std::string command;           // subcommand path, e.g. "rir synth"
  std::vector<std::string> args; // argv after the program name
  std::string cwd;               // directory the args are relative to
  nlohmann::json settings = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

// "<stem>.<suffix>" for an output path "<stem>.<ext>" (or "<path>.<suffix>").
std::string sibling_path(const std::string& out, const std::string& suffix);

}  // namespace dps::tools

#endif  // DPS_TOOLS_MANIFEST_H_
