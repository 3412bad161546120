// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "manifest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dps/errors.h"
#include "dps/wav.h"

namespace dps::tools {

namespace {
constexpr int kManifestVersion = 1;
}

nlohmann::json RunManifest::to_json() const {
  return {{"version", kManifestVersion}, {"command", command},
          {"args", args},               {"cwd", cwd},
          {"settings", settings},       {"inputs", inputs},
          {"outputs", outputs},         {"results", results}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    if (j.at("version").get<int>() != kManifestVersion)
      throw IoError("unsupported manifest version");
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.cwd = j.at("cwd").get<std::string>();
    m.settings = j.value("settings", nlohmann::json::object());
    m.inputs = j.value("inputs", nlohmann::json::object());
    m.outputs = j.value("outputs", nlohmann::json::object());
    m.results = j.value("results", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_file_atomic(path, m.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse manifest '" + path + "': " + e.what());
  }
  return RunManifest::from_json(j);
}

std::string sibling_path(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  if (p.has_extension()) p.replace_extension();
  return p.string() + "." + suffix;
}

}  // namespace dps::tools
