// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance report: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 1-10 run the library verification suites;
// criterion 11 drives the CLI and replays every manifest it wrote.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dps/verify.h"
#include "dps/wav.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string title;
  bool passed = true;
  std::vector<std::string> details;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir + "' && '" + std::string(DPS_CLI_PATH) + "' " + args +
                          " >/dev/null 2>>'" + dir + "/stderr.txt'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Criterion from_suite(int id, const std::string& title, const std::string& suite) {
  Criterion c{id, title, true, {}};
  try {
    for (const auto& r : dps::verify::run_suite(suite)) {
      c.passed = c.passed && r.passed;
      c.details.push_back(std::string(r.passed ? "pass " : "FAIL ") + r.name + ": " + r.detail);
    }
  } catch (const std::exception& e) {
    c.passed = false;
    c.details.push_back(std::string("exception: ") + e.what());
  }
  return c;
}

// Runs one command of each kind, then deletes and regenerates every output
// through `dps replay`, comparing bytes.
Criterion replay_determinism() {
  Criterion c{11, "CLI runs replayed from their manifests are byte-identical", true, {}};
  const fs::path dir = fs::temp_directory_path() / ("dps_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  dps::write_wav(d + "/clean.wav", dps::verify::speech_like(16000, 16000.0, 9), 16000);

  const std::string provider = "--provider \"'" + std::string(DPS_PROVIDER_PATH) +
                               "' --prior delta --target '" + d + "/clean.wav' --measurement '" +
                               d + "/y.wav' --rir '" + d + "/rir.wav'\"";
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"rir.manifest.json", "rir synth --out rir.wav --t60 0.5 --seed 3"},
      {"y.manifest.json", "reverberate clean.wav --rir rir.wav --snr 20 --seed 7 --out y.wav"},
      {"y_synth.manifest.json",
       "reverberate clean.wav --t60 0.4 --drr -6 --rir-seed 2 --snr 10 --seed 1 --out y_synth.wav"},
      {"est.manifest.json",
       "dereverb y.wav --rir rir.wav --reference clean.wav --seed 7 --out est.wav " + provider},
      {"est_state.manifest.json",
       "dereverb y.wav --rir rir.wav --variant statedps --steps 20 --seed 3 --out est_state.wav " +
           provider},
      {"report.manifest.json", "rir measure rir.wav --out report.csv"},
  };
  for (const auto& [manifest, args] : runs) {
    if (shell(d, args) != 0) {
      c.passed = false;
      c.details.push_back("FAIL command failed: dps " + args);
    }
  }
  for (const auto& [manifest, args] : runs) {
    const fs::path man = dir / manifest;
    if (!fs::exists(man)) {
      c.passed = false;
      c.details.push_back("FAIL no manifest " + manifest);
      continue;
    }
    std::map<std::string, std::string> before;
    try {
      const auto j = nlohmann::json::parse(slurp(man));
      for (const auto& [key, path] : j.at("outputs").items())
        before[path.get<std::string>()] = slurp(path.get<std::string>());
    } catch (const std::exception& e) {
      c.passed = false;
      c.details.push_back("FAIL unreadable manifest " + manifest + ": " + e.what());
      continue;
    }
    const std::string manifest_bytes = slurp(man);
    for (const auto& [path, bytes] : before) fs::remove(path);
    const int code = shell(d, "replay " + manifest);
    bool same = code == 0 && slurp(man) == manifest_bytes;
    for (const auto& [path, bytes] : before) same = same && fs::exists(path) && slurp(path) == bytes;
    c.passed = c.passed && same;
    c.details.push_back(std::string(same ? "pass " : "FAIL ") + manifest + ": " +
                        std::to_string(before.size()) + " outputs + manifest " +
                        (same ? "identical" : "differ"));
  }
  if (c.passed) fs::remove_all(dir);
  return c;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Criterion> all;
  all.push_back(from_suite(1, "adjoint of convolution after synthesis", "adjoint"));
  all.push_back(from_suite(2, "STFT reconstruction", "stft"));
  all.push_back(from_suite(3, "likelihood gradients vs finite differences", "gradient"));
  all.push_back(from_suite(4, "analytic scores vs log-density finite differences", "score"));
  all.push_back(from_suite(5, "Langevin corrector stationarity", "langevin"));
  all.push_back(from_suite(6, "probability-flow terminal quantiles", "flow"));
  all.push_back(from_suite(7, "conjugate Gaussian posterior end to end", "posterior-oracle"));
  all.push_back(from_suite(8, "delta-prior pipeline", "pipeline"));
  all.push_back(from_suite(9, "schedule exactness", "schedule"));
  all.push_back(from_suite(10, "robustness to measurement noise", "robustness"));
  all.push_back(replay_determinism());

  int failed = 0;
  for (const auto& c : all) {
    std::printf("[%s] criterion %d: %s\n", c.passed ? "PASS" : "FAIL", c.id, c.title.c_str());
    for (const auto& d : c.details) std::printf("         %s\n", d.c_str());
    failed += c.passed ? 0 : 1;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%zu of %zu criteria passed (%.1f s)\n", all.size() - failed, all.size(), secs);
  return failed == 0 ? 0 : 1;
}
