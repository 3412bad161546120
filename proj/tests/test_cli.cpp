// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dps/metrics.h"
#include "dps/verify.h"
#include "dps/wav.h"
#include "test_util.h"

using namespace dps;
namespace fs = std::filesystem;

namespace {

const std::string kCli = DPS_CLI_PATH;
const std::string kProvider = DPS_PROVIDER_PATH;

struct Outcome {
  int code = -1;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI inside `dir` with stdout discarded and stderr captured.
Outcome dps_cli(const std::string& dir, const std::string& args) {
  const std::string err = dir + "/stderr.txt";
  const std::string cmd =
      "cd '" + dir + "' && '" + kCli + "' " + args + " >/dev/null 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = test::temp_dir() + "/cli_" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One second of test speech at 16 kHz.
void write_clean(const std::string& dir, int len = 16000) {
  write_wav(dir + "/clean.wav", verify::speech_like(len, 16000.0, 3), 16000);
}

std::string delta_provider(const std::string& dir) {
  return "--provider \"'" + kProvider + "' --prior delta --target '" + dir +
         "/clean.wav' --measurement '" + dir + "/y.wav' --rir '" + dir + "/rir.wav'\"";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("reverberate through a delta RIR without noise is the identity") {
  const std::string d = fresh_dir("identity");
  write_clean(d);
  write_wav(d + "/delta.wav", {1.0}, 16000);
  REQUIRE(dps_cli(d, "reverberate clean.wav --rir delta.wav --snr inf --out y.wav").code == 0);
  CHECK(read_wav(d + "/y.wav").samples == read_wav(d + "/clean.wav").samples);
  CHECK(fs::exists(d + "/y.manifest.json"));
}

TEST_CASE("dereverb with a delta prior recovers the clean signal") {
  const std::string d = fresh_dir("roundtrip");
  write_clean(d);
  REQUIRE(dps_cli(d, "rir synth --out rir.wav --t60 0.5 --seed 1").code == 0);
  REQUIRE(dps_cli(d, "reverberate clean.wav --rir rir.wav --out y.wav").code == 0);
  const Outcome o = dps_cli(d, "dereverb y.wav --rir rir.wav --out est.wav --reference clean.wav " +
                                   delta_provider(d));
  REQUIRE_MESSAGE(o.code == 0, o.err);
  const TimeSignal est = read_wav(d + "/est.wav").samples;
  const TimeSignal clean = read_wav(d + "/clean.wav").samples;
  REQUIRE(est.size() == clean.size());
  CHECK(si_sdr(est, clean) >= 30.0);
  const std::string metrics = slurp(d + "/est.metrics.csv");
  CHECK(metrics.rfind("si_sdr_db,lsd_db,residual_db\n", 0) == 0);
  const std::string trace = slurp(d + "/est.trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 51);
}

TEST_CASE("fixed seeds give identical files and replay is byte-identical") {
  const std::string d = fresh_dir("determinism");
  write_clean(d, 8000);
  REQUIRE(dps_cli(d, "rir synth --out rir.wav --t60 0.3 --length 3000 --seed 2").code == 0);
  REQUIRE(dps_cli(d, "reverberate clean.wav --rir rir.wav --snr 20 --seed 7 --out y.wav").code == 0);
  const std::string provider = "--provider \"'" + kProvider + "' --prior zero\"";
  REQUIRE(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 10 --seed 7 --out a.wav " + provider).code == 0);
  REQUIRE(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 10 --seed 7 --out b.wav " + provider).code == 0);
  CHECK(slurp(d + "/a.wav") == slurp(d + "/b.wav"));
  REQUIRE(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 10 --seed 8 --out c.wav " + provider).code == 0);
  CHECK(slurp(d + "/a.wav") != slurp(d + "/c.wav"));

  for (const std::string name : {"a", "y", "rir"}) {
    const std::string wav = d + "/" + name + ".wav", man = d + "/" + name + ".manifest.json";
    const std::string before = slurp(wav), manifest_before = slurp(man);
    fs::remove(wav);
    const Outcome o = dps_cli(d, "replay " + name + ".manifest.json");
    REQUIRE_MESSAGE(o.code == 0, o.err);
    CHECK(slurp(wav) == before);
    CHECK(slurp(man) == manifest_before);
  }
}

TEST_CASE("guidance can be switched off") {
  const std::string d = fresh_dir("ablation");
  write_clean(d, 4000);
  write_wav(d + "/rir.wav", {1.0, 0.5, 0.25}, 16000);
  REQUIRE(dps_cli(d, "reverberate clean.wav --rir rir.wav --out y.wav").code == 0);
  const std::string provider = "--provider \"'" + kProvider + "' --prior zero\"";
  REQUIRE(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 5 --zeta-peak 0 --out u.wav " + provider).code == 0);
  REQUIRE(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 5 --variant statedps --out s.wav " + provider).code == 0);
  CHECK(slurp(d + "/u.wav") != slurp(d + "/s.wav"));
}

TEST_CASE("provider from the environment") {
  const std::string d = fresh_dir("env");
  write_clean(d, 4000);
  write_wav(d + "/rir.wav", {1.0}, 16000);
  REQUIRE(dps_cli(d, "reverberate clean.wav --rir rir.wav --out y.wav").code == 0);
  CHECK(dps_cli(d, "dereverb y.wav --rir rir.wav --steps 3 --out e.wav").code == 2);
  const Outcome o = dps_cli(d, "dereverb y.wav --rir rir.wav --steps 3 --out e.wav");
  CHECK(o.err.find("DPS_PROVIDER") != std::string::npos);
  const std::string env = "DPS_PROVIDER=\"'" + kProvider + "' --prior zero\" ";
  const int status = std::system(("cd '" + d + "' && " + env + "'" + kCli +
                                  "' dereverb y.wav --rir rir.wav --steps 3 --out e.wav >/dev/null")
                                     .c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(d + "/e.wav"));
}

TEST_CASE("diagnostics and exit codes") {
  const std::string d = fresh_dir("errors");
  write_clean(d, 4000);
  write_wav(d + "/rir.wav", {1.0, 0.2}, 16000);
  SUBCASE("missing input file") {
    const Outcome o = dps_cli(d, "reverberate missing.wav --t60 0.4 --out y.wav");
    CHECK(o.code == 3);
    CHECK(o.err.find("missing.wav") != std::string::npos);
  }
  SUBCASE("bad flag combinations") {
    CHECK(dps_cli(d, "reverberate clean.wav --out y.wav").code == 2);
    CHECK(dps_cli(d, "reverberate clean.wav --rir rir.wav --t60 0.3 --out y.wav").code == 2);
    CHECK(dps_cli(d, "reverberate clean.wav --rir rir.wav --drr 3 --out y.wav").code == 2);
    CHECK(dps_cli(d, "reverberate clean.wav --rir rir.wav --snr loud --out y.wav").code == 2);
    CHECK(dps_cli(d, "").code == 2);
    CHECK(dps_cli(d, "frobnicate").code == 2);
    CHECK(dps_cli(d, "dereverb clean.wav --rir rir.wav --out e.wav --variant best "
                     "--provider true").code == 2);
    CHECK(dps_cli(d, "dereverb clean.wav --rir rir.wav --out e.wav --steps 0 "
                     "--provider true").code == 2);
  }
  SUBCASE("sample rate and channel checks") {
    write_wav(d + "/8k.wav", TimeSignal(800, 0.1), 8000);
    const Outcome o = dps_cli(d, "reverberate 8k.wav --rir rir.wav --out y.wav");
    CHECK(o.code == 3);
    CHECK(o.err.find("8000") != std::string::npos);
  }
  SUBCASE("provider failures") {
    CHECK(dps_cli(d, "reverberate clean.wav --rir rir.wav --out y.wav").code == 0);
    CHECK(dps_cli(d, "dereverb y.wav --rir rir.wav --out e.wav --provider /nonexistent/p").code == 4);
    const std::string bad = "--provider \"'" + kProvider + "' --prior zero --fault bad-magic\"";
    CHECK(dps_cli(d, "dereverb y.wav --rir rir.wav --out e.wav " + bad).code == 5);
    const std::string nojvp = "--provider \"'" + kProvider + "' --prior zero --no-jvp\"";
    CHECK(dps_cli(d, "dereverb y.wav --rir rir.wav --out e.wav --jacobian exact " + nojvp).code == 6);
  }
  SUBCASE("RIR measurement") {
    write_wav(d + "/impulse.wav", {1.0, 0.0, 0.0, 0.0}, 16000);
    CHECK(dps_cli(d, "rir measure impulse.wav").code == 7);
    REQUIRE(dps_cli(d, "rir synth --out long.wav --t60 0.5 --seed 4").code == 0);
    REQUIRE(dps_cli(d, "rir measure long.wav --out long.csv").code == 0);
    CHECK(slurp(d + "/long.csv").rfind("t60_s,drr_db\n", 0) == 0);
  }
}

TEST_CASE("verify subcommand") {
  const std::string d = fresh_dir("verify");
  CHECK(dps_cli(d, "verify adjoint").code == 0);
  CHECK(dps_cli(d, "verify schedule").code == 0);
  CHECK(dps_cli(d, "verify no-such-suite").code == 2);
}

}  // TEST_SUITE
