// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// dps: reverberate, dereverberate, synthesize or measure RIRs, run the
// verification suites, and replay recorded runs.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dps/errors.h"
#include "dps/external_provider.h"
#include "dps/metrics.h"
#include "dps/rir.h"
#include "dps/sampler.h"
#include "dps/verify.h"
#include "dps/wav.h"
#include "manifest.h"

namespace dps::tools {
namespace {

constexpr int kSampleRate = 16000;
constexpr const char* kProviderEnv = "DPS_PROVIDER";

enum ExitCode {
  kOk = 0,
  kVerifyFailed = 1,
  kUsage = 2,
  kIoFailure = 3,
  kProviderFailure = 4,
  kProtocolFailure = 5,
  kCapabilityFailure = 6,
  kDomainFailure = 7,
  kInternalFailure = 8,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "infinity") return kNoiselessSnr;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--snr expects a number of dB or 'inf', got '" + s + "'");
}

nlohmann::json snr_json(double snr) {
  if (std::isinf(snr)) return "inf";
  return snr;
}

TimeSignal read_mono_16k(const std::string& path) {
  WavData w = read_wav(path);
  if (w.channels != 1)
    throw IoError("'" + path + "' has " + std::to_string(w.channels) +
                  " channels; only mono is supported");
  if (w.sample_rate != kSampleRate)
    throw IoError("'" + path + "' is sampled at " +
                  std::to_string(w.sample_rate) + " Hz; expected " +
                  std::to_string(kSampleRate) + " Hz");
  if (w.samples.empty()) throw IoError("'" + path + "' contains no samples");
  return std::move(w.samples);
}

std::string absolute(const std::string& p) {
  return std::filesystem::absolute(p).lexically_normal().string();
}

std::string write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + fmt17(row[i]);
    s += "\n";
  }
  return s;
}

struct Invocation {
  std::vector<std::string> args;
  std::string cwd;
};

RunManifest start_manifest(const std::string& command, const Invocation& inv) {
  RunManifest m;
  m.command = command;
  m.args = inv.args;
  m.cwd = inv.cwd;
  return m;
}

// ------------------------------------------------------------ subcommands

struct ReverberateOpts {
  std::string input, out, rir, manifest, snr = "inf";
  double t60 = 0.0;
  bool synth = false;  // --t60 given
  double drr = -9.0;
  int rir_length = 8000;
  std::uint64_t rir_seed = 0, seed = 0;
};

int cmd_reverberate(const ReverberateOpts& o, const Invocation& inv) {
  if (o.rir.empty() == !o.synth)
    throw UsageError("reverberate needs exactly one RIR source: --rir or --t60");
  const double snr = parse_snr(o.snr);
  const TimeSignal x = read_mono_16k(o.input);
  RunManifest m = start_manifest("reverberate", inv);
  TimeSignal k;
  if (!o.rir.empty()) {
    k = read_mono_16k(o.rir);
    m.inputs["rir"] = absolute(o.rir);
  } else {
    RirSpec spec;
    spec.t60 = o.t60;
    spec.drr_db = o.drr;
    spec.length = o.rir_length;
    spec.seed = o.rir_seed;
    k = synth_rir(spec);
    m.settings["rir_spec"] = {{"t60_s", spec.t60},
                              {"drr_db", spec.drr_db},
                              {"length", spec.length},
                              {"seed", spec.seed}};
  }
  const TimeSignal y = make_measurement(x, k, snr, o.seed);
  write_wav(o.out, y, kSampleRate);

  m.inputs["clean"] = absolute(o.input);
  m.settings["snr_db"] = snr_json(snr);
  m.settings["seed"] = o.seed;
  m.outputs["measurement"] = absolute(o.out);
  m.results["measured_snr_db"] = snr_json(snr_db(convolve(k, x), y));
  write_manifest(o.manifest.empty() ? sibling_path(o.out, "manifest.json")
                                    : o.manifest,
                 m);
  return kOk;
}

struct DereverbOpts {
  std::string input, rir, out, provider, reference, metrics, trace, manifest;
  std::string variant = "dps", jacobian = "identity", init = "unit_gaussian",
              tweedie = "paper";
  int steps = 50, corrector_steps = 1;
  double corrector_snr = 0.4, zeta_peak = 2500.0, zeta_breakpoint = 0.9;
  double provider_timeout = 30.0;
  std::uint64_t seed = 0;
  bool no_normalize = false;
};

int cmd_dereverb(const DereverbOpts& o, const Invocation& inv) {
  std::string provider_cmd = o.provider;
  if (provider_cmd.empty()) {
    if (const char* env = std::getenv(kProviderEnv)) provider_cmd = env;
  }
  if (provider_cmd.empty())
    throw UsageError(std::string("no score provider: pass --provider or set ") +
                     kProviderEnv);
  if (!(o.provider_timeout > 0.0))
    throw UsageError("--provider-timeout must be positive");

  SamplerConfig cfg;
  cfg.n_steps = o.steps;
  cfg.corrector_snr = o.corrector_snr;
  cfg.corrector_steps = o.corrector_steps;
  cfg.variant = parse_variant(o.variant);
  cfg.zeta_peak = o.zeta_peak;
  cfg.zeta_breakpoint = o.zeta_breakpoint;
  cfg.jacobian = parse_jacobian(o.jacobian);
  cfg.init = parse_init(o.init);
  cfg.tweedie_mode = parse_tweedie(o.tweedie);
  cfg.seed = o.seed;
  cfg.normalize = !o.no_normalize;
  cfg.validate();

  const TimeSignal y = read_mono_16k(o.input);
  const TimeSignal k = read_mono_16k(o.rir);
  std::optional<TimeSignal> reference;
  if (!o.reference.empty()) reference = read_mono_16k(o.reference);
  if (y.size() < k.size())
    throw UsageError("measurement is shorter than the RIR");
  if (reference && reference->size() != y.size() - k.size() + 1)
    throw UsageError("reference has " + std::to_string(reference->size()) +
                     " samples; the estimate will have " +
                     std::to_string(y.size() - k.size() + 1));

  ExternalProvider provider(
      provider_cmd, std::chrono::milliseconds(
                        static_cast<long long>(o.provider_timeout * 1000.0)));
  const SampleResult r = run(y, k, provider, cfg);

  const std::string trace_path =
      o.trace.empty() ? sibling_path(o.out, "trace.csv") : o.trace;
  const std::string metrics_path =
      o.metrics.empty() ? sibling_path(o.out, "metrics.csv") : o.metrics;

  write_wav(o.out, r.waveform, kSampleRate);
  std::vector<std::vector<double>> rows;
  nlohmann::json trace = nlohmann::json::array();
  for (size_t i = 0; i < r.per_step_residuals.size(); ++i) {
    rows.push_back({static_cast<double>(i + 1), r.taus[i], r.per_step_residuals[i]});
    trace.push_back({i + 1, r.taus[i], r.per_step_residuals[i]});
  }
  write_file_atomic(trace_path, write_csv({"step", "tau", "residual"}, rows));

  RunManifest m = start_manifest("dereverb", inv);
  m.inputs["measurement"] = absolute(o.input);
  m.inputs["rir"] = absolute(o.rir);
  m.settings["provider"] = provider_cmd;
  m.settings["sampler"] = {
      {"n_steps", cfg.n_steps},
      {"corrector_snr", cfg.corrector_snr},
      {"corrector_steps", cfg.corrector_steps},
      {"variant", to_string(cfg.variant)},
      {"zeta_peak", cfg.zeta_peak},
      {"zeta_breakpoint", cfg.zeta_breakpoint},
      {"jacobian", to_string(cfg.jacobian)},
      {"init", to_string(cfg.init)},
      {"tweedie_mode", to_string(cfg.tweedie_mode)},
      {"seed", cfg.seed},
      {"normalize", cfg.normalize},
      {"sigma_min", cfg.schedule.sigma_min()},
      {"sigma_max", cfg.schedule.sigma_max()},
  };
  m.results["normalization"] = {{"y_gain", r.normalization.y_gain},
                                {"k_gain", r.normalization.k_gain}};
  m.results["trace"] = trace;
  m.outputs["estimate"] = absolute(o.out);
  m.outputs["trace"] = absolute(trace_path);
  const double residual = residual_consistency(y, k, r.waveform);
  m.results["residual_db"] = residual;
  if (reference) {
    const MetricReport rep =
        evaluate(r.waveform, *reference, y, k, StftConfig::speech_default());
    write_file_atomic(metrics_path,
                      write_csv({"si_sdr_db", "lsd_db", "residual_db"},
                                {{rep.si_sdr_db, rep.lsd_db, rep.residual_db}}));
    m.inputs["reference"] = absolute(o.reference);
    m.outputs["metrics"] = absolute(metrics_path);
    m.results["si_sdr_db"] = rep.si_sdr_db;
    m.results["lsd_db"] = rep.lsd_db;
    std::printf("si_sdr_db=%.4f lsd_db=%.4f residual_db=%.4f\n", rep.si_sdr_db,
                rep.lsd_db, rep.residual_db);
  } else {
    std::printf("residual_db=%.4f\n", residual);
  }
  write_manifest(o.manifest.empty() ? sibling_path(o.out, "manifest.json")
                                    : o.manifest,
                 m);
  return kOk;
}

struct RirSynthOpts {
  std::string out, manifest;
  RirSpec spec;
};

int cmd_rir_synth(const RirSynthOpts& o, const Invocation& inv) {
  const TimeSignal k = synth_rir(o.spec);
  write_wav(o.out, k, kSampleRate);
  RunManifest m = start_manifest("rir synth", inv);
  m.settings["rir_spec"] = {{"t60_s", o.spec.t60},
                            {"drr_db", o.spec.drr_db},
                            {"length", o.spec.length},
                            {"direct_delay", o.spec.direct_delay},
                            {"seed", o.spec.seed}};
  m.outputs["rir"] = absolute(o.out);
  write_manifest(o.manifest.empty() ? sibling_path(o.out, "manifest.json")
                                    : o.manifest,
                 m);
  return kOk;
}

struct RirMeasureOpts {
  std::string input, out;
};

int cmd_rir_measure(const RirMeasureOpts& o, const Invocation& inv) {
  const TimeSignal k = read_mono_16k(o.input);
  const double t60 = measure_t60(k, kSampleRate);
  const double drr = measure_drr_db(k);
  std::printf("t60_s=%.6f drr_db=%.4f\n", t60, drr);
  if (!o.out.empty()) {
    write_file_atomic(o.out, write_csv({"t60_s", "drr_db"}, {{t60, drr}}));
    RunManifest m = start_manifest("rir measure", inv);
    m.inputs["rir"] = absolute(o.input);
    m.outputs["report"] = absolute(o.out);
    m.results["t60_s"] = t60;
    m.results["drr_db"] = drr;
    write_manifest(sibling_path(o.out, "manifest.json"), m);
  }
  return kOk;
}

int cmd_verify(const std::string& suite) {
  const std::vector<verify::CheckResult> results = verify::run_suite(suite);
  std::vector<std::string> failed;
  for (const auto& c : results) {
    std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.c_str());
    if (!c.passed) failed.push_back(c.name);
  }
  if (failed.empty()) {
    std::printf("all %zu checks passed\n", results.size());
    return kOk;
  }
  std::fprintf(stderr, "%zu of %zu checks failed:", failed.size(), results.size());
  for (const auto& f : failed) std::fprintf(stderr, " %s", f.c_str());
  std::fprintf(stderr, "\n");
  return kVerifyFailed;
}

int execute(const std::vector<std::string>& args, const std::string& cwd);

int cmd_replay(const std::string& path) {
  const RunManifest m = read_manifest(path);
  if (!m.args.empty() && m.args.front() == "replay")
    throw UsageError("a replay manifest cannot be replayed");
  std::error_code ec;
  std::filesystem::current_path(m.cwd, ec);
  if (ec) throw IoError("cannot enter recorded directory '" + m.cwd + "'");
  return execute(m.args, m.cwd);
}

// ---------------------------------------------------------------- parsing

int execute(const std::vector<std::string>& args, const std::string& cwd) {
  const Invocation inv{args, cwd};
  CLI::App app{"Diffusion posterior sampling for informed speech dereverberation",
               "dps"};
  app.require_subcommand(1);

  ReverberateOpts rev;
  auto* rev_cmd = app.add_subcommand("reverberate", "y = k * x + n from a clean WAV");
  rev_cmd->add_option("clean", rev.input, "clean 16 kHz mono WAV")->required();
  rev_cmd->add_option("--out", rev.out, "measurement WAV to write")->required();
  auto* rev_rir = rev_cmd->add_option("--rir", rev.rir, "RIR WAV");
  auto* rev_t60 = rev_cmd->add_option("--t60", rev.t60, "synthesize a RIR with this T60 (s)");
  rev_rir->excludes(rev_t60);
  rev_cmd->add_option("--drr", rev.drr, "synthetic RIR DRR (dB)")->needs(rev_t60);
  rev_cmd->add_option("--rir-length", rev.rir_length, "synthetic RIR taps")->needs(rev_t60);
  rev_cmd->add_option("--rir-seed", rev.rir_seed, "synthetic RIR seed")->needs(rev_t60);
  rev_cmd->add_option("--snr", rev.snr, "measurement SNR in dB, or inf");
  rev_cmd->add_option("--seed", rev.seed, "noise seed");
  rev_cmd->add_option("--manifest", rev.manifest, "manifest path");

  DereverbOpts der;
  auto* der_cmd = app.add_subcommand("dereverb", "posterior sampling of the clean signal");
  der_cmd->add_option("measurement", der.input, "reverberant 16 kHz mono WAV")->required();
  der_cmd->add_option("--rir", der.rir, "RIR WAV")->required();
  der_cmd->add_option("--out", der.out, "estimate WAV to write")->required();
  der_cmd->add_option("--provider", der.provider,
                      std::string("score provider command line (default $") +
                          kProviderEnv + ")");
  der_cmd->add_option("--provider-timeout", der.provider_timeout,
                      "seconds to wait for each provider reply");
  der_cmd->add_option("--reference", der.reference, "clean WAV for metrics");
  der_cmd->add_option("--steps", der.steps, "reverse steps N");
  der_cmd->add_option("--corrector-snr", der.corrector_snr, "Langevin step r");
  der_cmd->add_option("--corrector-steps", der.corrector_steps, "corrector steps per level");
  der_cmd->add_option("--variant", der.variant, "dps | statedps");
  der_cmd->add_option("--zeta-peak", der.zeta_peak, "peak of the zeta' schedule");
  der_cmd->add_option("--zeta-breakpoint", der.zeta_breakpoint, "apex of the zeta' schedule");
  der_cmd->add_option("--jacobian", der.jacobian, "identity | exact");
  der_cmd->add_option("--init", der.init, "unit_gaussian | sigma_T_gaussian");
  der_cmd->add_option("--tweedie", der.tweedie, "paper | exact");
  der_cmd->add_option("--seed", der.seed, "sampler seed");
  der_cmd->add_flag("--no-normalize", der.no_normalize, "skip peak normalization");
  der_cmd->add_option("--metrics", der.metrics, "metrics CSV path");
  der_cmd->add_option("--trace", der.trace, "residual trace CSV path");
  der_cmd->add_option("--manifest", der.manifest, "manifest path");

  auto* rir_cmd = app.add_subcommand("rir", "synthesize or measure room impulse responses");
  rir_cmd->require_subcommand(1);
  RirSynthOpts syn;
  auto* syn_cmd = rir_cmd->add_subcommand("synth", "exponential-decay RIR");
  syn_cmd->add_option("--out", syn.out, "RIR WAV to write")->required();
  syn_cmd->add_option("--t60", syn.spec.t60, "reverberation time (s)");
  syn_cmd->add_option("--drr", syn.spec.drr_db, "direct-to-reverberant ratio (dB)");
  syn_cmd->add_option("--length", syn.spec.length, "taps");
  syn_cmd->add_option("--delay", syn.spec.direct_delay, "direct-path delay (samples)");
  syn_cmd->add_option("--seed", syn.spec.seed, "tail seed");
  syn_cmd->add_option("--manifest", syn.manifest, "manifest path");
  RirMeasureOpts mea;
  auto* mea_cmd = rir_cmd->add_subcommand("measure", "T60 and DRR of a RIR");
  mea_cmd->add_option("rir", mea.input, "RIR WAV")->required();
  mea_cmd->add_option("--out", mea.out, "report CSV path");

  std::string suite = "all";
  auto* ver_cmd = app.add_subcommand("verify", "run invariant suites");
  ver_cmd->add_option("suite", suite, "suite name or 'all'");

  std::string manifest_path;
  auto* rep_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
  rep_cmd->add_option("manifest", manifest_path, "manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  rev.synth = rev_t60->count() > 0;
  if (*rev_cmd) return cmd_reverberate(rev, inv);
  if (*der_cmd) return cmd_dereverb(der, inv);
  if (*syn_cmd) return cmd_rir_synth(syn, inv);
  if (*mea_cmd) return cmd_rir_measure(mea, inv);
  if (*ver_cmd) return cmd_verify(suite);
  if (*rep_cmd) return cmd_replay(manifest_path);
  return kUsage;
}

int guarded_main(const std::vector<std::string>& args) {
  auto fail = [](int code, const char* kind, const std::exception& e) {
    std::fprintf(stderr, "dps: %s: %s\n", kind, e.what());
    return code;
  };
  try {
    return execute(args, std::filesystem::current_path().string());
  } catch (const UsageError& e) {
    return fail(kUsage, "usage error", e);
  } catch (const ContractViolation& e) {
    return fail(kUsage, "invalid arguments", e);
  } catch (const IoError& e) {
    return fail(kIoFailure, "i/o error", e);
  } catch (const ProviderError& e) {
    return fail(kProviderFailure, "provider error", e);
  } catch (const ProtocolError& e) {
    return fail(kProtocolFailure, "protocol error", e);
  } catch (const CapabilityError& e) {
    return fail(kCapabilityFailure, "capability error", e);
  } catch (const DomainError& e) {
    return fail(kDomainFailure, "domain error", e);
  } catch (const EstimationError& e) {
    return fail(kDomainFailure, "estimation error", e);
  } catch (const NumericalError& e) {
    return fail(kDomainFailure, "numerical error", e);
  } catch (const std::exception& e) {
    return fail(kInternalFailure, "internal error", e);
  }
}

}  // namespace
}  // namespace dps::tools

int main(int argc, char** argv) {
  return dps::tools::guarded_main(std::vector<std::string>(argv + 1, argv + argc));
}
