// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// dps_provider: analytic score provider served over stdin/stdout. Stands in
// for a trained network in tests and demos.

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "dps/errors.h"
#include "dps/external_provider.h"
#include "dps/sampler.h"
#include "dps/score.h"
#include "dps/wav.h"

namespace {

using namespace dps;

// Builds the concrete provider once the request shape is known.
class LazyProvider : public ScoreProvider {
 public:
  using Factory = std::function<std::unique_ptr<ScoreProvider>(const Spectrogram&)>;

  LazyProvider(Factory factory, bool jvp, std::string name)
      : factory_(std::move(factory)), jvp_(jvp), name_(std::move(name)) {}

  bool supports_jvp() const override { return jvp_; }
  Spectrogram score(const Spectrogram& x, double sigma) override {
    return get(x).score(x, sigma);
  }
  Spectrogram jvp(const Spectrogram& x, double sigma,
                  const Spectrogram& direction) override {
    if (!jvp_) return ScoreProvider::jvp(x, sigma, direction);
    return get(x).jvp(x, sigma, direction);
  }
  std::string describe() const override { return name_; }

 private:
  ScoreProvider& get(const Spectrogram& x) {
    if (!inner_ || !shape_.same_shape(x)) {
      inner_ = factory_(x);
      shape_ = x.zeros_like();
    }
    return *inner_;
  }

  Factory factory_;
  bool jvp_;
  std::string name_;
  std::unique_ptr<ScoreProvider> inner_;
  Spectrogram shape_;
};

TimeSignal read_mono(const std::string& path) {
  WavData w = read_wav(path);
  if (w.channels != 1) throw IoError("'" + path + "' is not mono");
  return std::move(w.samples);
}

int run_provider(int argc, char** argv) {
  CLI::App app{"Analytic score provider speaking the dps wire protocol",
               "dps_provider"};
  std::string prior = "delta", target, measurement, rir, convention = "paper",
              fault = "none";
  double mean_re = 0.0, mean_im = 0.0, var = 1.0, sigma_min = 0.05;
  double gain = 0.0;
  bool no_jvp = false;
  app.add_option("--prior", prior, "delta | gaussian | zero")
      ->check(CLI::IsMember({"delta", "gaussian", "zero"}));
  app.add_option("--target", target, "clean WAV the delta prior sits on");
  app.add_option("--gain", gain, "scale applied to the target before the STFT");
  app.add_option("--measurement", measurement,
                 "measurement WAV; with --rir derives the sampler's target gain");
  app.add_option("--rir", rir, "RIR WAV used with --measurement");
  app.add_option("--mean-re", mean_re, "gaussian prior mean (real part)");
  app.add_option("--mean-im", mean_im, "gaussian prior mean (imaginary part)");
  app.add_option("--var", var, "gaussian prior total variance per bin");
  app.add_option("--convention", convention, "paper | exact")
      ->check(CLI::IsMember({"paper", "exact"}));
  app.add_option("--sigma-min", sigma_min, "schedule floor for --convention exact");
  app.add_flag("--no-jvp", no_jvp, "do not advertise JVP support");
  app.add_option("--fault", fault,
                 "none | wrong-shape | wrong-type | bad-magic | hang | exit")
      ->check(CLI::IsMember(
          {"none", "wrong-shape", "wrong-type", "bad-magic", "hang", "exit"}));
  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, ProviderFault> faults = {
      {"none", ProviderFault::kNone},         {"wrong-shape", ProviderFault::kWrongShape},
      {"wrong-type", ProviderFault::kWrongType}, {"bad-magic", ProviderFault::kBadMagic},
      {"hang", ProviderFault::kHang},         {"exit", ProviderFault::kExit}};
  const VarianceConvention conv{parse_tweedie(convention), sigma_min};
  auto cfg = std::make_shared<const StftConfig>(StftConfig::speech_default());

  std::shared_ptr<const Spectrogram> delta_target;
  if (prior == "delta") {
    if (target.empty()) throw ContractViolation("--prior delta needs --target");
    TimeSignal x = read_mono(target);
    double g = gain;
    if (g == 0.0) {
      g = 1.0;
      if (!measurement.empty() || !rir.empty()) {
        if (measurement.empty() || rir.empty())
          throw ContractViolation("--measurement and --rir go together");
        g = normalization_for(read_mono(measurement), read_mono(rir)).signal_gain();
      }
    }
    for (double& v : x) v *= g;
    delta_target = std::make_shared<const Spectrogram>(stft(x, cfg));
  }

  LazyProvider::Factory factory;
  if (prior == "delta") {
    factory = [&](const Spectrogram& like) -> std::unique_ptr<ScoreProvider> {
      if (like.frames() != delta_target->frames())
        throw ContractViolation("request has " + std::to_string(like.frames()) +
                                " frames; the target has " +
                                std::to_string(delta_target->frames()));
      return std::make_unique<DeltaScore>(DeltaPrior{*delta_target}, conv);
    };
  } else if (prior == "gaussian") {
    factory = [&](const Spectrogram& like) -> std::unique_ptr<ScoreProvider> {
      Spectrogram mean = like.zeros_like();
      for (Complex& v : mean.data()) v = Complex(mean_re, mean_im);
      return std::make_unique<GaussianScore>(GaussianPrior{mean, {var}}, conv);
    };
  } else {
    factory = [](const Spectrogram&) -> std::unique_ptr<ScoreProvider> {
      return std::make_unique<ZeroScore>();
    };
  }
  LazyProvider provider(factory, !no_jvp, prior);

  auto make_state = [&](std::uint32_t bins, std::uint32_t frames) {
    if (static_cast<int>(bins) != cfg->num_bins())
      throw ContractViolation("request has " + std::to_string(bins) +
                              " bins; expected " + std::to_string(cfg->num_bins()));
    const int len = delta_target ? delta_target->original_len()
                                 : std::max(1, static_cast<int>(frames) * cfg->hop -
                                                   cfg->edge_pad());
    return Spectrogram(cfg, static_cast<int>(frames), len);
  };
  return serve(provider, STDIN_FILENO, STDOUT_FILENO, make_state, faults.at(fault));
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_provider(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dps_provider: %s\n", e.what());
    return 1;
  }
}
