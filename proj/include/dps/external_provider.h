// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_EXTERNAL_PROVIDER_H_
#define DPS_EXTERNAL_PROVIDER_H_

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dps/score.h"

namespace dps {

// Score-provider wire protocol, little-endian, over the provider's stdio.
//
//   handshake (provider -> client): "DPS1", u8 flags (bit 0: supports_jvp)
//   request   (client -> provider): u8 type, f64 sigma, u32 F, u32 T,
//                                   F*T*2 f32 state [, F*T*2 f32 direction]
//   response  (provider -> client): u8 type, u32 F, u32 T, F*T*2 f32
//
// Payloads hold interleaved (re, im) pairs, frequency-major. type is 1 for
// score, 2 for JVP (carries the direction block) and 0 for shutdown, which
// is sent with sigma = 0, F = T = 0 and gets no response.
namespace wire {

inline constexpr char kMagic[4] = {'D', 'P', 'S', '1'};
inline constexpr std::uint8_t kFlagJvp = 0x01;

enum class MessageType : std::uint8_t { kShutdown = 0, kScore = 1, kJvp = 2 };

struct Request {
  MessageType type = MessageType::kScore;
  double sigma = 0.0;
  std::uint32_t bins = 0;
  std::uint32_t frames = 0;
  std::vector<float> state;
  std::vector<float> direction;  // kJvp only
};

struct Response {
  MessageType type = MessageType::kScore;
  std::uint32_t bins = 0;
  std::uint32_t frames = 0;
  std::vector<float> payload;
};

std::vector<std::uint8_t> encode_handshake(std::uint8_t flags);
std::vector<std::uint8_t> encode(const Request& req);
std::vector<std::uint8_t> encode(const Response& resp);

std::vector<float> pack(const Spectrogram& x);
// Fills x (which fixes the shape) from an interleaved payload.
void unpack(const std::vector<float>& payload, Spectrogram& x);

// Blocking reads on a file descriptor; the deadline is absolute and
// std::chrono::steady_clock::time_point::max() waits forever.
using Deadline = std::chrono::steady_clock::time_point;

std::uint8_t read_handshake(int fd, Deadline deadline);
// Returns false on clean EOF before the first byte.
bool read_request(int fd, Request& req);
Response read_response(int fd, Deadline deadline);
void write_all(int fd, const std::vector<std::uint8_t>& bytes);

}  // namespace wire

// Provider process spawned from a shell command line. One request in flight
// per instance; calls must be serialized by the owner.
class ExternalProvider : public ScoreProvider {
 public:
  static constexpr std::chrono::milliseconds kDefaultTimeout{30000};

  explicit ExternalProvider(std::string command,
                            std::chrono::milliseconds timeout = kDefaultTimeout);
  ~ExternalProvider() override;
  ExternalProvider(const ExternalProvider&) = delete;
  ExternalProvider& operator=(const ExternalProvider&) = delete;

  bool supports_jvp() const override { return supports_jvp_; }
  Spectrogram score(const Spectrogram& x, double sigma) override;
  Spectrogram jvp(const Spectrogram& x, double sigma,
                  const Spectrogram& direction) override;
  std::string describe() const override { return "external: " + command_; }

 private:
  Spectrogram round_trip(wire::Request req, const Spectrogram& like);
  void shutdown();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool supports_jvp_ = false;
};

// Faults a served provider can inject, for exercising client error paths.
enum class ProviderFault { kNone, kWrongShape, kWrongType, kBadMagic, kHang, kExit };

// Serves `provider` on (in_fd, out_fd) until shutdown or EOF. `make_state`
// builds a spectrogram of the requested shape for the provider to consume.
// Returns the process exit status the server should use.
int serve(ScoreProvider& provider, int in_fd, int out_fd,
          const std::function<Spectrogram(std::uint32_t, std::uint32_t)>&
              make_state,
          ProviderFault fault = ProviderFault::kNone);

}  // namespace dps

#endif  // DPS_EXTERNAL_PROVIDER_H_
