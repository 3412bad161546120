// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/external_provider.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <thread>

#include "dps/errors.h"

namespace dps {
namespace wire {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void floats(const std::vector<float>& v) {
    bytes_.reserve(bytes_.size() + 4 * v.size());
    for (float f : v) f32(f);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t le64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(le32(p)) |
         (static_cast<std::uint64_t>(le32(p + 4)) << 32);
}

std::vector<float> decode_floats(const std::vector<std::uint8_t>& raw) {
  std::vector<float> out(raw.size() / 4);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<float>(le32(raw.data() + 4 * i));
  return out;
}

// Reads exactly n bytes. Returns the number read before EOF (< n only at
// EOF). Throws ProviderError on timeout or I/O failure.
size_t read_exact(int fd, std::uint8_t* buf, size_t n, Deadline deadline) {
  size_t got = 0;
  while (got < n) {
    if (deadline != Deadline::max()) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) throw ProviderError("timed out waiting for provider");
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - now).count() + 1;
      pollfd pfd{fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(ms));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;  // re-check the deadline
    }
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProviderError(std::string("read failed: ") + std::strerror(errno));
    }
    if (r == 0) return got;
    got += static_cast<size_t>(r);
  }
  return got;
}

void read_or_throw(int fd, std::uint8_t* buf, size_t n, Deadline deadline,
                   const char* what) {
  if (read_exact(fd, buf, n, deadline) != n)
    throw ProviderError(std::string("provider closed its output while sending ") +
                        what);
}

size_t payload_floats(std::uint32_t bins, std::uint32_t frames) {
  return static_cast<size_t>(bins) * frames * 2;
}

}  // namespace

std::vector<std::uint8_t> encode_handshake(std::uint8_t flags) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(flags);
  return w.take();
}

std::vector<std::uint8_t> encode(const Request& req) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(req.type));
  w.f64(req.sigma);
  w.u32(req.bins);
  w.u32(req.frames);
  w.floats(req.state);
  if (req.type == MessageType::kJvp) w.floats(req.direction);
  return w.take();
}

std::vector<std::uint8_t> encode(const Response& resp) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(resp.type));
  w.u32(resp.bins);
  w.u32(resp.frames);
  w.floats(resp.payload);
  return w.take();
}

std::vector<float> pack(const Spectrogram& x) {
  std::vector<float> out(2 * static_cast<size_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) {
    out[2 * i] = static_cast<float>(x[i].real());
    out[2 * i + 1] = static_cast<float>(x[i].imag());
  }
  return out;
}

void unpack(const std::vector<float>& payload, Spectrogram& x) {
  if (payload.size() != 2 * static_cast<size_t>(x.size()))
    throw ProtocolError("payload size does not match spectrogram shape");
  for (int i = 0; i < x.size(); ++i)
    x[i] = Complex(payload[2 * i], payload[2 * i + 1]);
}

std::uint8_t read_handshake(int fd, Deadline deadline) {
  std::uint8_t buf[5];
  read_or_throw(fd, buf, 5, deadline, "its handshake");
  if (std::memcmp(buf, kMagic, 4) != 0)
    throw ProtocolError("bad handshake magic from provider");
  if (buf[4] & ~kFlagJvp) throw ProtocolError("unknown handshake flags");
  return buf[4];
}

bool read_request(int fd, Request& req) {
  std::uint8_t head[17];
  const size_t got = read_exact(fd, head, 1, Deadline::max());
  if (got == 0) return false;
  if (read_exact(fd, head + 1, 16, Deadline::max()) != 16)
    throw ProtocolError("truncated request header");
  if (head[0] > 2) throw ProtocolError("unknown request type");
  req.type = static_cast<MessageType>(head[0]);
  req.sigma = std::bit_cast<double>(le64(head + 1));
  req.bins = le32(head + 9);
  req.frames = le32(head + 13);
  const size_t n = payload_floats(req.bins, req.frames);
  std::vector<std::uint8_t> raw(4 * n);
  auto read_block = [&](std::vector<float>& dst) {
    if (read_exact(fd, raw.data(), raw.size(), Deadline::max()) != raw.size())
      throw ProtocolError("truncated request payload");
    dst = decode_floats(raw);
  };
  req.state.clear();
  req.direction.clear();
  if (req.type == MessageType::kShutdown) return true;
  read_block(req.state);
  if (req.type == MessageType::kJvp) read_block(req.direction);
  return true;
}

Response read_response(int fd, Deadline deadline) {
  std::uint8_t head[9];
  read_or_throw(fd, head, 9, deadline, "a response header");
  Response resp;
  if (head[0] != 1 && head[0] != 2)
    throw ProtocolError("unknown response type " + std::to_string(head[0]));
  resp.type = static_cast<MessageType>(head[0]);
  resp.bins = le32(head + 1);
  resp.frames = le32(head + 5);
  const size_t n = payload_floats(resp.bins, resp.frames);
  if (n > (size_t{1} << 30)) throw ProtocolError("response payload too large");
  std::vector<std::uint8_t> raw(4 * n);
  read_or_throw(fd, raw.data(), raw.size(), deadline, "a response payload");
  resp.payload = decode_floats(raw);
  return resp;
}

void write_all(int fd, const std::vector<std::uint8_t>& bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + sent, bytes.size() - sent);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ProviderError(std::string("write to provider failed: ") +
                          std::strerror(errno));
    }
    sent += static_cast<size_t>(w);
  }
}

}  // namespace wire

ExternalProvider::ExternalProvider(std::string command,
                                   std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  // A dead provider must surface as EPIPE, not kill the client.
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw ProviderError("cannot create pipes for provider");
  const pid_t pid = ::fork();
  if (pid < 0) throw ProviderError("cannot fork provider process");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    const std::uint8_t flags = wire::read_handshake(
        from_child_, std::chrono::steady_clock::now() + timeout_);
    supports_jvp_ = (flags & wire::kFlagJvp) != 0;
  } catch (const Error& e) {
    shutdown();
    if (dynamic_cast<const ProtocolError*>(&e))
      throw ProtocolError("provider '" + command_ + "': " + e.what());
    throw ProviderError("provider '" + command_ + "' failed to start: " +
                        e.what());
  }
}

ExternalProvider::~ExternalProvider() { shutdown(); }

void ExternalProvider::shutdown() {
  if (to_child_ >= 0) {
    try {
      wire::Request req;
      req.type = wire::MessageType::kShutdown;
      wire::write_all(to_child_, wire::encode(req));
    } catch (const Error&) {
      // provider already gone
    }
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

Spectrogram ExternalProvider::round_trip(wire::Request req,
                                         const Spectrogram& like) {
  if (to_child_ < 0) throw ProviderError("provider is not running");
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  wire::write_all(to_child_, wire::encode(req));
  const wire::Response resp = wire::read_response(from_child_, deadline);
  if (resp.type != req.type)
    throw ProtocolError("provider echoed response type " +
                        std::to_string(static_cast<int>(resp.type)) +
                        " for request type " +
                        std::to_string(static_cast<int>(req.type)));
  if (resp.bins != req.bins || resp.frames != req.frames)
    throw ProtocolError("provider returned a " + std::to_string(resp.bins) +
                        "x" + std::to_string(resp.frames) +
                        " spectrogram for a " + std::to_string(req.bins) + "x" +
                        std::to_string(req.frames) + " request");
  Spectrogram out = like.zeros_like();
  wire::unpack(resp.payload, out);
  return out;
}

Spectrogram ExternalProvider::score(const Spectrogram& x, double sigma) {
  wire::Request req;
  req.type = wire::MessageType::kScore;
  req.sigma = sigma;
  req.bins = static_cast<std::uint32_t>(x.bins());
  req.frames = static_cast<std::uint32_t>(x.frames());
  req.state = wire::pack(x);
  return round_trip(std::move(req), x);
}

Spectrogram ExternalProvider::jvp(const Spectrogram& x, double sigma,
                                  const Spectrogram& direction) {
  if (!supports_jvp_)
    throw CapabilityError("provider '" + command_ +
                          "' did not advertise JVP support");
  x.require_same_shape(direction, "external jvp");
  wire::Request req;
  req.type = wire::MessageType::kJvp;
  req.sigma = sigma;
  req.bins = static_cast<std::uint32_t>(x.bins());
  req.frames = static_cast<std::uint32_t>(x.frames());
  req.state = wire::pack(x);
  req.direction = wire::pack(direction);
  return round_trip(std::move(req), x);
}

int serve(ScoreProvider& provider, int in_fd, int out_fd,
          const std::function<Spectrogram(std::uint32_t, std::uint32_t)>&
              make_state,
          ProviderFault fault) {
  if (fault == ProviderFault::kBadMagic) {
    wire::write_all(out_fd, {'N', 'O', 'P', 'E', 0});
    return 0;
  }
  wire::write_all(out_fd, wire::encode_handshake(
                              provider.supports_jvp() ? wire::kFlagJvp : 0));
  wire::Request req;
  while (wire::read_request(in_fd, req)) {
    if (req.type == wire::MessageType::kShutdown) return 0;
    if (fault == ProviderFault::kExit) return 3;
    if (fault == ProviderFault::kHang) {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
    }
    Spectrogram x = make_state(req.bins, req.frames);
    wire::unpack(req.state, x);
    Spectrogram result;
    if (req.type == wire::MessageType::kJvp) {
      Spectrogram dir = x.zeros_like();
      wire::unpack(req.direction, dir);
      result = provider.jvp(x, req.sigma, dir);
    } else {
      result = provider.score(x, req.sigma);
    }
    wire::Response resp;
    resp.type = req.type;
    resp.bins = req.bins;
    resp.frames = req.frames;
    resp.payload = wire::pack(result);
    if (fault == ProviderFault::kWrongShape) {
      resp.frames = req.frames > 1 ? req.frames - 1 : req.frames + 1;
      resp.payload.resize(2 * static_cast<size_t>(resp.bins) * resp.frames);
    } else if (fault == ProviderFault::kWrongType) {
      resp.type = req.type == wire::MessageType::kScore
                      ? wire::MessageType::kJvp
                      : wire::MessageType::kScore;
    }
    wire::write_all(out_fd, wire::encode(resp));
  }
  return 0;
}

}  // namespace dps
