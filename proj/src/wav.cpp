// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/wav.h"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "dps/errors.h"

namespace dps {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  auto bad = [&](const std::string& why) {
    return IoError("'" + path + "' is not a supported WAV file: " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw bad("missing RIFF/WAVE header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    if (pos + 8 + len > buf.size()) {
      // Tolerate a data chunk whose declared length overruns the file.
      if (std::memcmp(chunk, "data", 4) != 0) throw bad("truncated chunk");
    }
    const size_t avail = std::min<size_t>(len, buf.size() - pos - 8);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw bad("short fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) throw bad("short extensible fmt chunk");
        format = le16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = static_cast<std::uint32_t>(avail);
    }
    pos += 8 + len + (len & 1);
  }
  if (!format) throw bad("no fmt chunk");
  if (!data) throw bad("no data chunk");
  if (channels < 1) throw bad("zero channels");

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  if (format == kFormatPcm && bits == 16) {
    out.samples.resize(data_len / 2);
    for (size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] =
          static_cast<std::int16_t>(le16(data + 2 * i)) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    out.samples.resize(data_len / 4);
    for (size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] = std::bit_cast<float>(le32(data + 4 * i));
  } else {
    throw bad("only 16-bit PCM and 32-bit float are supported");
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

void write_wav(const std::string& path, const TimeSignal& samples,
               int sample_rate) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(4 * samples.size());
  std::string s;
  s.reserve(44 + data_len);
  s += "RIFF";
  put32(s, 36 + data_len);
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, kFormatFloat);
  put16(s, 1);
  put32(s, static_cast<std::uint32_t>(sample_rate));
  put32(s, static_cast<std::uint32_t>(sample_rate) * 4);
  put16(s, 4);
  put16(s, 32);
  s += "data";
  put32(s, data_len);
  for (double v : samples)
    put32(s, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file_atomic(path, s);
}

}  // namespace dps
