// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_WAV_H_
#define DPS_WAV_H_

#include <string>

#include "dps/stft.h"

namespace dps {

struct WavData {
  TimeSignal samples;
  int sample_rate = 16000;
  int channels = 1;
};

// Reads 16-bit PCM or 32-bit IEEE float RIFF/WAVE files. Multichannel data
// is returned interleaved. Throws IoError on malformed input.
WavData read_wav(const std::string& path);

// Writes mono 32-bit float WAVE via a temporary file and rename.
void write_wav(const std::string& path, const TimeSignal& samples,
               int sample_rate);

// Writes `contents` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace dps

#endif  // DPS_WAV_H_
