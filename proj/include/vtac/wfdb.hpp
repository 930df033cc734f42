#pragma once

// WFDB record I/O: `.hea` text headers and `.dat` sample files in formats 16
// and 212, plus carving of fixed alarm windows and the alarm-index sidecar.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/matrix.hpp"
#include "vtac/text.hpp"

namespace vtac::wfdb {

enum class StorageFormat { Fmt16 = 16, Fmt212 = 212 };

inline constexpr int kFmt16Sentinel = -32768;
inline constexpr int kFmt212Sentinel = -2048;
inline constexpr double kDefaultGain = 200.0;

inline int sentinel(StorageFormat f) { return f == StorageFormat::Fmt16 ? kFmt16Sentinel : kFmt212Sentinel; }
inline int max_adc(StorageFormat f) { return f == StorageFormat::Fmt16 ? 32767 : 2047; }
inline int min_adc(StorageFormat f) { return -max_adc(f); }

struct SignalSpec {
  std::string file_name;
  StorageFormat storage_format = StorageFormat::Fmt16;
  double adc_gain = kDefaultGain;  // ADC units per physical unit
  int baseline = 0;
  std::string units = "mV";
  int adc_resolution = 0;
  int adc_zero = 0;
  int initial_value = 0;
  std::optional<int> checksum;
  int block_size = 0;
  std::string description;

  bool operator==(const SignalSpec&) const = default;
};

struct RecordHeader {
  std::string record_name;
  std::size_t n_signals = 0;
  double sampling_frequency = 0.0;
  std::size_t n_samples = 0;
  std::vector<SignalSpec> signals;
  std::vector<std::string> comments;  // '#' lines, without the marker

  double duration_seconds() const { return static_cast<double>(n_samples) / sampling_frequency; }

  bool operator==(const RecordHeader&) const = default;
};

/// Samples in physical units, T x C. Missing samples read as 0 with the mask set.
struct WaveformRecord {
  RecordHeader header;
  Matrix samples;
  std::vector<std::uint8_t> missing_mask;  // row-major, same shape as samples

  bool missing(std::size_t t, std::size_t c) const { return missing_mask[t * samples.cols + c] != 0; }
};

enum class AlarmLabel { FalseAlarm = 0, TrueAlarm = 1 };

inline int to_int(AlarmLabel l) { return l == AlarmLabel::TrueAlarm ? 1 : 0; }

inline constexpr double kPreAlarmSeconds = 300.0;
inline constexpr double kPostAlarmSeconds = 60.0;
inline constexpr double kWindowSeconds = kPreAlarmSeconds + kPostAlarmSeconds;

struct AlarmWindow {
  std::string record_id;
  double sampling_frequency = 0.0;
  std::vector<std::string> channel_names;
  Matrix samples;
  std::vector<std::uint8_t> missing_mask;
  AlarmLabel label = AlarmLabel::FalseAlarm;
  std::size_t alarm_index = 0;
};

namespace detail {

inline std::size_t expected_bytes(StorageFormat f, std::size_t n_values) {
  return f == StorageFormat::Fmt16 ? 2 * n_values : (3 * n_values + 1) / 2;
}

inline int sign_extend12(int v) { return (v & 0x800) ? v - 0x1000 : v; }

inline std::vector<int> decode(StorageFormat f, const std::vector<std::uint8_t>& bytes, std::size_t n_values) {
  std::vector<int> out(n_values);
  if (f == StorageFormat::Fmt16) {
    for (std::size_t i = 0; i < n_values; ++i) {
      const auto raw = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
      out[i] = static_cast<std::int16_t>(raw);
    }
    return out;
  }
  // Format 212: each pair of samples shares three bytes. The first sample takes
  // byte 0 plus the low nibble of byte 1, the second takes byte 2 plus the high
  // nibble of byte 1.
  for (std::size_t i = 0; i < n_values; i += 2) {
    const std::size_t b = 3 * (i / 2);
    const int mid = bytes[b + 1];
    out[i] = sign_extend12(bytes[b] | ((mid & 0x0F) << 8));
    if (i + 1 < n_values) out[i + 1] = sign_extend12(bytes[b + 2] | ((mid & 0xF0) << 4));
  }
  return out;
}

inline std::vector<std::uint8_t> encode(StorageFormat f, const std::vector<int>& adc) {
  std::vector<std::uint8_t> out(expected_bytes(f, adc.size()));
  if (f == StorageFormat::Fmt16) {
    for (std::size_t i = 0; i < adc.size(); ++i) {
      const auto raw = static_cast<std::uint16_t>(static_cast<std::int16_t>(adc[i]));
      out[2 * i] = static_cast<std::uint8_t>(raw & 0xFF);
      out[2 * i + 1] = static_cast<std::uint8_t>(raw >> 8);
    }
    return out;
  }
  for (std::size_t i = 0; i < adc.size(); i += 2) {
    const std::size_t b = 3 * (i / 2);
    const int first = adc[i] & 0xFFF;
    const int second = i + 1 < adc.size() ? adc[i + 1] & 0xFFF : 0;
    out[b] = static_cast<std::uint8_t>(first & 0xFF);
    out[b + 1] = static_cast<std::uint8_t>(((first >> 8) & 0x0F) | ((second >> 4) & 0xF0));
    if (i + 1 < adc.size()) out[b + 2] = static_cast<std::uint8_t>(second & 0xFF);
  }
  return out;
}

inline int checksum16(const std::vector<int>& adc, std::size_t channel, std::size_t n_channels) {
  std::uint32_t sum = 0;
  for (std::size_t i = channel; i < adc.size(); i += n_channels) sum += static_cast<std::uint32_t>(adc[i]);
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(sum & 0xFFFF));
}

inline StorageFormat parse_format(std::string_view token) {
  std::size_t digits = 0;
  while (digits < token.size() && token[digits] >= '0' && token[digits] <= '9') ++digits;
  if (digits == 0) fail(ErrorCode::MalformedHeader, "non-numeric storage format '" + std::string(token) + "'");
  if (digits != token.size()) {
    fail(ErrorCode::UnsupportedFormat, "format modifiers (samples-per-frame, skew, offset) not supported: " +
                                           std::string(token));
  }
  const auto code = *text::parse_number<int>(token);
  if (code == 16) return StorageFormat::Fmt16;
  if (code == 212) return StorageFormat::Fmt212;
  fail(ErrorCode::UnsupportedFormat, "storage format " + std::to_string(code) + " (only 16 and 212)");
}

template <typename T>
T required_number(std::string_view token, const char* what) {
  auto v = text::parse_number<T>(token);
  if (!v) fail(ErrorCode::MalformedHeader, std::string("non-numeric ") + what + " '" + std::string(token) + "'");
  return *v;
}

/// Leading numeric prefix of a token such as "250/1000(0)".
inline double leading_double(std::string_view token, const char* what) {
  const auto stop = token.find_first_of("/(");
  return required_number<double>(token.substr(0, stop), what);
}

inline void parse_gain_field(std::string_view token, SignalSpec& spec, bool& has_baseline) {
  std::string_view gain_part = token;
  const auto slash = token.find('/');
  if (slash != std::string_view::npos) {
    spec.units = std::string(token.substr(slash + 1));
    gain_part = token.substr(0, slash);
  }
  const auto paren = gain_part.find('(');
  if (paren != std::string_view::npos) {
    const auto close = gain_part.find(')', paren);
    if (close == std::string_view::npos) fail(ErrorCode::MalformedHeader, "unterminated baseline in gain field");
    spec.baseline = required_number<int>(gain_part.substr(paren + 1, close - paren - 1), "baseline");
    has_baseline = true;
    gain_part = gain_part.substr(0, paren);
  }
  const double gain = required_number<double>(gain_part, "ADC gain");
  // WFDB convention: a zero gain means "uncalibrated", read with the default.
  spec.adc_gain = gain == 0.0 ? kDefaultGain : gain;
}

inline std::string join(const std::vector<std::string_view>& parts, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < parts.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += parts[i];
  }
  return out;
}

}  // namespace detail

/// Parse the text of a `.hea` file. Comment lines (leading '#') are kept in
/// `comments` but otherwise ignored.
inline RecordHeader parse_header(std::string_view text) {
  if (text::trim(text).empty()) fail(ErrorCode::MalformedHeader, "empty header");

  RecordHeader header;
  bool have_record_line = false;
  for (auto raw : text::lines(text)) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      header.comments.emplace_back(text::trim(line.substr(1)));
      continue;
    }
    const auto tokens = text::split_whitespace(line);
    if (!have_record_line) {
      if (tokens.size() < 4) {
        fail(ErrorCode::MalformedHeader, "record line needs name, signal count, frequency and sample count");
      }
      if (tokens[0].find('/') != std::string_view::npos) {
        fail(ErrorCode::UnsupportedFormat, "multi-segment records are not supported");
      }
      header.record_name = std::string(tokens[0]);
      const auto n_signals = detail::required_number<long long>(tokens[1], "signal count");
      const double fs = detail::leading_double(tokens[2], "sampling frequency");
      const auto n_samples = detail::required_number<long long>(tokens[3], "sample count");
      if (n_signals <= 0) fail(ErrorCode::MalformedHeader, "signal count must be positive");
      if (!(fs > 0.0)) fail(ErrorCode::MalformedHeader, "sampling frequency must be positive");
      if (n_samples < 0) fail(ErrorCode::MalformedHeader, "sample count must be non-negative");
      header.n_signals = static_cast<std::size_t>(n_signals);
      header.sampling_frequency = fs;
      header.n_samples = static_cast<std::size_t>(n_samples);
      have_record_line = true;
      continue;
    }
    if (header.signals.size() == header.n_signals) continue;  // trailing info lines

    if (tokens.size() < 2) fail(ErrorCode::MalformedHeader, "signal line needs file name and format");
    SignalSpec spec;
    spec.file_name = std::string(tokens[0]);
    spec.storage_format = detail::parse_format(tokens[1]);
    bool has_baseline = false;
    if (tokens.size() > 2) detail::parse_gain_field(tokens[2], spec, has_baseline);
    if (tokens.size() > 3) spec.adc_resolution = detail::required_number<int>(tokens[3], "ADC resolution");
    if (tokens.size() > 4) spec.adc_zero = detail::required_number<int>(tokens[4], "ADC zero");
    if (tokens.size() > 5) spec.initial_value = detail::required_number<int>(tokens[5], "initial value");
    if (tokens.size() > 6) spec.checksum = detail::required_number<int>(tokens[6], "checksum");
    if (tokens.size() > 7) spec.block_size = detail::required_number<int>(tokens[7], "block size");
    if (tokens.size() > 8) spec.description = detail::join(tokens, 8);
    if (!has_baseline) spec.baseline = spec.adc_zero;
    header.signals.push_back(std::move(spec));
  }

  if (!have_record_line) fail(ErrorCode::MalformedHeader, "no record line");
  if (header.signals.size() != header.n_signals) {
    fail(ErrorCode::MalformedHeader, "expected " + std::to_string(header.n_signals) + " signal lines, found " +
                                         std::to_string(header.signals.size()));
  }
  for (const auto& s : header.signals) {
    if (s.file_name != header.signals.front().file_name || s.storage_format != header.signals.front().storage_format) {
      fail(ErrorCode::UnsupportedFormat, "all signals must share one signal file and one storage format");
    }
  }
  return header;
}

inline std::string format_header(const RecordHeader& header) {
  std::string out = header.record_name + ' ' + std::to_string(header.n_signals) + ' ' +
                    text::format_double(header.sampling_frequency) + ' ' + std::to_string(header.n_samples) + '\n';
  for (const auto& s : header.signals) {
    out += s.file_name + ' ' + std::to_string(static_cast<int>(s.storage_format)) + ' ' +
           text::format_double(s.adc_gain) + '(' + std::to_string(s.baseline) + ")/" + s.units + ' ' +
           std::to_string(s.adc_resolution) + ' ' + std::to_string(s.adc_zero) + ' ' +
           std::to_string(s.initial_value) + ' ' + std::to_string(s.checksum.value_or(0)) + ' ' +
           std::to_string(s.block_size);
    if (!s.description.empty()) out += ' ' + s.description;
    out += '\n';
  }
  for (const auto& c : header.comments) out += "# " + c + '\n';
  return out;
}

struct ReadOptions {
  bool verify_checksums = false;
};

/// Decode a signal file into physical units: (adc - baseline) / gain.
inline WaveformRecord read_signal(const RecordHeader& header, const std::vector<std::uint8_t>& bytes,
                                  ReadOptions options = {}) {
  if (header.signals.size() != header.n_signals || header.n_signals == 0) {
    fail(ErrorCode::MalformedHeader, "signal list does not match signal count");
  }
  const auto fmt = header.signals.front().storage_format;
  const std::size_t n_channels = header.n_signals;
  std::size_t n_samples = header.n_samples;
  if (n_samples == 0 && !bytes.empty()) {
    // Unknown length in the header: infer it from the file size.
    const std::size_t frame_bits = n_channels * (fmt == StorageFormat::Fmt16 ? 16 : 12);
    n_samples = bytes.size() * 8 / frame_bits;
  }
  const std::size_t n_values = n_samples * n_channels;
  const std::size_t expected = detail::expected_bytes(fmt, n_values);
  if (bytes.size() != expected) {
    fail(ErrorCode::TruncatedData, "signal file has " + std::to_string(bytes.size()) + " bytes, expected " +
                                       std::to_string(expected));
  }

  const auto adc = detail::decode(fmt, bytes, n_values);
  if (options.verify_checksums) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      const auto& expected_sum = header.signals[c].checksum;
      if (expected_sum && *expected_sum != detail::checksum16(adc, c, n_channels)) {
        fail(ErrorCode::ChecksumMismatch, "checksum mismatch on signal " + std::to_string(c));
      }
    }
  }

  WaveformRecord record;
  record.header = header;
  record.header.n_samples = n_samples;
  record.samples = Matrix(n_samples, n_channels);
  record.missing_mask.assign(n_values, 0);
  const int missing = sentinel(fmt);
  for (std::size_t i = 0; i < n_values; ++i) {
    const auto& spec = header.signals[i % n_channels];
    if (adc[i] == missing) {
      record.missing_mask[i] = 1;
      record.samples.data[i] = 0.0;
    } else {
      record.samples.data[i] = static_cast<double>(adc[i] - spec.baseline) / spec.adc_gain;
    }
  }
  return record;
}

struct EncodedRecord {
  RecordHeader header;
  std::string header_text;
  std::vector<std::uint8_t> signal_bytes;
};

/// Quantize and pack a record. The gains, baselines, units and descriptions of
/// `record.header` are kept; the file name, storage format, resolution, initial
/// values and checksums are rewritten to describe the emitted bytes.
inline EncodedRecord write_record(const WaveformRecord& record, StorageFormat format,
                                  std::vector<std::string> comments = {}) {
  const std::size_t n_channels = record.samples.cols;
  if (record.header.signals.size() != n_channels || record.missing_mask.size() != record.samples.data.size()) {
    fail(ErrorCode::DimensionMismatch, "record header, samples and mask disagree in shape");
  }

  EncodedRecord out;
  out.header = record.header;
  out.header.n_signals = n_channels;
  out.header.n_samples = record.samples.rows;
  out.header.comments = std::move(comments);

  std::vector<int> adc(record.samples.data.size());
  const int lo = min_adc(format);
  const int hi = max_adc(format);
  for (std::size_t i = 0; i < adc.size(); ++i) {
    if (record.missing_mask[i]) {
      adc[i] = sentinel(format);
      continue;
    }
    const auto& spec = record.header.signals[i % n_channels];
    const double scaled = std::nearbyint(record.samples.data[i] * spec.adc_gain) + spec.baseline;
    if (!std::isfinite(scaled) || scaled < lo || scaled > hi) {
      fail(ErrorCode::ValueOutOfRange, "sample " + std::to_string(i / n_channels) + " of signal " +
                                           std::to_string(i % n_channels) + " does not fit format " +
                                           std::to_string(static_cast<int>(format)));
    }
    adc[i] = static_cast<int>(scaled);
  }

  for (std::size_t c = 0; c < n_channels; ++c) {
    auto& spec = out.header.signals[c];
    spec.file_name = record.header.record_name + ".dat";
    spec.storage_format = format;
    spec.adc_resolution = format == StorageFormat::Fmt16 ? 16 : 12;
    spec.initial_value = record.samples.rows > 0 ? adc[c] : 0;
    spec.checksum = detail::checksum16(adc, c, n_channels);
    spec.block_size = 0;
  }
  out.header_text = format_header(out.header);
  out.signal_bytes = detail::encode(format, adc);
  return out;
}

/// Load `<stem>.hea` and the signal file it names from the same directory.
inline WaveformRecord load_record(const std::filesystem::path& header_path, ReadOptions options = {}) {
  const auto header = parse_header(text::read_file(header_path));
  const auto dat = header_path.parent_path() / header.signals.front().file_name;
  return read_signal(header, text::read_bytes(dat), options);
}

inline void save_record(const std::filesystem::path& dir, const EncodedRecord& encoded) {
  text::write_file(dir / (encoded.header.record_name + ".hea"), encoded.header_text);
  text::write_file(dir / encoded.header.signals.front().file_name, encoded.signal_bytes);
}

/// Cut the 360 s window around an alarm: 300 s before onset, 60 s after.
inline AlarmWindow extract_alarm_window(const WaveformRecord& record, double alarm_time_s, AlarmLabel label) {
  const double fs = record.header.sampling_frequency;
  const auto pre = static_cast<std::size_t>(std::llround(kPreAlarmSeconds * fs));
  const auto length = static_cast<std::size_t>(std::llround(kWindowSeconds * fs));
  const double duration = static_cast<double>(record.samples.rows) / fs;
  if (!(alarm_time_s >= kPreAlarmSeconds) || alarm_time_s + kPostAlarmSeconds > duration + 1e-9) {
    fail(ErrorCode::WindowOutOfBounds, "alarm at " + text::format_double(alarm_time_s) + " s needs 300 s before and "
                                       "60 s after within a " + text::format_double(duration) + " s record");
  }
  const auto onset = static_cast<std::size_t>(std::llround(alarm_time_s * fs));
  const std::size_t start = onset - pre;
  if (start + length > record.samples.rows) {
    fail(ErrorCode::WindowOutOfBounds, "window runs past the end of the record");
  }

  AlarmWindow w;
  w.record_id = record.header.record_name;
  w.sampling_frequency = fs;
  for (const auto& s : record.header.signals) w.channel_names.push_back(s.description);
  const std::size_t c = record.samples.cols;
  w.samples = Matrix(length, c);
  std::copy_n(record.samples.data.begin() + static_cast<std::ptrdiff_t>(start * c), length * c, w.samples.data.begin());
  w.missing_mask.assign(record.missing_mask.begin() + static_cast<std::ptrdiff_t>(start * c),
                        record.missing_mask.begin() + static_cast<std::ptrdiff_t>((start + length) * c));
  w.label = label;
  w.alarm_index = pre;
  return w;
}

struct AlarmEvent {
  std::string record_id;
  double alarm_time_s = 0.0;
  AlarmLabel label = AlarmLabel::FalseAlarm;

  bool operator==(const AlarmEvent&) const = default;
};

/// Sidecar CSV: `record_id,alarm_time_s,label` with label true|false. An
/// optional column-name row and '#' comment lines are skipped.
inline std::vector<AlarmEvent> parse_alarm_index(std::string_view csv) {
  std::vector<AlarmEvent> events;
  std::size_t line_no = 0;
  for (auto raw : text::lines(csv)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 3) fail(ErrorCode::MalformedCsv, "alarm index line " + std::to_string(line_no));
    if (text::trim(fields[0]) == "record_id") continue;
    AlarmEvent e;
    e.record_id = std::string(text::trim(fields[0]));
    const auto t = text::parse_number<double>(fields[1]);
    if (!t) fail(ErrorCode::MalformedCsv, "alarm time on line " + std::to_string(line_no));
    e.alarm_time_s = *t;
    const auto label = text::trim(fields[2]);
    if (label == "true") {
      e.label = AlarmLabel::TrueAlarm;
    } else if (label == "false") {
      e.label = AlarmLabel::FalseAlarm;
    } else {
      fail(ErrorCode::MalformedCsv, "label must be true or false on line " + std::to_string(line_no));
    }
    events.push_back(std::move(e));
  }
  return events;
}

inline std::string format_alarm_index(const std::vector<AlarmEvent>& events, std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + '\n';
  out += "record_id,alarm_time_s,label\n";
  for (const auto& e : events) {
    out += e.record_id + ',' + text::format_double(e.alarm_time_s) + ',' +
           (e.label == AlarmLabel::TrueAlarm ? "true" : "false") + '\n';
  }
  return out;
}

}  // namespace vtac::wfdb
