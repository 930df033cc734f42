#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vtac/rng.hpp"
#include "vtac/wfdb.hpp"
#include "oracles.hpp"

using namespace vtac;
using namespace vtac::wfdb;
using oracle::decode212_ref;
using oracle::random_record;

namespace {

RecordHeader one_signal_header(StorageFormat fmt, std::size_t n_samples, double gain = 1.0, int baseline = 0) {
  RecordHeader h;
  h.record_name = "r";
  h.n_signals = 1;
  h.sampling_frequency = 100;
  h.n_samples = n_samples;
  SignalSpec s;
  s.file_name = "r.dat";
  s.storage_format = fmt;
  s.adc_gain = gain;
  s.baseline = baseline;
  h.signals.push_back(s);
  return h;
}

}  // namespace

TEST(Fmt212, HandDecodedTriplet) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt212, 2), {0x34, 0x12, 0x56});
  EXPECT_EQ(rec.samples.data[0], 564.0);
  EXPECT_EQ(rec.samples.data[1], 342.0);
}

TEST(Fmt212, SignExtension) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt212, 2), {0xFF, 0xFF, 0xFF});
  EXPECT_EQ(rec.samples.data[0], -1.0);
  EXPECT_EQ(rec.samples.data[1], -1.0);
}

TEST(Fmt212, OddSampleCountUsesPartialGroup) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt212, 3), {0x34, 0x12, 0x56, 0x07, 0x00});
  EXPECT_EQ(rec.samples.data[2], 7.0);
  EXPECT_THROW(read_signal(one_signal_header(StorageFormat::Fmt212, 3), {0x34, 0x12, 0x56, 0x07}), Error);
}

TEST(Fmt212, MatchesReferenceDecoderOnRandomBytes) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<std::uint8_t> bytes((3 * n + 1) / 2);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.index(256));
    const auto rec = read_signal(one_signal_header(StorageFormat::Fmt212, n), bytes);
    const auto ref = decode212_ref(bytes, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (ref[i] == kFmt212Sentinel) {
        EXPECT_TRUE(rec.missing_mask[i]);
      } else {
        EXPECT_EQ(rec.samples.data[i], ref[i]);
      }
    }
  }
}

TEST(Fmt16, LittleEndianSigned) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt16, 2), {0x01, 0x80, 0xFE, 0x7F});
  EXPECT_EQ(rec.samples.data[0], -32767.0);
  EXPECT_EQ(rec.samples.data[1], 32766.0);
}

TEST(Fmt16, SentinelSetsMask) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt16, 2, 200.0, 10), {0x00, 0x80, 0xD2, 0x00});
  EXPECT_TRUE(rec.missing_mask[0]);
  EXPECT_EQ(rec.samples.data[0], 0.0);
  EXPECT_FALSE(rec.missing_mask[1]);
  EXPECT_DOUBLE_EQ(rec.samples.data[1], (210.0 - 10.0) / 200.0);
}

TEST(ReadSignal, TruncatedFileIsRejected) {
  try {
    read_signal(one_signal_header(StorageFormat::Fmt16, 4), {1, 2, 3, 4, 5, 6});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedData);
  }
}

TEST(ReadSignal, InfersLengthWhenHeaderOmitsIt) {
  const auto rec = read_signal(one_signal_header(StorageFormat::Fmt16, 0), {1, 0, 2, 0, 3, 0});
  EXPECT_EQ(rec.samples.rows, 3u);
}

TEST(ReadSignal, ChecksumVerification) {
  auto h = one_signal_header(StorageFormat::Fmt16, 2);
  h.signals[0].checksum = 3;
  EXPECT_NO_THROW(read_signal(h, {1, 0, 2, 0}, {true}));
  h.signals[0].checksum = 4;
  try {
    read_signal(h, {1, 0, 2, 0}, {true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChecksumMismatch);
  }
  EXPECT_NO_THROW(read_signal(h, {1, 0, 2, 0}));
}

TEST(Header, ParsesStandardRecord) {
  const auto h = parse_header(
      "100 2 360 650000\n"
      "100.dat 212 200 11 1024 995 -22131 0 MLII\n"
      "100.dat 212 200 11 1024 1011 20052 0 V5\n"
      "# 69 M 1085 1629 x1\n");
  EXPECT_EQ(h.record_name, "100");
  EXPECT_EQ(h.n_signals, 2u);
  EXPECT_EQ(h.sampling_frequency, 360.0);
  EXPECT_EQ(h.n_samples, 650000u);
  EXPECT_EQ(h.signals[0].storage_format, StorageFormat::Fmt212);
  EXPECT_EQ(h.signals[0].adc_gain, 200.0);
  EXPECT_EQ(h.signals[0].adc_resolution, 11);
  EXPECT_EQ(h.signals[0].adc_zero, 1024);
  EXPECT_EQ(h.signals[0].baseline, 1024);  // baseline defaults to the ADC zero
  EXPECT_EQ(h.signals[0].initial_value, 995);
  EXPECT_EQ(h.signals[0].checksum, -22131);
  EXPECT_EQ(h.signals[1].description, "V5");
  ASSERT_EQ(h.comments.size(), 1u);
  EXPECT_EQ(h.comments[0], "69 M 1085 1629 x1");
}

TEST(Header, GainBaselineAndUnits) {
  const auto h = parse_header("a 1 250 10\na.dat 16 100(-5)/uV 16 0 0 0 0 ECG lead II\n");
  EXPECT_EQ(h.signals[0].adc_gain, 100.0);
  EXPECT_EQ(h.signals[0].baseline, -5);
  EXPECT_EQ(h.signals[0].units, "uV");
  EXPECT_EQ(h.signals[0].description, "ECG lead II");
}

TEST(Header, ZeroGainMeansDefault) {
  const auto h = parse_header("a 1 250 10\na.dat 16 0\n");
  EXPECT_EQ(h.signals[0].adc_gain, 200.0);
}

TEST(Header, Errors) {
  auto code = [](const char* text) {
    try {
      parse_header(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code("a 1 250 10\na.dat 80\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code("a 1 250 10\na.dat 212x2\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code("a 1 250 10\na.dat abc\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(code("a 2 250 10\na.dat 16\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(code("a x 250 10\na.dat 16\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(code(""), ErrorCode::MalformedHeader);
  EXPECT_EQ(code("a/2 1 250 10\na.dat 16\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code("a 2 250 10\na.dat 16\nb.dat 16\n"), ErrorCode::UnsupportedFormat);
}

TEST(Header, FormatParsesBack) {
  Rng rng(5);
  const auto enc = write_record(random_record(rng, StorageFormat::Fmt16), StorageFormat::Fmt16, {"note one"});
  EXPECT_EQ(parse_header(enc.header_text), enc.header);
}

class RoundTrip : public ::testing::TestWithParam<StorageFormat> {};

TEST_P(RoundTrip, HundredRandomRecords) {
  const auto fmt = GetParam();
  Rng rng(static_cast<std::uint64_t>(fmt));
  for (int trial = 0; trial < 100; ++trial) {
    const auto rec = random_record(rng, fmt);
    const auto enc = write_record(rec, fmt);
    const auto back = read_signal(parse_header(enc.header_text), enc.signal_bytes, {true});
    ASSERT_EQ(back.missing_mask, rec.missing_mask);
    ASSERT_EQ(back.samples.rows, rec.samples.rows);
    for (std::size_t i = 0; i < rec.samples.data.size(); ++i) {
      const double gain = rec.header.signals[i % rec.samples.cols].adc_gain;
      ASSERT_LE(std::abs(back.samples.data[i] - rec.samples.data[i]), 0.5 / gain + 1e-12);
    }
    // A second pass is exact: the values now sit on the quantization grid.
    const auto enc2 = write_record(back, fmt);
    EXPECT_EQ(enc2.signal_bytes, enc.signal_bytes);
  }
}

INSTANTIATE_TEST_SUITE_P(Formats, RoundTrip, ::testing::Values(StorageFormat::Fmt16, StorageFormat::Fmt212));

TEST(WriteRecord, OutOfRangeValue) {
  WaveformRecord r;
  r.header = one_signal_header(StorageFormat::Fmt212, 1, 200.0);
  r.samples = Matrix(1, 1, 11.0);  // 2200 ADC units > 2047
  r.missing_mask.assign(1, 0);
  try {
    write_record(r, StorageFormat::Fmt212);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValueOutOfRange);
  }
  EXPECT_NO_THROW(write_record(r, StorageFormat::Fmt16));
}

TEST(SaveLoad, FilesOnDisk) {
  Rng rng(3);
  const auto dir = std::filesystem::temp_directory_path() / "vtac_wfdb_test";
  std::filesystem::remove_all(dir);
  auto rec = random_record(rng, StorageFormat::Fmt212);
  rec.header.record_name = "disk";
  save_record(dir, write_record(rec, StorageFormat::Fmt212));
  const auto back = load_record(dir / "disk.hea", {true});
  EXPECT_EQ(back.missing_mask, rec.missing_mask);
  std::filesystem::remove_all(dir);
}

TEST(AlarmWindow, BoundsAndIndex) {
  WaveformRecord r;
  r.header = one_signal_header(StorageFormat::Fmt16, 400 * 10);
  r.header.sampling_frequency = 10;
  r.samples = Matrix(4000, 1);
  for (std::size_t t = 0; t < 4000; ++t) r.samples.data[t] = static_cast<double>(t);
  r.missing_mask.assign(4000, 0);

  const auto w = extract_alarm_window(r, 320.0, AlarmLabel::TrueAlarm);
  EXPECT_EQ(w.samples.rows, 3600u);
  EXPECT_EQ(w.alarm_index, 3000u);
  EXPECT_EQ(w.samples.data[w.alarm_index], 3200.0);
  EXPECT_EQ(w.samples.data.front(), 200.0);
  EXPECT_EQ(w.label, AlarmLabel::TrueAlarm);

  EXPECT_NO_THROW(extract_alarm_window(r, 300.0, AlarmLabel::FalseAlarm));
  EXPECT_NO_THROW(extract_alarm_window(r, 340.0, AlarmLabel::FalseAlarm));
  for (double t : {299.9, 340.1, -1.0}) {
    try {
      extract_alarm_window(r, t, AlarmLabel::FalseAlarm);
      FAIL() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::WindowOutOfBounds);
    }
  }
}

TEST(AlarmIndex, RoundTripAndErrors) {
  const std::vector<AlarmEvent> events = {{"a", 310.5, AlarmLabel::TrueAlarm}, {"b", 300, AlarmLabel::FalseAlarm}};
  EXPECT_EQ(parse_alarm_index(format_alarm_index(events, "hdr")), events);
  EXPECT_EQ(parse_alarm_index("a,310.5,true\nb,300,false\n"), events);
  EXPECT_THROW(parse_alarm_index("a,310,maybe\n"), Error);
  EXPECT_THROW(parse_alarm_index("a,x,true\n"), Error);
  EXPECT_THROW(parse_alarm_index("a,310\n"), Error);
}
