#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "lite/bench.hpp"
#include "lite/pipeline.hpp"

using namespace lite;

namespace {

float random_finite_float(std::mt19937_64& rng) {
  for (;;) {
    const float f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    if (std::isfinite(f)) return f;
  }
}

Tensor<float> random_windows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0, 1);
  Tensor<float> t({n, 19, 8});
  for (auto& v : t.data()) v = d(rng);
  return t;
}

}  // namespace

TEST(Frame, LatentFrameIs310Bytes) {
  MidhaulFrame f{1, MsgType::Latent, 7, 8, std::vector<float>(75, 0.5f)};
  const auto bytes = encode_frame(f);
  EXPECT_EQ(bytes.size(), 310u);
  EXPECT_EQ(frame_size(75), 310u);
  EXPECT_EQ(bytes[0], 1);
  EXPECT_EQ(bytes[1], 0);
  EXPECT_EQ(bytes[2], 7);
  EXPECT_EQ(bytes[6], 8);
  EXPECT_EQ(bytes[8], 75);
  EXPECT_EQ(bytes[9], 0);
}

TEST(Frame, RandomPayloadsRoundTripBitExactly) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    MidhaulFrame f;
    f.msg_type = trial % 2 ? MsgType::Raw : MsgType::Latent;
    f.seq = static_cast<std::uint32_t>(rng());
    f.n_ap = static_cast<std::uint16_t>(rng());
    f.payload.resize(rng() % 200);
    for (auto& v : f.payload) v = random_finite_float(rng);
    const auto back = decode_frame(encode_frame(f));
    ASSERT_EQ(back.payload.size(), f.payload.size());
    for (std::size_t i = 0; i < f.payload.size(); ++i)
      ASSERT_EQ(std::bit_cast<std::uint32_t>(back.payload[i]), std::bit_cast<std::uint32_t>(f.payload[i]));
    ASSERT_EQ(back.seq, f.seq);
    ASSERT_EQ(back.n_ap, f.n_ap);
    ASSERT_EQ(back.msg_type, f.msg_type);
  }
}

TEST(Frame, EncodeRejectsNonFiniteAndOverflow) {
  MidhaulFrame f{1, MsgType::Latent, 0, 8, std::vector<float>(75, 0.0f)};
  f.payload[3] = std::nanf("");
  EXPECT_THROW(encode_frame(f), std::invalid_argument);
  f.payload[3] = INFINITY;
  EXPECT_THROW(encode_frame(f), std::invalid_argument);
  f.payload.assign(70000, 0.0f);
  EXPECT_THROW(encode_frame(f), std::invalid_argument);
}

TEST(Frame, DecodeRejectsCorruption) {
  const auto good = encode_frame({1, MsgType::Latent, 1, 8, std::vector<float>(75, 1.0f)});
  auto bad_version = good;
  bad_version[0] = 2;
  EXPECT_THROW(decode_frame(bad_version), FormatError);
  auto bad_type = good;
  bad_type[1] = 9;
  EXPECT_THROW(decode_frame(bad_type), FormatError);
  auto truncated = good;
  truncated.resize(200);
  EXPECT_THROW(decode_frame(truncated), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_frame(trailing), FormatError);
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>(5, 1)), FormatError);
}

TEST(Queue, FifoWithBackpressureAndDrain) {
  BoundedQueue<int> q(2);
  std::vector<int> got;
  std::thread consumer([&] {
    while (auto v = q.pop()) got.push_back(*v);
  });
  for (int i = 0; i < 100; ++i) ASSERT_TRUE(q.push(i));
  q.close();
  consumer.join();
  ASSERT_EQ(got.size(), 100u);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(got[i], i);
  EXPECT_FALSE(q.push(5));
}

TEST(Queue, CloseDrainsRemainingItems) {
  BoundedQueue<int> q(4);
  q.push(1);
  q.push(2);
  q.close();
  EXPECT_EQ(q.pop(), 1);
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.pop(), std::nullopt);
}

TEST(Pipeline, TransparentAgainstDirectComposition) {
  Autoencoder<float> ae(3);
  Predictor<float> p({16, 16, SePlacement::BeforeBiLSTM}, 3);
  const auto w = random_windows(150, 1);
  auto res = run_pipeline(ae, p, w);
  ASSERT_EQ(res.delivered, 150u);
  const auto direct = direct_composition(ae, p, w);
  EXPECT_LT(max_abs_diff(res.predictions, direct), 1e-6);
}

TEST(Pipeline, LedgerArithmetic) {
  Autoencoder<float> ae(1);
  Predictor<float> p({8, 8, SePlacement::None}, 1);
  auto res = run_pipeline(ae, p, random_windows(1000, 2));
  const auto& l = res.ledger;
  EXPECT_EQ(l.windows, 1000u);
  EXPECT_EQ(l.raw_bytes, 608000u);
  EXPECT_EQ(l.compressed_bytes, 300000u);
  EXPECT_EQ(l.header_bytes, 10000u);
  EXPECT_NEAR(l.payload_reduction_pct(), 50.66, 0.005);
  EXPECT_NEAR(l.header_inclusive_reduction_pct(), 100.0 * (1.0 - 310.0 / 618.0), 1e-9);
}

TEST(Pipeline, ClosedLinkDrainsAndStillReports) {
  Autoencoder<float> ae(1);
  Predictor<float> p({8, 8, SePlacement::None}, 1);
  PipelineOptions opt;
  opt.close_after = 40;
  auto res = run_pipeline(ae, p, random_windows(100, 3), opt);
  EXPECT_EQ(res.delivered, 40u);
  EXPECT_EQ(res.ledger.raw_bytes, 40u * 608u);
  EXPECT_EQ(res.predictions.dim(0), 40u);
}

TEST(Bench, PublishedIdentities) {
  EXPECT_NEAR(qps_from_latency(0.00679), 147275, 147267 * 0.001);
  EXPECT_NEAR(improvement_pct(147267, 31697), 364.6, 0.15);
  EXPECT_DOUBLE_EQ(improvement_pct(31697, 31697), 0.0);
}

TEST(Bench, ResultSatisfiesQpsIdentity) {
  volatile double sink = 0;
  BenchOptions opt;
  opt.batch = 10;
  opt.repetitions = 3;
  auto r = bench("spin", false, [&] {
    for (int i = 0; i < 20000; ++i) sink = sink + std::sqrt(double(i));
  }, opt);
  EXPECT_NEAR(r.qps * r.ls_ms, 1000.0, 1e-6 * 1000.0);
  EXPECT_LE(r.min_ms, r.median_ms);
  EXPECT_LE(r.median_ms, r.max_ms);
  EXPECT_EQ(r.samples_per_rep % 10, 0u);
  attach_reference(r, r);
  EXPECT_DOUBLE_EQ(*r.improvement_pct, 0.0);
}

TEST(Bench, ZeroDurationIsRetried) {
  BenchOptions opt;
  opt.repetitions = 3;
  auto r = bench("noop", false, [] {}, opt);
  EXPECT_GT(r.median_ms, 0.0);
  EXPECT_NEAR(r.qps, 1000.0 / r.ls_ms, 1e-6 * r.qps);
}

TEST(Bench, WorkerThreadsCountAllSamples) {
  BenchOptions opt;
  opt.batch = 5;
  opt.threads = 3;
  opt.repetitions = 3;
  std::atomic<int> calls{0};
  auto r = bench("count", false, [&] { calls++; }, opt);
  EXPECT_EQ(r.samples_per_rep % 15, 0u);
  EXPECT_THROW(bench("x", false, [] {}, BenchOptions{250, 3, 2, 1}), std::invalid_argument);
}

TEST(Bench, BatchedLatencyBeatsUnbatched) {
  Predictor<float> p({64, 128, SePlacement::BeforeBiLSTM}, 1);
  const auto x250 = random_windows(250, 4);
  const auto x1 = random_windows(1, 4);
  BenchOptions b250, b1;
  b1.batch = 1;
  b1.repetitions = 25;
  auto r250 = bench("se-bilstm", true, [&] { p.predict_fast(x250); }, b250);
  auto r1 = bench("se-bilstm", true, [&] { p.predict_fast(x1); }, b1);
  EXPECT_LE(r250.ls_ms, r1.ls_ms);
}

TEST(Bench, CsvRow) {
  BenchResult r;
  r.model = "bilstm";
  r.optimized = true;
  r.batch = 250;
  r.ls_ms = 0.5;
  r.qps = 2000;
  EXPECT_EQ(BenchResult::csv_header(), "model,optimized_flag,batch,ls_ms,qps,improvement_pct");
  EXPECT_EQ(r.csv_row(), "bilstm,1,250,0.5,2000,");
}
