#pragma once

// Deployment simulation: encoder at the distributed unit, framed midhaul
// transport through a bounded queue, decoder + predictor at the controller.
//
// MidhaulFrame (little-endian):
//   version u8 = 1 | msg_type u8 (0 latent, 1 raw) | seq u32 | n_ap u16 |
//   payload_len u16 (element count) | payload_len x f32

#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "lite/bytes.hpp"
#include "lite/training.hpp"

namespace lite {

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 10;

enum class MsgType : std::uint8_t { Latent = 0, Raw = 1 };

struct MidhaulFrame {
  std::uint8_t version = kFrameVersion;
  MsgType msg_type = MsgType::Latent;
  std::uint32_t seq = 0;
  std::uint16_t n_ap = 0;
  std::vector<float> payload;

  bool operator==(const MidhaulFrame&) const = default;
};

inline std::size_t frame_size(std::size_t elements) { return kFrameHeaderBytes + 4 * elements; }

inline std::vector<std::uint8_t> encode_frame(const MidhaulFrame& f) {
  if (f.payload.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("frame: payload of " + std::to_string(f.payload.size()) +
                                " elements overflows the u16 length field");
  }
  for (float v : f.payload)
    if (!std::isfinite(v)) throw std::invalid_argument("frame: non-finite payload value");
  if (f.version != kFrameVersion) throw std::invalid_argument("frame: unsupported version");
  ByteWriter w;
  w.u8(f.version);
  w.u8(static_cast<std::uint8_t>(f.msg_type));
  w.u32(f.seq);
  w.u16(f.n_ap);
  w.u16(static_cast<std::uint16_t>(f.payload.size()));
  for (float v : f.payload) w.f32(v);
  return w.take();
}

inline MidhaulFrame decode_frame(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  MidhaulFrame f;
  f.version = r.u8();
  if (f.version != kFrameVersion) {
    throw FormatError("frame: unsupported version " + std::to_string(f.version));
  }
  const auto type = r.u8();
  if (type > 1) throw FormatError("frame: unknown msg_type " + std::to_string(type));
  f.msg_type = static_cast<MsgType>(type);
  f.seq = r.u32();
  f.n_ap = r.u16();
  const std::size_t n = r.u16();
  if (r.remaining() != 4 * n) {
    throw FormatError("frame: payload_len " + std::to_string(n) + " does not match " +
                      std::to_string(r.remaining()) + " payload bytes");
  }
  f.payload.resize(n);
  for (auto& v : f.payload) v = r.f32();
  return f;
}

// FIFO channel with backpressure. push blocks while full; pop blocks while
// empty and returns nullopt once closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be >= 1");
  }

  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct PayloadLedger {
  std::size_t windows = 0;
  std::size_t raw_bytes = 0;         // f32 window payloads had they been sent raw
  std::size_t compressed_bytes = 0;  // f32 latent payloads
  std::size_t header_bytes = 0;

  double payload_reduction_pct() const {
    return raw_bytes ? 100.0 * (1.0 - double(compressed_bytes) / double(raw_bytes)) : 0.0;
  }
  // Both sides framed: one header per latent frame vs one per raw frame.
  double header_inclusive_reduction_pct() const {
    if (!raw_bytes) return 0.0;
    return 100.0 * (1.0 - double(compressed_bytes + header_bytes) / double(raw_bytes + header_bytes));
  }
};

template <typename T>
struct PipelineResult {
  Tensor<T> predictions;  // [windows delivered, 8]
  std::size_t delivered = 0;
  PayloadLedger ledger;
};

struct PipelineOptions {
  std::size_t queue_capacity = 16;
  std::size_t encode_chunk = 64;
  AeLayout layout = AeLayout::Flattened;
  std::optional<std::size_t> close_after;  // simulate the link going down
};

// Producer thread: encode windows, frame latents, push bytes. Consumer
// thread: decode frames, decompress, predict.
template <typename T>
PipelineResult<T> run_pipeline(Autoencoder<T>& ae, const Predictor<T>& predictor, const Tensor<T>& windows,
                               const PipelineOptions& opt = {}) {
  const std::size_t n = windows.dim(0), W = windows.dim(1), A = windows.dim(2);
  const Shape in_shape = ae_input_shape(opt.layout, 1, W, A);
  const std::size_t blocks_per_window = in_shape[0];
  const std::size_t latent_elems = blocks_per_window * kLatentFeatures;
  BoundedQueue<std::vector<std::uint8_t>> queue(opt.queue_capacity);
  PipelineResult<T> res;
  std::exception_ptr producer_error, consumer_error;

  // Encoder weights are only read on the producer, decoder weights on the
  // consumer; each side works on its own graph.
  std::thread producer([&] {
    try {
      std::uint32_t seq = 0;
      for (std::size_t first = 0; first < n; first += opt.encode_chunk) {
        const std::size_t m = std::min(opt.encode_chunk, n - first);
        Graph<T> g(false);
        auto z = ae.encode(g, to_ae_input(g.constant(slice_rows(windows, first, m)), opt.layout)).value();
        for (std::size_t i = 0; i < m; ++i) {
          if (opt.close_after && seq >= *opt.close_after) {
            queue.close();
            return;
          }
          MidhaulFrame f{kFrameVersion, MsgType::Latent, seq++, static_cast<std::uint16_t>(A), {}};
          f.payload.resize(latent_elems);
          for (std::size_t k = 0; k < latent_elems; ++k)
            f.payload[k] = static_cast<float>(z[i * latent_elems + k]);
          if (!queue.push(encode_frame(f))) return;
        }
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  std::vector<T> preds;
  std::thread consumer([&] {
    try {
      std::optional<std::uint32_t> last_seq;
      while (auto bytes = queue.pop()) {
        const auto f = decode_frame(*bytes);
        if (last_seq && f.seq <= *last_seq) throw FormatError("frame: sequence number not increasing");
        last_seq = f.seq;
        if (f.payload.size() != latent_elems) throw FormatError("frame: unexpected latent size");
        Tensor<T> z({blocks_per_window, kLatentChannels, kLatentLength});
        for (std::size_t k = 0; k < latent_elems; ++k) z[k] = static_cast<T>(f.payload[k]);
        Graph<T> g(false);
        auto rec = from_ae_output(ae.decode(g, g.constant(std::move(z))), 1, W, A).value();
        auto y = predictor.predict_fast(rec);
        preds.insert(preds.end(), y.data().begin(), y.data().end());
        res.ledger.windows += 1;
        res.ledger.raw_bytes += W * A * sizeof(float);
        res.ledger.compressed_bytes += latent_elems * sizeof(float);
        res.ledger.header_bytes += kFrameHeaderBytes;
      }
    } catch (...) {
      consumer_error = std::current_exception();
      queue.close();
    }
  });

  producer.join();
  consumer.join();
  if (producer_error) std::rethrow_exception(producer_error);
  if (consumer_error) std::rethrow_exception(consumer_error);
  res.delivered = res.ledger.windows;
  if (res.delivered) res.predictions = Tensor<T>({res.delivered, kPredictorOutputs}, std::move(preds));
  return res;
}

// Same models without framing or transport.
template <typename T>
Tensor<T> direct_composition(Autoencoder<T>& ae, const Predictor<T>& p, const Tensor<T>& windows,
                             AeLayout layout = AeLayout::Flattened) {
  return predict_windows(p, reconstruct_windows(ae, windows, layout));
}

}  // namespace lite
