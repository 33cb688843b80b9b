// Copyright 2026 The qmpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmpc/fxp.hpp"

namespace qmpc {

constexpr int kParties = 3;

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Wire format: ring elements are packed at their logical width, so an element
// of Z_{2^l} costs l bits on the wire. Widths that are multiples of 8 are
// written as little-endian bytes; other widths are bit-packed LSB first.

inline std::size_t packed_size(std::size_t count, int width) {
  return (count * static_cast<std::size_t>(width) + 7) / 8;
}

inline Bytes pack(const RingTensor& t) {
  const int w = t.width();
  Bytes out(packed_size(t.size(), w), 0);
  if (w % 8 == 0) {
    const int nb = w / 8;
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t v = t[i];
      for (int b = 0; b < nb; ++b) {
        out[i * nb + b] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
      }
    }
    return out;
  }
  std::size_t bit = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint64_t v = t[i];
    for (int b = 0; b < w; ++b, ++bit) {
      if ((v >> b) & 1U) out[bit / 8] |= static_cast<std::uint8_t>(1U << (bit % 8));
    }
  }
  return out;
}

inline RingTensor unpack(const Bytes& bytes, const Shape& shape, int width) {
  const std::size_t n = numel(shape);
  if (bytes.size() != packed_size(n, width)) {
    throw ProtocolAbort(detail::concat("payload of ", bytes.size(),
                                       " bytes does not hold ", n,
                                       " elements of width ", width));
  }
  RingTensor out(shape, width);
  auto& o = out.raw();
  if (width % 8 == 0) {
    const int nb = width / 8;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      for (int b = nb; b-- > 0;) v = (v << 8) | bytes[i * nb + b];
      o[i] = v;
    }
    return out;
  }
  std::size_t bit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b, ++bit) {
      if ((bytes[bit / 8] >> (bit % 8)) & 1U) v |= std::uint64_t{1} << b;
    }
    o[i] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PairStats {
  std::uint64_t bytes = 0;
  std::uint64_t messages = 0;
  friend bool operator==(const PairStats&, const PairStats&) = default;
};

/// Traffic counters for one fabric. `rounds` counts barrier epochs in which at
/// least one message was exchanged.
struct CommStats {
  std::array<std::array<PairStats, kParties>, kParties> pairs{};  // [from][to]
  std::uint64_t rounds = 0;
  // Bytes keyed by phase path ("softmax/upcast", ...), attributed to the
  // sender's active phase.
  std::map<std::string, std::uint64_t> phase_bytes;

  std::uint64_t total_bytes() const {
    std::uint64_t t = 0;
    for (const auto& row : pairs)
      for (const auto& p : row) t += p.bytes;
    return t;
  }

  std::uint64_t total_messages() const {
    std::uint64_t t = 0;
    for (const auto& row : pairs)
      for (const auto& p : row) t += p.messages;
    return t;
  }

  // Bytes of every phase whose path contains `name` as a component.
  std::uint64_t bytes_in_phase(const std::string& name) const {
    std::uint64_t t = 0;
    for (const auto& [path, b] : phase_bytes) {
      std::size_t start = 0;
      while (start <= path.size()) {
        const auto end = path.find('/', start);
        const auto part = path.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        if (part == name) {
          t += b;
          break;
        }
        if (end == std::string::npos) break;
        start = end + 1;
      }
    }
    return t;
  }

  void reset() { *this = CommStats{}; }

  CommStats operator-(const CommStats& base) const {
    CommStats d = *this;
    for (int i = 0; i < kParties; ++i)
      for (int j = 0; j < kParties; ++j) {
        d.pairs[i][j].bytes -= base.pairs[i][j].bytes;
        d.pairs[i][j].messages -= base.pairs[i][j].messages;
      }
    d.rounds -= base.rounds;
    for (const auto& [k, v] : base.phase_bytes) {
      auto it = d.phase_bytes.find(k);
      if (it == d.phase_bytes.end()) continue;
      it->second -= v;
      if (it->second == 0) d.phase_bytes.erase(it);
    }
    return d;
  }

  // {"0->1": {"bytes": .., "messages": ..}, ..., "rounds": ..}
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (int i = 0; i < kParties; ++i)
      for (int k = 0; k < kParties; ++k) {
        if (i == k) continue;
        j[std::to_string(i) + "->" + std::to_string(k)] = {
            {"bytes", pairs[i][k].bytes}, {"messages", pairs[i][k].messages}};
      }
    j["rounds"] = rounds;
    return j;
  }
};

struct NetworkConfig {
  double bandwidth_bps = 5e9;
  double rtt_s = 0.4e-3;

  static NetworkConfig lan() { return {5e9, 0.4e-3}; }
  static NetworkConfig wan() { return {400e6, 40e-3}; }

  void validate() const {
    QMPC_ENFORCE(bandwidth_bps > 0 && rtt_s > 0,
                 "network bandwidth and rtt must be positive");
  }
};

inline double estimate_time(const CommStats& stats, const NetworkConfig& cfg) {
  cfg.validate();
  return static_cast<double>(stats.rounds) * cfg.rtt_s +
         static_cast<double>(stats.total_bytes()) * 8.0 / cfg.bandwidth_bps;
}

// ---------------------------------------------------------------------------

/// In-process message fabric connecting three parties. Channels are unbounded
/// FIFO queues per ordered pair; receive blocks until a message or abort.
class Fabric {
 public:
  Fabric() = default;
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  void send(int from, int to, Bytes payload) {
    check_pair(from, to);
    const std::size_t n = payload.size();
    {
      std::lock_guard lock(stats_mu_);
      auto& ps = stats_.pairs[from][to];
      ps.bytes += n;
      ps.messages += 1;
      stats_.phase_bytes[phase_[from].empty() ? "-" : phase_[from]] += n;
      epoch_traffic_ = true;
    }
    if (tap_) tap_(from, to, payload);
    auto& ch = channel(from, to);
    {
      std::lock_guard lock(ch.mu);
      if (aborted_) throw ProtocolAbort("send on closed channel");
      ch.queue.push_back(std::move(payload));
    }
    ch.cv.notify_one();
  }

  Bytes recv(int at, int from) {
    check_pair(from, at);
    auto& ch = channel(from, at);
    std::unique_lock lock(ch.mu);
    ch.cv.wait(lock, [&] { return !ch.queue.empty() || aborted_; });
    if (ch.queue.empty()) throw ProtocolAbort("recv on closed channel");
    Bytes out = std::move(ch.queue.front());
    ch.queue.pop_front();
    lock.unlock();
    std::lock_guard slock(stats_mu_);
    received_[from][at] += out.size();
    return out;
  }

  // Closes every channel and barrier; blocked parties wake with ProtocolAbort.
  void abort() {
    aborted_ = true;
    for (auto& ch : channels_) {
      { std::lock_guard lock(ch.mu); }
      ch.cv.notify_all();
    }
    { std::lock_guard lock(barrier_mu_); }
    barrier_cv_.notify_all();
    { std::lock_guard lock(debug_mu_); }
    debug_cv_.notify_all();
  }

  bool aborted() const { return aborted_; }

  // Re-opens the fabric after an abort, dropping undelivered messages.
  void reopen() {
    for (auto& ch : channels_) {
      std::lock_guard lock(ch.mu);
      ch.queue.clear();
    }
    {
      std::lock_guard lock(barrier_mu_);
      arrived_ = 0;
    }
    {
      std::lock_guard lock(debug_mu_);
      debug_arrived_ = 0;
    }
    std::lock_guard lock(stats_mu_);
    received_ = {};
    for (int i = 0; i < kParties; ++i)
      for (int j = 0; j < kParties; ++j)
        received_[i][j] = stats_.pairs[i][j].bytes;
    epoch_traffic_ = false;
    aborted_ = false;
  }

  // Epoch barrier. Every party calls this once per protocol round.
  void end_round() {
    std::unique_lock lock(barrier_mu_);
    if (aborted_) throw ProtocolAbort("barrier on closed fabric");
    const std::uint64_t gen = generation_;
    if (++arrived_ == kParties) {
      arrived_ = 0;
      ++generation_;
      std::lock_guard slock(stats_mu_);
      if (epoch_traffic_) ++stats_.rounds;
      epoch_traffic_ = false;
      lock.unlock();
      barrier_cv_.notify_all();
      return;
    }
    barrier_cv_.wait(lock, [&] { return generation_ != gen || aborted_; });
    if (generation_ == gen) throw ProtocolAbort("barrier on closed fabric");
  }

  // Uncounted all-to-all exchange used only by debug-mode oracle checks.
  std::array<std::vector<std::uint64_t>, kParties> debug_exchange(
      int party, std::vector<std::uint64_t> words) {
    std::unique_lock lock(debug_mu_);
    if (aborted_) throw ProtocolAbort("debug exchange on closed fabric");
    const std::uint64_t gen = debug_generation_;
    debug_slots_[party] = std::move(words);
    if (++debug_arrived_ == kParties) {
      debug_result_ = debug_slots_;
      debug_arrived_ = 0;
      ++debug_generation_;
      auto result = debug_result_;
      lock.unlock();
      debug_cv_.notify_all();
      return result;
    }
    debug_cv_.wait(lock,
                   [&] { return debug_generation_ != gen || aborted_; });
    if (debug_generation_ == gen) {
      throw ProtocolAbort("debug exchange on closed fabric");
    }
    return debug_result_;
  }

  // Observer for every payload sent (from, to, bytes); called on the sender's
  // thread. Install only while no protocol is running.
  using Tap = std::function<void(int, int, const Bytes&)>;
  void set_tap(Tap tap) { tap_ = std::move(tap); }

  void set_phase(int party, std::string path) {
    std::lock_guard lock(stats_mu_);
    phase_[party] = std::move(path);
  }
  std::string phase(int party) const {
    std::lock_guard lock(stats_mu_);
    return phase_[party];
  }

  CommStats stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
  }

  void reset_stats() {
    std::lock_guard lock(stats_mu_);
    stats_.reset();
    received_ = {};
  }

  // Bytes received per pair equal bytes sent per pair (true at barriers).
  bool conserved() const {
    std::lock_guard lock(stats_mu_);
    for (int i = 0; i < kParties; ++i)
      for (int j = 0; j < kParties; ++j)
        if (received_[i][j] != stats_.pairs[i][j].bytes) return false;
    return true;
  }

 private:
  struct Channel {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> queue;
  };

  static void check_pair(int from, int to) {
    QMPC_ENFORCE(from >= 0 && from < kParties && to >= 0 && to < kParties,
                 "party id out of range: ", from, "->", to);
    QMPC_ENFORCE(from != to, "party ", from, " cannot send to itself");
  }

  Channel& channel(int from, int to) { return channels_[from * kParties + to]; }

  std::array<Channel, kParties * kParties> channels_;
  Tap tap_;
  std::atomic<bool> aborted_{false};

  std::mutex barrier_mu_;
  std::condition_variable barrier_cv_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;

  std::mutex debug_mu_;
  std::condition_variable debug_cv_;
  int debug_arrived_ = 0;
  std::uint64_t debug_generation_ = 0;
  std::array<std::vector<std::uint64_t>, kParties> debug_slots_;
  std::array<std::vector<std::uint64_t>, kParties> debug_result_;

  mutable std::mutex stats_mu_;
  CommStats stats_;
  std::array<std::array<std::uint64_t, kParties>, kParties> received_{};
  bool epoch_traffic_ = false;
  std::array<std::string, kParties> phase_;
};

}  // namespace qmpc
