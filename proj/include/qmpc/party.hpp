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

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <exception>
#include <memory>
#include <optional>
#include <thread>
#include <type_traits>
#include <utility>

#include "qmpc/transport.hpp"

namespace qmpc {

struct Seed128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Seed128 derive_seed(std::uint64_t master, std::uint64_t label) {
  std::uint64_t s = master ^ (label * 0xd6e8feb86659fd93ULL);
  Seed128 out;
  out.lo = splitmix64(s);
  out.hi = splitmix64(s);
  return out;
}

/// AES-128 in counter mode. Two holders of the same seed that draw the same
/// amounts in the same order obtain identical streams.
class Prf {
 public:
  explicit Prf(Seed128 seed = {}) : ctx_(EVP_CIPHER_CTX_new()) {
    if (!ctx_) throw Error("EVP_CIPHER_CTX_new failed");
    unsigned char key[16];
    std::memcpy(key, &seed.lo, 8);
    std::memcpy(key + 8, &seed.hi, 8);
    if (EVP_EncryptInit_ex(ctx_.get(), EVP_aes_128_ecb(), nullptr, key,
                           nullptr) != 1) {
      throw Error("AES key setup failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx_.get(), 0);
  }

  std::uint64_t counter() const { return counter_; }

  void fill(std::span<std::uint64_t> out) {
    const std::size_t blocks = (out.size() + 1) / 2;
    if (blocks == 0) return;
    std::vector<std::uint64_t> in(blocks * 2);
    for (std::size_t b = 0; b < blocks; ++b) {
      in[2 * b] = counter_++;
      in[2 * b + 1] = 0;
    }
    std::vector<std::uint64_t> buf(blocks * 2);
    int len = 0;
    if (EVP_EncryptUpdate(ctx_.get(),
                          reinterpret_cast<unsigned char*>(buf.data()), &len,
                          reinterpret_cast<const unsigned char*>(in.data()),
                          static_cast<int>(blocks * 16)) != 1) {
      throw Error("AES encryption failed");
    }
    std::copy_n(buf.begin(), out.size(), out.begin());
  }

  RingTensor draw(const Shape& shape, int width) {
    RingTensor t(shape, width);
    fill(t.raw());
    const auto m = t.mask();
    for (auto& w : t.raw()) w &= m;
    return t;
  }

  std::uint64_t next_word() {
    std::uint64_t w = 0;
    fill(std::span<std::uint64_t>(&w, 1));
    return w;
  }

 private:
  struct CtxFree {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxFree> ctx_;
  std::uint64_t counter_ = 0;
};

/// Pairwise seeds k_{01}, k_{12}, k_{20}. Party i holds k_{i,i+1} (its "next"
/// key) and k_{i-1,i} (its "prev" key).
struct PrfKeySet {
  std::array<Seed128, kParties> pair;  // pair[i] = k_{i,i+1}
  std::array<Seed128, kParties> own;   // private per-party seeds

  static PrfKeySet from_master(std::uint64_t master) {
    PrfKeySet k;
    for (int i = 0; i < kParties; ++i) {
      k.pair[i] = derive_seed(master, 0x100 + i);
      k.own[i] = derive_seed(master, 0x200 + i);
    }
    return k;
  }
};

class Party;

/// RAII phase label; nested scopes extend the path ("softmax/upcast").
class PhaseScope {
 public:
  PhaseScope(Party& p, const std::string& name);
  ~PhaseScope();
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  Party& party_;
  std::string saved_;
};

/// One computing party: identity, PRF streams and its view of the fabric.
/// All methods are confined to the party's own thread of control.
class Party {
 public:
  Party(int id, Fabric& fabric, const PrfKeySet& keys, bool debug)
      : id_(id),
        fabric_(&fabric),
        next_(keys.pair[id]),
        prev_(keys.pair[(id + kParties - 1) % kParties]),
        own_(keys.own[id]),
        debug_(debug) {}

  int id() const { return id_; }
  int next_id() const { return (id_ + 1) % kParties; }
  int prev_id() const { return (id_ + kParties - 1) % kParties; }
  bool debug() const { return debug_; }

  Prf& prf_next() { return next_; }
  Prf& prf_prev() { return prev_; }
  Prf& prf_own() { return own_; }
  Prf& prf_with(int peer) {
    QMPC_ENFORCE(peer != id_ && peer >= 0 && peer < kParties, "bad peer ",
                 peer);
    return peer == next_id() ? next_ : prev_;
  }

  void send(int to, const RingTensor& t) { fabric_->send(id_, to, pack(t)); }

  RingTensor recv(int from, const Shape& shape, int width) {
    return unpack(fabric_->recv(id_, from), shape, width);
  }

  // Marks the end of one communication round; every party must call it.
  void end_round() { fabric_->end_round(); }

  std::array<std::vector<std::uint64_t>, kParties> debug_exchange(
      std::vector<std::uint64_t> words) {
    return fabric_->debug_exchange(id_, std::move(words));
  }

  const std::string& phase() const { return phase_; }
  void set_phase(std::string p) {
    phase_ = std::move(p);
    fabric_->set_phase(id_, phase_);
  }

 private:
  int id_;
  Fabric* fabric_;
  Prf next_;
  Prf prev_;
  Prf own_;
  bool debug_;
  std::string phase_;
};

inline PhaseScope::PhaseScope(Party& p, const std::string& name)
    : party_(p), saved_(p.phase()) {
  party_.set_phase(saved_.empty() ? name : saved_ + "/" + name);
}

inline PhaseScope::~PhaseScope() { party_.set_phase(saved_); }

struct SessionOptions {
  std::uint64_t seed = 0x5eed;
  bool debug = false;
};

/// Owns the fabric and the three parties. `run` executes one SPMD program on
/// three threads and returns the per-party results. PRF counters and
/// communication statistics persist across runs.
class Session {
 public:
  explicit Session(SessionOptions opts = {})
      : opts_(opts),
        keys_(PrfKeySet::from_master(opts.seed)),
        client_(derive_seed(opts.seed, 0x300)) {
    for (int i = 0; i < kParties; ++i) {
      parties_[i] = std::make_unique<Party>(i, fabric_, keys_, opts.debug);
    }
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Randomness used by the input owner when secret-sharing inputs.
  Prf& client_rng() { return client_; }

  Fabric& fabric() { return fabric_; }
  CommStats stats() const { return fabric_.stats(); }
  void reset_stats() { fabric_.reset_stats(); }
  const SessionOptions& options() const { return opts_; }

  template <typename F>
  auto run(F&& fn) {
    using R = std::invoke_result_t<F&, Party&>;
    if (fabric_.aborted()) fabric_.reopen();
    std::array<std::exception_ptr, kParties> errors{};
    if constexpr (std::is_void_v<R>) {
      launch(fn, errors, [](int, auto&& f, Party& p) { f(p); });
      rethrow(errors);
    } else {
      std::array<std::optional<R>, kParties> results;
      launch(fn, errors, [&results](int i, auto&& f, Party& p) {
        results[i].emplace(f(p));
      });
      rethrow(errors);
      return std::array<R, kParties>{std::move(*results[0]),
                                     std::move(*results[1]),
                                     std::move(*results[2])};
    }
  }

 private:
  template <typename F, typename Body>
  void launch(F& fn, std::array<std::exception_ptr, kParties>& errors,
              Body&& body) {
    std::array<std::thread, kParties> threads;
    for (int i = 0; i < kParties; ++i) {
      threads[i] = std::thread([&, i] {
        try {
          body(i, fn, *parties_[i]);
        } catch (...) {
          errors[i] = std::current_exception();
          fabric_.abort();
        }
        parties_[i]->set_phase("");
      });
    }
    for (auto& t : threads) t.join();
  }

  // Prefer the root cause over the aborts it triggered in the other parties.
  static void rethrow(const std::array<std::exception_ptr, kParties>& errors) {
    std::exception_ptr abort_only;
    for (const auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const ProtocolAbort&) {
        if (!abort_only) abort_only = e;
      } catch (...) {
        std::rethrow_exception(e);
      }
    }
    if (abort_only) std::rethrow_exception(abort_only);
  }

  SessionOptions opts_;
  PrfKeySet keys_;
  Fabric fabric_;
  Prf client_;
  std::array<std::unique_ptr<Party>, kParties> parties_;
};

}  // namespace qmpc
