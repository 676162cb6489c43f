// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Named trainable parameters, deterministic initialization, and the EVIDR1
// checkpoint format: magic "EVIDR1", little-endian entries of (u32 name
// length, name bytes, u8 rank, u32 per dimension, f32 row-major data),
// sorted by name, and a trailing u32 CRC32 of everything after the magic.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/tape.hpp"

namespace evidr {

enum class InitKind { Xavier, Zero, One };

template <typename T>
struct ParameterStore {
  std::uint64_t rng_seed = 0;
  std::map<std::string, Tensor<T>> params;  // sorted iteration by construction
  std::map<std::string, Tensor<T>> grads;

  void add(const std::string& name, int rows, int cols, InitKind kind) {
    if (params.count(name)) throw model_error("duplicate parameter: " + name);
    Tensor<T> t(rows, cols);
    switch (kind) {
      case InitKind::Xavier: {
        std::mt19937_64 rng(rng_seed * kSeedMix ^ fnv1a64(name));
        double limit = std::sqrt(6.0 / (rows + cols));
        for (T& v : t.data) v = static_cast<T>(uniform_range(rng, -limit, limit));
        break;
      }
      case InitKind::Zero:
        break;
      case InitKind::One:
        for (T& v : t.data) v = T(1);
        break;
    }
    params.emplace(name, std::move(t));
  }

  const Tensor<T>& get(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw model_error("unknown parameter: " + name);
    return it->second;
  }
  Tensor<T>& get(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw model_error("unknown parameter: " + name);
    return it->second;
  }

  Tensor<T>& grad(const std::string& name) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      const Tensor<T>& p = get(name);
      it = grads.emplace(name, Tensor<T>(p.rows, p.cols)).first;
    }
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, g] : grads) std::fill(g.data.begin(), g.data.end(), T(0));
  }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p.size();
    return n;
  }
};

/// Per-forward binding of store parameters to tape leaves. Each parameter
/// becomes one leaf on first use; after backward, accumulate_grads folds the
/// tape gradients back into the store in sorted-name order.
template <typename T>
struct BoundParams {
  std::map<std::string, int> ids;

  int leaf(Tape<T>& tape, const ParameterStore<T>& store, const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    int id = tape.leaf(store.get(name), /*requires_grad=*/true);
    ids.emplace(name, id);
    return id;
  }

  void accumulate_grads(const Tape<T>& tape, ParameterStore<T>& store) const {
    for (const auto& [name, id] : ids) {
      const Tensor<T>* g = tape.grad(id);
      if (!g) continue;
      Tensor<T>& acc = store.grad(name);
      for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += g->data[i];
    }
  }
};

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kCkptMagic[6] = {'E', 'V', 'I', 'D', 'R', '1'};

template <typename U>
void put_le(std::vector<unsigned char>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<unsigned char>& buf, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_le<std::uint32_t>(buf, bits);
}

template <typename U>
U get_le(const std::vector<unsigned char>& buf, std::size_t& pos) {
  if (pos + sizeof(U) > buf.size()) throw checkpoint_error("truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(buf[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

inline float get_f32(const std::vector<unsigned char>& buf, std::size_t& pos) {
  std::uint32_t bits = get_le<std::uint32_t>(buf, pos);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store) {
  std::vector<unsigned char> payload;
  for (const auto& [name, p] : store.params) {
    detail::put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(name.size()));
    payload.insert(payload.end(), name.begin(), name.end());
    payload.push_back(2);  // rank
    detail::put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(p.rows));
    detail::put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(p.cols));
    for (T v : p.data) detail::put_f32(payload, static_cast<float>(v));
  }
  std::uint32_t crc = crc32(payload.data(), payload.size());

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw file_error("cannot write checkpoint: " + path);
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    std::vector<unsigned char> tail;
    detail::put_le<std::uint32_t>(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
    if (!out) throw file_error("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

/// Replaces the store's parameters with the checkpoint contents. Shape and
/// name validation against a model layout is the caller's job.
template <typename T>
void load_checkpoint(const std::string& path, ParameterStore<T>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw file_error("cannot open checkpoint: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(detail::kCkptMagic) + 4)
    throw checkpoint_error("checkpoint too small: " + path);
  if (std::memcmp(bytes.data(), detail::kCkptMagic, sizeof(detail::kCkptMagic)) != 0)
    throw checkpoint_error("bad checkpoint magic in " + path);

  std::size_t payload_end = bytes.size() - 4;
  std::size_t pos = payload_end;
  std::uint32_t stored_crc = detail::get_le<std::uint32_t>(bytes, pos);
  std::uint32_t actual_crc = crc32(bytes.data() + sizeof(detail::kCkptMagic),
                                   payload_end - sizeof(detail::kCkptMagic));
  if (stored_crc != actual_crc)
    throw checkpoint_error("checkpoint CRC mismatch in " + path +
                           " (file corrupt or truncated)");

  store.params.clear();
  store.grads.clear();
  pos = sizeof(detail::kCkptMagic);
  while (pos < payload_end) {
    std::uint32_t name_len = detail::get_le<std::uint32_t>(bytes, pos);
    if (pos + name_len > payload_end) throw checkpoint_error("truncated checkpoint entry");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    if (pos >= payload_end) throw checkpoint_error("truncated checkpoint entry");
    std::uint8_t rank = bytes[pos++];
    if (rank < 1 || rank > 2) throw checkpoint_error("unsupported tensor rank in " + name);
    int rows = 1, cols = 1;
    if (rank == 1) {
      cols = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    } else {
      rows = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
      cols = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    }
    Tensor<T> t(rows, cols);
    for (T& v : t.data) v = static_cast<T>(detail::get_f32(bytes, pos));
    if (store.params.count(name)) throw checkpoint_error("duplicate entry: " + name);
    store.params.emplace(std::move(name), std::move(t));
  }
}

}  // namespace evidr
