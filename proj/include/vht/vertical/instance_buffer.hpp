#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vht/tree/binary_io.hpp"
#include "vht/tree/instance.hpp"

namespace vht::vertical {

inline std::vector<unsigned char> encode_instance(const Instance& inst) {
  BinaryWriter w;
  w.put<std::uint8_t>(static_cast<std::uint8_t>((inst.is_sparse() ? 1 : 0) | (inst.is_labeled() ? 2 : 0)));
  w.put<std::uint32_t>(inst.is_labeled() ? inst.class_index() : 0);
  w.put<double>(inst.weight());
  w.put<std::uint64_t>(inst.width());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(inst.num_present()));
  if (inst.is_sparse()) {
    for (auto id : inst.raw_ids()) w.put<std::uint32_t>(id);
  }
  for (double v : inst.raw_values()) w.put<double>(v);
  return w.take();
}

inline Instance decode_instance(BinaryReader& r) {
  const auto flags = r.get<std::uint8_t>();
  const auto label = r.get<std::uint32_t>();
  const auto weight = r.get<double>();
  const auto width = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  const std::optional<ClassIndex> lab = (flags & 2) ? std::optional<ClassIndex>(label) : std::nullopt;
  if (flags & 1) {
    std::vector<AttributeId> ids(count);
    for (auto& id : ids) id = r.get<std::uint32_t>();
    std::vector<Instance::Entry> entries(count);
    for (std::uint32_t i = 0; i < count; ++i) entries[i] = {ids[i], r.get<double>()};
    return Instance::sparse(std::move(entries), width, lab, weight);
  }
  std::vector<double> values(count);
  for (auto& v : values) v = r.get<double>();
  return Instance::dense(std::move(values), lab, weight);
}

/// Bounded FIFO of instances held while a split decision is pending. Keeps
/// records in memory, or as length-prefixed records in `spill_file`.
class InstanceBuffer {
 public:
  explicit InstanceBuffer(std::size_t capacity, std::optional<std::filesystem::path> spill_file = std::nullopt)
      : capacity_(capacity), spill_(std::move(spill_file)) {}

  InstanceBuffer(InstanceBuffer&&) = default;
  InstanceBuffer& operator=(InstanceBuffer&&) = default;
  ~InstanceBuffer() { remove_file(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool full() const { return size_ >= capacity_; }
  bool spills() const { return spill_.has_value(); }

  /// Appends unless full; returns whether the instance was kept.
  bool push(const Instance& inst) {
    if (full()) return false;
    if (spill_) {
      if (!out_) {
        out_.emplace(*spill_, std::ios::binary | std::ios::trunc);
        if (!*out_) throw std::runtime_error("cannot open spill file " + spill_->string());
      }
      const auto bytes = encode_instance(inst);
      BinaryWriter len;
      len.put<std::uint32_t>(static_cast<std::uint32_t>(bytes.size()));
      out_->write(reinterpret_cast<const char*>(len.bytes().data()), 4);
      out_->write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!*out_) throw std::runtime_error("write to spill file failed");
    } else {
      memory_.push_back(inst);
    }
    ++size_;
    return true;
  }

  /// Calls fn on every held instance in arrival order, then empties the buffer.
  template <typename Fn>
  void drain(Fn&& fn) {
    if (spill_ && out_) {
      out_->close();
      out_.reset();
      std::ifstream in(*spill_, std::ios::binary);
      std::vector<unsigned char> record;
      for (std::size_t i = 0; i < size_; ++i) {
        unsigned char len_raw[4];
        if (!in.read(reinterpret_cast<char*>(len_raw), 4)) throw FormatError("spill file truncated");
        BinaryReader lr(len_raw, 4);
        record.resize(lr.get<std::uint32_t>());
        if (!in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()))) {
          throw FormatError("spill file truncated");
        }
        BinaryReader r(record);
        fn(decode_instance(r));
      }
    } else {
      for (auto& inst : memory_) fn(std::move(inst));
    }
    clear();
  }

  void clear() {
    memory_.clear();
    size_ = 0;
    remove_file();
  }

 private:
  void remove_file() {
    if (out_) {
      out_->close();
      out_.reset();
    }
    if (spill_) {
      std::error_code ec;
      std::filesystem::remove(*spill_, ec);
    }
  }

  std::size_t capacity_;
  std::optional<std::filesystem::path> spill_;
  std::optional<std::ofstream> out_;
  std::vector<Instance> memory_;
  std::size_t size_ = 0;
};

}  // namespace vht::vertical
