#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ectn {

using Index = std::int64_t;

enum class Mode { User = 0, Service = 1, Time = 2 };

/// Tensor extents (|I|, |J|, |K|).
struct Dims {
  Index users = 0;
  Index services = 0;
  Index times = 0;

  Index operator[](Mode mode) const noexcept {
    switch (mode) {
      case Mode::User: return users;
      case Mode::Service: return services;
      case Mode::Time: return times;
    }
    return 0;
  }
  double volume() const noexcept {
    return static_cast<double>(users) * static_cast<double>(services) * static_cast<double>(times);
  }
  bool positive() const noexcept { return users > 0 && services > 0 && times > 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// One observed QoS measurement y_ijk.
struct Entry {
  Index i = 0;
  Index j = 0;
  Index k = 0;
  double value = 0.0;

  Index coord(Mode mode) const noexcept {
    switch (mode) {
      case Mode::User: return i;
      case Mode::Service: return j;
      case Mode::Time: return k;
    }
    return 0;
  }

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Incomplete third-order tensor in coordinate format.
///
/// Entries are immutable after build(). Each mode keeps a CSR-style index so
/// that slice(mode, x) returns the positions of every entry whose coordinate
/// in that mode equals x, i.e. the summation domains of the update rules.
class ObservedTensor {
 public:
  /// Validates and indexes raw entries. Throws Error with IndexOutOfRange,
  /// DuplicateCoordinate or NegativeValue; dims must be positive (InvalidConfig).
  static ObservedTensor build(Dims dims, std::vector<Entry> raw);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  const Entry& operator[](std::size_t position) const noexcept { return entries_[position]; }

  /// Entry positions with coordinate `index` along `mode`, in ascending order.
  std::span<const std::size_t> slice(Mode mode, Index index) const;

  /// |entries| / (|I|·|J|·|K|)
  double density() const noexcept { return static_cast<double>(entries_.size()) / dims_.volume(); }

 private:
  struct ModeIndex {
    std::vector<std::size_t> offsets;    // size dim + 1
    std::vector<std::size_t> positions;  // size |entries|
  };

  ObservedTensor() = default;
  static ModeIndex index_mode(std::span<const Entry> entries, Mode mode, Index extent);

  Dims dims_;
  std::vector<Entry> entries_;
  std::array<ModeIndex, 3> modes_;
};

inline double density(const ObservedTensor& t) noexcept { return t.density(); }

}  // namespace ectn
