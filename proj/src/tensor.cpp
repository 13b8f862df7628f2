#include "ectn/tensor.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "ectn/error.hpp"

namespace ectn {

namespace {

std::string describe(const Entry& e) {
  return "(" + std::to_string(e.i) + "," + std::to_string(e.j) + "," + std::to_string(e.k) + ")";
}

}  // namespace

ObservedTensor ObservedTensor::build(Dims dims, std::vector<Entry> raw) {
  if (!dims.positive()) throw Error(ErrorCode::InvalidConfig, "tensor dims must be positive");

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(raw.size());
  const auto J = static_cast<std::uint64_t>(dims.services);
  const auto K = static_cast<std::uint64_t>(dims.times);
  for (const Entry& e : raw) {
    if (e.i < 0 || e.i >= dims.users || e.j < 0 || e.j >= dims.services || e.k < 0 ||
        e.k >= dims.times)
      throw Error(ErrorCode::IndexOutOfRange, "entry " + describe(e) + " outside dims");
    if (!(e.value >= 0.0) || !std::isfinite(e.value))
      throw Error(ErrorCode::NegativeValue, "entry " + describe(e) + " has value " + std::to_string(e.value));
    const std::uint64_t key = (static_cast<std::uint64_t>(e.i) * J + static_cast<std::uint64_t>(e.j)) * K +
                              static_cast<std::uint64_t>(e.k);
    if (!seen.insert(key).second)
      throw Error(ErrorCode::DuplicateCoordinate, "entry " + describe(e) + " appears twice");
  }

  ObservedTensor t;
  t.dims_ = dims;
  t.entries_ = std::move(raw);
  t.modes_[0] = index_mode(t.entries_, Mode::User, dims.users);
  t.modes_[1] = index_mode(t.entries_, Mode::Service, dims.services);
  t.modes_[2] = index_mode(t.entries_, Mode::Time, dims.times);
  return t;
}

ObservedTensor::ModeIndex ObservedTensor::index_mode(std::span<const Entry> entries, Mode mode,
                                                     Index extent) {
  // counting sort keeps positions ascending within each bucket
  ModeIndex idx;
  idx.offsets.assign(static_cast<std::size_t>(extent) + 1, 0);
  for (const Entry& e : entries) ++idx.offsets[static_cast<std::size_t>(e.coord(mode)) + 1];
  for (std::size_t x = 1; x < idx.offsets.size(); ++x) idx.offsets[x] += idx.offsets[x - 1];

  idx.positions.resize(entries.size());
  std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  for (std::size_t p = 0; p < entries.size(); ++p)
    idx.positions[cursor[static_cast<std::size_t>(entries[p].coord(mode))]++] = p;
  return idx;
}

std::span<const std::size_t> ObservedTensor::slice(Mode mode, Index index) const {
  if (index < 0 || index >= dims_[mode])
    throw Error(ErrorCode::IndexOutOfRange, "slice index " + std::to_string(index) + " outside mode extent");
  const ModeIndex& idx = modes_[static_cast<std::size_t>(mode)];
  const auto x = static_cast<std::size_t>(index);
  return std::span<const std::size_t>(idx.positions).subspan(idx.offsets[x], idx.offsets[x + 1] - idx.offsets[x]);
}

}  // namespace ectn
