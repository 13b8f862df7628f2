#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ectn/model.hpp"
#include "ectn/tensor.hpp"

namespace ectn {

/// Train/validation/test proportions (Ω : Ψ : Φ).
struct Ratios {
  double train = 0.0;
  double validation = 0.0;
  double test = 0.0;
};

/// Disjoint partition of a tensor's entry positions.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  Ratios ratios;

  friend bool operator==(const DatasetSplit& x, const DatasetSplit& y) {
    return x.train == y.train && x.validation == y.validation && x.test == y.test && x.seed == y.seed;
  }
};

struct ParsedLog {
  Dims dims;
  std::vector<Entry> entries;
  std::size_t skipped_sentinels = 0;
  bool dims_inferred = true;
};

/// Reads "user service time value" quadruples. Blank lines and lines starting
/// with '#' are ignored; negative values mark missing measurements and are
/// skipped. Dims are max index + 1 per mode unless `dims_override` is given.
/// Throws MalformedLine (with the 1-based line number) on bad records.
ParsedLog parse_qos_log(std::istream& in, std::optional<Dims> dims_override = std::nullopt);

/// Writes entries in the format parse_qos_log accepts, values in shortest
/// round-trip form.
void write_qos_log(std::span<const Entry> entries, std::ostream& out);

/// Uniformly random partition: |Ω| = ⌊ω·n⌋, |Ψ| = ⌊ψ·n⌋, Φ takes the rest.
/// Throws BadRatios unless ratios are nonnegative and sum to 1 (±1e-9).
DatasetSplit split(const ObservedTensor& t, Ratios ratios, std::uint64_t seed);

/// Splits with seeds base_seed, base_seed + 1, ...
std::vector<DatasetSplit> repeated_splits(const ObservedTensor& t, Ratios ratios, std::uint64_t base_seed,
                                          std::size_t count);

/// Text manifest of a split, one position per line per section.
void write_split_manifest(const DatasetSplit& s, std::ostream& out);
DatasetSplit read_split_manifest(std::istream& in);

struct SyntheticSpec {
  Dims dims{20, 30, 10};
  Index rank = 2;
  Index expansion = 2;
  double density = 0.2;
  double noise_sigma = 0.0;
  double bias_scale = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  ObservedTensor tensor;
  EctnModeld truth;
};

/// Draws a nonnegative ground-truth model (factors uniform in (0, 1], biases
/// uniform in (0, bias_scale]), samples ⌊density·|I||J||K|⌋ distinct
/// coordinates and sets each value to max(0, ŷ + σ·N(0,1)).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace ectn
