#include "ectn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ectn/error.hpp"
#include "ectn/random.hpp"

namespace ectn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    pos = line.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    const auto end = line.find_first_of(" \t\r", pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), last, out);
  return ec == std::errc() && ptr == last;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

std::size_t floor_count(double ratio, std::size_t n) {
  // the epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

ParsedLog parse_qos_log(std::istream& in, std::optional<Dims> dims_override) {
  ParsedLog log;
  Dims seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = fields(line);
    if (f.size() != 4) malformed(line_no, "expected 4 fields, got " + std::to_string(f.size()));
    Entry e;
    if (!parse_number(f[0], e.i) || !parse_number(f[1], e.j) || !parse_number(f[2], e.k))
      malformed(line_no, "non-integer index");
    if (!parse_number(f[3], e.value) || !std::isfinite(e.value)) malformed(line_no, "non-numeric value");
    if (e.i < 0 || e.j < 0 || e.k < 0) malformed(line_no, "negative index");
    if (e.value < 0.0) {
      ++log.skipped_sentinels;
      continue;
    }
    seen.users = std::max(seen.users, e.i + 1);
    seen.services = std::max(seen.services, e.j + 1);
    seen.times = std::max(seen.times, e.k + 1);
    log.entries.push_back(e);
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failure");
  if (dims_override) {
    log.dims = *dims_override;
    log.dims_inferred = false;
  } else {
    log.dims = seen;
  }
  return log;
}

void write_qos_log(std::span<const Entry> entries, std::ostream& out) {
  for (const Entry& e : entries) {
    out << e.i << ' ' << e.j << ' ' << e.k << ' ';
    write_double(out, e.value);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

DatasetSplit split(const ObservedTensor& t, Ratios ratios, std::uint64_t seed) {
  if (!(ratios.train >= 0.0) || !(ratios.validation >= 0.0) || !(ratios.test >= 0.0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw Error(ErrorCode::BadRatios, "ratios must be nonnegative and sum to 1");

  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  for (std::size_t p = 0; p < n; ++p) order[p] = p;
  Rng rng(seed);
  for (std::size_t p = n; p > 1; --p) std::swap(order[p - 1], order[uniform_below(rng, p)]);

  const std::size_t n_train = std::min(n, floor_count(ratios.train, n));
  const std::size_t n_val = std::min(n - n_train, floor_count(ratios.validation, n));

  DatasetSplit s;
  s.seed = seed;
  s.ratios = ratios;
  const auto mid = order.begin() + static_cast<std::ptrdiff_t>(n_train);
  const auto tail = mid + static_cast<std::ptrdiff_t>(n_val);
  s.train.assign(order.begin(), mid);
  s.validation.assign(mid, tail);
  s.test.assign(tail, order.end());
  return s;
}

std::vector<DatasetSplit> repeated_splits(const ObservedTensor& t, Ratios ratios, std::uint64_t base_seed,
                                          std::size_t count) {
  if (count < 1) throw Error(ErrorCode::InvalidConfig, "repeat count must be >= 1");
  std::vector<DatasetSplit> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) out.push_back(split(t, ratios, base_seed + r));
  return out;
}

void write_split_manifest(const DatasetSplit& s, std::ostream& out) {
  out << "# ectn split manifest\n";
  out << "seed " << s.seed << '\n';
  out << "ratios ";
  write_double(out, s.ratios.train);
  out << ' ';
  write_double(out, s.ratios.validation);
  out << ' ';
  write_double(out, s.ratios.test);
  out << '\n';
  const auto section = [&](const char* name, const std::vector<std::size_t>& ps) {
    out << '[' << name << "] " << ps.size() << '\n';
    for (std::size_t p : ps) out << p << '\n';
  };
  section("train", s.train);
  section("validation", s.validation);
  section("test", s.test);
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

DatasetSplit read_split_manifest(std::istream& in) {
  DatasetSplit s;
  std::vector<std::size_t>* current = nullptr;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = fields(line);
    if (f[0] == "seed" && f.size() == 2) {
      if (!parse_number(f[1], s.seed)) malformed(line_no, "bad seed");
    } else if (f[0] == "ratios" && f.size() == 4) {
      if (!parse_number(f[1], s.ratios.train) || !parse_number(f[2], s.ratios.validation) ||
          !parse_number(f[3], s.ratios.test))
        malformed(line_no, "bad ratios");
    } else if (f[0] == "[train]") {
      current = &s.train;
    } else if (f[0] == "[validation]") {
      current = &s.validation;
    } else if (f[0] == "[test]") {
      current = &s.test;
    } else {
      std::size_t p = 0;
      if (current == nullptr || f.size() != 1 || !parse_number(f[0], p)) malformed(line_no, "unexpected record");
      current->push_back(p);
    }
  }
  return s;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (!spec.dims.positive()) throw Error(ErrorCode::InvalidConfig, "synthetic dims must be positive");
  if (!(spec.density > 0.0)) throw Error(ErrorCode::InvalidConfig, "density must be > 0");
  if (spec.density > 1.0) throw Error(ErrorCode::DensityTooHigh, "density exceeds 1");
  if (!(spec.noise_sigma >= 0.0) || !(spec.bias_scale >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "noise_sigma and bias_scale must be >= 0");

  EctnModeld truth = init_random<double>(spec.dims, ModelConfig{spec.rank, spec.expansion, 1.0, spec.seed});
  truth.d() *= spec.bias_scale;
  truth.e() *= spec.bias_scale;
  truth.f() *= spec.bias_scale;

  const auto total = static_cast<std::uint64_t>(spec.dims.users) * static_cast<std::uint64_t>(spec.dims.services) *
                     static_cast<std::uint64_t>(spec.dims.times);
  const auto wanted = static_cast<std::uint64_t>(std::floor(spec.density * static_cast<double>(total) + 1e-9));
  if (wanted > total) throw Error(ErrorCode::DensityTooHigh, "requested entries exceed tensor size");

  // selection sampling: each linear index kept with probability remaining/left
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Entry> entries;
  entries.reserve(wanted);
  const auto JK = static_cast<std::uint64_t>(spec.dims.services) * static_cast<std::uint64_t>(spec.dims.times);
  const auto K = static_cast<std::uint64_t>(spec.dims.times);
  std::uint64_t remaining = wanted;
  for (std::uint64_t x = 0; x < total && remaining > 0; ++x) {
    if (uniform_below(rng, total - x) >= remaining) continue;
    --remaining;
    Entry e;
    e.i = static_cast<Index>(x / JK);
    e.j = static_cast<Index>((x % JK) / K);
    e.k = static_cast<Index>(x % K);
    double v = truth.predict_unchecked(e.i, e.j, e.k);
    if (spec.noise_sigma > 0.0) v = std::max(0.0, v + spec.noise_sigma * standard_normal(rng));
    e.value = v;
    entries.push_back(e);
  }
  return SyntheticData{ObservedTensor::build(spec.dims, std::move(entries)), std::move(truth)};
}

}  // namespace ectn
