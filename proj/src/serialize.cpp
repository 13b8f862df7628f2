#include "ectn/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ectn {

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'C', 'T', 'N', 'M', 'D', 'L', '1'};

template <typename T>
void put(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
void get(std::istream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
  if (!in) throw Error(ErrorCode::Io, "truncated model dump");
}

}  // namespace

void save_model(const EctnModeld& model, std::ostream& out) {
  put(out, kMagic.data(), kMagic.size());
  const std::array<std::int64_t, 5> header = {model.dims().users, model.dims().services, model.dims().times,
                                              model.rank(), model.expansion()};
  put(out, header.data(), header.size());
  put(out, model.A().data(), static_cast<std::size_t>(model.A().size()));
  put(out, model.B().data(), static_cast<std::size_t>(model.B().size()));
  put(out, model.C().data(), static_cast<std::size_t>(model.C().size()));
  put(out, model.d().data(), static_cast<std::size_t>(model.d().size()));
  put(out, model.e().data(), static_cast<std::size_t>(model.e().size()));
  put(out, model.f().data(), static_cast<std::size_t>(model.f().size()));
  if (!out) throw Error(ErrorCode::Io, "model write failure");
}

EctnModeld load_model(std::istream& in) {
  std::array<char, 8> magic{};
  get(in, magic.data(), magic.size());
  if (magic != kMagic) throw Error(ErrorCode::Io, "not an ECTN model dump");
  std::array<std::int64_t, 5> h{};
  get(in, h.data(), h.size());
  EctnModeld model(Dims{h[0], h[1], h[2]}, h[3], h[4]);
  get(in, model.A().data(), static_cast<std::size_t>(model.A().size()));
  get(in, model.B().data(), static_cast<std::size_t>(model.B().size()));
  get(in, model.C().data(), static_cast<std::size_t>(model.C().size()));
  get(in, model.d().data(), static_cast<std::size_t>(model.d().size()));
  get(in, model.e().data(), static_cast<std::size_t>(model.e().size()));
  get(in, model.f().data(), static_cast<std::size_t>(model.f().size()));
  return model;
}

void save_model(const EctnModeld& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  save_model(model, out);
}

EctnModeld load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace ectn
