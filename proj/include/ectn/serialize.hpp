#pragma once

#include <filesystem>
#include <iosfwd>

#include "ectn/model.hpp"

namespace ectn {

// Binary layout (host byte order):
//   "ECTNMDL1" | int64 |I| |J| |K| R M | float64 A (i,m,r) | B (j,m,r) | C (k,r) | d | e | f
// Loading reproduces every parameter bit for bit.
void save_model(const EctnModeld& model, std::ostream& out);
EctnModeld load_model(std::istream& in);

void save_model(const EctnModeld& model, const std::filesystem::path& path);
EctnModeld load_model(const std::filesystem::path& path);

}  // namespace ectn
