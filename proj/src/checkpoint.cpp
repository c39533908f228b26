// Weight checkpoint container:
//
//   "ADLW" | u32 version | record*
//   record := u64 name_len | name (UTF-8) | u64 rank | u64 dims[rank] | f64 values[prod(dims)]
//
// All integers and floats little-endian. Records appear in declaration order.

#include <vector>

#include "adalase/error.hpp"
#include "adalase/io.hpp"
#include "adalase/network.hpp"

namespace adalase {

namespace {
constexpr std::string_view kMagic = "ADLW";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::string out;
  out.append(kMagic);
  io::put_u32le(out, kVersion);
  for (const Param* p : net.params()) {
    io::put_u64le(out, p->name.size());
    out.append(p->name);
    io::put_u64le(out, p->dims.size());
    for (auto d : p->dims) io::put_u64le(out, d);
    for (double v : p->value) io::put_f64le(out, v);
  }
  io::write_file_atomic(path, out);
}

void load_checkpoint(Network& net, const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes, "checkpoint " + path.string());
  if (r.take(4) != kMagic) throw FormatError("checkpoint: bad magic in " + path.string());
  const std::uint32_t version = r.u32le();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }

  auto params = net.params();
  std::vector<std::vector<double>> staged;
  staged.reserve(params.size());
  std::size_t i = 0;
  while (!r.done()) {
    const std::uint64_t name_len = r.u64le();
    const std::string name(r.take(name_len));
    if (i >= params.size()) {
      throw ShapeError("checkpoint has extra parameter '" + name + "'");
    }
    const Param& p = *params[i];
    if (name != p.name) {
      throw ShapeError("checkpoint parameter " + std::to_string(i) + " is '" + name +
                       "', network expects '" + p.name + "'");
    }
    const std::uint64_t rank = r.u64le();
    if (rank != p.dims.size()) throw ShapeError("checkpoint rank mismatch for '" + name + "'");
    for (std::size_t d = 0; d < rank; ++d) {
      if (r.u64le() != p.dims[d]) throw ShapeError("checkpoint dims mismatch for '" + name + "'");
    }
    std::vector<double> values(p.size());
    for (double& v : values) v = r.f64le();
    staged.push_back(std::move(values));
    ++i;
  }
  if (i != params.size()) {
    throw ShapeError("checkpoint has " + std::to_string(i) + " parameters, network expects " +
                     std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = std::move(staged[k]);
}

}  // namespace adalase
