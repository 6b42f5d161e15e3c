#include "ddg/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ddg/serialize.hpp"

namespace ddg {

namespace {

constexpr char kMagic[] = "DDGC";
constexpr std::uint32_t kVersion = 1;

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  ByteWriter w(out);
  w.bytes(kMagic);
  w.u32(kVersion);
  auto entries = params.named();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, m] : entries) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(m->rows));
    w.u32(static_cast<std::uint32_t>(m->cols));
    for (double v : m->data) {
      w.f64(v);
    }
  }
}

}  // namespace

std::string checkpoint_bytes(const ModelParams& params) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(params, out);
  return out.str();
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("save_checkpoint: cannot open " + path);
  }
  write_checkpoint(params, out);
  if (!out) {
    throw IoError("save_checkpoint: write failed for " + path);
  }
}

void load_checkpoint(const std::string& path, ModelParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("load_checkpoint: cannot open " + path);
  }
  ByteReader r(in);
  try {
    if (r.bytes(4, "magic") != kMagic) {
      throw CheckpointError("load_checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
      throw CheckpointError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    auto entries = params.named();
    const std::uint32_t count = r.u32("entry count");
    if (count != entries.size()) {
      throw CheckpointError("load_checkpoint: expected " + std::to_string(entries.size()) +
                            " parameters, file has " + std::to_string(count));
    }
    for (auto& [name, m] : entries) {
      const std::uint32_t name_len = r.u32("name length");
      const std::string got = r.bytes(name_len, "name");
      if (got != name) {
        throw CheckpointError("load_checkpoint: expected parameter '" + name + "', found '" +
                              got + "'");
      }
      const std::uint32_t rows = r.u32("rows");
      const std::uint32_t cols = r.u32("cols");
      if (rows != static_cast<std::uint32_t>(m->rows) ||
          cols != static_cast<std::uint32_t>(m->cols)) {
        throw CheckpointError("load_checkpoint: shape mismatch for '" + name + "'");
      }
      for (double& v : m->data) {
        v = r.f64("values");
      }
    }
  } catch (const FormatError& e) {
    // Truncation and similar structural damage count as checkpoint mismatch.
    throw CheckpointError(std::string("load_checkpoint: ") + e.what());
  }
}

}  // namespace ddg
