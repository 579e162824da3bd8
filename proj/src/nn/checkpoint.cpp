// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/checkpoint.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "srgdiff/error.hpp"
#include "srgdiff/tensor_io.hpp"

namespace srgdiff::nn {

namespace fs = std::filesystem;

namespace {

std::string file_name_for(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '.';
  return out + ".tns";
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

struct Entry {
  std::string shape;
  std::string file;
  bool frozen = false;
};

struct Manifest {
  CheckpointMeta meta;
  std::unordered_map<std::string, Entry> params;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IntegrityError("checkpoint manifest missing in " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader)
    throw IntegrityError("checkpoint version mismatch: expected '" + std::string(kCheckpointHeader) + "', got '" +
                         line + "'");
  Manifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f[0] == "meta" && f.size() == 3) {
      m.meta[f[1]] = f[2];
    } else if (f[0] == "param" && f.size() == 5) {
      m.params[f[1]] = Entry{f[2], f[3], f[4] == "1"};
    } else {
      throw IntegrityError("malformed checkpoint manifest line: " + line);
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParamStore& store, const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
  out << kCheckpointHeader << '\n';
  for (const auto& [k, v] : meta) out << "meta\t" << k << '\t' << v << '\n';
  for (const auto& p : store.params()) {
    const std::string file = file_name_for(p->name);
    io::write_tensor(dir / file, p->value);
    out << "param\t" << p->name << '\t' << shape_text(p->value.shape()) << '\t' << file << '\t'
        << (p->frozen ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing checkpoint manifest in " + dir.string());
}

CheckpointMeta load_checkpoint(const fs::path& dir, ParamStore& store) {
  Manifest m = read_manifest(dir);
  for (const auto& p : store.params()) {
    auto it = m.params.find(p->name);
    if (it == m.params.end()) throw IntegrityError("checkpoint has no entry for parameter '" + p->name + "'");
    if (it->second.shape != shape_text(p->value.shape()))
      throw IntegrityError("checkpoint shape mismatch for parameter '" + p->name + "': " + it->second.shape +
                           " vs " + shape_text(p->value.shape()));
    const fs::path file = dir / it->second.file;
    if (!fs::exists(file))
      throw IntegrityError("checkpoint tensor file missing for parameter '" + p->name + "'");
    Tensor t = io::read_tensor(file);
    if (t.size() != p->value.size())
      throw IntegrityError("checkpoint tensor size mismatch for parameter '" + p->name + "'");
    p->value = t.reshaped(p->value.shape());
    p->frozen = it->second.frozen;
  }
  return m.meta;
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) { return read_manifest(dir).meta; }

}  // namespace srgdiff::nn
