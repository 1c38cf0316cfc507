// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mavis::model {

namespace {
constexpr char kMagic[6] = {'M', 'V', 'S', 'C', '1', '\n'};
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::pair<std::string, const ParamStore*>>& sections,
                     const nlohmann::json& config, const nlohmann::json& extra) {
  nlohmann::json header;
  header["kind"] = kind;
  header["version"] = 1;
  header["config"] = config;
  header["extra"] = extra;
  nlohmann::json jsecs = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, store] : sections) {
    nlohmann::json jsec;
    jsec["name"] = name;
    nlohmann::json jparams = nlohmann::json::array();
    for (const auto& p : store->params()) {
      nlohmann::json jp;
      jp["name"] = p->name;
      jp["shape"] = p->value.shape;
      jp["offset"] = offset;
      jp["numel"] = p->value.numel();
      offset += static_cast<uint64_t>(p->value.numel());
      jparams.push_back(std::move(jp));
    }
    jsec["params"] = std::move(jparams);
    jsecs.push_back(std::move(jsec));
  }
  header["sections"] = std::move(jsecs);

  std::string hs = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, store] : sections) {
    for (const auto& p : store->params()) {
      out.write(reinterpret_cast<const char*>(p->value.data.data()),
                static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    }
  }
  if (!out) throw std::runtime_error("short write on checkpoint: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint: " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw UserError("bad checkpoint magic in " + path.string());
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw UserError("truncated checkpoint header in " + path.string());
  nlohmann::json header = nlohmann::json::parse(hs);

  CheckpointData out;
  out.kind = header.at("kind").get<std::string>();
  out.config = header.at("config");
  out.extra = header.at("extra");
  for (const auto& jsec : header.at("sections")) {
    std::string sname = jsec.at("name").get<std::string>();
    auto& vec = out.sections[sname];
    for (const auto& jp : jsec.at("params")) {
      std::string pname = jp.at("name").get<std::string>();
      std::vector<int64_t> shape = jp.at("shape").get<std::vector<int64_t>>();
      auto numel = jp.at("numel").get<int64_t>();
      Tensor t(shape);
      if (t.numel() != numel)
        throw UserError("checkpoint shape/numel mismatch for " + pname);
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
      if (!in) throw UserError("truncated checkpoint data at " + pname);
      vec.emplace_back(std::move(pname), std::move(t));
    }
  }
  return out;
}

void apply_section(ParamStore& store, const CheckpointData& ckpt, const std::string& section) {
  auto it = ckpt.sections.find(section);
  if (it == ckpt.sections.end())
    throw UserError("checkpoint is missing section '" + section + "'");
  const auto& entries = it->second;
  if (entries.size() != store.params().size())
    throw UserError(strfmt("checkpoint section '%s' has %zu parameters, model expects %zu",
                           section.c_str(), entries.size(), store.params().size()));
  for (size_t i = 0; i < entries.size(); ++i) {
    Param& p = *store.params()[i];
    const auto& [name, tensor] = entries[i];
    if (p.name != name || p.value.shape != tensor.shape)
      throw UserError(strfmt("checkpoint section '%s' parameter %zu: stored '%s'%s vs model '%s'%s",
                             section.c_str(), i, name.c_str(),
                             tensor.shape_str().c_str(), p.name.c_str(),
                             p.value.shape_str().c_str()));
    p.value.data = tensor.data;
  }
}

void require_config_match(const nlohmann::json& stored, const nlohmann::json& expected,
                          const std::string& what) {
  if (stored != expected)
    throw UserError("checkpoint config mismatch for " + what + ": stored " + stored.dump() +
                    " vs expected " + expected.dump());
}

std::string config_fingerprint(const nlohmann::json& config) {
  return strfmt("%08llx", (unsigned long long)(fnv1a64(config.dump()) & 0xffffffffull));
}

}  // namespace mavis::model
