#include "medfpca/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "medfpca/errors.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

namespace {

using nlohmann::json;

json embed(const std::string& text) {
  if (text.empty()) return nullptr;
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;  // keep verbatim when not valid JSON
  }
}

}  // namespace

std::string file_hash_hex(const std::string& path) {
  const std::uint64_t h = fnv1a64_file(path);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void RunManifest::add_input(const std::string& path) {
  inputs.push_back({path, file_hash_hex(path)});
}

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, file_hash_hex(path)});
}

std::string RunManifest::to_json_string() const {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = embed(config_json);
  json in = json::array(), out = json::array();
  for (const auto& f : inputs)
    in.push_back({{"path", f.path}, {"hash", f.hash_hex}});
  for (const auto& f : outputs)
    out.push_back({{"path", f.path}, {"hash", f.hash_hex}});
  j["inputs"] = in;
  j["outputs"] = out;
  j["elapsed_seconds"] = elapsed_seconds;
  j["diagnostics"] = embed(diagnostics_json);
  j["notes"] = notes;
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << to_json_string() << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace medfpca
