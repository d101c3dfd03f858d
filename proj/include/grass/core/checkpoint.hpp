#pragma once

#include "grass/core/parameter_store.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace grass {

using Json = nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, const std::string& field, const std::string& what)
      : std::runtime_error(path + ": " + field + ": " + what), path_(path), field_(field) {}
  const std::string& path() const { return path_; }
  const std::string& field() const { return field_; }

 private:
  std::string path_;
  std::string field_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Doubles as little-endian IEEE-754 bytes, base64 encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;
  ParameterStore store;
  bool has_optimizer_state = false;
  Json meta = Json::object();
};

Json checkpoint_to_json(const std::string& kind, const ParameterStore& store, bool include_optimizer_state,
                        const Json& meta = Json::object());
Checkpoint checkpoint_from_json(const Json& doc, const std::string& path = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const ParameterStore& store,
                     bool include_optimizer_state = true, const Json& meta = Json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);

}  // namespace grass
