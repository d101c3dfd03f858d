#include "grass/core/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace grass {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

Matrix matrix_from_b64(const std::string& text, int rows, int cols, const std::string& path,
                       const std::string& field) {
  std::vector<double> vals;
  try {
    vals = decode_doubles(text);
  } catch (const std::exception& e) {
    throw FormatError(path, field, e.what());
  }
  if (vals.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw FormatError(path, field, "array length does not match shape");
  }
  return Eigen::Map<Matrix>(vals.data(), rows, cols);
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t n = bytes[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw std::invalid_argument("misplaced base64 padding");
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw std::invalid_argument("misplaced base64 padding");
        v[k] = decode_char(c);
        if (v[k] < 0) throw std::invalid_argument("invalid base64 character");
      }
    }
    const std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n & 0xff));
  }
  return out;
}

std::string encode_doubles(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(bytes.data() + 8 * i, &bits, 8);
  }
  return base64_encode(bytes);
}

std::vector<double> decode_doubles(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw std::invalid_argument("byte count is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little(bits));
  }
  return out;
}

Json checkpoint_to_json(const std::string& kind, const ParameterStore& store, bool include_optimizer_state,
                        const Json& meta) {
  Json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["kind"] = kind;
  Json tensors = Json::array();
  Json arrays = Json::object();
  Json adam_m = Json::object();
  Json adam_v = Json::object();
  bool has_moments = false;
  for (const auto& e : store.entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}});
    arrays[e.name] = encode_doubles(e.value.values());
    if (include_optimizer_state && e.adam_m.size() > 0) {
      has_moments = true;
      adam_m[e.name] = encode_doubles({e.adam_m.data(), static_cast<std::size_t>(e.adam_m.size())});
      adam_v[e.name] = encode_doubles({e.adam_v.data(), static_cast<std::size_t>(e.adam_v.size())});
    }
  }
  doc["tensors"] = std::move(tensors);
  doc["optimizer"] = {{"state_included", include_optimizer_state && has_moments},
                      {"step_count", store.step_count}};
  doc["arrays"] = std::move(arrays);
  if (include_optimizer_state && has_moments) {
    doc["adam_m"] = std::move(adam_m);
    doc["adam_v"] = std::move(adam_v);
  }
  doc["meta"] = meta;
  return doc;
}

Checkpoint checkpoint_from_json(const Json& doc, const std::string& path) {
  auto require = [&](const Json& j, const char* key, const std::string& field) -> const Json& {
    if (!j.is_object() || !j.contains(key)) throw FormatError(path, field, "missing field");
    return j.at(key);
  };
  Checkpoint ck;
  const Json& version = require(doc, "format_version", "format_version");
  if (!version.is_number_integer() || version.get<int>() != kCheckpointVersion) {
    throw FormatError(path, "format_version", "unsupported checkpoint version");
  }
  ck.kind = require(doc, "kind", "kind").get<std::string>();
  const Json& tensors = require(doc, "tensors", "tensors");
  const Json& arrays = require(doc, "arrays", "arrays");
  const Json& opt = require(doc, "optimizer", "optimizer");
  ck.has_optimizer_state = require(opt, "state_included", "optimizer.state_included").get<bool>();
  ck.store.step_count = require(opt, "step_count", "optimizer.step_count").get<std::int64_t>();
  if (doc.contains("meta")) ck.meta = doc.at("meta");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string field = "tensors[" + std::to_string(i) + "]";
    const auto name = require(tensors[i], "name", field + ".name").get<std::string>();
    const auto shape = require(tensors[i], "shape", field + ".shape").get<std::vector<int>>();
    Tensor t(shape);
    t.matrix() = matrix_from_b64(require(arrays, name.c_str(), "arrays." + name).get<std::string>(), t.rows(),
                                 t.cols(), path, "arrays." + name);
    ck.store.add(name, std::move(t));
    if (ck.has_optimizer_state && doc.contains("adam_m") && doc.at("adam_m").contains(name)) {
      auto& e = ck.store.at(name);
      e.adam_m = matrix_from_b64(doc.at("adam_m").at(name).get<std::string>(), e.value.rows(), e.value.cols(),
                                 path, "adam_m." + name);
      e.adam_v = matrix_from_b64(require(require(doc, "adam_v", "adam_v"), name.c_str(), "adam_v." + name)
                                     .get<std::string>(),
                                 e.value.rows(), e.value.cols(), path, "adam_v." + name);
    }
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const ParameterStore& store,
                     bool include_optimizer_state, const Json& meta) {
  write_json_file(path, checkpoint_to_json(kind, store, include_optimizer_state, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path), path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), "<file>", "cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string(), "<json>", e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError(path.string(), "<file>", "cannot open for writing");
  out << doc.dump(1) << '\n';
}

}  // namespace grass
