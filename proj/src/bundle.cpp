#include "vlmood/bundle.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace vlmood {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// EmbeddingMatrix

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), data_(std::move(values)) {
  if (data_.size() != rows * dim) {
    throw InvalidArgument("EmbeddingMatrix: " + std::to_string(data_.size()) +
                          " values do not fill a " + std::to_string(rows) + "x" +
                          std::to_string(dim) + " matrix");
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) throw InvalidArgument("EmbeddingMatrix::from_rows: no rows");
  const std::size_t dim = rows.front().size();
  std::vector<float> values;
  values.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw InvalidArgument("EmbeddingMatrix::from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(rows.size(), dim, std::move(values));
}

std::span<const float> EmbeddingMatrix::row(std::size_t r) const {
  if (r >= rows_) throw InvalidArgument("EmbeddingMatrix::row: index out of range");
  return std::span<const float>(data_).subspan(r * dim_, dim_);
}

std::span<float> EmbeddingMatrix::row(std::size_t r) {
  if (r >= rows_) throw InvalidArgument("EmbeddingMatrix::row: index out of range");
  return std::span<float>(data_).subspan(r * dim_, dim_);
}

bool bit_equal(const EmbeddingMatrix& a, const EmbeddingMatrix& b) noexcept {
  if (a.rows() != b.rows() || a.dim() != b.dim()) return false;
  const auto va = a.values();
  const auto vb = b.values();
  return va.empty() || std::memcmp(va.data(), vb.data(), va.size_bytes()) == 0;
}

// ---------------------------------------------------------------------------
// Errors

const char* to_string(BundleErrc code) noexcept {
  switch (code) {
    case BundleErrc::io: return "io";
    case BundleErrc::format: return "format";
    case BundleErrc::version: return "version";
    case BundleErrc::shape_mismatch: return "shape_mismatch";
    case BundleErrc::checksum: return "checksum";
    case BundleErrc::validation: return "validation";
  }
  return "unknown";
}

BundleError::BundleError(BundleErrc code, const std::string& what)
    : Error(std::string(to_string(code)) + " error: " + what), code_(code) {}

std::string Violation::describe() const {
  std::string out = matrix;
  if (row) out += " row " + std::to_string(*row);
  out += ": " + rule;
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_values(const std::string& name, const EmbeddingMatrix& m, bool reject_zero_rows,
                  std::vector<Violation>& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    bool finite = true;
    bool all_zero = true;
    for (float v : row) {
      if (!std::isfinite(v)) finite = false;
      if (v != 0.0f) all_zero = false;
    }
    if (!finite) {
      out.push_back({name, r, "non-finite value"});
    } else if (reject_zero_rows && all_zero) {
      out.push_back({name, r, "zero row"});
    }
  }
}

void check_embedding(const std::string& name, const EmbeddingMatrix& m, std::size_t dim,
                     bool allow_empty, std::vector<Violation>& out) {
  if (m.dim() == 0) {
    out.push_back({name, std::nullopt, "zero dimension"});
    return;
  }
  if (!allow_empty && m.rows() == 0) out.push_back({name, std::nullopt, "empty matrix"});
  if (m.dim() != dim) {
    out.push_back({name, std::nullopt,
                   "dim mismatch (" + std::to_string(m.dim()) + " vs " + std::to_string(dim) + ")"});
  }
  check_values(name, m, true, out);
}

void check_logits(const std::string& name, const EmbeddingMatrix& m, std::size_t rows,
                  std::size_t classes, std::vector<Violation>& out) {
  if (m.rows() != rows || m.dim() != classes) {
    out.push_back({name, std::nullopt,
                   "logit shape mismatch (" + std::to_string(m.rows()) + "x" +
                       std::to_string(m.dim()) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(classes) + ")"});
  }
  check_values(name, m, false, out);
}

}  // namespace

std::vector<Violation> validate_bundle(const Bundle& b) {
  std::vector<Violation> out;
  const std::size_t dim = b.id_images.dim();
  const std::size_t k = b.id_prompts.rows();

  check_embedding("id_images", b.id_images, dim, false, out);
  check_embedding("id_prompts", b.id_prompts, dim, false, out);
  check_embedding("ood_prompts", b.ood_prompts, dim, true, out);
  if (b.ood_images.empty()) out.push_back({"ood_images", std::nullopt, "no OOD datasets"});
  for (const auto& [name, m] : b.ood_images) {
    if (name.empty()) out.push_back({"ood_images", std::nullopt, "empty dataset name"});
    check_embedding("ood_images/" + name, m, dim, false, out);
  }

  if (b.id_labels) {
    const auto& labels = *b.id_labels;
    if (labels.size() != b.id_images.rows()) {
      out.push_back({"id_labels", std::nullopt,
                     "label count mismatch (" + std::to_string(labels.size()) + " labels, " +
                         std::to_string(b.id_images.rows()) + " images)"});
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::uint64_t>(labels[i]) >= k) {
        out.push_back({"id_labels", i, "label out of range"});
      }
    }
  }

  if (b.id_logits) {
    check_logits("id_logits", *b.id_logits, b.id_images.rows(), k, out);
    for (const auto& [name, imgs] : b.ood_images) {
      auto it = b.ood_logits.find(name);
      if (it == b.ood_logits.end()) {
        out.push_back({"ood_logits/" + name, std::nullopt, "missing logits for dataset"});
      } else {
        check_logits("ood_logits/" + name, it->second, imgs.rows(), k, out);
      }
    }
  }
  for (const auto& [name, m] : b.ood_logits) {
    if (!b.id_logits) {
      out.push_back({"ood_logits/" + name, std::nullopt, "ood logits without id logits"});
    } else if (!b.ood_images.contains(name)) {
      out.push_back({"ood_logits/" + name, std::nullopt, "logits for unknown dataset"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding, hashing

std::vector<std::byte> encode_f32(const EmbeddingMatrix& m) {
  const auto values = m.values();
  std::vector<std::byte> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<std::byte>(word & 0xFFu);
    out[4 * i + 1] = static_cast<std::byte>((word >> 8) & 0xFFu);
    out[4 * i + 2] = static_cast<std::byte>((word >> 16) & 0xFFu);
    out[4 * i + 3] = static_cast<std::byte>((word >> 24) & 0xFFu);
  }
  return out;
}

namespace {

std::vector<float> decode_f32(std::span<const std::byte> bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t word = std::to_integer<std::uint32_t>(bytes[4 * i]) |
                               (std::to_integer<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (std::to_integer<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (std::to_integer<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = std::bit_cast<float>(word);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::span<const std::byte> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("sha256: digest computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

struct Entry {
  std::string role;     // id_images, id_prompts, ood_prompts, ood_images, id_logits, ood_logits
  std::string dataset;  // OOD split name for per-split roles, else empty
  std::string file;
  const EmbeddingMatrix* matrix;
};

// Fixed serialization order; ood splits follow map (lexicographic) order.
std::vector<Entry> entries_of(const Bundle& b) {
  std::vector<Entry> out;
  out.push_back({"id_images", "", "id_images.f32", &b.id_images});
  out.push_back({"id_prompts", "", "id_prompts.f32", &b.id_prompts});
  out.push_back({"ood_prompts", "", "ood_prompts.f32", &b.ood_prompts});
  std::size_t i = 0;
  for (const auto& [name, m] : b.ood_images) {
    out.push_back({"ood_images", name, "ood_images." + std::to_string(i++) + ".f32", &m});
  }
  if (b.id_logits) out.push_back({"id_logits", "", "id_logits.f32", &*b.id_logits});
  i = 0;
  for (const auto& [name, m] : b.ood_logits) {
    out.push_back({"ood_logits", name, "ood_logits." + std::to_string(i++) + ".f32", &m});
  }
  return out;
}

std::string entry_name(const std::string& role, const std::string& dataset) {
  return dataset.empty() ? role : role + "/" + dataset;
}

std::string manifest_text(const Bundle& b, const std::vector<Entry>& entries,
                          const std::vector<std::string>& hashes) {
  json manifest;
  manifest["format"] = kBundleMagic;
  manifest["version"] = kBundleVersion;
  manifest["metadata"] = json::object();
  for (const auto& [k, v] : b.metadata) manifest["metadata"][k] = v;
  if (b.id_labels) manifest["id_labels"] = *b.id_labels;
  json matrices = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    json m;
    m["role"] = e.role;
    if (!e.dataset.empty()) m["dataset"] = e.dataset;
    m["file"] = e.file;
    m["shape"] = {e.matrix->rows(), e.matrix->dim()};
    m["sha256"] = hashes[i];
    matrices.push_back(std::move(m));
  }
  manifest["matrices"] = std::move(matrices);
  return manifest.dump(2) + "\n";
}

std::vector<std::byte> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BundleError(BundleErrc::io, "cannot open " + p.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw BundleError(BundleErrc::io, "read failed for " + p.string());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const fs::path& p, std::span<const std::byte> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw BundleError(BundleErrc::io, "cannot create " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw BundleError(BundleErrc::io, "write failed for " + p.string());
}

std::size_t shape_dim(const json& shape, std::size_t i, const std::string& name) {
  const auto& v = shape.at(i);
  if (!v.is_number_unsigned()) {
    throw BundleError(BundleErrc::format, name + ": shape entries must be non-negative integers");
  }
  return v.get<std::size_t>();
}

}  // namespace

std::string manifest_json(const Bundle& b) {
  const auto entries = entries_of(b);
  std::vector<std::string> hashes;
  hashes.reserve(entries.size());
  for (const auto& e : entries) hashes.push_back(sha256_hex(encode_f32(*e.matrix)));
  return manifest_text(b, entries, hashes);
}

std::string bundle_digest(const Bundle& b) {
  const std::string text = manifest_json(b);
  return sha256_hex(std::as_bytes(std::span(text.data(), text.size())));
}

void write_bundle(const Bundle& b, const fs::path& dir) {
  const auto violations = validate_bundle(b);
  if (!violations.empty()) {
    throw BundleError(BundleErrc::validation, violations.front().describe() + " (" +
                                                  std::to_string(violations.size()) +
                                                  " violation(s))");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw BundleError(BundleErrc::io, "cannot create directory " + dir.string() + ": " + ec.message());

  const auto entries = entries_of(b);
  std::vector<std::string> hashes;
  for (const auto& e : entries) {
    const auto bytes = encode_f32(*e.matrix);
    hashes.push_back(sha256_hex(bytes));
    write_file(dir / e.file, bytes);
  }
  const std::string text = manifest_text(b, entries, hashes);
  write_file(dir / kManifestName, std::as_bytes(std::span(text.data(), text.size())));
}

RawBundle load_bundle_unchecked(const fs::path& dir) {
  const auto manifest_bytes = read_file(dir / kManifestName);
  json manifest;
  try {
    manifest = json::parse(reinterpret_cast<const char*>(manifest_bytes.data()),
                           reinterpret_cast<const char*>(manifest_bytes.data()) + manifest_bytes.size());
  } catch (const json::parse_error& e) {
    throw BundleError(BundleErrc::format, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!manifest.is_object()) throw BundleError(BundleErrc::format, "manifest must be a JSON object");
  if (!manifest.contains("format") || manifest["format"] != kBundleMagic) {
    throw BundleError(BundleErrc::format, "bad magic (expected \"OODB\")");
  }
  if (!manifest.contains("version") || !manifest["version"].is_number_integer()) {
    throw BundleError(BundleErrc::format, "missing integer version");
  }
  if (manifest["version"].get<long long>() != kBundleVersion) {
    throw BundleError(BundleErrc::version,
                      "unsupported format version " + manifest["version"].dump());
  }

  RawBundle raw;
  Bundle& b = raw.bundle;
  try {
    if (manifest.contains("metadata")) {
      for (const auto& [k, v] : manifest["metadata"].items()) {
        if (!v.is_string()) throw BundleError(BundleErrc::format, "metadata values must be strings");
        b.metadata[k] = v.get<std::string>();
      }
    }
    if (manifest.contains("id_labels") && !manifest["id_labels"].is_null()) {
      std::vector<std::int64_t> labels;
      for (const auto& v : manifest["id_labels"]) {
        if (!v.is_number_integer()) throw BundleError(BundleErrc::format, "id_labels must be integers");
        labels.push_back(v.get<std::int64_t>());
      }
      b.id_labels = std::move(labels);
    }

    bool seen_id_images = false, seen_id_prompts = false, seen_ood_prompts = false;
    for (const auto& m : manifest.at("matrices")) {
      const auto role = m.at("role").get<std::string>();
      const auto dataset = m.contains("dataset") ? m["dataset"].get<std::string>() : std::string();
      const auto name = entry_name(role, dataset);
      const auto file = m.at("file").get<std::string>();
      if (file.empty() || file.find('/') != std::string::npos || file.find('\\') != std::string::npos ||
          file == "." || file == "..") {
        throw BundleError(BundleErrc::format, name + ": invalid file name \"" + file + "\"");
      }
      const auto& shape = m.at("shape");
      if (!shape.is_array() || shape.size() != 2) {
        throw BundleError(BundleErrc::format, name + ": shape must be [rows, cols]");
      }
      const std::size_t rows = shape_dim(shape, 0, name);
      const std::size_t cols = shape_dim(shape, 1, name);

      const auto bytes = read_file(dir / file);
      if (bytes.size() != rows * cols * 4) {
        throw BundleError(BundleErrc::shape_mismatch,
                          name + ": manifest declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " but " + file + " holds " + std::to_string(bytes.size()) + " bytes");
      }
      const auto expected_hash = m.at("sha256").get<std::string>();
      if (sha256_hex(bytes) != expected_hash) raw.checksum_failures.push_back(name);
      EmbeddingMatrix matrix(rows, cols, decode_f32(bytes));

      auto take_unique = [&](bool& seen, EmbeddingMatrix& slot) {
        if (seen) throw BundleError(BundleErrc::format, "duplicate matrix " + name);
        seen = true;
        slot = std::move(matrix);
      };
      auto take_split = [&](std::map<std::string, EmbeddingMatrix>& slot) {
        if (dataset.empty()) throw BundleError(BundleErrc::format, name + ": missing dataset name");
        if (!slot.emplace(dataset, std::move(matrix)).second) {
          throw BundleError(BundleErrc::format, "duplicate matrix " + name);
        }
      };
      if (role == "id_images") {
        take_unique(seen_id_images, b.id_images);
      } else if (role == "id_prompts") {
        take_unique(seen_id_prompts, b.id_prompts);
      } else if (role == "ood_prompts") {
        take_unique(seen_ood_prompts, b.ood_prompts);
      } else if (role == "ood_images") {
        take_split(b.ood_images);
      } else if (role == "id_logits") {
        if (b.id_logits) throw BundleError(BundleErrc::format, "duplicate matrix " + name);
        b.id_logits = std::move(matrix);
      } else if (role == "ood_logits") {
        take_split(b.ood_logits);
      } else {
        throw BundleError(BundleErrc::format, "unknown matrix role \"" + role + "\"");
      }
    }
    if (!seen_id_images || !seen_id_prompts || !seen_ood_prompts) {
      throw BundleError(BundleErrc::format, "manifest must declare id_images, id_prompts and ood_prompts");
    }
  } catch (const json::exception& e) {
    throw BundleError(BundleErrc::format, std::string("malformed manifest: ") + e.what());
  }
  return raw;
}

Bundle read_bundle(const fs::path& dir) {
  RawBundle raw = load_bundle_unchecked(dir);
  const auto violations = validate_bundle(raw.bundle);
  if (!violations.empty()) {
    throw BundleError(BundleErrc::validation, violations.front().describe() + " (" +
                                                  std::to_string(violations.size()) +
                                                  " violation(s))");
  }
  if (!raw.checksum_failures.empty()) {
    throw BundleError(BundleErrc::checksum, "sha256 mismatch for " + raw.checksum_failures.front());
  }
  return std::move(raw.bundle);
}

}  // namespace vlmood
