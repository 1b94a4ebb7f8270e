#pragma once
/*
 * Embedding bundles: the in-memory model and the on-disk directory format.
 *
 * A bundle directory holds `manifest.json` plus one raw little-endian
 * binary32 row-major `.f32` file per matrix. The manifest is written with
 * lexicographically sorted keys and records role, shape, file name and the
 * SHA-256 of every matrix file. See docs/formats.md for the schema.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmood/error.hpp"

namespace vlmood {

/// Dense n x d table of binary32 values, row-major. Used for image and text
/// embeddings and for classifier logits.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim);
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

  static EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const float> row(std::size_t r) const;
  std::span<float> row(std::size_t r);
  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }

  float at(std::size_t r, std::size_t c) const { return row(r)[c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// True when both matrices have the same shape and identical bit patterns.
bool bit_equal(const EmbeddingMatrix& a, const EmbeddingMatrix& b) noexcept;

struct Bundle {
  EmbeddingMatrix id_images;
  std::map<std::string, EmbeddingMatrix> ood_images;
  EmbeddingMatrix id_prompts;   // K rows
  EmbeddingMatrix ood_prompts;  // M rows, M may be 0
  std::optional<std::vector<std::int64_t>> id_labels;
  // Baseline rules need logits for every image population; either both of
  // these are absent or id_logits is set and ood_logits covers every split.
  std::optional<EmbeddingMatrix> id_logits;
  std::map<std::string, EmbeddingMatrix> ood_logits;
  std::map<std::string, std::string> metadata;

  std::size_t id_class_count() const noexcept { return id_prompts.rows(); }
  std::size_t ood_prompt_count() const noexcept { return ood_prompts.rows(); }
  std::size_t dim() const noexcept { return id_images.dim(); }
  bool has_logits() const noexcept { return id_logits.has_value(); }
};

/// One broken invariant. `row` is set when the violation is row-specific.
struct Violation {
  std::string matrix;
  std::optional<std::size_t> row;
  std::string rule;

  std::string describe() const;
};

/// Every invariant violation in `bundle`; empty iff the bundle is valid.
std::vector<Violation> validate_bundle(const Bundle& bundle);

enum class BundleErrc {
  io,              // missing or unreadable file, write failure
  format,          // malformed manifest, bad magic, unknown role
  version,         // unsupported format version
  shape_mismatch,  // file size disagrees with declared shape
  checksum,        // SHA-256 of a matrix file differs from the manifest
  validation,      // content violates a bundle invariant
};

const char* to_string(BundleErrc code) noexcept;

class BundleError : public Error {
 public:
  BundleError(BundleErrc code, const std::string& what);
  BundleErrc code() const noexcept { return code_; }

 private:
  BundleErrc code_;
};

inline constexpr const char* kBundleMagic = "OODB";
inline constexpr int kBundleVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// Writes `bundle` into directory `dir` (created if needed). Throws
/// BundleError(validation) before touching the filesystem if the bundle is
/// invalid, BundleError(io) on write failure.
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

/// Reads and fully validates a bundle directory.
Bundle read_bundle(const std::filesystem::path& dir);

/// Result of a structural load that does not apply content validation.
struct RawBundle {
  Bundle bundle;
  std::vector<std::string> checksum_failures;  // matrix names
};

/// Loads a bundle checking only structure (manifest, files, shapes).
/// Content invariants are left to validate_bundle; checksum mismatches are
/// collected rather than thrown.
RawBundle load_bundle_unchecked(const std::filesystem::path& dir);

/// Canonical manifest text for `bundle` (what write_bundle puts on disk).
std::string manifest_json(const Bundle& bundle);

/// SHA-256 hex of the canonical manifest; identifies bundle contents.
std::string bundle_digest(const Bundle& bundle);

/// Little-endian binary32 encoding of a matrix, as stored in `.f32` files.
std::vector<std::byte> encode_f32(const EmbeddingMatrix& m);

std::string sha256_hex(std::span<const std::byte> bytes);

}  // namespace vlmood
