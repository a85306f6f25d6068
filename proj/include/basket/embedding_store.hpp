#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace basket {

// Dense table of fixed-dimension float vectors keyed by 64-bit owner ids
// (products, tokens, trips or customers). Shared by every module; persisted
// in the EFEMB1 binary format:
//   magic "EFEMB1\0" | u32 V | u32 D | V x { u64 id, D x f32 little-endian }
struct EmbeddingTable {
  std::uint32_t dim = 0;
  std::vector<std::uint64_t> ids;                       // row -> id
  std::unordered_map<std::uint64_t, std::uint32_t> index;  // id -> row
  std::vector<float> data;                              // row-major, V x dim

  std::uint32_t size() const { return static_cast<std::uint32_t>(ids.size()); }

  std::span<const float> row(std::uint32_t r) const {
    return {data.data() + static_cast<std::size_t>(r) * dim, dim};
  }
  std::span<float> row_mut(std::uint32_t r) {
    return {data.data() + static_cast<std::size_t>(r) * dim, dim};
  }

  // nullptr when the id is not present.
  const float* find(std::uint64_t id) const {
    auto it = index.find(id);
    return it == index.end() ? nullptr : data.data() + std::size_t(it->second) * dim;
  }

  std::uint32_t add(std::uint64_t id);  // appends a zero row, errors on duplicate
};

void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

// `product_id\tv1\t...\tvD`, one row per id, no header.
void save_embeddings_tsv(const EmbeddingTable& table, const std::string& path);

}  // namespace basket
