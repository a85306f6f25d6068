#include "basket/embedding_store.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace basket {

namespace {

constexpr char kMagic[7] = {'E', 'F', 'E', 'M', 'B', '1', '\0'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

std::uint32_t EmbeddingTable::add(std::uint64_t id) {
  if (index.count(id) != 0) {
    throw std::runtime_error("embedding table: duplicate id " + std::to_string(id));
  }
  const std::uint32_t r = size();
  ids.push_back(id);
  index.emplace(id, r);
  data.resize(data.size() + dim, 0.0f);
  return r;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, table.size());
  write_pod<std::uint32_t>(out, table.dim);
  for (std::uint32_t r = 0; r < table.size(); ++r) {
    write_pod<std::uint64_t>(out, table.ids[r]);
    const auto row = table.row(r);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not an EFEMB1 file: " + path);
  }
  EmbeddingTable table;
  const auto v = read_pod<std::uint32_t>(in);
  table.dim = read_pod<std::uint32_t>(in);
  if (!in || table.dim == 0) throw std::runtime_error("bad EFEMB1 header: " + path);
  table.ids.reserve(v);
  table.index.reserve(v);
  table.data.resize(std::size_t(v) * table.dim);
  for (std::uint32_t r = 0; r < v; ++r) {
    const auto id = read_pod<std::uint64_t>(in);
    in.read(reinterpret_cast<char*>(table.data.data() + std::size_t(r) * table.dim),
            static_cast<std::streamsize>(table.dim * sizeof(float)));
    if (!in) throw std::runtime_error("truncated EFEMB1 file: " + path);
    if (!table.index.emplace(id, r).second) {
      throw std::runtime_error("duplicate id " + std::to_string(id) + " in " + path);
    }
    table.ids.push_back(id);
  }
  return table;
}

void save_embeddings_tsv(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  char buf[48];
  for (std::uint32_t r = 0; r < table.size(); ++r) {
    out << table.ids[r];
    for (float v : table.row(r)) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace basket
