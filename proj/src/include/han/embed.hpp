#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace han::embed {

// Frozen word-vector table. Lookups for unknown tokens return one shared
// all-zero vector; nothing in the toolkit ever mutates a loaded table.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::vector<std::string> vocab,
                 std::vector<double> matrix);

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool contains(const std::string& token) const {
    return index_.count(token) != 0;
  }

  // Pointer to `dim()` doubles; the shared zero vector for OOV tokens.
  const double* lookup(const std::string& token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return oov_.data();
    return matrix_.data() + it->second * dim_;
  }

  // SHA-256 over dimension, vocabulary, and vector bytes; used to assert
  // that training never touches the table.
  std::string checksum() const;

  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> matrix_;  // vocab_size x dim, row-major
  std::vector<double> oov_;     // dim zeros
  std::vector<std::string> warnings_;
};

// Text format: header "<vocab_size> <dim>", then one token and dim values
// per line, space-separated. Duplicate tokens: last occurrence wins and a
// warning is recorded on the table. Arity or numeric errors throw ParseError
// naming the line.
EmbeddingTable load_embeddings(const std::string& path);

// Writes the same text format with six decimal places.
void write_embeddings(const std::vector<std::string>& vocab,
                      const std::vector<double>& matrix, std::size_t dim,
                      const std::string& path);

}  // namespace han::embed
