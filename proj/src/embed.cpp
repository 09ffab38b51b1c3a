#include "han/embed.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "han/error.hpp"
#include "han/sha256.hpp"

namespace han::embed {

namespace {

double parse_value(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size() || s.empty()) {
    throw ParseError("non-numeric embedding value '" + s + "' at " + where);
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(std::move(tok));
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<std::string> vocab,
                               std::vector<double> matrix)
    : dim_(dim), vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
  if (matrix_.size() != vocab_.size() * dim_) {
    throw ValidationError("embedding matrix size does not match vocab x dim");
  }
  oov_.assign(dim_, 0.0);
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;
  if (index_.size() != vocab_.size()) {
    throw ValidationError("duplicate tokens in embedding vocabulary");
  }
}

std::string EmbeddingTable::checksum() const {
  Sha256 h;
  const std::uint64_t d = dim_;
  h.update(&d, sizeof d);
  for (const auto& tok : vocab_) {
    h.update(tok.data(), tok.size());
    h.update("\0", 1);
  }
  h.update(matrix_.data(), matrix_.size() * sizeof(double));
  return h.hex_digest();
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty embedding file: " + path);
  }
  const auto header = split_ws(line);
  if (header.size() != 2) {
    throw ParseError("bad embedding header (want '<vocab> <dim>') at " + path +
                     " line 1");
  }
  std::size_t declared = 0, dim = 0;
  try {
    declared = std::stoull(header[0]);
    dim = std::stoull(header[1]);
  } catch (const std::exception&) {
    throw ParseError("non-numeric embedding header at " + path + " line 1");
  }
  if (dim == 0) throw ParseError("embedding dimension must be positive");

  std::vector<std::string> vocab;
  std::vector<double> matrix;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> warnings;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(lineno);
    const auto fields = split_ws(line);
    if (fields.size() != dim + 1) {
      throw ParseError("expected 1 token + " + std::to_string(dim) +
                       " values, got " + std::to_string(fields.size()) +
                       " fields at " + where);
    }
    const std::string& token = fields[0];
    const auto it = index.find(token);
    if (it != index.end()) {
      warnings.push_back("duplicate token '" + token + "' at " + where +
                         "; keeping the later vectors");
      for (std::size_t k = 0; k < dim; ++k) {
        matrix[it->second * dim + k] = parse_value(fields[k + 1], where);
      }
      continue;
    }
    index[token] = vocab.size();
    vocab.push_back(token);
    for (std::size_t k = 0; k < dim; ++k) {
      matrix.push_back(parse_value(fields[k + 1], where));
    }
  }
  if (vocab.size() != declared && vocab.size() + warnings.size() != declared) {
    throw ParseError("embedding header declares " + std::to_string(declared) +
                     " rows but file has " + std::to_string(vocab.size()) +
                     " unique tokens (" + std::to_string(warnings.size()) +
                     " duplicates)");
  }
  EmbeddingTable table(dim, std::move(vocab), std::move(matrix));
  for (auto& w : warnings) table.add_warning(std::move(w));
  return table;
}

void write_embeddings(const std::vector<std::string>& vocab,
                      const std::vector<double>& matrix, std::size_t dim,
                      const std::string& path) {
  if (matrix.size() != vocab.size() * dim) {
    throw ValidationError("embedding matrix size does not match vocab x dim");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file: " + path);
  out << vocab.size() << ' ' << dim << '\n';
  char buf[64];
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab[i];
    for (std::size_t k = 0; k < dim; ++k) {
      std::snprintf(buf, sizeof buf, " %.6f", matrix[i * dim + k]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing embedding file: " + path);
}

}  // namespace han::embed
