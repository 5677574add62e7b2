#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gaitgcn/diagnostics.hpp"
#include "gaitgcn/model.hpp"

namespace gaitgcn {

std::string_view to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::model: return "model";
    case EmbeddingSource::appearance: return "appearance";
    case EmbeddingSource::fused: return "fused";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(std::string_view s) {
  if (s == "model") return EmbeddingSource::model;
  if (s == "appearance") return EmbeddingSource::appearance;
  if (s == "fused") return EmbeddingSource::fused;
  throw std::invalid_argument("unknown embedding source '" + std::string(s) + "'");
}

std::string format_embeddings(const std::vector<EmbeddingRecord>& records) {
  std::string out;
  char buf[64];
  for (const auto& r : records) {
    out += r.subject_id;
    out += ' ';
    out += to_string(r.condition);
    std::snprintf(buf, sizeof buf, " %d %d ", r.seq_index, r.view_deg);
    out += buf;
    out += to_string(r.source);
    for (double v : r.vector) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("embedding of " + r.subject_id + " has a non-finite entry");
      }
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  std::string text = format_embeddings(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<EmbeddingRecord> parse_embeddings(std::string_view text, const std::string& source) {
  std::vector<EmbeddingRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& what) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": " + what);
    };
    std::istringstream fields(line);
    EmbeddingRecord r;
    std::string cond, src;
    if (!(fields >> r.subject_id >> cond >> r.seq_index >> r.view_deg >> src)) {
      fail("expected 'subject condition seq view source values...'");
    }
    try {
      r.condition = parse_condition(cond);
      r.source = parse_embedding_source(src);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    std::string tok;
    while (fields >> tok) {
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail("non-numeric value '" + tok + "'");
      if (!std::isfinite(v)) fail("non-finite value");
      r.vector.push_back(v);
    }
    if (r.vector.empty()) fail("empty vector");
    if (records.empty()) dim = r.vector.size();
    else if (r.vector.size() != dim)
      fail("dimension " + std::to_string(r.vector.size()) + " differs from " + std::to_string(dim));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings(ss.str(), path.string());
}

}  // namespace gaitgcn
