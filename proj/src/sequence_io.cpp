#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gaitgcn/skeleton.hpp"

namespace gaitgcn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require_field(const json& doc, const char* key, const std::string& source) {
  auto it = doc.find(key);
  if (it == doc.end()) throw FormatError(source + ": missing field \"" + key + "\"");
  return *it;
}

int require_int(const json& doc, const char* key, const std::string& source) {
  const json& v = require_field(doc, key, source);
  if (!v.is_number_integer()) throw FormatError(source + ": field \"" + key + "\" must be an integer");
  return v.get<int>();
}

SkeletonSequence parse_document(std::string_view text, const std::string& source,
                                bool allow_full_pose) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": malformed JSON: " + e.what());
  }
  if (!doc.is_object()) throw FormatError(source + ": document must be a JSON object");

  SkeletonSequence seq;
  const json& subject = require_field(doc, "subject_id", source);
  if (!subject.is_string()) throw FormatError(source + ": field \"subject_id\" must be a string");
  seq.subject_id = subject.get<std::string>();
  const json& cond = require_field(doc, "condition", source);
  if (!cond.is_string()) throw FormatError(source + ": field \"condition\" must be a string");
  try {
    seq.condition = parse_condition(cond.get<std::string>());
  } catch (const FormatError& e) {
    throw FormatError(source + ": field \"condition\": " + e.what());
  }
  seq.seq_index = require_int(doc, "seq_index", source);
  if (seq.seq_index < 1) throw FormatError(source + ": field \"seq_index\" must be >= 1");
  seq.view_deg = require_int(doc, "view_deg", source);

  const json& frames = require_field(doc, "frames", source);
  if (!frames.is_array() || frames.empty()) {
    throw FormatError(source + ": field \"frames\" must be a non-empty array");
  }
  const std::size_t T = frames.size();
  const std::size_t V = frames[0].is_array() ? frames[0].size() : 0;
  const bool joints_ok = V == kNumJoints || (allow_full_pose && V == kNumPoseJoints);
  if (!joints_ok) {
    throw FormatError(source + ": frames[0]: expected " + std::to_string(kNumJoints) +
                      " joints, got " + std::to_string(V));
  }
  seq.coords = CoordArray(kNumCoords, T, V);
  for (std::size_t t = 0; t < T; ++t) {
    const json& frame = frames[t];
    const std::string where = source + ": frames[" + std::to_string(t) + "]";
    if (!frame.is_array() || frame.size() != V) {
      throw FormatError(where + ": expected " + std::to_string(V) + " joints, got " +
                        std::to_string(frame.is_array() ? frame.size() : 0));
    }
    for (std::size_t v = 0; v < V; ++v) {
      const json& point = frame[v];
      if (!point.is_array() || point.size() != kNumCoords) {
        throw FormatError(where + "[" + std::to_string(v) + "]: expected an [x, y] pair");
      }
      for (std::size_t c = 0; c < kNumCoords; ++c) {
        if (!point[c].is_number()) {
          throw FormatError(where + "[" + std::to_string(v) + "][" + std::to_string(c) +
                            "]: non-numeric coordinate");
        }
        seq.coords.at(c, t, v) = point[c].get<double>();
      }
    }
  }

  if (auto it = doc.find("confidence"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != T) {
      throw FormatError(source + ": field \"confidence\" must hold one row per frame");
    }
    std::vector<double> conf(T * V);
    for (std::size_t t = 0; t < T; ++t) {
      const json& row = (*it)[t];
      if (!row.is_array() || row.size() != V) {
        throw FormatError(source + ": confidence[" + std::to_string(t) + "]: expected " +
                          std::to_string(V) + " values");
      }
      for (std::size_t v = 0; v < V; ++v) {
        if (!row[v].is_number()) {
          throw FormatError(source + ": confidence[" + std::to_string(t) + "][" +
                            std::to_string(v) + "]: non-numeric value");
        }
        conf[t * V + v] = row[v].get<double>();
      }
    }
    seq.confidence = std::move(conf);
  }
  return seq;
}

}  // namespace

SkeletonSequence parse_sequence(std::string_view text, const std::string& source) {
  return parse_document(text, source, false);
}

SkeletonSequence load_sequence(const fs::path& path) {
  return parse_document(read_text(path), path.string(), false);
}

SkeletonSequence load_raw_sequence(const fs::path& path) {
  return parse_document(read_text(path), path.string(), true);
}

std::string serialize_sequence(const SkeletonSequence& seq) {
  json frames = json::array();
  for (std::size_t t = 0; t < seq.coords.frames; ++t) {
    json frame = json::array();
    for (std::size_t v = 0; v < seq.coords.joints; ++v) {
      frame.push_back(json::array({seq.coords.at(0, t, v), seq.coords.at(1, t, v)}));
    }
    frames.push_back(std::move(frame));
  }
  json doc = {
      {"subject_id", seq.subject_id},
      {"condition", std::string(to_string(seq.condition))},
      {"seq_index", seq.seq_index},
      {"view_deg", seq.view_deg},
      {"frames", std::move(frames)},
  };
  if (seq.confidence) {
    json conf = json::array();
    for (std::size_t t = 0; t < seq.coords.frames; ++t) {
      conf.push_back(std::vector<double>(
          seq.confidence->begin() + static_cast<std::ptrdiff_t>(t * seq.coords.joints),
          seq.confidence->begin() + static_cast<std::ptrdiff_t>((t + 1) * seq.coords.joints)));
    }
    doc["confidence"] = std::move(conf);
  }
  return doc.dump() + "\n";
}

void save_sequence(const SkeletonSequence& seq, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << serialize_sequence(seq);
}

std::vector<ManifestEntry> read_manifest(const fs::path& dataset_dir) {
  const fs::path path = dataset_dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected '<path>\\t<split>'");
    }
    try {
      entries.push_back({line.substr(0, tab), parse_split(line.substr(tab + 1))});
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entries;
}

void write_manifest(const fs::path& dataset_dir, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(dataset_dir / kManifestName, std::ios::binary);
  if (!out) throw FormatError("cannot write manifest in " + dataset_dir.string());
  for (const auto& e : entries) out << e.path << '\t' << to_string(e.split) << '\n';
}

std::vector<DatasetItem> load_dataset(const fs::path& dataset_dir) {
  std::vector<DatasetItem> items;
  for (const auto& entry : read_manifest(dataset_dir)) {
    items.push_back({load_sequence(dataset_dir / entry.path), entry.split});
  }
  return items;
}

std::string sequence_file_name(const SkeletonSequence& seq) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s-%s-%02d-%03d.json", seq.subject_id.c_str(),
                std::string(to_string(seq.condition)).c_str(), seq.seq_index, seq.view_deg);
  return buf;
}

void save_dataset(const fs::path& dataset_dir, const std::vector<DatasetItem>& items) {
  fs::create_directories(dataset_dir / "sequences");
  std::vector<ManifestEntry> entries;
  for (const auto& item : items) {
    const std::string rel = "sequences/" + sequence_file_name(item.sequence);
    save_sequence(item.sequence, dataset_dir / rel);
    entries.push_back({rel, item.split});
  }
  write_manifest(dataset_dir, entries);
}

}  // namespace gaitgcn
