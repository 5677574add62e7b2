#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gaitgcn/diagnostics.hpp"
#include "gaitgcn/tensor.hpp"

namespace gaitgcn {

inline constexpr std::size_t kNumJoints = 15;
inline constexpr std::size_t kNumPoseJoints = 25;
inline constexpr std::size_t kNumCoords = 2;

// The 15 joints kept from the 25-joint pose estimator layout, in order.
enum Joint : std::size_t {
  kNose, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
  kMidHip, kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle,
};

extern const std::array<std::string_view, kNumJoints> kJointNames;

enum class Condition { NM, BG, CL };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);

/// Coordinates laid out as (channel, frame, joint), row-major.
struct CoordArray {
  std::size_t channels = kNumCoords;
  std::size_t frames = 0;
  std::size_t joints = kNumJoints;
  std::vector<double> values;

  CoordArray() = default;
  CoordArray(std::size_t channels, std::size_t frames, std::size_t joints, double fill = 0.0)
      : channels(channels), frames(frames), joints(joints),
        values(channels * frames * joints, fill) {}

  double& at(std::size_t c, std::size_t t, std::size_t v) {
    return values[(c * frames + t) * joints + v];
  }
  double at(std::size_t c, std::size_t t, std::size_t v) const {
    return values[(c * frames + t) * joints + v];
  }
  Tensor to_tensor() const;

  bool operator==(const CoordArray&) const = default;
};

struct SkeletonSequence {
  std::string subject_id;
  Condition condition = Condition::NM;
  int seq_index = 1;
  int view_deg = 0;
  CoordArray coords;
  std::optional<std::vector<double>> confidence;  // (frames, joints)

  std::size_t frames() const { return coords.frames; }
};

/// Tree over the joints; `parent[root] == root`.
struct SkeletonTopology {
  std::vector<std::size_t> parent;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t root = 0;

  /// The natural 15-joint body tree rooted at the neck.
  static SkeletonTopology gait15();
  static SkeletonTopology from_parents(std::vector<std::size_t> parent);

  std::size_t num_joints() const { return parent.size(); }
  std::vector<std::vector<std::size_t>> neighbors() const;
};

struct StreamBundle {
  Tensor joint;
  Tensor bone;
  Tensor motion;
};

enum class StreamKind { joint, bone, motion };
std::string_view to_string(StreamKind k);
StreamKind parse_stream_kind(std::string_view s);

CoordArray select_joints(const CoordArray& full_pose);
SkeletonSequence normalize_coords(const SkeletonSequence& seq, Diagnostics* diag = nullptr);
SkeletonSequence resample_to_length(const SkeletonSequence& seq, std::size_t frames);
/// Source frame index for each output frame of resample_to_length.
std::vector<std::size_t> resample_indices(std::size_t raw_frames, std::size_t frames);
CoordArray derive_bone(const CoordArray& joint, const SkeletonTopology& topo);
CoordArray derive_motion(const CoordArray& joint);
CoordArray derive_stream(const CoordArray& joint, StreamKind kind, const SkeletonTopology& topo);
StreamBundle make_stream_bundle(const SkeletonSequence& seq, const SkeletonTopology& topo);

// Sequence documents.
SkeletonSequence parse_sequence(std::string_view text, const std::string& source = "<memory>");
SkeletonSequence load_sequence(const std::filesystem::path& path);
/// Accepts 15- or 25-joint frames; 25-joint frames are not reduced.
SkeletonSequence load_raw_sequence(const std::filesystem::path& path);
std::string serialize_sequence(const SkeletonSequence& seq);
void save_sequence(const SkeletonSequence& seq, const std::filesystem::path& path);

enum class Split { train, gallery, probe };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  Split split = Split::train;
};

inline constexpr const char* kManifestName = "manifest.tsv";

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const std::vector<ManifestEntry>& entries);

struct DatasetItem {
  SkeletonSequence sequence;
  Split split = Split::train;
};

std::vector<DatasetItem> load_dataset(const std::filesystem::path& dataset_dir);
/// Writes sequences/<name>.json per item plus the manifest.
void save_dataset(const std::filesystem::path& dataset_dir, const std::vector<DatasetItem>& items);
std::string sequence_file_name(const SkeletonSequence& seq);

struct SyntheticOptions {
  std::size_t n_subjects = 8;
  std::size_t seqs_per_subject = 4;
  std::vector<int> views{0, 90};
  std::size_t frames = 120;
  std::uint64_t seed = 0;
  double noise = 0.003;
};

/// Procedural walkers: each subject has its own limb proportions, swing
/// amplitudes, cadence and phase offsets; views are rotations of the same 3D
/// motion about the vertical axis followed by orthographic projection.
/// Sequence k of a subject takes condition/index in the order
/// NM01..NM06, BG01..BG02, CL01..CL02, then NM07 onward.
std::vector<SkeletonSequence> generate_synthetic_dataset(const SyntheticOptions& options);

/// Condition and sequence number for the k-th (0-based) sequence.
std::pair<Condition, int> synthetic_sequence_label(std::size_t k);

}  // namespace gaitgcn
