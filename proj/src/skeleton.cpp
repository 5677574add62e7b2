#include "gaitgcn/skeleton.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace gaitgcn {

const std::array<std::string_view, kNumJoints> kJointNames = {
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist",
    "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
};

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::NM: return "NM";
    case Condition::BG: return "BG";
    case Condition::CL: return "CL";
  }
  return "?";
}

Condition parse_condition(std::string_view s) {
  if (s == "NM") return Condition::NM;
  if (s == "BG") return Condition::BG;
  if (s == "CL") return Condition::CL;
  throw FormatError("unknown condition '" + std::string(s) + "' (expected NM, BG or CL)");
}

std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::joint: return "joint";
    case StreamKind::bone: return "bone";
    case StreamKind::motion: return "motion";
  }
  return "?";
}

StreamKind parse_stream_kind(std::string_view s) {
  if (s == "joint") return StreamKind::joint;
  if (s == "bone") return StreamKind::bone;
  if (s == "motion") return StreamKind::motion;
  throw FormatError("unknown stream kind '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::gallery: return "gallery";
    case Split::probe: return "probe";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "gallery") return Split::gallery;
  if (s == "probe") return Split::probe;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

Tensor CoordArray::to_tensor() const { return Tensor({channels, frames, joints}, values); }

SkeletonTopology SkeletonTopology::gait15() {
  return from_parents({
      kNeck,       // Nose
      kNeck,       // Neck (root)
      kNeck,       // RShoulder
      kRShoulder,  // RElbow
      kRElbow,     // RWrist
      kNeck,       // LShoulder
      kLShoulder,  // LElbow
      kLElbow,     // LWrist
      kNeck,       // MidHip
      kMidHip,     // RHip
      kRHip,       // RKnee
      kRKnee,      // RAnkle
      kMidHip,     // LHip
      kLHip,       // LKnee
      kLKnee,      // LAnkle
  });
}

SkeletonTopology SkeletonTopology::from_parents(std::vector<std::size_t> parent) {
  const std::size_t n = parent.size();
  if (n == 0) throw std::invalid_argument("topology: no joints");
  SkeletonTopology topo;
  std::size_t roots = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (parent[j] >= n) throw std::invalid_argument("topology: parent index out of range");
    if (parent[j] == j) {
      topo.root = j;
      ++roots;
    } else {
      topo.edges.emplace_back(j, parent[j]);
    }
  }
  if (roots != 1) throw std::invalid_argument("topology: expected exactly one root");
  // Every joint must reach the root without revisiting a joint.
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t cur = j;
    for (std::size_t steps = 0; parent[cur] != cur; ++steps) {
      if (steps > n) throw std::invalid_argument("topology: parent links contain a cycle");
      cur = parent[cur];
    }
  }
  topo.parent = std::move(parent);
  return topo;
}

std::vector<std::vector<std::size_t>> SkeletonTopology::neighbors() const {
  std::vector<std::vector<std::size_t>> adj(num_joints());
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

CoordArray select_joints(const CoordArray& full_pose) {
  if (full_pose.joints != kNumPoseJoints) {
    throw std::invalid_argument("select_joints: expected " + std::to_string(kNumPoseJoints) +
                                " joints, got " + std::to_string(full_pose.joints));
  }
  CoordArray out(full_pose.channels, full_pose.frames, kNumJoints);
  // The first 15 entries of the 25-joint body layout are exactly the kept joints.
  for (std::size_t c = 0; c < full_pose.channels; ++c) {
    for (std::size_t t = 0; t < full_pose.frames; ++t) {
      for (std::size_t v = 0; v < kNumJoints; ++v) out.at(c, t, v) = full_pose.at(c, t, v);
    }
  }
  return out;
}

SkeletonSequence normalize_coords(const SkeletonSequence& seq, Diagnostics* diag) {
  SkeletonSequence out = seq;
  const auto& in = seq.coords;
  const std::size_t plane = in.frames * in.joints;
  if (plane == 0) throw std::invalid_argument("normalize_coords: empty sequence");
  for (std::size_t c = 0; c < in.channels; ++c) {
    const auto first = in.values.begin() + static_cast<std::ptrdiff_t>(c * plane);
    const auto [lo_it, hi_it] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(plane));
    const double lo = *lo_it, hi = *hi_it;
    double* dst = out.coords.values.data() + c * plane;
    if (hi == lo) {
      std::fill(dst, dst + plane, 0.5);
      if (diag) {
        diag->warn("normalize_coords: axis " + std::to_string(c) + " of " + seq.subject_id +
                   " is constant; mapped to 0.5");
      }
      continue;
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (first[static_cast<std::ptrdiff_t>(i)] - lo) / range;
  }
  return out;
}

std::vector<std::size_t> resample_indices(std::size_t raw_frames, std::size_t frames) {
  if (raw_frames == 0) throw std::invalid_argument("resample_to_length: empty sequence");
  if (frames == 0) throw std::invalid_argument("resample_to_length: target length must be >= 1");
  std::vector<std::size_t> idx(frames);
  if (raw_frames >= frames) {
    for (std::size_t i = 0; i < frames; ++i) {
      // round(i * raw / frames), halves rounded up, in exact integer arithmetic
      const std::size_t r = (2 * i * raw_frames + frames) / (2 * frames);
      idx[i] = std::min(r, raw_frames - 1);
    }
  } else {
    for (std::size_t i = 0; i < frames; ++i) idx[i] = i % raw_frames;
  }
  return idx;
}

SkeletonSequence resample_to_length(const SkeletonSequence& seq, std::size_t frames) {
  const auto idx = resample_indices(seq.coords.frames, frames);
  SkeletonSequence out = seq;
  out.coords = CoordArray(seq.coords.channels, frames, seq.coords.joints);
  for (std::size_t c = 0; c < seq.coords.channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t v = 0; v < seq.coords.joints; ++v) {
        out.coords.at(c, t, v) = seq.coords.at(c, idx[t], v);
      }
    }
  }
  if (seq.confidence) {
    std::vector<double> conf(frames * seq.coords.joints);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t v = 0; v < seq.coords.joints; ++v) {
        conf[t * seq.coords.joints + v] = (*seq.confidence)[idx[t] * seq.coords.joints + v];
      }
    }
    out.confidence = std::move(conf);
  }
  return out;
}

CoordArray derive_bone(const CoordArray& joint, const SkeletonTopology& topo) {
  if (joint.joints != topo.num_joints()) {
    throw std::invalid_argument("derive_bone: coordinate array has " +
                                std::to_string(joint.joints) + " joints, topology has " +
                                std::to_string(topo.num_joints()));
  }
  CoordArray bone(joint.channels, joint.frames, joint.joints);
  for (std::size_t c = 0; c < joint.channels; ++c) {
    for (std::size_t t = 0; t < joint.frames; ++t) {
      for (std::size_t v = 0; v < joint.joints; ++v) {
        bone.at(c, t, v) = v == topo.root ? 0.0 : joint.at(c, t, v) - joint.at(c, t, topo.parent[v]);
      }
    }
  }
  return bone;
}

CoordArray derive_motion(const CoordArray& joint) {
  if (joint.frames == 0) throw std::invalid_argument("derive_motion: empty sequence");
  CoordArray motion(joint.channels, joint.frames, joint.joints);
  for (std::size_t c = 0; c < joint.channels; ++c) {
    for (std::size_t t = 0; t + 1 < joint.frames; ++t) {
      for (std::size_t v = 0; v < joint.joints; ++v) {
        motion.at(c, t, v) = joint.at(c, t + 1, v) - joint.at(c, t, v);
      }
    }
  }
  return motion;
}

CoordArray derive_stream(const CoordArray& joint, StreamKind kind, const SkeletonTopology& topo) {
  switch (kind) {
    case StreamKind::joint: return joint;
    case StreamKind::bone: return derive_bone(joint, topo);
    case StreamKind::motion: return derive_motion(joint);
  }
  throw std::invalid_argument("derive_stream: unknown kind");
}

StreamBundle make_stream_bundle(const SkeletonSequence& seq, const SkeletonTopology& topo) {
  return {seq.coords.to_tensor(), derive_bone(seq.coords, topo).to_tensor(),
          derive_motion(seq.coords).to_tensor()};
}

}  // namespace gaitgcn
