#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gaitgcn/random.hpp"
#include "gaitgcn/skeleton.hpp"

namespace gaitgcn {

namespace {

constexpr double kPi = std::numbers::pi;

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

// Limb segment pointing down and swung forward by `angle` in the sagittal plane.
Vec3 swing(double length, double angle) { return {length * std::sin(angle), -length * std::cos(angle), 0.0}; }

struct GaitSignature {
  double torso, head, shoulder_width, hip_width;
  double upper_arm, forearm, thigh, shin;
  double leg_amp, knee_amp, knee_phase, arm_amp, arm_phase, elbow_flex;
  double lean, sway, bob, period;
};

GaitSignature draw_signature(Rng& rng) {
  GaitSignature s;
  s.torso = uniform(rng, 0.45, 0.60);
  s.head = uniform(rng, 0.16, 0.24);
  s.shoulder_width = uniform(rng, 0.30, 0.46);
  s.hip_width = uniform(rng, 0.16, 0.28);
  s.upper_arm = uniform(rng, 0.26, 0.36);
  s.forearm = uniform(rng, 0.22, 0.32);
  s.thigh = uniform(rng, 0.40, 0.52);
  s.shin = uniform(rng, 0.38, 0.50);
  s.leg_amp = uniform(rng, 0.25, 0.55);
  s.knee_amp = uniform(rng, 0.30, 0.90);
  s.knee_phase = uniform(rng, 0.0, 1.2);
  s.arm_amp = uniform(rng, 0.15, 0.60);
  s.arm_phase = uniform(rng, -0.5, 0.5);
  s.elbow_flex = uniform(rng, 0.05, 0.60);
  s.lean = uniform(rng, -0.05, 0.20);
  s.sway = uniform(rng, 0.01, 0.06);
  s.bob = uniform(rng, 0.01, 0.04);
  s.period = uniform(rng, 24.0, 38.0);
  return s;
}

std::array<Vec3, kNumJoints> pose_at(const GaitSignature& s, Condition cond, double phase) {
  double shoulder_width = s.shoulder_width, hip_width = s.hip_width;
  double right_arm_amp = s.arm_amp, left_arm_amp = s.arm_amp;
  double right_elbow = s.elbow_flex;
  if (cond == Condition::BG) {
    right_arm_amp *= 0.25;  // hand holds the bag strap
    right_elbow += 0.6;
  } else if (cond == Condition::CL) {
    shoulder_width *= 1.15;
    hip_width *= 1.10;
    right_arm_amp *= 0.8;
    left_arm_amp *= 0.8;
  }

  std::array<Vec3, kNumJoints> p;
  const double hip_height = s.thigh + s.shin;
  const double sway = s.sway * std::sin(phase);
  p[kMidHip] = {0.0, hip_height + s.bob * std::cos(2.0 * phase), sway};
  p[kNeck] = p[kMidHip] + Vec3{s.torso * std::sin(s.lean), s.torso * std::cos(s.lean), 0.0};
  p[kNose] = p[kNeck] + Vec3{0.08 + 0.5 * s.head * std::sin(s.lean), s.head, 0.0};

  p[kRShoulder] = p[kNeck] + Vec3{0.0, -0.03, shoulder_width / 2};
  p[kLShoulder] = p[kNeck] + Vec3{0.0, -0.03, -shoulder_width / 2};
  const double right_arm = right_arm_amp * std::sin(phase + kPi + s.arm_phase);
  const double left_arm = left_arm_amp * std::sin(phase + s.arm_phase);
  p[kRElbow] = p[kRShoulder] + swing(s.upper_arm, right_arm) + Vec3{0, 0, 0.04};
  p[kLElbow] = p[kLShoulder] + swing(s.upper_arm, left_arm) + Vec3{0, 0, -0.04};
  p[kRWrist] = p[kRElbow] + swing(s.forearm, right_arm + right_elbow);
  p[kLWrist] = p[kLElbow] + swing(s.forearm, left_arm + s.elbow_flex);

  p[kRHip] = p[kMidHip] + Vec3{0.0, 0.0, hip_width / 2};
  p[kLHip] = p[kMidHip] + Vec3{0.0, 0.0, -hip_width / 2};
  const double right_leg = s.leg_amp * std::sin(phase);
  const double left_leg = s.leg_amp * std::sin(phase + kPi);
  const double right_knee = s.knee_amp * std::max(0.0, std::sin(phase + s.knee_phase));
  const double left_knee = s.knee_amp * std::max(0.0, std::sin(phase + kPi + s.knee_phase));
  p[kRKnee] = p[kRHip] + swing(s.thigh, right_leg);
  p[kLKnee] = p[kLHip] + swing(s.thigh, left_leg);
  p[kRAnkle] = p[kRKnee] + swing(s.shin, right_leg - right_knee);
  p[kLAnkle] = p[kLKnee] + swing(s.shin, left_leg - left_knee);
  return p;
}

}  // namespace

std::pair<Condition, int> synthetic_sequence_label(std::size_t k) {
  if (k < 6) return {Condition::NM, static_cast<int>(k + 1)};
  if (k < 8) return {Condition::BG, static_cast<int>(k - 5)};
  if (k < 10) return {Condition::CL, static_cast<int>(k - 7)};
  return {Condition::NM, static_cast<int>(k - 3)};
}

std::vector<SkeletonSequence> generate_synthetic_dataset(const SyntheticOptions& options) {
  if (options.n_subjects < 1 || options.seqs_per_subject < 1 || options.views.empty() ||
      options.frames < 1) {
    throw std::invalid_argument("generate_synthetic_dataset: all counts must be >= 1");
  }
  Rng rng(options.seed);
  std::vector<SkeletonSequence> out;
  for (std::size_t subject = 0; subject < options.n_subjects; ++subject) {
    const GaitSignature sig = draw_signature(rng);
    char id[16];
    std::snprintf(id, sizeof id, "%03zu", subject + 1);
    for (std::size_t k = 0; k < options.seqs_per_subject; ++k) {
      const auto [cond, index] = synthetic_sequence_label(k);
      const double start = uniform(rng, 0.0, 2.0 * kPi);
      const double cadence = 2.0 * kPi / (sig.period * uniform(rng, 0.97, 1.03));
      // The same 3D walk is seen from every view.
      std::vector<std::array<Vec3, kNumJoints>> walk(options.frames);
      for (std::size_t t = 0; t < options.frames; ++t) {
        walk[t] = pose_at(sig, cond, start + cadence * static_cast<double>(t));
      }
      for (int view : options.views) {
        const double a = static_cast<double>(view) * kPi / 180.0;
        const double ca = std::cos(a), sa = std::sin(a);
        SkeletonSequence seq;
        seq.subject_id = id;
        seq.condition = cond;
        seq.seq_index = index;
        seq.view_deg = view;
        seq.coords = CoordArray(kNumCoords, options.frames, kNumJoints);
        for (std::size_t t = 0; t < options.frames; ++t) {
          for (std::size_t v = 0; v < kNumJoints; ++v) {
            const Vec3& q = walk[t][v];
            seq.coords.at(0, t, v) = q.x * ca + q.z * sa + options.noise * standard_normal(rng);
            seq.coords.at(1, t, v) = -q.y + options.noise * standard_normal(rng);
          }
        }
        out.push_back(normalize_coords(seq));
      }
    }
  }
  return out;
}

}  // namespace gaitgcn
