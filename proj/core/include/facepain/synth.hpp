#pragma once

// Synthetic recordings with planted pain-witness frames. Positive sequences
// contain one contiguous block of frames drawn around the pain center; every
// other frame is drawn around the neutral center.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facepain/codec.hpp"
#include "facepain/features.hpp"
#include "facepain/mil.hpp"

namespace facepain {

struct SynthConfig {
  int patients = 12;
  int sequences_per_patient = 10;  // at most 15 (3 collections x 5 ratings)
  std::size_t frames_per_sequence = 300;
  std::vector<FeatureKind> kinds{FeatureKind::BlendShapes};
  double witness_fraction = 0.05;
  double positive_fraction = 0.5;
  std::map<FeatureKind, std::vector<double>> neutral_center;  // missing kind: built-in default
  std::map<FeatureKind, std::vector<double>> pain_center;
  double noise_scale = 0.05;
  double fps = 30.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t witness_count() const;
};

std::vector<double> default_neutral_center(FeatureKind kind);
std::vector<double> default_pain_center(FeatureKind kind);

struct SequenceTruth {
  RecordingId id;
  std::string sequence_id;
  int raw_pain = 0;
  std::vector<std::size_t> witness_frames;  // sorted; empty for negatives
};

struct GroundTruth {
  std::vector<SequenceTruth> sequences;

  const SequenceTruth* find(std::string_view sequence_id) const;
  LabelTable labels() const;
};

struct SynthDataset {
  GroundTruth truth;
  std::map<FeatureKind, std::vector<SequenceSample>> samples;
};

/// In-memory feature-level generation; identical to what the on-disk tree
/// yields after parsing and feature extraction.
SynthDataset generate_samples(const SynthConfig& config);

enum class SynthLayout { Tree, Stage };

/// Writes the recordings, clip markers, labels.csv and manifest.json under `root`.
GroundTruth generate(const SynthConfig& config, const std::filesystem::path& root,
                     SynthLayout layout = SynthLayout::Tree);

std::string manifest_json(const SynthConfig& config, const GroundTruth& truth);

/// Fraction of positive training bags whose final representative is a planted
/// witness frame. `bags` must be the list the model was trained on.
double witness_recovery_rate(const MilModel& model, std::span<const Bag> bags, const GroundTruth& truth);

}  // namespace facepain
