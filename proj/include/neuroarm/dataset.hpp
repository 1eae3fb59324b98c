#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "neuroarm/types.hpp"

namespace neuroarm::data {

/// One feature CSV row bound to the action of its source file.
struct LabeledRecord {
    std::uint64_t index = 0;
    std::array<double, kFeatureDim> features{};
    ActionLabel label = ActionLabel::StayIdle;
};

/// One classifier input: win_size consecutive standardized feature rows.
struct WindowTensor {
    Eigen::MatrixXd data;  // win_size × 20
    ActionLabel label = ActionLabel::StayIdle;
};

/// Per-feature statistics fitted on training-source data and reapplied
/// verbatim at inference time.
struct Standardizer {
    Eigen::VectorXd mean;               // 20
    Eigen::VectorXd std;                // 20, clamped to 1 where degenerate
    std::vector<int> degenerate_cols;   // zero-variance columns, mapped to 0

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct SplitDataset {
    std::vector<WindowTensor> train;
    std::vector<WindowTensor> test;
    std::vector<Eigen::Vector3d> train_one_hot;  // aligned with train
    std::vector<Eigen::Vector3d> test_one_hot;   // aligned with test
    Standardizer standardizer;
    int win_size = 0;
};

/// A class was left without representation on one side of the split.
struct StratificationError : ConfigError {
    using ConfigError::ConfigError;
};

Eigen::Vector3d one_hot(ActionLabel label);

/// Appends rows "index,f1..f20" (9 significant digits). Creates the file
/// if needed. The action is carried by the file, not the row.
void append_records(const std::string& path, const std::vector<LabeledRecord>& records);

/// Loads one per-action CSV, attaching `label` to every row.
/// Malformed input raises IoError naming the 1-based line number.
std::vector<LabeledRecord> load_action_file(const std::string& path, ActionLabel label);

/// Column-wise standardization: (x - mean) / std with population std.
/// Zero-variance columns become all-zero and are flagged; their std is
/// clamped to 1 so apply() stays well-defined. Requires n >= 2 rows.
std::pair<Eigen::MatrixXd, Standardizer> standardize(const Eigen::MatrixXd& x);

enum class SegmentMode {
    RandomOverlap,  // production path: overlap ~ U[min_overlap, max_overlap]
    ZeroOverlap,    // reference path: disjoint windows, step = win_size
};

/// Uniform draw in [0, bound) that is identical on every platform,
/// unlike std::uniform_int_distribution. Shared with the test oracle.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound);

/// Windows a labeled feature matrix. In RandomOverlap mode each step
/// draws overlap uniformly from [min(20, win_size/4), win_size/2]
/// (integer division) and advances win_size - overlap; the window label
/// is the label at the window's start row. Iterates while
/// start + win_size <= n; n < win_size yields no windows.
std::vector<WindowTensor> segment_dataset(const Eigen::MatrixXd& x,
                                          const std::vector<ActionLabel>& y, int win_size,
                                          std::uint64_t seed,
                                          SegmentMode mode = SegmentMode::RandomOverlap);

/// Full dataset build: load every per-action file, standardize the
/// combined rows, segment each action's block with a seed derived from
/// (seed, label), shuffle, and split stratified by class.
/// Raises StratificationError when any class ends up absent from either
/// side (test_fraction 0 always does).
SplitDataset build_split(const std::map<std::string, ActionLabel>& files, int win_size,
                         double test_fraction, std::uint64_t seed,
                         SegmentMode mode = SegmentMode::RandomOverlap);

/// Binary container round-trip for a built split (embedded standardizer).
void save_split(const std::string& path, const SplitDataset& ds);
SplitDataset load_split(const std::string& path);

}  // namespace neuroarm::data
