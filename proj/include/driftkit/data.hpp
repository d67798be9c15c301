#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftkit/rng.hpp"

namespace driftkit {

enum class Task { kClassification, kRegression };

/// The five testable shift types, in canonical reporting order.
enum class Hypothesis { kTotalD, kFeatureF, kResponseR, kCond1, kCond2 };

std::string to_string(Task task);
std::string to_string(Hypothesis h);
Task task_from_string(const std::string& name);
Hypothesis hypothesis_from_string(const std::string& name);

/// One observation: a fixed-dimension feature vector plus a label. For
/// classification the label holds an integer category id; for regression a
/// real value. Features and label are always finite.
struct LabeledSample {
    std::vector<double> features;
    double label = 0.0;
};

/// A labeled sample tagged with the population it came from
/// (origin 1 = source, 2 = target).
struct AugmentedRow {
    LabeledSample sample;
    int origin = 1;
};

/// Pooled source+target rows with their origin indicators.
struct AugmentedDataset {
    std::vector<AugmentedRow> rows;
    Task task = Task::kClassification;

    std::size_t size() const { return rows.size(); }
    std::size_t feature_dim() const {
        return rows.empty() ? 0 : rows.front().sample.features.size();
    }
    std::size_t count_origin(int origin) const;
    /// Rows with the given origin, in dataset order.
    AugmentedDataset subset_origin(int origin) const;
    std::vector<int> labels_of_origin(int origin) const;
};

/// Disjoint train/test partition of an augmented dataset.
struct SplitDatasets {
    AugmentedDataset train;
    AugmentedDataset test;
    std::size_t n_tr_1 = 0;  // train rows with origin 1
    std::size_t n_tr_2 = 0;  // train rows with origin 2
};

/// Equal-frequency quantile bins for a continuous label. Bins are the
/// half-open intervals (-inf, c0), [c0, c1), ..., [c_last, +inf).
struct BinningRule {
    std::vector<double> cut_points;  // strictly increasing, num_bins - 1 of them
    int num_bins = 0;
};

/// Builds an equal-frequency binning rule from the given labels (the
/// pipeline passes the pooled test labels). Cut points are midpoints
/// between the order statistics flanking each quantile boundary.
/// Throws DataError when the labels cannot support num_bins bins.
BinningRule make_binning(const std::vector<double>& labels, int num_bins);

/// Bin index in [0, num_bins) for a label under the rule.
int apply_binning(const BinningRule& rule, double label);

/// CSV reader that one-hot encodes categorical feature columns with a
/// single encoding shared across files: scan() every input first (so the
/// encoding is fitted on the union), then load() each of them.
///
/// Format: UTF-8, comma separated, header row required, no quoting. A
/// column is numeric if its first scanned cell parses as a number;
/// categorical otherwise. Categories are one-hot encoded in first-appearance
/// order, expanded in place in column order.
class CsvLoader {
public:
    CsvLoader(std::string label_column, Task task);

    /// Reads the file, fixes the schema on first call and extends the
    /// category encodings. Throws DataError on malformed input.
    void scan(const std::string& path);

    /// Parses the file into samples using the scanned encoding, in file
    /// order. Requires at least one prior scan().
    std::vector<LabeledSample> load(const std::string& path) const;

    /// Expanded feature names (one per one-hot column).
    std::vector<std::string> feature_names() const;

    /// Category id for a classification label cell, if label encoding is
    /// by first appearance (non-integer labels).
    const std::map<std::string, int>& label_encoding() const { return label_codes_; }

private:
    struct Column {
        std::string name;
        bool is_label = false;
        bool numeric = true;
        std::vector<std::string> categories;  // first-appearance order
        std::map<std::string, int> category_index;
    };

    std::string label_column_;
    Task task_;
    bool scanned_ = false;
    std::vector<Column> columns_;
    bool integer_labels_ = true;  // classification: labels are their own ids
    std::vector<std::string> label_values_;  // first-appearance order
    std::map<std::string, int> label_codes_;
};

/// One-shot convenience: scan + load a single file.
std::vector<LabeledSample> load_csv(const std::string& path,
                                    const std::string& label_column, Task task);

/// Writes samples as CSV with columns x1..xd and the label column last.
/// Classification labels are written as integers. Values round-trip exactly.
void write_csv(const std::string& path, const std::vector<LabeledSample>& samples,
               Task task, const std::string& label_column = "y");

/// Pools source (origin 1) and target (origin 2) and splits uniformly at
/// random into train/test, driven only by the seed. The test set receives
/// round(test_fraction * n) rows. Throws ConfigError when the draw leaves
/// no train rows of either origin or fewer than two target test rows.
SplitDatasets augment_and_split(const std::vector<LabeledSample>& source,
                                const std::vector<LabeledSample>& target,
                                Task task, double test_fraction,
                                std::uint64_t seed);

}  // namespace driftkit
