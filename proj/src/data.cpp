#include "driftkit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "driftkit/errors.hpp"

namespace driftkit {

std::string to_string(Task task) {
    return task == Task::kClassification ? "classification" : "regression";
}

std::string to_string(Hypothesis h) {
    switch (h) {
        case Hypothesis::kTotalD: return "D";
        case Hypothesis::kFeatureF: return "F";
        case Hypothesis::kResponseR: return "R";
        case Hypothesis::kCond1: return "C1";
        case Hypothesis::kCond2: return "C2";
    }
    return "?";
}

Task task_from_string(const std::string& name) {
    if (name == "classification") return Task::kClassification;
    if (name == "regression") return Task::kRegression;
    throw ConfigError("unknown task '" + name + "' (expected classification or regression)");
}

Hypothesis hypothesis_from_string(const std::string& name) {
    if (name == "D") return Hypothesis::kTotalD;
    if (name == "F") return Hypothesis::kFeatureF;
    if (name == "R") return Hypothesis::kResponseR;
    if (name == "C1") return Hypothesis::kCond1;
    if (name == "C2") return Hypothesis::kCond2;
    throw ConfigError("unknown hypothesis '" + name + "' (expected D, F, R, C1 or C2)");
}

std::size_t AugmentedDataset::count_origin(int origin) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(),
                      [origin](const AugmentedRow& r) { return r.origin == origin; }));
}

AugmentedDataset AugmentedDataset::subset_origin(int origin) const {
    AugmentedDataset out;
    out.task = task;
    for (const auto& row : rows) {
        if (row.origin == origin) out.rows.push_back(row);
    }
    return out;
}

std::vector<int> AugmentedDataset::labels_of_origin(int origin) const {
    std::vector<int> labels;
    for (const auto& row : rows) {
        if (row.origin == origin) {
            labels.push_back(static_cast<int>(std::lround(row.sample.label)));
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

BinningRule make_binning(const std::vector<double>& labels, int num_bins) {
    if (num_bins < 2) {
        throw ConfigError("num_bins must be >= 2");
    }
    if (labels.empty()) {
        throw DataError("cannot bin an empty label vector");
    }
    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());

    std::size_t distinct = 1;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        distinct += (sorted[i] != sorted[i - 1]);
    }
    if (distinct < static_cast<std::size_t>(num_bins)) {
        throw DataError("only " + std::to_string(distinct) +
                        " distinct label values for " + std::to_string(num_bins) +
                        " bins; use fewer bins");
    }
    const std::size_t n = sorted.size();

    BinningRule rule;
    rule.num_bins = num_bins;
    rule.cut_points.reserve(static_cast<std::size_t>(num_bins) - 1);
    for (int k = 1; k < num_bins; ++k) {
        const std::size_t idx = n * static_cast<std::size_t>(k) /
                                static_cast<std::size_t>(num_bins);
        // Midpoint between the order statistics flanking the quantile.
        const double lo = sorted[idx == 0 ? 0 : idx - 1];
        const double hi = sorted[idx];
        rule.cut_points.push_back(0.5 * (lo + hi));
    }
    for (std::size_t i = 1; i < rule.cut_points.size(); ++i) {
        if (!(rule.cut_points[i - 1] < rule.cut_points[i])) {
            throw DataError("quantile cut points collide (heavy label ties); use fewer bins");
        }
    }
    return rule;
}

int apply_binning(const BinningRule& rule, double label) {
    // Count of cut points <= label: a label equal to a cut point belongs to
    // the upper bin (half-open intervals), the last bin is closed above.
    const auto it = std::upper_bound(rule.cut_points.begin(), rule.cut_points.end(), label);
    return static_cast<int>(std::distance(rule.cut_points.begin(), it));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

std::optional<double> parse_double(const std::string& cell) {
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    double value = 0.0;
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc{} || result.ptr != end || cell.empty()) {
        return std::nullopt;
    }
    return value;
}

std::string cell_ref(const std::string& path, std::size_t row, const std::string& column) {
    return path + ": row " + std::to_string(row) + ", column '" + column + "'";
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

void format_double(std::string& out, double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, res.ptr);
}

}  // namespace

CsvLoader::CsvLoader(std::string label_column, Task task)
    : label_column_(std::move(label_column)), task_(task) {}

void CsvLoader::scan(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.size() < 2) {
        throw DataError("'" + path + "' has no data rows");
    }
    const auto header = split_line(lines[0]);

    if (!scanned_) {
        bool found_label = false;
        for (const auto& name : header) {
            Column col;
            col.name = name;
            col.is_label = (name == label_column_);
            found_label = found_label || col.is_label;
            columns_.push_back(std::move(col));
        }
        if (!found_label) {
            throw DataError("label column '" + label_column_ + "' not found in '" + path + "'");
        }
        // Column types come from the first data row of the first file.
        const auto first = split_line(lines[1]);
        if (first.size() != columns_.size()) {
            throw DataError(path + ": row 1 has " + std::to_string(first.size()) +
                            " cells, header has " + std::to_string(columns_.size()));
        }
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            columns_[c].numeric = parse_double(first[c]).has_value();
        }
        scanned_ = true;
    } else {
        if (header.size() != columns_.size()) {
            throw DataError("'" + path + "' header does not match previously scanned schema");
        }
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (header[c] != columns_[c].name) {
                throw DataError("'" + path + "' column " + std::to_string(c) +
                                " is '" + header[c] + "', expected '" + columns_[c].name + "'");
            }
        }
    }

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_line(lines[r]);
        if (cells.size() != columns_.size()) {
            throw DataError(path + ": row " + std::to_string(r) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(columns_.size()));
        }
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            Column& col = columns_[c];
            const std::string& cell = cells[c];
            if (cell.empty()) {
                throw DataError("empty cell at " + cell_ref(path, r, col.name));
            }
            if (col.is_label) {
                const auto value = parse_double(cell);
                if (task_ == Task::kRegression) {
                    if (!value) {
                        throw DataError("non-numeric label at " + cell_ref(path, r, col.name));
                    }
                    if (!std::isfinite(*value)) {
                        throw DataError("non-finite label at " + cell_ref(path, r, col.name));
                    }
                } else {
                    // Integer-valued labels keep their own value as the
                    // category id; anything else is encoded by first
                    // appearance across all scanned files.
                    if (!value || *value != std::floor(*value) || !std::isfinite(*value)) {
                        integer_labels_ = false;
                    }
                    if (!label_codes_.count(cell)) {
                        label_codes_[cell] = static_cast<int>(label_values_.size());
                        label_values_.push_back(cell);
                    }
                }
                continue;
            }
            if (col.numeric) {
                const auto value = parse_double(cell);
                if (!value) {
                    throw DataError("non-numeric cell at " + cell_ref(path, r, col.name));
                }
                if (!std::isfinite(*value)) {
                    throw DataError("non-finite cell at " + cell_ref(path, r, col.name));
                }
            } else if (!col.category_index.count(cell)) {
                col.category_index[cell] = static_cast<int>(col.categories.size());
                col.categories.push_back(cell);
            }
        }
    }
}

std::vector<LabeledSample> CsvLoader::load(const std::string& path) const {
    if (!scanned_) {
        throw UsageError("CsvLoader::load called before scan");
    }
    const auto lines = read_lines(path);
    if (lines.size() < 2) {
        throw DataError("'" + path + "' has no data rows");
    }

    std::vector<LabeledSample> samples;
    samples.reserve(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_line(lines[r]);
        if (cells.size() != columns_.size()) {
            throw DataError(path + ": row " + std::to_string(r) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(columns_.size()));
        }
        LabeledSample sample;
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            const Column& col = columns_[c];
            const std::string& cell = cells[c];
            if (col.is_label) {
                if (task_ == Task::kRegression || integer_labels_) {
                    const auto value = parse_double(cell);
                    if (!value || !std::isfinite(*value)) {
                        throw DataError("bad label at " + cell_ref(path, r, col.name));
                    }
                    sample.label = *value;
                } else {
                    const auto it = label_codes_.find(cell);
                    if (it == label_codes_.end()) {
                        throw DataError("label '" + cell + "' at " + cell_ref(path, r, col.name) +
                                        " was not seen during scanning");
                    }
                    sample.label = it->second;
                }
                continue;
            }
            if (col.numeric) {
                const auto value = parse_double(cell);
                if (!value || !std::isfinite(*value)) {
                    throw DataError("non-numeric cell at " + cell_ref(path, r, col.name));
                }
                sample.features.push_back(*value);
            } else {
                const auto it = col.category_index.find(cell);
                if (it == col.category_index.end()) {
                    throw DataError("category '" + cell + "' at " + cell_ref(path, r, col.name) +
                                    " was not seen during scanning");
                }
                for (std::size_t k = 0; k < col.categories.size(); ++k) {
                    sample.features.push_back(k == static_cast<std::size_t>(it->second) ? 1.0
                                                                                        : 0.0);
                }
            }
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<std::string> CsvLoader::feature_names() const {
    std::vector<std::string> names;
    for (const auto& col : columns_) {
        if (col.is_label) continue;
        if (col.numeric) {
            names.push_back(col.name);
        } else {
            for (const auto& cat : col.categories) {
                names.push_back(col.name + "=" + cat);
            }
        }
    }
    return names;
}

std::vector<LabeledSample> load_csv(const std::string& path,
                                    const std::string& label_column, Task task) {
    CsvLoader loader(label_column, task);
    loader.scan(path);
    return loader.load(path);
}

void write_csv(const std::string& path, const std::vector<LabeledSample>& samples,
               Task task, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    const std::size_t dim = samples.empty() ? 0 : samples.front().features.size();
    std::string line;
    for (std::size_t c = 0; c < dim; ++c) {
        line += "x" + std::to_string(c + 1) + ",";
    }
    line += label_column;
    out << line << '\n';
    for (const auto& sample : samples) {
        line.clear();
        for (double v : sample.features) {
            format_double(line, v);
            line.push_back(',');
        }
        if (task == Task::kClassification) {
            line += std::to_string(static_cast<long long>(std::llround(sample.label)));
        } else {
            format_double(line, sample.label);
        }
        out << line << '\n';
    }
    if (!out) {
        throw DataError("error while writing '" + path + "'");
    }
}

// ---------------------------------------------------------------------------
// Augment + split
// ---------------------------------------------------------------------------

SplitDatasets augment_and_split(const std::vector<LabeledSample>& source,
                                const std::vector<LabeledSample>& target,
                                Task task, double test_fraction,
                                std::uint64_t seed) {
    if (source.empty() || target.empty()) {
        throw ConfigError("source and target must both be non-empty");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
    const std::size_t dim = source.front().features.size();
    for (const auto* samples : {&source, &target}) {
        for (const auto& s : *samples) {
            if (s.features.size() != dim) {
                throw DataError("inconsistent feature dimensions across samples");
            }
        }
    }

    AugmentedDataset pool;
    pool.task = task;
    pool.rows.reserve(source.size() + target.size());
    for (const auto& s : source) pool.rows.push_back({s, 1});
    for (const auto& s : target) pool.rows.push_back({s, 2});

    const std::size_t n = pool.rows.size();
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    shuffle(order, rng);

    SplitDatasets split;
    split.train.task = task;
    split.test.task = task;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dest = (i < n_test) ? split.test : split.train;
        dest.rows.push_back(pool.rows[order[i]]);
    }
    split.n_tr_1 = split.train.count_origin(1);
    split.n_tr_2 = split.train.count_origin(2);

    if (split.n_tr_1 == 0 || split.n_tr_2 == 0) {
        throw ConfigError("split left a training set without both populations; "
                          "adjust test_fraction or sample sizes");
    }
    if (split.test.count_origin(2) < 2) {
        throw ConfigError("split left fewer than two target rows in the test set; "
                          "adjust test_fraction or sample sizes");
    }
    return split;
}

}  // namespace driftkit
