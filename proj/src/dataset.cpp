#include "neuroarm/dataset.hpp"

#include "binio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace neuroarm::data {

namespace {

bool parse_double_field(const std::string& field, double& out) {
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_index_field(const std::string& field, std::uint64_t& out) {
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

/// Deterministic in-place Fisher-Yates; std::shuffle is not pinned by the
/// standard, bounded_rand is.
template <typename T>
void shuffle_inplace(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded_rand(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out = x;
    out.rowwise() -= mean.transpose();
    out.array().rowwise() /= std.transpose().array();
    return out;
}

Eigen::Vector3d one_hot(ActionLabel label) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    v[static_cast<int>(label)] = 1.0;
    return v;
}

void append_records(const std::string& path, const std::vector<LabeledRecord>& records) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open for append: " + path);
    for (const auto& r : records) {
        out << r.index;
        for (double f : r.features) out << ',' << format_sig9(f);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<LabeledRecord> load_action_file(const std::string& path, ActionLabel label) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<LabeledRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (fields.size() != 1 + kFeatureDim)
            throw IoError(path + ": line " + std::to_string(line_no) + ": expected " +
                          std::to_string(1 + kFeatureDim) + " fields, got " +
                          std::to_string(fields.size()));
        LabeledRecord r;
        r.label = label;
        if (!parse_index_field(fields[0], r.index))
            throw IoError(path + ": line " + std::to_string(line_no) + ": bad index field");
        for (int i = 0; i < kFeatureDim; ++i) {
            if (!parse_double_field(fields[static_cast<std::size_t>(i) + 1],
                                    r.features[static_cast<std::size_t>(i)]))
                throw IoError(path + ": line " + std::to_string(line_no) + ": bad feature " +
                              std::to_string(i + 1));
        }
        records.push_back(r);
    }
    return records;
}

std::pair<Eigen::MatrixXd, Standardizer> standardize(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw ConfigError("standardize needs at least 2 rows");

    Standardizer st;
    st.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - st.mean.transpose();
    st.std = (centered.array().square().colwise().sum() / static_cast<double>(n)).sqrt();

    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (st.std[c] <= 0.0) {
            st.degenerate_cols.push_back(static_cast<int>(c));
            st.std[c] = 1.0;
        }
    }
    Eigen::MatrixXd out = centered;
    out.array().rowwise() /= st.std.transpose().array();
    return {std::move(out), std::move(st)};
}

std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
    // Rejection sampling removes modulo bias and keeps the draw portable.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

std::vector<WindowTensor> segment_dataset(const Eigen::MatrixXd& x,
                                          const std::vector<ActionLabel>& y, int win_size,
                                          std::uint64_t seed, SegmentMode mode) {
    if (win_size < 4) throw ConfigError("win_size must be >= 4");
    if (x.cols() != kFeatureDim) throw ConfigError("expected 20 feature columns");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw ConfigError("label count must match row count");

    const Eigen::Index n = x.rows();
    const int max_overlap = win_size / 2;
    const int min_overlap = std::min(20, win_size / 4);

    std::mt19937_64 rng(seed);
    std::vector<WindowTensor> windows;
    Eigen::Index start = 0;
    while (start + win_size <= n) {
        WindowTensor w;
        w.data = x.middleRows(start, win_size);
        w.label = y[static_cast<std::size_t>(start)];
        windows.push_back(std::move(w));

        int step = win_size;
        if (mode == SegmentMode::RandomOverlap) {
            const int overlap =
                min_overlap + static_cast<int>(bounded_rand(
                                  rng, static_cast<std::uint64_t>(max_overlap - min_overlap) + 1));
            step = win_size - overlap;
        }
        start += step;
    }
    return windows;
}

SplitDataset build_split(const std::map<std::string, ActionLabel>& files, int win_size,
                         double test_fraction, std::uint64_t seed, SegmentMode mode) {
    if (files.empty()) throw ConfigError("no input files");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must be in [0, 1)");

    std::array<bool, kNumActions> present{};
    for (const auto& [path, label] : files) present[static_cast<std::size_t>(label)] = true;
    for (int a = 0; a < kNumActions; ++a)
        if (!present[static_cast<std::size_t>(a)])
            throw StratificationError(std::string("no input file for class ") +
                                      action_name(static_cast<ActionLabel>(a)));

    // Load per class, in path order inside each class so reruns agree.
    std::array<std::vector<LabeledRecord>, kNumActions> by_class;
    for (const auto& [path, label] : files) {
        auto records = load_action_file(path, label);
        auto& dst = by_class[static_cast<std::size_t>(label)];
        dst.insert(dst.end(), records.begin(), records.end());
    }

    std::size_t total = 0;
    for (const auto& v : by_class) total += v.size();
    if (total < 2) throw ConfigError("not enough rows to standardize");

    // Statistics come from the combined rows of every class, before any
    // windowing, and are stored for inference-time reuse.
    Eigen::MatrixXd combined(static_cast<Eigen::Index>(total), kFeatureDim);
    Eigen::Index row = 0;
    for (const auto& v : by_class)
        for (const auto& r : v) {
            for (int i = 0; i < kFeatureDim; ++i)
                combined(row, i) = r.features[static_cast<std::size_t>(i)];
            ++row;
        }
    auto [scaled, st] = standardize(combined);

    SplitDataset ds;
    ds.standardizer = std::move(st);
    ds.win_size = win_size;

    // Segment each action's block with its own derived seed, so the split
    // does not depend on the order classes are processed in, then carve
    // the test fraction off inside each class (stratified) before pooling.
    std::vector<WindowTensor> train, test;
    Eigen::Index offset = 0;
    for (int a = 0; a < kNumActions; ++a) {
        const auto n = static_cast<Eigen::Index>(by_class[static_cast<std::size_t>(a)].size());
        const ActionLabel label = static_cast<ActionLabel>(a);
        const std::vector<ActionLabel> y(static_cast<std::size_t>(n), label);
        auto cls = segment_dataset(scaled.middleRows(offset, n), y, win_size,
                                   derive_seed(seed, static_cast<std::uint64_t>(a)), mode);
        offset += n;
        shuffle_inplace(cls, derive_seed(seed, 100 + static_cast<std::uint64_t>(a)));
        const auto n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(cls.size())));
        if (n_test == 0 || n_test >= cls.size())
            throw StratificationError(std::string("class ") + action_name(label) +
                                      " missing from train or test after split");
        for (std::size_t i = 0; i < cls.size(); ++i)
            (i < n_test ? test : train).push_back(std::move(cls[i]));
    }
    shuffle_inplace(train, derive_seed(seed, 200));
    shuffle_inplace(test, derive_seed(seed, 201));

    ds.train = std::move(train);
    ds.test = std::move(test);
    ds.train_one_hot.reserve(ds.train.size());
    for (const auto& w : ds.train) ds.train_one_hot.push_back(one_hot(w.label));
    ds.test_one_hot.reserve(ds.test.size());
    for (const auto& w : ds.test) ds.test_one_hot.push_back(one_hot(w.label));
    return ds;
}

// ---- binary container ----

namespace {

using binio::read_matrix;
using binio::read_u32;
using binio::write_matrix;
using binio::write_u32;

constexpr char kSplitMagic[8] = {'N', 'A', 'R', 'M', 'D', 'S', '1', '\n'};

void write_windows(std::ostream& out, const std::vector<WindowTensor>& ws) {
    write_u32(out, static_cast<std::uint32_t>(ws.size()));
    for (const auto& w : ws) {
        write_u32(out, static_cast<std::uint32_t>(w.label));
        write_matrix(out, w.data);
    }
}

std::vector<WindowTensor> read_windows(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::vector<WindowTensor> ws(n);
    for (auto& w : ws) {
        w.label = static_cast<ActionLabel>(read_u32(in));
        w.data = read_matrix(in);
    }
    return ws;
}

}  // namespace

void save_split(const std::string& path, const SplitDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kSplitMagic, sizeof kSplitMagic);
    write_u32(out, static_cast<std::uint32_t>(ds.win_size));
    write_matrix(out, ds.standardizer.mean);
    write_matrix(out, ds.standardizer.std);
    write_u32(out, static_cast<std::uint32_t>(ds.standardizer.degenerate_cols.size()));
    for (int c : ds.standardizer.degenerate_cols) write_u32(out, static_cast<std::uint32_t>(c));
    write_windows(out, ds.train);
    write_windows(out, ds.test);
    if (!out) throw IoError("write failed: " + path);
}

SplitDataset load_split(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kSplitMagic))
        throw IoError("not a split container: " + path);
    SplitDataset ds;
    ds.win_size = static_cast<int>(read_u32(in));
    ds.standardizer.mean = read_matrix(in);
    ds.standardizer.std = read_matrix(in);
    const std::uint32_t ndeg = read_u32(in);
    for (std::uint32_t i = 0; i < ndeg; ++i)
        ds.standardizer.degenerate_cols.push_back(static_cast<int>(read_u32(in)));
    ds.train = read_windows(in);
    ds.test = read_windows(in);
    if (!in) throw IoError("truncated split container: " + path);
    for (const auto& w : ds.train) ds.train_one_hot.push_back(one_hot(w.label));
    for (const auto& w : ds.test) ds.test_one_hot.push_back(one_hot(w.label));
    return ds;
}

}  // namespace neuroarm::data
