#include "dnc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dnc/errors.hpp"

namespace dnc {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::size_t parse_label(const std::string& s, std::size_t line_no, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("line " + std::to_string(line_no) + ": " + what + " '" + s +
                        "' is not a non-negative integer");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t LabeledDataset::num_classes() const {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.inputs = Matrix(0, inputs.cols());
    out.label_names = label_names;
    if (fine_labels) out.fine_labels.emplace();
    for (auto r : rows) {
        if (r >= size()) throw DataError("dataset: row " + std::to_string(r) + " out of range");
        out.inputs.push_row(inputs.row(r));
        out.labels.push_back(labels[r]);
        if (fine_labels) out.fine_labels->push_back((*fine_labels)[r]);
    }
    return out;
}

void LabeledDataset::validate() const {
    if (inputs.rows() != labels.size())
        throw DataError("dataset: " + std::to_string(inputs.rows()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
    if (fine_labels && fine_labels->size() != labels.size())
        throw DataError("dataset: fine label count does not match");
    if (!all_finite(inputs.data())) throw DataError("dataset: non-finite input value");
}

LabeledDataset parse_csv(const std::string& text) {
    LabeledDataset out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    bool has_fine = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const std::string body = trim(std::string_view(t).substr(1));
            const std::string key = "label_names=";
            if (body.rfind(key, 0) == 0) out.label_names = split_cells(body.substr(key.size()));
            continue;
        }
        auto cells = split_cells(t);
        if (first_data_line) {
            first_data_line = false;
            if (!parse_double(cells.front())) {
                has_fine = cells.size() > 1 && cells[1] == "fine_label";
                width = cells.size();
                continue;
            }
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(width) + " columns, found " +
                            std::to_string(cells.size()));
        const std::size_t lead = has_fine ? 2 : 1;
        if (cells.size() <= lead)
            throw DataError("line " + std::to_string(line_no) + ": no feature columns");
        out.labels.push_back(parse_label(cells[0], line_no, "label"));
        if (has_fine) {
            if (!out.fine_labels) out.fine_labels.emplace();
            out.fine_labels->push_back(parse_label(cells[1], line_no, "fine label"));
        }
        Vector row;
        for (std::size_t i = lead; i < cells.size(); ++i) {
            const auto v = parse_double(cells[i]);
            if (!v)
                throw DataError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                                cells[i] + "'");
            row.push_back(*v);
        }
        out.inputs.push_row(row);
    }
    if (out.labels.empty()) throw DataError("dataset is empty");
    return out;
}

LabeledDataset load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open dataset '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

std::string format_csv(const LabeledDataset& data) {
    data.validate();
    std::ostringstream out;
    if (!data.label_names.empty()) {
        out << "# label_names=";
        for (std::size_t i = 0; i < data.label_names.size(); ++i)
            out << (i ? "," : "") << data.label_names[i];
        out << '\n';
    }
    out << "label";
    if (data.fine_labels) out << ",fine_label";
    for (std::size_t j = 0; j < data.input_dim(); ++j) out << ",x" << j;
    out << '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        out << data.labels[r];
        if (data.fine_labels) out << ',' << (*data.fine_labels)[r];
        for (double v : data.inputs.row(r)) out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

void save_csv(const std::string& path, const LabeledDataset& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write dataset '" + path + "'");
    f << format_csv(data);
    if (!f) throw DataError("failed writing dataset '" + path + "'");
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.classes == 0 || spec.subclusters == 0 || spec.dim == 0 || spec.per_cluster == 0)
        throw ConfigError("gen_synthetic: counts must be positive");
    if (!(spec.sigma >= 0.0)) throw ConfigError("gen_synthetic: sigma must be non-negative");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t groups = spec.classes * spec.subclusters;
    Matrix centers(groups, spec.dim);
    for (std::size_t g = 0; g < groups; ++g) {
        do {
            for (double& v : centers.row(g)) v = normal(rng);
        } while (!(l2_norm(centers.row(g)) > 0.0));
    }
    l2_normalize_rows(centers);

    LabeledDataset out;
    out.inputs = Matrix(groups * spec.per_cluster, spec.dim);
    out.fine_labels.emplace();
    std::size_t r = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t i = 0; i < spec.per_cluster; ++i, ++r) {
            auto row = out.inputs.row(r);
            const auto center = centers.row(g);
            for (std::size_t j = 0; j < spec.dim; ++j) row[j] = center[j] + spec.sigma * normal(rng);
            out.labels.push_back(g / spec.subclusters);
            out.fine_labels->push_back(g);
        }
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& data,
                                                           double test_fraction) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("split: test fraction must lie in [0, 1)");
    const auto& groups = data.fine_labels ? *data.fine_labels : data.labels;
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t r = 0; r < data.size(); ++r) members[groups[r]].push_back(r);
    std::vector<std::size_t> train_rows, test_rows;
    std::vector<bool> is_test(data.size(), false);
    for (const auto& [g, rows] : members) {
        const auto n_test =
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
        for (std::size_t i = rows.size() - n_test; i < rows.size(); ++i) is_test[rows[i]] = true;
    }
    for (std::size_t r = 0; r < data.size(); ++r) (is_test[r] ? test_rows : train_rows).push_back(r);
    return {data.select(train_rows), data.select(test_rows)};
}

}  // namespace dnc
