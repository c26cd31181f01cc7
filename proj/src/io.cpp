#include "dynaprop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dynaprop {

ParseError::ParseError(const std::string &source, std::size_t line, const std::string &what)
    : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            fields.push_back(line.substr(start, i - start));
        }
    }
    return fields;
}

bool skip_line(std::string_view line) {
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string_view::npos || line[pos] == '#';
}

template <typename T>
T parse_number(std::string_view field, const std::string &source, std::size_t line,
               const char *what) {
    T value{};
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(source, line, std::string("bad ") + what + " '" + std::string(field) + "'");
    }
    return value;
}

NodeId parse_node(std::string_view field, const std::string &source, std::size_t line) {
    const auto id = parse_number<std::uint64_t>(field, source, line, "node id");
    if (id >= std::numeric_limits<NodeId>::max()) {
        throw ParseError(source, line, "node id out of range");
    }
    return static_cast<NodeId>(id);
}

double parse_weight(std::string_view field, const std::string &source, std::size_t line) {
    const double w = parse_number<double>(field, source, line, "weight");
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw ParseError(source, line, "weight must be positive and finite");
    }
    return w;
}

std::ifstream open_or_throw(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return in;
}

} // namespace

EventStreamReader::EventStreamReader(std::istream &in, std::string source)
    : in_(in), source_(std::move(source)) {}

std::optional<GraphEvent> EventStreamReader::read_event() {
    std::string line;
    while (std::getline(in_, line)) {
        ++lineno_;
        if (skip_line(line)) {
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 5) {
            throw ParseError(source_, lineno_,
                             "expected 5 fields (t op u v w), got " + std::to_string(f.size()));
        }
        GraphEvent ev;
        ev.time = parse_number<Timestamp>(f[0], source_, lineno_, "timestamp");
        if (f[1] == "+") {
            ev.kind = EventKind::AddEdge;
        } else if (f[1] == "-") {
            ev.kind = EventKind::DeleteEdge;
        } else {
            throw ParseError(source_, lineno_,
                             "op must be '+' or '-', got '" + std::string(f[1]) + "'");
        }
        ev.u = parse_node(f[2], source_, lineno_);
        ev.v = parse_node(f[3], source_, lineno_);
        if (ev.u == ev.v) {
            throw ParseError(source_, lineno_, "self-loop");
        }
        ev.weight = parse_weight(f[4], source_, lineno_);
        if (last_time_ && ev.time < *last_time_) {
            throw ParseError(source_, lineno_,
                             "time regression: " + std::to_string(ev.time) + " after " +
                                 std::to_string(*last_time_));
        }
        last_time_ = ev.time;
        return ev;
    }
    return std::nullopt;
}

std::optional<EventBatch> EventStreamReader::next() {
    if (!pending_) {
        pending_ = read_event();
        if (!pending_) {
            return std::nullopt;
        }
    }
    EventBatch batch{pending_->time, {*pending_}};
    pending_.reset();
    while (auto ev = read_event()) {
        if (ev->time != batch.time) {
            pending_ = ev;
            break;
        }
        batch.events.push_back(*ev);
    }
    return batch;
}

std::vector<EventBatch> parse_event_stream(std::istream &in, const std::string &source) {
    EventStreamReader reader(in, source);
    std::vector<EventBatch> batches;
    while (auto batch = reader.next()) {
        batches.push_back(std::move(*batch));
    }
    return batches;
}

std::vector<EventBatch> parse_event_stream(const std::filesystem::path &path) {
    auto in = open_or_throw(path);
    return parse_event_stream(in, path.string());
}

void write_event_stream(std::ostream &out, const std::vector<EventBatch> &batches) {
    out << std::setprecision(17);
    for (const auto &batch : batches) {
        for (const auto &ev : batch.events) {
            if (ev.kind == EventKind::AddNode) {
                continue; // implied by first appearance
            }
            out << ev.time << '\t' << (ev.kind == EventKind::AddEdge ? '+' : '-') << '\t' << ev.u
                << '\t' << ev.v << '\t' << ev.weight << '\n';
        }
    }
}

std::vector<WeightedEdge> parse_edge_list(std::istream &in, const std::string &source) {
    std::vector<WeightedEdge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) {
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 2 && f.size() != 3) {
            throw ParseError(source, lineno,
                             "expected 'u v [w]', got " + std::to_string(f.size()) + " fields");
        }
        WeightedEdge e{parse_node(f[0], source, lineno), parse_node(f[1], source, lineno), 1.0};
        if (e.u == e.v) {
            throw ParseError(source, lineno, "self-loop");
        }
        if (f.size() == 3) {
            e.weight = parse_weight(f[2], source, lineno);
        }
        edges.push_back(e);
    }
    return edges;
}

std::vector<WeightedEdge> parse_edge_list(const std::filesystem::path &path) {
    auto in = open_or_throw(path);
    return parse_edge_list(in, path.string());
}

void write_edge_list(std::ostream &out, const std::vector<WeightedEdge> &edges) {
    out << std::setprecision(17);
    for (const auto &e : edges) {
        out << e.u << '\t' << e.v << '\t' << e.weight << '\n';
    }
}

std::vector<Snapshot> parse_snapshots(const std::filesystem::path &dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw DataError(dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Snapshot> snapshots;
    snapshots.reserve(files.size());
    for (std::size_t k = 0; k < files.size(); ++k) {
        snapshots.push_back({static_cast<Timestamp>(k), parse_edge_list(files[k])});
    }
    return snapshots;
}

namespace {

constexpr char kFeatureMagic[8] = {'D', 'P', 'F', 'E', 'A', 'T', '0', '1'};

} // namespace

FeatureStore read_features(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    char magic[8];
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char *>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char *>(&cols), sizeof(cols));
    if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
        throw DataError(path.string() + " is not a dynaprop feature file");
    }
    FeatureStore store;
    store.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t s = 0; s < cols; ++s) {
            double v = 0.0;
            in.read(reinterpret_cast<char *>(&v), sizeof(v));
            store.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = v;
        }
    }
    if (!in) {
        throw DataError("truncated feature file " + path.string());
    }
    return store;
}

void write_features(const FeatureStore &features, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    const std::uint64_t rows = features.rows();
    const std::uint64_t cols = features.cols();
    out.write(kFeatureMagic, sizeof(kFeatureMagic));
    out.write(reinterpret_cast<const char *>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char *>(&cols), sizeof(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t s = 0; s < cols; ++s) {
            const double v =
                features.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
            out.write(reinterpret_cast<const char *>(&v), sizeof(v));
        }
    }
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

} // namespace dynaprop
