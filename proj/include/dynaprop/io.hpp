#pragma once

#include "dynaprop/embedding_engine.hpp"
#include "dynaprop/graph_store.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dynaprop {

/// Input file problem, reported with its location.
class ParseError : public DataError {
public:
    ParseError(const std::string &source, std::size_t line, const std::string &what);

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Reads an event stream one timestamp batch at a time, so input can be
/// processed while it is still arriving. Same format and errors as
/// parse_event_stream.
class EventStreamReader {
public:
    explicit EventStreamReader(std::istream &in, std::string source = "<stream>");

    /// Next batch, or nullopt at end of input.
    std::optional<EventBatch> next();

    [[nodiscard]] std::size_t line() const noexcept { return lineno_; }

private:
    std::optional<GraphEvent> read_event();

    std::istream &in_;
    std::string source_;
    std::size_t lineno_ = 0;
    std::optional<GraphEvent> pending_;
    std::optional<Timestamp> last_time_;
};

/// Event stream: one `t op u v w` record per line (tab or space separated),
/// op is `+` or `-`. Blank lines and `#` comments are skipped. Records are
/// grouped into batches by timestamp; timestamps must not decrease.
std::vector<EventBatch> parse_event_stream(std::istream &in, const std::string &source = "<stream>");
std::vector<EventBatch> parse_event_stream(const std::filesystem::path &path);

void write_event_stream(std::ostream &out, const std::vector<EventBatch> &batches);

/// Edge list: `u v w` per line, `w` optional (defaults to 1).
std::vector<WeightedEdge> parse_edge_list(std::istream &in, const std::string &source = "<edges>");
std::vector<WeightedEdge> parse_edge_list(const std::filesystem::path &path);

void write_edge_list(std::ostream &out, const std::vector<WeightedEdge> &edges);

/// Every regular file in `dir`, in lexicographic order, as snapshots with
/// time = position in that order.
std::vector<Snapshot> parse_snapshots(const std::filesystem::path &dir);

/// Feature matrix file: "DPFEAT01", u64 rows, u64 cols, rows x cols f64
/// row-major, little-endian.
FeatureStore read_features(const std::filesystem::path &path);
void write_features(const FeatureStore &features, const std::filesystem::path &path);

} // namespace dynaprop
