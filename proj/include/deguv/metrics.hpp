#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace deguv {

// Shortest round-trip decimal for a float32 value; integers print bare.
// One formatter everywhere keeps CSV output byte-stable across runs.
std::string csv_num(double v);

// Append-only CSV with a fixed column set. The header goes out on open and
// every row is flushed, so an interrupted run leaves a readable file.
class MetricsWriter {
public:
    MetricsWriter(const std::string& path, const std::vector<std::string>& columns);

    void row(const std::vector<double>& values);  // size must match columns
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::size_t n_cols_;
    std::ofstream file_;
};

const std::vector<std::string>& update_metric_columns();
const std::vector<std::string>& episode_metric_columns();

}  // namespace deguv
