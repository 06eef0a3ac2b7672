#include "deguv/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "deguv/common.hpp"

namespace deguv {

std::string csv_num(double v) {
    if (v == std::floor(v) && std::fabs(v) < 9.0e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

MetricsWriter::MetricsWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), n_cols_(columns.size()), file_(path, std::ios::binary) {
    if (!file_) throw IoError("cannot open metrics file: " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) file_ << ',';
        file_ << columns[i];
    }
    file_ << '\n';
    file_.flush();
}

void MetricsWriter::row(const std::vector<double>& values) {
    if (values.size() != n_cols_)
        throw ProtocolError("metrics row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) file_ << ',';
        file_ << csv_num(values[i]);
    }
    file_ << '\n';
    file_.flush();
    if (!file_) throw IoError("metrics write failed: " + path_);
}

const std::vector<std::string>& update_metric_columns() {
    static const std::vector<std::string> cols = {
        "step",   "update",        "actor_loss",    "critic_loss",
        "aux_loss", "entropy_coef", "mean_q",        "mean_log_prob",
        "batch_reward", "reveal_mean", "reveal_thresholded", "aux_ran"};
    return cols;
}

const std::vector<std::string>& episode_metric_columns() {
    static const std::vector<std::string> cols = {"step", "episode", "return", "length"};
    return cols;
}

}  // namespace deguv
