#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deguv/common.hpp"
#include "deguv/metrics.hpp"
#include "deguv/png.hpp"

using namespace deguv;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

}  // namespace

TEST_CASE("integers print bare and floats round-trip through the formatter") {
    CHECK(csv_num(0.0) == "0");
    CHECK(csv_num(3.0) == "3");
    CHECK(csv_num(-7.0) == "-7");
    CHECK(csv_num(123456789.0) == "123456789");
    CHECK(csv_num(0.5) == "0.5");
    CHECK(csv_num(-0.25) == "-0.25");
    CHECK(csv_num(1e20) == "1e+20");  // too wide for the bare-integer path

    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        float x = float(rng.normal()) * float(std::pow(10.0, rng.uniform(-6.0, 6.0)));
        std::string s = csv_num(double(x));
        CHECK(std::strtof(s.c_str(), nullptr) == x);
    }
}

TEST_CASE("the metrics writer emits a header and flushes one line per row") {
    const std::string path = "/tmp/deguv_metrics_test.csv";
    {
        MetricsWriter w(path, {"step", "loss", "flag"});
        CHECK(read_file(path) == "step,loss,flag\n");  // header lands before any row
        w.row({10.0, 0.5, 1.0});
        CHECK(read_file(path) == "step,loss,flag\n10,0.5,1\n");  // flushed immediately
        w.row({20.0, double(0.1f), 0.0});
        CHECK_THROWS_AS(w.row({1.0, 2.0}), ProtocolError);
    }
    std::string body = read_file(path);
    std::remove(path.c_str());
    CHECK(body == "step,loss,flag\n10,0.5,1\n20,0.100000001,0\n");

    CHECK_THROWS_AS(MetricsWriter("/no/such/dir/metrics.csv", {"a"}), IoError);
}

TEST_CASE("the canonical column sets stay in their documented order") {
    CHECK(update_metric_columns() ==
          std::vector<std::string>{"step", "update", "actor_loss", "critic_loss", "aux_loss",
                                   "entropy_coef", "mean_q", "mean_log_prob", "batch_reward",
                                   "reveal_mean", "reveal_thresholded", "aux_ran"});
    CHECK(episode_metric_columns() ==
          std::vector<std::string>{"step", "episode", "return", "length"});
}

TEST_CASE("encoded PNGs carry the exact pixels under standard structure") {
    const int h = 5, w = 7;
    std::vector<std::uint8_t> px(std::size_t(h) * w * 3);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::uint8_t((i * 37 + 11) & 0xff);

    std::vector<std::uint8_t> png = encode_png(px.data(), h, w, 3);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(png.size() > 45);
    CHECK(std::memcmp(png.data(), sig, 8) == 0);

    // IHDR: length 13, type, then width/height big-endian
    CHECK(be32(png.data() + 8) == 13);
    CHECK(std::memcmp(png.data() + 12, "IHDR", 4) == 0);
    CHECK(be32(png.data() + 16) == std::uint32_t(w));
    CHECK(be32(png.data() + 20) == std::uint32_t(h));
    CHECK(png[24] == 8);  // bit depth
    CHECK(png[25] == 2);  // truecolor
    CHECK(std::memcmp(png.data() + png.size() - 8, "IEND", 4) == 0);

    // walk the chunks, gather the IDAT payload, then undo zlib and filter 0
    std::vector<std::uint8_t> idat;
    std::size_t off = 8;
    while (off + 8 <= png.size()) {
        std::uint32_t len = be32(png.data() + off);
        std::string type(reinterpret_cast<const char*>(png.data() + off + 4), 4);
        std::uint32_t crc =
            ::crc32(::crc32(0, png.data() + off + 4, 4), png.data() + off + 8, len);
        CHECK(crc == be32(png.data() + off + 8 + len));
        if (type == "IDAT")
            idat.insert(idat.end(), png.begin() + long(off) + 8, png.begin() + long(off) + 8 + len);
        off += 12 + len;
    }
    CHECK(off == png.size());

    std::vector<std::uint8_t> raw(std::size_t(h) * (std::size_t(w) * 3 + 1));
    uLongf raw_len = uLongf(raw.size());
    REQUIRE(::uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) == Z_OK);
    REQUIRE(raw_len == raw.size());
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* line = raw.data() + std::size_t(y) * (std::size_t(w) * 3 + 1);
        CHECK(line[0] == 0);  // filter byte
        CHECK(std::memcmp(line + 1, px.data() + std::size_t(y) * w * 3, std::size_t(w) * 3) == 0);
    }
}

TEST_CASE("grayscale output and argument validation") {
    std::vector<std::uint8_t> px(16, 200);
    std::vector<std::uint8_t> png = encode_png(px.data(), 4, 4, 1);
    CHECK(png[25] == 0);  // grayscale color type

    CHECK_THROWS_AS(encode_png(px.data(), 4, 4, 2), DataError);
    CHECK_THROWS_AS(encode_png(px.data(), 0, 4, 1), DataError);
    CHECK_THROWS_AS(write_png("/no/such/dir/x.png", px.data(), 4, 4, 1), IoError);

    const std::string path = "/tmp/deguv_png_test.png";
    write_png(path, px.data(), 4, 4, 1);
    std::string body = read_file(path);
    std::remove(path.c_str());
    CHECK(body.size() == png.size());
    CHECK(std::memcmp(body.data(), png.data(), png.size()) == 0);
}
