#include <doctest.h>

#include "heurnet/data/checkpoint.hpp"
#include "heurnet/data/csv.hpp"
#include "heurnet/data/fetch.hpp"
#include "heurnet/data/idx.hpp"
#include "heurnet/data/polydata.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using heurnet::Shape;
using heurnet::Tensor;
namespace data = heurnet::data;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u32(Bytes& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

Bytes idx_file(std::uint32_t magic, std::vector<std::uint32_t> dims, Bytes payload) {
    Bytes b;
    put_u32(b, magic);
    for (auto d : dims) put_u32(b, d);
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("heurnet-test-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

Bytes read_all(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return Bytes(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("parse_idx examples") {
    auto img = data::parse_idx(idx_file(0x803, {1, 2, 2}, {0, 255, 128, 0}));
    Tensor t = data::idx_images(img);
    CHECK(t.shape() == Shape{1, 2, 2});
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 1.0);
    CHECK(t[2] == 128.0 / 255.0);
    CHECK(t[3] == 0.0);

    auto lab = data::parse_idx(idx_file(0x801, {3}, {5, 0, 4}));
    CHECK(data::idx_labels(lab) == std::vector<int>{5, 0, 4});

    CHECK_THROWS_AS(data::parse_idx(idx_file(0x802, {1, 2, 2}, {0, 0, 0, 0})), data::IdxError);
    CHECK_THROWS_AS(data::parse_idx(idx_file(0x803, {1, 2, 2}, {0, 0, 0})), data::IdxError);
    CHECK_THROWS_AS(data::parse_idx(idx_file(0x803, {1, 2, 2}, {0, 0, 0, 0, 0})), data::IdxError);
    CHECK_THROWS_AS(data::parse_idx(idx_file(0x803, {0xffffffffu, 0xffffffffu, 0xffffffffu}, {})), data::IdxError);
    CHECK_THROWS_AS(data::parse_idx(Bytes{0, 0, 8}), data::IdxError);
    CHECK_THROWS_AS(data::idx_labels(img), data::IdxError);

    auto set = data::make_labeled(img, data::parse_idx(idx_file(0x801, {1}, {7})), "unit");
    CHECK(set.size() == 1);
    CHECK(set.height() == 2);
    CHECK(set.labels[0] == 7);
    CHECK_THROWS(data::make_labeled(img, lab, "unit"));
    CHECK_THROWS(data::make_labeled(img, data::parse_idx(idx_file(0x801, {1}, {10})), "unit"));
}

TEST_CASE("parse_idx fuzz: random and mutated inputs fail cleanly") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> byte(0, 255), len(0, 64);
    const Bytes valid = idx_file(0x803, {2, 3, 3}, Bytes(18, 17));
    int accepted = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        Bytes b;
        if (rep % 2 == 0) {
            b.resize(static_cast<std::size_t>(len(rng)));
            for (auto& v : b) v = static_cast<std::uint8_t>(byte(rng));
        } else {
            b = valid;
            const int edits = 1 + rep % 4;
            for (int e = 0; e < edits; ++e) b[static_cast<std::size_t>(byte(rng)) % b.size()] = static_cast<std::uint8_t>(byte(rng));
            if (rep % 3 == 0) b.resize(static_cast<std::size_t>(byte(rng)) % (b.size() + 1));
        }
        try {
            auto d = data::parse_idx(b);
            std::size_t expect = 1;
            for (auto n : d.dims) expect *= n;
            CHECK(d.bytes.size() == expect);
            ++accepted;
        } catch (const data::IdxError&) {
        }
    }
    MESSAGE(accepted << " of 1000 fuzz inputs were well-formed");
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::vector<data::NamedTensor> recs;
    recs.push_back({"scalar", Tensor::scalar(-0.0)});
    recs.push_back({"vec", Tensor::vector({1.0 / 3.0, 1e-310, -7.25, std::nan("")})});
    recs.push_back({"mat", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6})});
    recs.push_back({"", Tensor(Shape{2, 1, 2}, 0.5)});
    const auto bytes = data::encode_checkpoint(recs);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "HNET1");
    CHECK(bytes[5] == 1);  // little-endian version
    const auto back = data::decode_checkpoint(bytes);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].name == recs[i].name);
        CHECK(heurnet::bitwise_equal(back[i].value, recs[i].value));
    }

    TempDir tmp;
    const auto path = tmp.path / "w.hnet";
    data::save_checkpoint(path, recs);
    CHECK(read_all(path) == bytes);
    CHECK(data::load_checkpoint(path).size() == 4);
    CHECK_THROWS_AS(data::load_checkpoint(tmp.path / "missing.hnet"), data::CheckpointError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 8);
    CHECK_THROWS_AS(data::decode_checkpoint(truncated), data::CheckpointError);
    auto version = bytes;
    version[5] = 999 & 0xff;
    version[6] = 999 >> 8;
    CHECK_THROWS_AS(data::decode_checkpoint(version), data::CheckpointError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(data::decode_checkpoint(magic), data::CheckpointError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(data::decode_checkpoint(trailing), data::CheckpointError);
    for (std::size_t cut = 0; cut < bytes.size(); ++cut)
        CHECK_THROWS_AS(data::decode_checkpoint(std::span(bytes.data(), cut)), data::CheckpointError);
}

TEST_CASE("checkpoint assign checks names and shapes") {
    heurnet::ad::ParameterSet ps;
    ps.add({"a", Tensor::vector({1, 2}), true});
    ps.add({"b", Tensor::scalar(3), false});
    auto recs = data::records_of(ps);
    recs[0].value[1] = 9.0;
    recs.push_back({"meta.extra", Tensor::scalar(1)});
    data::assign(ps, recs);
    CHECK(ps.at("a").value[1] == 9.0);
    CHECK(data::find_record(recs, "meta.extra") != nullptr);
    CHECK(data::find_record(recs, "zzz") == nullptr);

    auto wrong_shape = recs;
    wrong_shape[0].value = Tensor::vector({1, 2, 3});
    CHECK_THROWS_AS(data::assign(ps, wrong_shape), data::CheckpointError);
    recs.erase(recs.begin());
    CHECK_THROWS_AS(data::assign(ps, recs), data::CheckpointError);
}

TEST_CASE("csv dialect") {
    CHECK(data::format_double(0.123456789) == "0.123457");
    CHECK(data::format_double(100.0) == "100");
    CHECK(data::format_double(std::nan("")) == "nan");

    data::Table one{{"a", "b"}, {{std::string("x"), 1.5}}};
    CHECK(data::to_csv(one) == "a,b\nx,1.5\n");

    data::Table quoted{{"name"}, {{std::string("a,\"b\"")}}};
    CHECK(data::to_csv(quoted) == "name\n\"a,\"\"b\"\"\"\n");

    data::Table conf{{"true"}, {}};
    for (int j = 0; j < 10; ++j) conf.header.push_back("pred_" + std::to_string(j));
    for (int i = 0; i < 10; ++i) {
        std::vector<data::Cell> row{static_cast<long long>(i)};
        for (int j = 0; j < 10; ++j) row.push_back(i == j ? 100.0 : 0.0);
        conf.rows.push_back(row);
    }
    const auto text = data::to_csv(conf);
    std::istringstream in(text);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(std::count(line.begin(), line.end(), ',') == 10);
    }
    CHECK(lines == 11);
    CHECK(text.find('\r') == std::string::npos);

    data::Table ragged{{"a", "b"}, {{1.0}}};
    CHECK_THROWS(data::to_csv(ragged));

    TempDir tmp;
    data::write_csv(one, tmp.path / "t.csv");
    CHECK(read_all(tmp.path / "t.csv").size() == 10);
    CHECK_THROWS(data::write_csv(one, tmp.path / "no" / "such" / "dir" / "t.csv"));
}

TEST_CASE("polynomial datasets are seeded and in range") {
    auto a = data::gen_poly_dataset(data::PolyTask::Sqrt, 3, 9);
    auto b = data::gen_poly_dataset(data::PolyTask::Sqrt, 3, 9);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i].s >= 0.25);
        CHECK(a[i].s <= 4.0);
        CHECK(a[i].s == b[i].s);
        CHECK(a[i].system.to_string() == b[i].system.to_string());
        CHECK(a[i].system.coeff(0, 2) == 1.0);
        CHECK(a[i].system.coeff(0, 0) == -a[i].s);
    }
    CHECK(data::gen_poly_dataset(data::PolyTask::Sqrt, 3, 10)[0].s != a[0].s);

    for (auto task : {data::PolyTask::Fifth, data::PolyTask::Poly1d, data::PolyTask::Poly2d}) {
        auto set = data::gen_poly_dataset(task, 20, 3);
        for (const auto& e : set) CHECK_FALSE(e.roots.empty());
        auto again = data::gen_poly_dataset(task, 20, 3);
        for (std::size_t i = 0; i < set.size(); ++i)
            CHECK(heurnet::bitwise_equal(set[i].system.coeffs(), again[i].system.coeffs()));
    }
    CHECK(data::parse_task("poly2d") == data::PolyTask::Poly2d);
    CHECK_THROWS(data::parse_task("cubic"));

    auto parts = data::split(data::gen_poly_dataset(data::PolyTask::Sqrt, 10, 1), 2);
    CHECK(parts.train.size() == 8);
    CHECK(parts.test.size() == 2);
}

TEST_CASE("digests and gunzip") {
    const std::string abc = "abc";
    const Bytes b(abc.begin(), abc.end());
    CHECK(data::sha256_hex(b) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(data::md5_hex(b) == "900150983cd24fb0d6963f7d28e17f72");
    CHECK_THROWS_AS(data::gunzip(b), data::ChecksumError);
    CHECK_THROWS_AS(data::download("file:///nonexistent/heurnet/none.gz"), data::NetworkError);
}

TEST_CASE("fetch_dataset through a file mirror") {
    TempDir tmp;
    data::FetchOptions bad;
    bad.cache_dir = tmp.path / "cache";
    bad.mirror = "file:///nonexistent/heurnet/";
    CHECK_THROWS_AS(data::fetch_dataset("mnist", bad), data::NetworkError);
    bad.offline = true;
    CHECK_THROWS_AS(data::fetch_dataset("mnist", bad), data::NetworkError);
    CHECK_THROWS(data::fetch_dataset("cifar", bad));

    const char* mirror = std::getenv("HEURNET_TEST_MIRROR");
    if (!mirror || !*mirror) {
        MESSAGE("HEURNET_TEST_MIRROR unset; skipping the download path");
        return;
    }
    std::ostringstream log;
    data::FetchOptions opt;
    opt.cache_dir = tmp.path / "cache";
    opt.mirror = mirror;
    opt.log = &log;
    auto first = data::fetch_dataset("mnist", opt);
    CHECK(first.train.size() == 60000);
    CHECK(first.test.size() == 10000);
    CHECK(first.train.height() == 28);
    CHECK(first.cache_hits == 0);
    CHECK(fs::exists(opt.cache_dir / "mnist" / "t10k-labels-idx1-ubyte.gz"));

    opt.mirror = "file:///nonexistent/heurnet/";
    opt.offline = true;
    auto second = data::fetch_dataset("mnist", opt);
    CHECK(second.cache_hits == 4);
    CHECK(second.test.labels == first.test.labels);
    CHECK(log.str().find("cache hit") != std::string::npos);

    const auto victim = opt.cache_dir / "mnist" / "t10k-labels-idx1-ubyte.gz";
    auto gz = read_all(victim);
    gz[gz.size() / 2] ^= 0x40;
    std::ofstream(victim, std::ios::binary | std::ios::trunc).write(reinterpret_cast<const char*>(gz.data()),
                                                                    static_cast<std::streamsize>(gz.size()));
    CHECK_THROWS_AS(data::fetch_dataset("mnist", opt), data::ChecksumError);
}
