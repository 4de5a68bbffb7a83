#include "heurnet/data/fetch.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <memory>
#include <ostream>

namespace heurnet::data {

namespace {

const Manifest kMnist{"mnist",
                      "https://ossci-datasets.s3.amazonaws.com/mnist/",
                      {{{"train-images-idx3-ubyte.gz", "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db", ""},
                        {"train-labels-idx1-ubyte.gz", "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5", ""},
                        {"t10k-images-idx3-ubyte.gz", "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7", ""},
                        {"t10k-labels-idx1-ubyte.gz", "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2", ""}}}};

const Manifest kFashion{"fashion",
                        "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
                        {{{"train-images-idx3-ubyte.gz", "", "8d4fb7e6c68d591d4c3dfef9ec88bf0d"},
                          {"train-labels-idx1-ubyte.gz", "", "25c81989df183df01b3e8a0aad5dffbe"},
                          {"t10k-images-idx3-ubyte.gz", "", "bef4ecab320f06d8554ea6380940ec79"},
                          {"t10k-labels-idx1-ubyte.gz", "", "bb300cfdad3c16e7a12a480ee83cd310"}}}};

std::string digest_hex(const EVP_MD* md, std::span<const std::uint8_t> bytes) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out, &len, md, nullptr) != 1)
        throw std::runtime_error("digest computation failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[out[i] >> 4];
        s += hex[out[i] & 15];
    }
    return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_atomic(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
    auto tmp = p;
    tmp += ".part";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

/// Verifies gz against the manifest entry and returns the decompressed bytes.
std::vector<std::uint8_t> verified_payload(const ManifestFile& mf, std::span<const std::uint8_t> gz,
                                           const std::string& origin) {
    if (mf.sha256.empty()) {
        const auto got = md5_hex(gz);
        if (got != mf.md5_gz)
            throw ChecksumError(origin + ": MD5 " + got + " does not match pinned " + mf.md5_gz);
        return gunzip(gz);
    }
    std::vector<std::uint8_t> raw;
    try {
        raw = gunzip(gz);
    } catch (const ChecksumError& e) {
        throw ChecksumError(origin + ": " + e.what());
    }
    const auto got = sha256_hex(raw);
    if (got != mf.sha256) throw ChecksumError(origin + ": SHA-256 " + got + " does not match pinned " + mf.sha256);
    return raw;
}

size_t collect(char* ptr, size_t size, size_t nmemb, void* user) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(user);
    out->insert(out->end(), ptr, ptr + size * nmemb);
    return size * nmemb;
}

}  // namespace

const Manifest& manifest(std::string_view dataset) {
    if (dataset == "mnist") return kMnist;
    if (dataset == "fashion") return kFashion;
    throw std::invalid_argument("unknown dataset '" + std::string(dataset) + "' (mnist, fashion)");
}

std::filesystem::path default_cache_dir() {
    if (const char* c = std::getenv("HEURNET_CACHE"); c && *c) return c;
    if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return std::filesystem::path(x) / "heurnet";
    if (const char* h = std::getenv("HOME"); h && *h) return std::filesystem::path(h) / ".cache" / "heurnet";
    return std::filesystem::temp_directory_path() / "heurnet-cache";
}

std::string resolve_mirror(std::string_view dataset, const std::string& flag_value) {
    std::string m = flag_value;
    if (m.empty())
        if (const char* e = std::getenv("HEURNET_MIRROR"); e && *e) m = e;
    if (m.empty()) return manifest(dataset).default_mirror;
    if (auto pos = m.find("{dataset}"); pos != std::string::npos) m.replace(pos, 9, dataset);
    if (m.back() != '/') m += '/';
    return m;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) { return digest_hex(EVP_sha256(), bytes); }
std::string md5_hex(std::span<const std::uint8_t> bytes) { return digest_hex(EVP_md5(), bytes); }

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> gz) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw std::runtime_error("zlib init failed");
    std::unique_ptr<z_stream, int (*)(z_stream*)> guard(&zs, inflateEnd);
    zs.next_in = const_cast<Bytef*>(gz.data());
    zs.avail_in = static_cast<uInt>(gz.size());
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END)
            throw ChecksumError(std::string("corrupt gzip data (") + (zs.msg ? zs.msg : "zlib error") + ")");
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) throw ChecksumError("truncated gzip data");
    }
    return out;
}

std::vector<std::uint8_t> download(const std::string& url) {
    static const bool init = [] { return curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK; }();
    if (!init) throw NetworkError("libcurl initialisation failed");
    std::unique_ptr<CURL, void (*)(CURL*)> h(curl_easy_init(), curl_easy_cleanup);
    if (!h) throw NetworkError("libcurl handle creation failed");
    std::vector<std::uint8_t> body;
    char err[CURL_ERROR_SIZE] = {0};
    curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(h.get(), CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(h.get(), CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(h.get(), CURLOPT_CONNECTTIMEOUT, 20L);
    curl_easy_setopt(h.get(), CURLOPT_LOW_SPEED_LIMIT, 1024L);
    curl_easy_setopt(h.get(), CURLOPT_LOW_SPEED_TIME, 60L);
    curl_easy_setopt(h.get(), CURLOPT_ERRORBUFFER, err);
    curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, collect);
    curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &body);
    const CURLcode rc = curl_easy_perform(h.get());
    if (rc != CURLE_OK) throw NetworkError("GET " + url + " failed: " + (err[0] ? err : curl_easy_strerror(rc)));
    return body;
}

FetchResult fetch_dataset(std::string_view dataset, const FetchOptions& opt) {
    const Manifest& m = manifest(dataset);
    const auto dir = (opt.cache_dir.empty() ? default_cache_dir() : opt.cache_dir) / m.name;
    const std::string mirror = opt.mirror.empty() ? resolve_mirror(dataset) : resolve_mirror(dataset, opt.mirror);
    std::filesystem::create_directories(dir);
    FetchResult result;
    std::array<IdxData, 4> parsed;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& mf = m.files[i];
        const auto path = dir / mf.filename;
        std::vector<std::uint8_t> raw;
        if (std::filesystem::exists(path)) {
            raw = verified_payload(mf, read_file(path), path.string());
            ++result.cache_hits;
            if (opt.log) *opt.log << "cache hit: " << path.string() << '\n';
        } else {
            if (opt.offline) throw NetworkError("offline and " + path.string() + " is not cached");
            const std::string url = mirror + mf.filename;
            if (opt.log) *opt.log << "downloading " << url << '\n';
            const auto gz = download(url);
            raw = verified_payload(mf, gz, url);
            write_atomic(path, gz);
        }
        parsed[i] = parse_idx(raw);
    }
    result.train = make_labeled(parsed[0], parsed[1], m.name + "/train");
    result.test = make_labeled(parsed[2], parsed[3], m.name + "/test");
    return result;
}

FetchResult load_idx_dir(const std::filesystem::path& dir) {
    static const char* const names[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                                         "t10k-labels-idx1-ubyte"};
    std::array<IdxData, 4> parsed;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto gz = dir / (std::string(names[i]) + ".gz");
        const auto plain = dir / names[i];
        if (std::filesystem::exists(gz))
            parsed[i] = parse_idx(gunzip(read_file(gz)));
        else if (std::filesystem::exists(plain))
            parsed[i] = parse_idx(read_file(plain));
        else
            throw IdxError("neither " + gz.string() + " nor " + plain.string() + " exists");
    }
    const std::string name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    FetchResult result;
    result.train = make_labeled(parsed[0], parsed[1], name + "/train (unverified)");
    result.test = make_labeled(parsed[2], parsed[3], name + "/test (unverified)");
    return result;
}

}  // namespace heurnet::data
