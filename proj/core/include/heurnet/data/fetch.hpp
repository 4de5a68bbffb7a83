#pragma once

#include "heurnet/data/idx.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace heurnet::data {

class ChecksumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ManifestFile {
    std::string filename;  // gzip file name on the mirror
    /// SHA-256 of the decompressed IDX bytes (preferred when known).
    std::string sha256;
    /// MD5 of the gzip file as published upstream (used when sha256 is empty).
    std::string md5_gz;
};

struct Manifest {
    std::string name;
    std::string default_mirror;
    /// train images, train labels, test images, test labels
    std::array<ManifestFile, 4> files;
};

/// Pinned manifest for "mnist" or "fashion".
const Manifest& manifest(std::string_view dataset);

/// HEURNET_CACHE, else $XDG_CACHE_HOME/heurnet, else ~/.cache/heurnet.
std::filesystem::path default_cache_dir();

/// HEURNET_MIRROR (with "{dataset}" substituted) if set, else the manifest's.
std::string resolve_mirror(std::string_view dataset, const std::string& flag_value = {});

struct FetchOptions {
    std::filesystem::path cache_dir;
    std::string mirror;
    bool offline = false;
    std::ostream* log = nullptr;
};

struct FetchResult {
    LabeledImageSet train;
    LabeledImageSet test;
    /// Files served from cache without touching the network.
    int cache_hits = 0;
};

/// Fetches (or reuses) the four gzip IDX files into <cache>/<dataset>/,
/// checks every file against the manifest before parsing and returns the
/// parsed splits. A cached file that fails verification is an error, never
/// silently replaced.
FetchResult fetch_dataset(std::string_view dataset, const FetchOptions& opt);

/// Reads the four standard IDX file names (gzip or plain) from a local
/// directory with no checksum step. For datasets rebuilt locally that cannot
/// match a pinned manifest.
FetchResult load_idx_dir(const std::filesystem::path& dir);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string md5_hex(std::span<const std::uint8_t> bytes);
/// Throws ChecksumError on malformed gzip data.
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> gz);
/// Whole-body GET (http, https or file URLs). Throws NetworkError.
std::vector<std::uint8_t> download(const std::string& url);

}  // namespace heurnet::data
