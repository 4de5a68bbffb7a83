#pragma once

#include "heurnet/autodiff.hpp"
#include "heurnet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// HNET1 checkpoint container.
//
//   "HNET1" | u32 version | u32 count | count x record
//   record: u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 payload
//
// All integers and floats are little-endian regardless of host order.
namespace heurnet::data {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling and renames into place.
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Every parameter, in set order.
std::vector<NamedTensor> records_of(const ad::ParameterSet& params);

/// Overwrites parameter values from `records`. Every parameter must be
/// present with a matching shape; records with other names are ignored.
void assign(ad::ParameterSet& params, std::span<const NamedTensor> records);

/// Looks up a record by name, or nullptr.
const NamedTensor* find_record(std::span<const NamedTensor> records, const std::string& name);

}  // namespace heurnet::data
