#pragma once

#include "heurnet/tensor.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heurnet::data {

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImages = 0x00000803;
inline constexpr std::uint32_t kIdxLabels = 0x00000801;

struct IdxData {
    std::uint32_t magic = 0;
    std::vector<std::size_t> dims;
    /// Unsigned bytes; kept raw so labels stay integral.
    std::vector<std::uint8_t> bytes;
};

/// Unsigned-byte IDX with 3 (images) or 1 (labels) big-endian u32
/// dimensions. The payload must be exactly the declared size.
IdxData parse_idx(std::span<const std::uint8_t> file);

/// Image payload scaled by 1/255 into an N x H x W tensor.
Tensor idx_images(const IdxData& idx);
std::vector<int> idx_labels(const IdxData& idx);

struct LabeledImageSet {
    /// N x H x W in [0, 1].
    Tensor images;
    std::vector<int> labels;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t height() const { return images.dim(1); }
    std::size_t width() const { return images.dim(2); }
    Tensor image(std::size_t i) const;
    /// First n examples (all if n >= size()).
    LabeledImageSet head(std::size_t n) const;
};

/// Pairs an image file with a label file; counts must match and labels be 0..9.
LabeledImageSet make_labeled(const IdxData& images, const IdxData& labels, std::string provenance);

}  // namespace heurnet::data
