#include "heurnet/data/idx.hpp"

#include <cstdio>
#include <limits>

namespace heurnet::data {

static std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

IdxData parse_idx(std::span<const std::uint8_t> file) {
    if (file.size() < 4) throw IdxError("IDX file shorter than its magic number");
    IdxData out;
    out.magic = be32(file, 0);
    std::size_t rank = 0;
    if (out.magic == kIdxImages)
        rank = 3;
    else if (out.magic == kIdxLabels)
        rank = 1;
    else {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", out.magic);
        throw IdxError(std::string("unsupported IDX magic ") + buf + " (expected 0x00000803 or 0x00000801)");
    }
    const std::size_t header = 4 + 4 * rank;
    if (file.size() < header) throw IdxError("IDX header truncated");
    std::size_t total = 1;
    for (std::size_t k = 0; k < rank; ++k) {
        const std::size_t d = be32(file, 4 + 4 * k);
        if (d != 0 && total > std::numeric_limits<std::size_t>::max() / d) throw IdxError("IDX dimensions overflow");
        total *= d;
        out.dims.push_back(d);
    }
    const std::size_t payload = file.size() - header;
    if (payload < total)
        throw IdxError("IDX payload truncated: " + std::to_string(payload) + " bytes for " + std::to_string(total) +
                       " declared");
    if (payload > total) throw IdxError("IDX payload has " + std::to_string(payload - total) + " trailing bytes");
    out.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(header), file.end());
    return out;
}

Tensor idx_images(const IdxData& idx) {
    if (idx.magic != kIdxImages) throw IdxError("not an IDX image file");
    std::vector<double> v(idx.bytes.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = idx.bytes[i] / 255.0;
    return Tensor(Shape(idx.dims.begin(), idx.dims.end()), std::move(v));
}

std::vector<int> idx_labels(const IdxData& idx) {
    if (idx.magic != kIdxLabels) throw IdxError("not an IDX label file");
    return std::vector<int>(idx.bytes.begin(), idx.bytes.end());
}

Tensor LabeledImageSet::image(std::size_t i) const {
    const std::size_t len = height() * width();
    if (i >= size()) throw std::out_of_range("image index " + std::to_string(i) + " out of range");
    const auto& raw = images.raw();
    return Tensor(Shape{height(), width()},
                  std::vector<double>(raw.begin() + static_cast<std::ptrdiff_t>(i * len),
                                      raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * len)));
}

LabeledImageSet LabeledImageSet::head(std::size_t n) const {
    if (n >= size()) return *this;
    const std::size_t len = height() * width();
    LabeledImageSet out;
    out.images = Tensor(Shape{n, height(), width()},
                        std::vector<double>(images.raw().begin(), images.raw().begin() + static_cast<std::ptrdiff_t>(n * len)));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    out.provenance = provenance + " (first " + std::to_string(n) + ")";
    return out;
}

LabeledImageSet make_labeled(const IdxData& images, const IdxData& labels, std::string provenance) {
    LabeledImageSet s;
    s.images = idx_images(images);
    s.labels = idx_labels(labels);
    if (s.images.dim(0) != s.labels.size())
        throw IdxError("image count " + std::to_string(s.images.dim(0)) + " does not match label count " +
                       std::to_string(s.labels.size()));
    for (int l : s.labels)
        if (l < 0 || l > 9) throw IdxError("label " + std::to_string(l) + " outside 0..9");
    s.provenance = std::move(provenance);
    return s;
}

}  // namespace heurnet::data
