#include "heurnet/data/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace heurnet::data {

namespace {

constexpr char kMagic[5] = {'H', 'N', 'E', 'T', '1'};

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <class U>
    U get(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (remaining() < n)
            throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                                  std::to_string(pos_));
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 5);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.value.rank()));
        for (std::size_t d : r.value.shape()) put_le<std::uint64_t>(out, d);
        for (double v : r.value.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    auto magic = in.take(5, "magic");
    if (std::memcmp(magic.data(), kMagic, 5) != 0) throw CheckpointError("not an HNET1 checkpoint (bad magic)");
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    const auto count = in.get<std::uint32_t>("record count");
    std::vector<NamedTensor> out;
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto len = in.get<std::uint32_t>("name length");
        auto name = in.take(len, "name");
        const auto rank = in.get<std::uint32_t>("rank");
        if (rank > 8) throw CheckpointError("record rank " + std::to_string(rank) + " is not plausible");
        Shape shape;
        std::uint64_t total = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto d = in.get<std::uint64_t>("dimension");
            if (d != 0 && total > std::numeric_limits<std::uint64_t>::max() / d)
                throw CheckpointError("record dimensions overflow");
            total *= d;
            shape.push_back(static_cast<std::size_t>(d));
        }
        if (total > in.remaining() / 8) throw CheckpointError("checkpoint truncated inside a tensor payload");
        std::vector<double> values(static_cast<std::size_t>(total));
        for (auto& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>("payload"));
        out.push_back({std::string(name.begin(), name.end()), Tensor(std::move(shape), std::move(values))});
    }
    if (in.remaining() != 0) throw CheckpointError("trailing bytes after the last checkpoint record");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> records) {
    const auto bytes = encode_checkpoint(records);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write checkpoint " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw CheckpointError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

std::vector<NamedTensor> records_of(const ad::ParameterSet& params) {
    std::vector<NamedTensor> out;
    for (const auto& p : params) out.push_back({p.name, p.value});
    return out;
}

const NamedTensor* find_record(std::span<const NamedTensor> records, const std::string& name) {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

void assign(ad::ParameterSet& params, std::span<const NamedTensor> records) {
    for (auto& p : params) {
        const auto* r = find_record(records, p.name);
        if (!r) throw CheckpointError("checkpoint has no record for parameter '" + p.name + "'");
        if (r->value.shape() != p.value.shape())
            throw CheckpointError("parameter '" + p.name + "' has shape " + shape_str(p.value.shape()) +
                                  " but the checkpoint stores " + shape_str(r->value.shape()));
    }
    for (auto& p : params) p.value = find_record(records, p.name)->value;
}

}  // namespace heurnet::data
