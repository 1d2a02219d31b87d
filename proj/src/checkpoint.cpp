#include "semsplat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

constexpr char kCloudMagic[5] = {'S', 'S', 'P', 'L', '1'};
constexpr char kDecoderMagic[5] = {'S', 'D', 'E', 'C', '1'};

class Writer {
public:
    void magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + 5); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    template <typename Range>
    void floats(const Range& values) {
        for (double v : values) u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    Reader(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    bool at_end() const { return pos_ == bytes_.size(); }

    void expect_magic(const char (&m)[5]) {
        need(5);
        if (std::memcmp(bytes_.data() + pos_, m, 5) != 0) {
            fail(ErrorKind::CorruptCheckpoint, name_ + ": bad section magic at byte " + std::to_string(pos_));
        }
        pos_ += 5;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    void floats(double* out, std::size_t count) {
        need(4 * count);
        for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(u32());
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            fail(ErrorKind::CorruptCheckpoint, name_ + ": truncated at byte " + std::to_string(pos_));
        }
    }
    std::vector<char> bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const GaussianCloud& cloud,
                     const SemanticDecoder* decoder) {
    cloud.validate();
    Writer w;
    w.magic(kCloudMagic);
    w.u32(static_cast<std::uint32_t>(cloud.size()));
    w.u32(static_cast<std::uint32_t>(cloud.feature_dim));
    w.u32(static_cast<std::uint32_t>(cloud.sh_degree));
    w.floats(cloud.positions);
    w.floats(cloud.rotations);
    w.floats(cloud.log_scales);
    w.floats(cloud.opacity_logits);
    w.floats(cloud.sh_coeffs);
    w.floats(cloud.features);
    if (decoder) {
        decoder->validate();
        w.magic(kDecoderMagic);
        w.u32(static_cast<std::uint32_t>(decoder->input_dim));
        w.u32(static_cast<std::uint32_t>(decoder->hidden_dim));
        w.u32(static_cast<std::uint32_t>(decoder->num_classes));
        w.floats(decoder->flatten());
    }

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) fail(ErrorKind::IoError, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path.string());

    Checkpoint ck;
    r.expect_magic(kCloudMagic);
    const std::uint32_t n = r.u32();
    const std::uint32_t feature_dim = r.u32();
    const std::uint32_t sh_degree = r.u32();
    if (n > kMaxPoints || feature_dim == 0 || feature_dim > 4096 || sh_degree > 3) {
        fail(ErrorKind::CorruptCheckpoint, path.string() + ": implausible header");
    }
    ck.cloud.feature_dim = static_cast<int>(feature_dim);
    ck.cloud.sh_degree = static_cast<int>(sh_degree);
    ck.cloud.resize(n);
    for (auto* arr : {&ck.cloud.positions, &ck.cloud.rotations, &ck.cloud.log_scales,
                      &ck.cloud.opacity_logits, &ck.cloud.sh_coeffs, &ck.cloud.features}) {
        r.floats(arr->data(), arr->size());
    }
    if (!r.at_end()) {
        r.expect_magic(kDecoderMagic);
        const auto input_dim = static_cast<int>(r.u32());
        const auto hidden_dim = static_cast<int>(r.u32());
        const auto num_classes = static_cast<int>(r.u32());
        if (input_dim <= 0 || input_dim > 4096 || hidden_dim < 0 || hidden_dim > 4096 ||
            num_classes <= 0 || num_classes > 255) {
            fail(ErrorKind::CorruptCheckpoint, path.string() + ": implausible decoder header");
        }
        SemanticDecoder d = SemanticDecoder::create(input_dim, hidden_dim, num_classes, 0);
        std::vector<double> flat(d.parameter_count());
        r.floats(flat.data(), flat.size());
        d.unflatten(flat);
        if (!r.at_end()) fail(ErrorKind::CorruptCheckpoint, path.string() + ": trailing bytes");
        ck.decoder = std::move(d);
    }
    try {
        ck.cloud.validate();
    } catch (const Error& e) {
        fail(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    return ck;
}

} // namespace semsplat
