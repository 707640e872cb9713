#include "oasis/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "oasis/error.hpp"

namespace oasis {

namespace {

constexpr char kMagic[8] = {'O', 'A', 'S', 'I', 'S', 'C', 'K', 'P'};

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void scalar(T v)
    {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(std::begin(raw), std::end(raw));
        bytes(raw, sizeof(T));
    }
    void doubles(const double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i)
            scalar(p[i]);
    }
    std::vector<std::uint8_t>& data() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    void bytes(void* p, std::size_t n)
    {
        if (n > size_ - pos_)
            fail(ErrorKind::Io, "checkpoint is truncated");
        std::memcpy(p, data_ + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T scalar()
    {
        std::uint8_t raw[sizeof(T)];
        bytes(raw, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(std::begin(raw), std::end(raw));
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }
    void doubles(double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i)
            p[i] = scalar<double>();
    }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint32_t kMaxDim = 1u << 20;

std::uint32_t bounded(std::uint32_t v, const char* what)
{
    if (v == 0 || v > kMaxDim)
        fail(ErrorKind::Io, std::string("checkpoint has an implausible ") + what);
    return v;
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const ClassStats* stats)
{
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.scalar<std::uint32_t>(kCheckpointVersion);
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(model.widths().size()));
    for (int width : model.widths())
        w.scalar<std::int32_t>(width);
    w.scalar<std::int32_t>(model.latent_index());
    w.scalar<std::int32_t>(model.frozen_boundary());
    for (const auto& layer : model.parameters()) {
        w.doubles(layer.weights.data(), layer.weights.size());
        w.doubles(layer.bias.data(), layer.bias.size());
    }
    w.scalar<std::uint8_t>(stats ? 1 : 0);
    if (stats) {
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(stats->num_classes()));
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(stats->dim()));
        for (const auto& g : stats->classes()) {
            w.scalar<std::uint64_t>(g.count);
            w.scalar<double>(g.shrinkage);
            w.doubles(g.mean.data(), g.mean.size());
            w.doubles(g.covariance.data(), g.covariance.size());
            w.doubles(g.inverse.data(), g.inverse.size());
        }
    }
    const std::uint64_t sum = fnv1a(w.data().data(), w.data().size());
    w.scalar<std::uint64_t>(sum);
    return std::move(w.data());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < sizeof kMagic + 4 + 8)
        fail(ErrorKind::Io, "checkpoint is truncated");
    Reader trailer(bytes.data() + bytes.size() - 8, 8);
    const auto stored = trailer.scalar<std::uint64_t>();
    const std::size_t body = bytes.size() - 8;

    Reader r(bytes.data(), body);
    char magic[sizeof kMagic];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        fail(ErrorKind::Io, "not a checkpoint file (bad magic)");
    const auto version = r.scalar<std::uint32_t>();
    if (version != kCheckpointVersion)
        fail(ErrorKind::Io, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
    if (fnv1a(bytes.data(), body) != stored)
        fail(ErrorKind::Io, "checkpoint checksum mismatch (file is corrupt or truncated)");

    const auto n_widths = r.scalar<std::uint32_t>();
    if (n_widths < 2 || n_widths > 1024)
        fail(ErrorKind::Io, "checkpoint has an implausible layer count");
    std::vector<int> widths;
    for (std::uint32_t i = 0; i < n_widths; ++i)
        widths.push_back(static_cast<int>(bounded(static_cast<std::uint32_t>(r.scalar<std::int32_t>()), "width")));
    const auto latent_index = r.scalar<std::int32_t>();
    const auto frozen_boundary = r.scalar<std::int32_t>();
    Model model(widths, latent_index, frozen_boundary);
    for (auto& layer : model.parameters()) {
        r.doubles(layer.weights.data(), layer.weights.size());
        r.doubles(layer.bias.data(), layer.bias.size());
    }

    Checkpoint ckpt{std::move(model), std::nullopt};
    if (r.scalar<std::uint8_t>() != 0) {
        const auto classes = bounded(r.scalar<std::uint32_t>(), "class count");
        const auto dim = static_cast<Eigen::Index>(bounded(r.scalar<std::uint32_t>(), "latent dimension"));
        std::vector<ClassGaussian> gs(classes);
        for (auto& g : gs) {
            g.count = r.scalar<std::uint64_t>();
            g.shrinkage = r.scalar<double>();
            g.mean.resize(dim);
            g.covariance.resize(dim, dim);
            g.inverse.resize(dim, dim);
            r.doubles(g.mean.data(), dim);
            r.doubles(g.covariance.data(), dim * dim);
            r.doubles(g.inverse.data(), dim * dim);
        }
        ckpt.stats = ClassStats(std::move(gs));
    }
    if (r.remaining() != 0)
        fail(ErrorKind::Io, "checkpoint has trailing bytes");
    return ckpt;
}

void save_checkpoint(const std::string& path, const Model& model, const ClassStats* stats)
{
    const auto bytes = encode_checkpoint(model, stats);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorKind::Io, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace oasis
