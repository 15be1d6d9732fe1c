#include "obcs/record_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "obcs/errors.hpp"

namespace obcs {

namespace {

constexpr char kMagic[5] = {'O', 'B', 'C', 'S', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in, const char* section = "header") {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParameterError(std::string("truncated record ") + section);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void write_record(std::ostream& out, const MeasurementRecord& record) {
    const auto m = static_cast<std::uint64_t>(record.m);
    out.write(kMagic, sizeof kMagic);
    put_u64(out, static_cast<std::uint64_t>(record.n()));
    put_u64(out, m);
    out.put(static_cast<char>(tag_of(record.model)));
    put_u64(out, record.rng.seed);

    std::vector<char> packed((m + 7) / 8, 0);
    for (std::uint64_t i = 0; i < m; ++i)
        if (record.y[i] > 0) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
    for (Eigen::Index j = 0; j < record.n(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(record.c(j)));
    if (!out) throw ParameterError("failed to write measurement record");
}

void write_record(const std::filesystem::path& path, const MeasurementRecord& record) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError("cannot open '" + path.string() + "' for writing");
    write_record(out, record);
}

MeasurementRecord read_record(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParameterError("not a measurement record (bad magic)");
    const std::uint64_t n = get_u64(in);
    const std::uint64_t m = get_u64(in);
    const int tag = in.get();
    if (tag == std::char_traits<char>::eof()) throw ParameterError("truncated record header");
    const std::uint64_t seed = get_u64(in);
    if (n == 0 || m == 0) throw ParameterError("record has empty dimensions");

    MeasurementRecord record;
    switch (static_cast<ModelTag>(tag)) {
        case ModelTag::noiseless: record.model = Noiseless{}; break;
        case ModelTag::bitflip: record.model = BitFlip{}; break;
        case ModelTag::prequant: record.model = PreQuantNoise{}; break;
        case ModelTag::logistic: record.model = Logistic{}; break;
        default: throw ParameterError("unknown model tag " + std::to_string(tag));
    }
    record.m = static_cast<Eigen::Index>(m);
    record.rng = RngSpec{seed, 0};

    std::vector<unsigned char> packed((m + 7) / 8);
    if (!in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size())))
        throw ParameterError("truncated record sign data");
    record.y.resize(m);
    for (std::uint64_t i = 0; i < m; ++i) record.y[i] = (packed[i / 8] >> (i % 8)) & 1 ? 1 : -1;

    record.c.resize(static_cast<Eigen::Index>(n));
    for (std::uint64_t j = 0; j < n; ++j)
        record.c(static_cast<Eigen::Index>(j)) = std::bit_cast<double>(get_u64(in, "direction data"));
    return record;
}

MeasurementRecord read_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open record '" + path.string() + "'");
    return read_record(in);
}

}  // namespace obcs
