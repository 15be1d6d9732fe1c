#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <sstream>

#include "obcs/errors.hpp"
#include "obcs/record_io.hpp"
#include "obcs/sampling.hpp"

using namespace obcs;

namespace {

MeasurementRecord small_record(Eigen::Index m = 13) {
    const Signal x = sample_signal({1, 1}, 6, 2, SignalKind::exact_sparse);
    return synthesize(x, Logistic{2.0}, m, {77, 0});
}

std::uint64_t le64(const std::string& s, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
    return v;
}

}  // namespace

TEST(RecordIo, ByteLayout) {
    const auto rec = small_record();
    std::ostringstream out;
    write_record(out, rec);
    const std::string bytes = out.str();
    ASSERT_EQ(bytes.size(), 5u + 8 + 8 + 1 + 8 + 2 + 6 * 8);
    EXPECT_EQ(bytes.substr(0, 5), "OBCS1");
    EXPECT_EQ(le64(bytes, 5), 6u);
    EXPECT_EQ(le64(bytes, 13), 13u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[21]), 3u);
    EXPECT_EQ(le64(bytes, 22), 77u);
    for (int i = 0; i < 13; ++i) {
        const bool bit = (static_cast<unsigned char>(bytes[30 + i / 8]) >> (i % 8)) & 1;
        EXPECT_EQ(bit, rec.y[i] == 1) << i;
    }
    EXPECT_EQ(static_cast<unsigned char>(bytes[31]) >> 5, 0u);
    for (int j = 0; j < 6; ++j) EXPECT_EQ(std::bit_cast<double>(le64(bytes, 32 + 8 * j)), rec.c(j));
}

TEST(RecordIo, RoundTrip) {
    for (Eigen::Index m : {1, 8, 9, 300}) {
        const auto rec = small_record(m);
        std::stringstream io;
        write_record(io, rec);
        const auto back = read_record(io);
        EXPECT_EQ(back.y, rec.y);
        EXPECT_EQ(back.c, rec.c);
        EXPECT_EQ(back.m, m);
        EXPECT_EQ(tag_of(back.model), ModelTag::logistic);
        EXPECT_EQ(back.rng, (RngSpec{77, 0}));
    }
}

TEST(RecordIo, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "obcs_record_test.bin";
    const auto rec = small_record(40);
    write_record(path, rec);
    EXPECT_EQ(read_record(path).c, rec.c);
    std::filesystem::remove(path);
    EXPECT_THROW(read_record(path), ParameterError);
}

TEST(RecordIo, RejectsCorruptInput) {
    std::ostringstream out;
    write_record(out, small_record());
    const std::string good = out.str();

    std::string bad_magic = good;
    bad_magic[4] = '2';
    std::istringstream a(bad_magic);
    EXPECT_THROW(read_record(a), ParameterError);

    std::string bad_tag = good;
    bad_tag[21] = 9;
    std::istringstream b(bad_tag);
    EXPECT_THROW(read_record(b), ParameterError);

    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, good.size() - 1}) {
        std::istringstream c(good.substr(0, cut));
        EXPECT_THROW(read_record(c), ParameterError) << cut;
    }
}

TEST(RecordIo, LoadedRecordRegeneratesDirection) {
    const auto rec = small_record(500);
    std::stringstream io;
    write_record(io, rec);
    const auto back = read_record(io);
    EXPECT_EQ(direction_for_bits(back, back.y), rec.c);
}
