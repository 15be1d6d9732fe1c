#pragma once

#include <filesystem>
#include <iosfwd>

#include "obcs/measure.hpp"

namespace obcs {

/// Binary measurement record.
///
/// Layout (all integers little-endian):
///   bytes 0..4    magic "OBCS1"
///   u64           n
///   u64           m
///   u8            model tag (0 noiseless, 1 bitflip, 2 prequant, 3 logistic)
///   u64           seed
///   ceil(m/8) B   signs, bit (i mod 8) of byte i/8 set when y_i = +1
///   n x f64       c, IEEE-754 binary64 little-endian
///
/// Model parameters, the stream id, retained rows and covariance are not
/// stored; a loaded record carries the model kind with default parameters
/// and RngSpec{seed, 0}.
void write_record(std::ostream& out, const MeasurementRecord& record);
void write_record(const std::filesystem::path& path, const MeasurementRecord& record);

/// Throws ParameterError on a bad magic, truncated data or unknown tag.
MeasurementRecord read_record(std::istream& in);
MeasurementRecord read_record(const std::filesystem::path& path);

}  // namespace obcs
