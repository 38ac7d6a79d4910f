#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "agral/tensor.hpp"

namespace agral {

// ALTS v1 container: magic "ALTS", u32-LE version (=1), u8 dtype code
// (1 = f32, 2 = u8), u8 rank R (<= 4), R x u64-LE dims (each <= 2^32),
// u32-LE metadata byte length, metadata as UTF-8 "key=value" lines, then
// the row-major little-endian payload.
using Metadata = std::map<std::string, std::string>;

// Writes atomically (temp file + rename). Throws DimOverflowError when the
// rank or a dimension is out of range, DataError on I/O failure.
void write_container(const std::filesystem::path& path, const Tensor& tensor,
                     const Metadata& meta = {});

// Throws BadMagicError, TruncatedPayloadError or DimOverflowError on a
// malformed file; the round trip read(write(t)) == t is bit-exact.
std::pair<Tensor, Metadata> read_container(const std::filesystem::path& path);

}  // namespace agral
