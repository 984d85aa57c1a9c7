#pragma once

// MRFA: a minimal n-d array container used for every artifact this project
// reads or writes.
//
//   bytes 0-3   "MRFA"
//   byte  4     version (0x01)
//   byte  5     dtype   (0x01 = float64 LE, 0x02 = uint8 boolean)
//   byte  6     rank
//   then rank x uint64 LE dims, then the row-major payload.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mrf {

enum class MrfaType : std::uint8_t { Real64 = 0x01, Bool8 = 0x02 };

struct MrfaArray {
    MrfaType type = MrfaType::Real64;
    std::vector<std::uint64_t> dims;
    std::vector<double> reals;
    std::vector<std::uint8_t> bools;

    static MrfaArray real(std::vector<std::uint64_t> dims, std::vector<double> values);
    static MrfaArray boolean(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values);

    std::uint64_t count() const;

    bool operator==(const MrfaArray &) const = default;
};

std::vector<std::uint8_t> encode_mrfa(const MrfaArray &array);
MrfaArray decode_mrfa(std::span<const std::uint8_t> bytes);

void write_mrfa(const std::filesystem::path &path, const MrfaArray &array);
MrfaArray read_mrfa(const std::filesystem::path &path);

// Helpers that check the dtype and rank on load.
MrfaArray read_mrfa_real(const std::filesystem::path &path, std::size_t rank);
MrfaArray read_mrfa_bool(const std::filesystem::path &path, std::size_t rank);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace mrf
