#include "mrf/mrfa.hpp"
#include "mrf/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace mrf {

static_assert(std::endian::native == std::endian::little, "MRFA I/O assumes a little-endian host");

namespace {

constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kPreamble = 7;

void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(in[offset + b]) << (8 * b);
    }
    return v;
}

std::uint64_t checked_count(const std::vector<std::uint64_t> &dims) {
    std::uint64_t n = 1;
    for (auto d : dims) {
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
            throw FormatError("MRFA field 'dims': element count overflows");
        }
        n *= d;
    }
    return n;
}

} // namespace

MrfaArray MrfaArray::real(std::vector<std::uint64_t> dims, std::vector<double> values) {
    MrfaArray a;
    a.type = MrfaType::Real64;
    a.dims = std::move(dims);
    a.reals = std::move(values);
    if (a.reals.size() != a.count()) {
        throw DomainError("MRFA real array: payload size does not match dims");
    }
    return a;
}

MrfaArray MrfaArray::boolean(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
    MrfaArray a;
    a.type = MrfaType::Bool8;
    a.dims = std::move(dims);
    a.bools = std::move(values);
    if (a.bools.size() != a.count()) {
        throw DomainError("MRFA bool array: payload size does not match dims");
    }
    return a;
}

std::uint64_t MrfaArray::count() const { return checked_count(dims); }

std::vector<std::uint8_t> encode_mrfa(const MrfaArray &array) {
    if (array.dims.size() > 255) {
        throw DomainError("MRFA: rank above 255");
    }
    const auto n = array.count();
    std::vector<std::uint8_t> out;
    const std::size_t elem = array.type == MrfaType::Real64 ? 8 : 1;
    out.reserve(kPreamble + 8 * array.dims.size() + elem * n);
    out.insert(out.end(), {'M', 'R', 'F', 'A'});
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(array.type));
    out.push_back(static_cast<std::uint8_t>(array.dims.size()));
    for (auto d : array.dims) {
        put_u64(out, d);
    }
    if (array.type == MrfaType::Real64) {
        if (array.reals.size() != n) {
            throw DomainError("MRFA: real payload size does not match dims");
        }
        const auto offset = out.size();
        out.resize(offset + 8 * n);
        std::memcpy(out.data() + offset, array.reals.data(), 8 * n);
    } else {
        if (array.bools.size() != n) {
            throw DomainError("MRFA: bool payload size does not match dims");
        }
        for (auto b : array.bools) {
            out.push_back(b ? 1 : 0);
        }
    }
    return out;
}

MrfaArray decode_mrfa(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kPreamble) {
        throw FormatError("MRFA field 'magic': file shorter than the fixed header");
    }
    if (std::memcmp(bytes.data(), "MRFA", 4) != 0) {
        throw FormatError("MRFA field 'magic': expected \"MRFA\"");
    }
    if (bytes[4] != kVersion) {
        throw FormatError("MRFA field 'version': unsupported value " + std::to_string(bytes[4]));
    }
    MrfaArray a;
    if (bytes[5] == 0x01) {
        a.type = MrfaType::Real64;
    } else if (bytes[5] == 0x02) {
        a.type = MrfaType::Bool8;
    } else {
        throw FormatError("MRFA field 'dtype': unknown code " + std::to_string(bytes[5]));
    }
    const std::size_t rank = bytes[6];
    if (bytes.size() < kPreamble + 8 * rank) {
        throw FormatError("MRFA field 'dims': truncated before all " + std::to_string(rank) + " dims");
    }
    for (std::size_t r = 0; r < rank; ++r) {
        a.dims.push_back(get_u64(bytes, kPreamble + 8 * r));
    }
    const auto n = checked_count(a.dims);
    const std::size_t elem = a.type == MrfaType::Real64 ? 8 : 1;
    const std::size_t offset = kPreamble + 8 * rank;
    const std::size_t available = bytes.size() - offset;
    if (n > available / elem || n * elem != available) {
        throw FormatError("MRFA field 'payload': expected " + std::to_string(n * elem) + " bytes, found " +
                          std::to_string(available));
    }
    if (a.type == MrfaType::Real64) {
        a.reals.resize(n);
        std::memcpy(a.reals.data(), bytes.data() + offset, 8 * n);
    } else {
        a.bools.assign(bytes.begin() + offset, bytes.end());
        for (auto b : a.bools) {
            if (b > 1) {
                throw FormatError("MRFA field 'payload': boolean byte other than 0 or 1");
            }
        }
    }
    return a;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_mrfa(const std::filesystem::path &path, const MrfaArray &array) {
    write_file_bytes(path, encode_mrfa(array));
}

MrfaArray read_mrfa(const std::filesystem::path &path) {
    try {
        return decode_mrfa(read_file_bytes(path));
    } catch (const FormatError &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

MrfaArray read_mrfa_real(const std::filesystem::path &path, std::size_t rank) {
    auto a = read_mrfa(path);
    if (a.type != MrfaType::Real64) {
        throw FormatError(path.string() + ": MRFA field 'dtype': expected float64");
    }
    if (a.dims.size() != rank) {
        throw FormatError(path.string() + ": MRFA field 'rank': expected " + std::to_string(rank));
    }
    return a;
}

MrfaArray read_mrfa_bool(const std::filesystem::path &path, std::size_t rank) {
    auto a = read_mrfa(path);
    if (a.type != MrfaType::Bool8) {
        throw FormatError(path.string() + ": MRFA field 'dtype': expected boolean");
    }
    if (a.dims.size() != rank) {
        throw FormatError(path.string() + ": MRFA field 'rank': expected " + std::to_string(rank));
    }
    return a;
}

} // namespace mrf
