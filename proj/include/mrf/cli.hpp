#pragma once

// The mrfcnn command set. Every command reads the run configuration, a seed
// and positional input paths, and writes its artifacts under --out.

#include "mrf/acquisition.hpp"
#include "mrf/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrf {

/// Entry point; args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Phantom of config.phantom size (or height x width when nonzero) drawn from seed.
/// With `snap` every tissue is moved to the closest grid entry.
ParametricMaps make_phantom(const RunConfig &config, std::uint64_t seed, const ParameterGrid *snap = nullptr,
                            std::size_t height = 0, std::size_t width = 0);

/// Samples first_index .. first_index + count - 1 of the synthetic dataset
/// for `seed`: phantom, forward simulation, undersampling, and projection
/// when a basis is given.
std::vector<Sample> make_samples(const RunConfig &config, const SubspaceBasis *basis, std::uint64_t seed,
                                 std::size_t first_index, std::size_t count);

struct BenchRow {
    std::string method;
    std::size_t height = 0, width = 0, d0 = 0, d1 = 0, atoms = 0;
    double seconds = 0.0;
};

/// Appends to `path`, writing the header first if the file is new or empty.
void append_bench_row(const std::filesystem::path &path, const BenchRow &row);

} // namespace mrf
