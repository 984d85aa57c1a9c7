#include "mrf/io.hpp"
#include "mrf/error.hpp"
#include "mrf/mrfa.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace mrf {

namespace {

std::uint64_t u64(std::size_t v) { return static_cast<std::uint64_t>(v); }

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_dictionary(const fs::path &dir, const Dictionary &d) {
    d.validate();
    fs::create_directories(dir);
    const auto n = u64(d.size());
    std::vector<double> atoms(d.atoms.data(), d.atoms.data() + d.atoms.size());
    write_mrfa(dir / "atoms.mrfa", MrfaArray::real({n, u64(d.d0())}, std::move(atoms)));
    std::vector<double> lut;
    lut.reserve(2 * d.size());
    for (const auto &e : d.lut) {
        lut.push_back(e.t1_ms);
        lut.push_back(e.t2_ms);
    }
    write_mrfa(dir / "lut.mrfa", MrfaArray::real({n, 2}, std::move(lut)));
    write_mrfa(dir / "norms.mrfa",
               MrfaArray::real({n}, std::vector<double>(d.norms.data(), d.norms.data() + d.norms.size())));
}

Dictionary load_dictionary(const fs::path &dir) {
    const auto atoms = read_mrfa_real(dir / "atoms.mrfa", 2);
    const auto lut = read_mrfa_real(dir / "lut.mrfa", 2);
    const auto norms = read_mrfa_real(dir / "norms.mrfa", 1);
    const auto n = atoms.dims[0];
    if (lut.dims[0] != n || lut.dims[1] != 2 || norms.dims[0] != n) {
        throw FormatError(dir.string() + ": dictionary arrays disagree in length");
    }
    Dictionary d;
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(atoms.dims[1]);
    d.atoms = Eigen::Map<const RowMatrix>(atoms.reals.data(), rows, cols);
    d.norms = Eigen::Map<const Eigen::VectorXd>(norms.reals.data(), rows);
    d.lut.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.lut[i] = {lut.reals[2 * i], lut.reals[2 * i + 1]};
    }
    d.normalized = true;
    for (Eigen::Index i = 0; i < rows && d.normalized; ++i) {
        d.normalized = std::abs(d.atoms.row(i).norm() - 1.0) <= 1e-10;
    }
    return d;
}

void save_basis(const fs::path &dir, const SubspaceBasis &b) {
    fs::create_directories(dir);
    // MRFA is row-major; Eigen's default storage is column-major.
    const RowMatrix rows = b.basis;
    write_mrfa(dir / "basis.mrfa", MrfaArray::real({u64(static_cast<std::size_t>(b.d0())), u64(static_cast<std::size_t>(b.d1()))},
                                                   std::vector<double>(rows.data(), rows.data() + rows.size())));
    std::ostringstream txt;
    txt << "d0 = " << b.d0() << "\n";
    txt << "d1 = " << b.d1() << "\n";
    txt << "total_energy = " << fmt_double(b.total_energy) << "\n";
    txt << "captured_energy_fraction = " << fmt_double(b.captured_energy_fraction()) << "\n";
    txt << "singular_values =";
    for (Eigen::Index k = 0; k < b.singular_values.size(); ++k) {
        txt << (k ? ", " : " ") << fmt_double(b.singular_values[k]);
    }
    txt << "\n";
    const auto s = txt.str();
    write_file_bytes(dir / "basis.txt", std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
}

SubspaceBasis load_basis(const fs::path &dir) {
    const auto arr = read_mrfa_real(dir / "basis.mrfa", 2);
    SubspaceBasis b;
    const RowMatrix rows = Eigen::Map<const RowMatrix>(arr.reals.data(), static_cast<Eigen::Index>(arr.dims[0]),
                                                       static_cast<Eigen::Index>(arr.dims[1]));
    b.basis = rows;
    std::ifstream in(dir / "basis.txt");
    if (!in) {
        throw IoError("cannot open " + (dir / "basis.txt").string());
    }
    std::string line;
    bool have_energy = false, have_sv = false;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        auto key = line.substr(0, eq);
        key.erase(key.find_last_not_of(' ') + 1);
        const auto value = line.substr(eq + 1);
        if (key == "total_energy") {
            b.total_energy = std::stod(value);
            have_energy = true;
        } else if (key == "singular_values") {
            std::vector<double> sv;
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                sv.push_back(std::stod(item));
            }
            b.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
            have_sv = true;
        }
    }
    if (!have_energy || !have_sv || b.singular_values.size() != b.d1()) {
        throw FormatError((dir / "basis.txt").string() + ": missing or inconsistent singular values");
    }
    return b;
}

void save_maps(const fs::path &dir, const ParametricMaps &m) {
    fs::create_directories(dir);
    std::vector<double> v(3 * m.voxels());
    for (std::size_t p = 0; p < m.voxels(); ++p) {
        v[3 * p] = m.t1_ms[p];
        v[3 * p + 1] = m.t2_ms[p];
        v[3 * p + 2] = m.pd[p];
    }
    write_mrfa(dir / "maps.mrfa", MrfaArray::real({u64(m.height), u64(m.width), 3}, std::move(v)));
    write_mrfa(dir / "mask.mrfa", MrfaArray::boolean({u64(m.height), u64(m.width)}, m.mask));
}

ParametricMaps load_maps(const fs::path &dir) {
    const auto v = read_mrfa_real(dir / "maps.mrfa", 3);
    const auto mask = read_mrfa_bool(dir / "mask.mrfa", 2);
    if (v.dims[2] != 3 || mask.dims[0] != v.dims[0] || mask.dims[1] != v.dims[1]) {
        throw FormatError(dir.string() + ": maps and mask dims disagree");
    }
    auto m = ParametricMaps::zeros(v.dims[0], v.dims[1]);
    for (std::size_t p = 0; p < m.voxels(); ++p) {
        m.t1_ms[p] = v.reals[3 * p];
        m.t2_ms[p] = v.reals[3 * p + 1];
        m.pd[p] = v.reals[3 * p + 2];
    }
    m.mask = mask.bools;
    return m;
}

void save_tsmi(const fs::path &path, const Tsmi &t) {
    write_mrfa(path, MrfaArray::real({u64(t.height), u64(t.width), u64(t.frames)}, t.data));
}

Tsmi load_tsmi(const fs::path &path, TsmiKind kind) {
    auto a = read_mrfa_real(path, 3);
    Tsmi t;
    t.height = a.dims[0];
    t.width = a.dims[1];
    t.frames = a.dims[2];
    t.kind = kind;
    t.data = std::move(a.reals);
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw FormatError(path.string() + ": MRFA field 'payload': non-finite TSMI entry");
        }
    }
    return t;
}

void save_sample(const fs::path &dir, const Sample &s) {
    fs::create_directories(dir);
    const auto name = s.tsmi.kind == TsmiKind::Raw ? "tsmi_raw.mrfa" : "tsmi_compressed.mrfa";
    fs::remove(dir / "tsmi_raw.mrfa");
    fs::remove(dir / "tsmi_compressed.mrfa");
    save_tsmi(dir / name, s.tsmi);
    save_maps(dir, s.maps);
}

Sample load_sample(const fs::path &dir) {
    Sample s;
    if (fs::exists(dir / "tsmi_raw.mrfa")) {
        s.tsmi = load_tsmi(dir / "tsmi_raw.mrfa", TsmiKind::Raw);
    } else if (fs::exists(dir / "tsmi_compressed.mrfa")) {
        s.tsmi = load_tsmi(dir / "tsmi_compressed.mrfa", TsmiKind::Compressed);
    } else {
        throw IoError(dir.string() + ": no TSMI file in sample directory");
    }
    s.maps = load_maps(dir);
    if (s.maps.height != s.tsmi.height || s.maps.width != s.tsmi.width) {
        throw FormatError(dir.string() + ": TSMI and maps differ in size");
    }
    return s;
}

} // namespace mrf
