#include "mrf/config.hpp"
#include "mrf/error.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

namespace mrf {

bool TrainingConfig::operator==(const TrainingConfig &o) const {
    const auto &a = options, &b = o.options;
    return train_samples == o.train_samples && val_samples == o.val_samples && a.epochs == b.epochs &&
           a.batch_size == b.batch_size && a.learning_rate == b.learning_rate && a.beta1 == b.beta1 &&
           a.beta2 == b.beta2 && a.epsilon == b.epsilon && a.augment == b.augment &&
           a.augmentation == b.augmentation && a.max_steps == b.max_steps;
}

namespace {

using Target = std::variant<std::size_t *, int *, double *, bool *, std::vector<std::size_t> *>;

struct Field {
    const char *key;
    Target target;
};

std::vector<Field> fields(RunConfig &c) {
    auto &t = c.training.options;
    return {
        {"schedule.d0", &c.schedule.d0},
        {"schedule.max_flip_deg", &c.schedule.max_flip_deg},
        {"schedule.tr_ms", &c.schedule.tr_ms},
        {"schedule.te_ms", &c.schedule.te_ms},
        {"schedule.inversion_delay_ms", &c.schedule.inversion_delay_ms},
        {"grid.t1_min_ms", &c.grid.t1_min_ms},
        {"grid.t1_max_ms", &c.grid.t1_max_ms},
        {"grid.t1_step_ms", &c.grid.t1_step_ms},
        {"grid.t2_min_ms", &c.grid.t2_min_ms},
        {"grid.t2_max_ms", &c.grid.t2_max_ms},
        {"grid.t2_step_ms", &c.grid.t2_step_ms},
        {"subspace.d1", &c.d1},
        {"phantom.height", &c.phantom.height},
        {"phantom.width", &c.phantom.width},
        {"phantom.lesions_min", &c.phantom.lesions_min},
        {"phantom.lesions_max", &c.phantom.lesions_max},
        {"phantom.t1_min_ms", &c.phantom.t1_min_ms},
        {"phantom.t1_max_ms", &c.phantom.t1_max_ms},
        {"phantom.t2_min_ms", &c.phantom.t2_min_ms},
        {"phantom.t2_max_ms", &c.phantom.t2_max_ms},
        {"phantom.pd_min", &c.phantom.pd_min},
        {"phantom.pd_max", &c.phantom.pd_max},
        {"undersampling.fraction", &c.undersampling.fraction},
        {"undersampling.rotation_increment_deg", &c.undersampling.rotation_increment_deg},
        {"undersampling.noise_sigma", &c.undersampling.noise_sigma},
        {"model.block_channels", &c.model.block_channels},
        {"model.head_channels", &c.model.head_channels},
        {"model.dropout", &c.model.dropout},
        {"model.t1_max_ms", &c.model.t1_max_ms},
        {"model.t2_max_ms", &c.model.t2_max_ms},
        {"model.pd_max", &c.model.pd_max},
        {"training.train_samples", &c.training.train_samples},
        {"training.val_samples", &c.training.val_samples},
        {"training.epochs", &t.epochs},
        {"training.batch_size", &t.batch_size},
        {"training.max_steps", &t.max_steps},
        {"training.learning_rate", &t.learning_rate},
        {"training.beta1", &t.beta1},
        {"training.beta2", &t.beta2},
        {"training.epsilon", &t.epsilon},
        {"training.augment", &t.augment},
        {"training.augment_max_shift", &t.augmentation.max_shift},
        {"training.augment_max_rotation_deg", &t.augmentation.max_rotation_deg},
        {"training.augment_scale_min", &t.augmentation.scale_min},
        {"training.augment_scale_max", &t.augmentation.scale_max},
        {"training.augment_noise_sigma", &t.augmentation.noise_sigma},
        {"evaluation.test_samples", &c.evaluation.test_samples},
        {"evaluation.mask_threshold", &c.evaluation.mask_threshold},
        {"evaluation.dm_query_block", &c.evaluation.dm_query_block},
        {"evaluation.dm_atom_block", &c.evaluation.dm_atom_block},
    };
}

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    const auto end = s.find_last_not_of(" \t\r");
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string where(const std::string &source, std::size_t line) {
    return line ? source + ":" + std::to_string(line) : source;
}

void assign(const Field &f, const std::string &value, const std::string &origin) {
    auto fail = [&](const char *what) {
        throw ConfigError(origin + ": key '" + f.key + "': " + what + " (got '" + value + "')");
    };
    auto parse_unsigned = [&](const std::string &s) -> std::size_t {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
            fail("expected a non-negative integer");
        }
        errno = 0;
        const auto v = std::strtoull(s.c_str(), nullptr, 10);
        if (errno == ERANGE) {
            fail("integer out of range");
        }
        return static_cast<std::size_t>(v);
    };
    std::visit(
        [&](auto *p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::size_t>) {
                *p = parse_unsigned(value);
            } else if constexpr (std::is_same_v<T, int>) {
                char *end = nullptr;
                errno = 0;
                const long v = std::strtol(value.c_str(), &end, 10);
                if (value.empty() || *end != '\0' || errno == ERANGE) {
                    fail("expected an integer");
                }
                *p = static_cast<int>(v);
            } else if constexpr (std::is_same_v<T, double>) {
                char *end = nullptr;
                const double v = std::strtod(value.c_str(), &end);
                if (value.empty() || *end != '\0' || !std::isfinite(v)) {
                    fail("expected a finite number");
                }
                *p = v;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1") {
                    *p = true;
                } else if (value == "false" || value == "0") {
                    *p = false;
                } else {
                    fail("expected true or false");
                }
            } else {
                std::vector<std::size_t> v;
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    v.push_back(parse_unsigned(trim(item)));
                }
                if (v.empty()) {
                    fail("expected a comma-separated list of integers");
                }
                *p = std::move(v);
            }
        },
        f.target);
}

std::string render(const Target &t) {
    return std::visit(
        [](auto *p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_double(*p);
            } else if constexpr (std::is_same_v<T, bool>) {
                return *p ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
                std::string s;
                for (std::size_t i = 0; i < p->size(); ++i) {
                    s += (i ? "," : "") + std::to_string((*p)[i]);
                }
                return s;
            } else {
                return std::to_string(*p);
            }
        },
        t);
}

std::string env_name(const std::string &key) {
    std::string s = "MRFCNN_";
    for (char ch : key) {
        s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return s;
}

} // namespace

void validate_config(const RunConfig &c) {
    auto fail = [](const std::string &key, const std::string &what) {
        throw ConfigError("constraint violated for '" + key + "': " + what);
    };
    if (c.schedule.d0 < 1) fail("schedule.d0", "must be >= 1");
    if (!(c.schedule.max_flip_deg >= 0.0 && c.schedule.max_flip_deg <= 180.0))
        fail("schedule.max_flip_deg", "must lie in [0, 180]");
    if (!(c.schedule.te_ms >= 0.0)) fail("schedule.te_ms", "must be >= 0");
    if (!(c.schedule.tr_ms > c.schedule.te_ms)) fail("schedule.tr_ms", "must exceed schedule.te_ms");
    if (!(c.schedule.inversion_delay_ms >= 0.0)) fail("schedule.inversion_delay_ms", "must be >= 0");
    if (!(c.grid.t1_min_ms > 0.0 && c.grid.t1_max_ms >= c.grid.t1_min_ms)) fail("grid.t1_max_ms", "need 0 < t1_min <= t1_max");
    if (!(c.grid.t2_min_ms > 0.0 && c.grid.t2_max_ms >= c.grid.t2_min_ms)) fail("grid.t2_max_ms", "need 0 < t2_min <= t2_max");
    if (!(c.grid.t1_step_ms > 0.0)) fail("grid.t1_step_ms", "must be > 0");
    if (!(c.grid.t2_step_ms > 0.0)) fail("grid.t2_step_ms", "must be > 0");
    if (c.grid.t2_min_ms > c.grid.t1_max_ms) fail("grid.t2_min_ms", "no entry with t2 <= t1");
    if (c.d1 < 1) fail("subspace.d1", "must be >= 1");
    if (c.d1 > c.schedule.d0) fail("subspace.d1", "must not exceed schedule.d0");
    if (c.phantom.height < 1 || c.phantom.width < 1) fail("phantom.height", "canvas must be non-empty");
    if (c.phantom.lesions_min < 0) fail("phantom.lesions_min", "must be >= 0");
    if (c.phantom.lesions_max < c.phantom.lesions_min) fail("phantom.lesions_max", "must be >= phantom.lesions_min");
    if (!(c.phantom.t1_min_ms > 0.0 && c.phantom.t1_max_ms >= c.phantom.t1_min_ms)) fail("phantom.t1_max_ms", "need 0 < t1_min <= t1_max");
    if (!(c.phantom.t2_min_ms > 0.0 && c.phantom.t2_max_ms >= c.phantom.t2_min_ms)) fail("phantom.t2_max_ms", "need 0 < t2_min <= t2_max");
    if (c.phantom.t2_min_ms > c.phantom.t1_min_ms) fail("phantom.t2_min_ms", "must not exceed phantom.t1_min_ms");
    if (!(c.phantom.pd_min >= 0.0 && c.phantom.pd_max >= c.phantom.pd_min)) fail("phantom.pd_max", "need 0 <= pd_min <= pd_max");
    if (!(c.undersampling.fraction > 0.0 && c.undersampling.fraction <= 1.0)) fail("undersampling.fraction", "must lie in (0, 1]");
    if (!(c.undersampling.noise_sigma >= 0.0)) fail("undersampling.noise_sigma", "must be >= 0");
    if (c.model.block_channels.empty()) fail("model.block_channels", "must not be empty");
    if (c.model.head_channels.empty() || c.model.head_channels.back() != 3) fail("model.head_channels", "last entry must be 3");
    for (auto ch : c.model.block_channels) if (ch == 0) fail("model.block_channels", "entries must be positive");
    for (auto ch : c.model.head_channels) if (ch == 0) fail("model.head_channels", "entries must be positive");
    if (!(c.model.dropout >= 0.0 && c.model.dropout < 1.0)) fail("model.dropout", "must lie in [0, 1)");
    if (!(c.model.t1_max_ms > 0.0)) fail("model.t1_max_ms", "must be > 0");
    if (!(c.model.t2_max_ms > 0.0)) fail("model.t2_max_ms", "must be > 0");
    if (!(c.model.pd_max > 0.0)) fail("model.pd_max", "must be > 0");
    if (c.model.input_channels != c.d1) fail("subspace.d1", "model input channels must equal subspace.d1");
    if (c.training.train_samples < 1) fail("training.train_samples", "must be >= 1");
    if (c.training.options.batch_size < 1) fail("training.batch_size", "must be >= 1");
    if (!(c.training.options.learning_rate >= 0.0)) fail("training.learning_rate", "must be >= 0");
    if (!(c.training.options.beta1 >= 0.0 && c.training.options.beta1 < 1.0)) fail("training.beta1", "must lie in [0, 1)");
    if (!(c.training.options.beta2 >= 0.0 && c.training.options.beta2 < 1.0)) fail("training.beta2", "must lie in [0, 1)");
    if (!(c.training.options.epsilon > 0.0)) fail("training.epsilon", "must be > 0");
    const auto &a = c.training.options.augmentation;
    if (a.max_shift < 0) fail("training.augment_max_shift", "must be >= 0");
    if (!(a.max_rotation_deg >= 0.0)) fail("training.augment_max_rotation_deg", "must be >= 0");
    if (!(a.scale_min > 0.0)) fail("training.augment_scale_min", "must be > 0");
    if (!(a.scale_max >= a.scale_min)) fail("training.augment_scale_max", "must be >= training.augment_scale_min");
    if (!(a.noise_sigma >= 0.0)) fail("training.augment_noise_sigma", "must be >= 0");
    if (!(c.evaluation.mask_threshold >= 0.0 && c.evaluation.mask_threshold < 1.0)) fail("evaluation.mask_threshold", "must lie in [0, 1)");
    if (c.evaluation.dm_query_block < 1) fail("evaluation.dm_query_block", "must be >= 1");
    if (c.evaluation.dm_atom_block < 1) fail("evaluation.dm_atom_block", "must be >= 1");
}

RunConfig parse_config_text(const std::string &text, const std::string &source, bool apply_environment) {
    RunConfig c;
    auto table = fields(c);
    auto find = [&](const std::string &key) -> const Field * {
        for (const auto &f : table) {
            if (key == f.key) {
                return &f;
            }
        }
        return nullptr;
    };

    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where(source, lineno) + ": expected 'section.key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const Field *f = find(key);
        if (f == nullptr) {
            throw ConfigError(where(source, lineno) + ": unknown key '" + key + "'");
        }
        assign(*f, value, where(source, lineno));
    }
    if (apply_environment) {
        for (const auto &f : table) {
            const auto name = env_name(f.key);
            if (const char *v = std::getenv(name.c_str())) {
                assign(f, trim(v), "environment " + name);
            }
        }
    }
    c.model.input_channels = c.d1;
    validate_config(c);
    return c;
}

RunConfig parse_config(const std::filesystem::path &path) {
    if (path.empty()) {
        return parse_config_text("", "<defaults>", true);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string(), true);
}

std::string serialize_config(const RunConfig &config) {
    RunConfig copy = config;
    std::ostringstream out;
    std::string section;
    for (const auto &f : fields(copy)) {
        const std::string key = f.key;
        const auto sec = key.substr(0, key.find('.'));
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << "# " << sec << "\n";
            section = sec;
        }
        out << key << " = " << render(f.target) << "\n";
    }
    return out.str();
}

SequenceSchedule RunConfig::make_schedule() const {
    return make_fisp_schedule(schedule.d0, schedule.max_flip_deg, schedule.tr_ms, schedule.te_ms,
                              schedule.inversion_delay_ms);
}

ParameterGrid RunConfig::make_grid() const {
    return ParameterGrid::from_ranges(grid.t1_min_ms, grid.t1_max_ms, grid.t1_step_ms, grid.t2_min_ms,
                                      grid.t2_max_ms, grid.t2_step_ms);
}

UndersamplingScheme RunConfig::make_scheme(std::size_t height, std::size_t width) const {
    return make_spiral_scheme(height, width, schedule.d0, undersampling.fraction,
                              undersampling.rotation_increment_deg);
}

MatchOptions RunConfig::match_options() const {
    return {static_cast<Eigen::Index>(evaluation.dm_query_block), static_cast<Eigen::Index>(evaluation.dm_atom_block)};
}

} // namespace mrf
