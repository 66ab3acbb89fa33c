#include "kalfuse/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace kalfuse {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

struct Section {
    std::string name;
    std::map<std::string, std::string> values;
    const std::filesystem::path* file = nullptr;

    std::string context(const std::string& key) const {
        return "[" + name + "] " + key + " in '" + file->string() + "'";
    }
    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string take(const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) throw ConfigError("missing key " + context(key));
        std::string v = it->second;
        values.erase(it);
        return v;
    }
    std::string take_or(const std::string& key, const std::string& fallback) {
        return has(key) ? take(key) : fallback;
    }
    void finish() const {
        if (!values.empty())
            throw ConfigError("unknown key " + context(values.begin()->first));
    }
};

struct IniFile {
    std::filesystem::path path;
    std::vector<Section> sections;

    Section* find(const std::string& name) {
        for (auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    std::vector<Section*> with_prefix(const std::string& prefix) {
        std::vector<Section*> out;
        for (auto& s : sections)
            if (s.name.rfind(prefix, 0) == 0) out.push_back(&s);
        return out;
    }
};

IniFile parse_ini(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    IniFile ini;
    ini.path = path;
    std::string line;
    int line_no = 0;
    Section* current = nullptr;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": unterminated section header");
            ini.sections.push_back(Section{trim(line.substr(1, line.size() - 2)), {}, nullptr});
            current = &ini.sections.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || current == nullptr)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value' inside a section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        if (!current->values.emplace(key, value).second)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
    }
    for (auto& s : ini.sections) s.file = &ini.path;
    return ini;
}

double to_double(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + v + "' for " + what);
    }
}

int to_int(const std::string& v, const std::string& what) {
    const double d = to_double(v, what);
    const int i = int(d);
    if (double(i) != d) throw ConfigError("expected integer '" + v + "' for " + what);
    return i;
}

bool to_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError("cannot parse boolean '" + v + "' for " + what);
}

std::vector<double> to_vector(const std::string& v, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (ss >> tok) out.push_back(to_double(tok, what));
    if (out.empty()) throw ConfigError("expected numbers for " + what);
    return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

// Rows separated by ';', entries by whitespace. "identity" keeps the matrix
// empty (identity over the HR bands).
Eigen::MatrixXd to_matrix(const std::string& v, const std::string& what) {
    if (trim(v) == "identity") return {};
    std::vector<std::vector<double>> rows;
    std::stringstream ss(v);
    std::string row;
    while (std::getline(ss, row, ';')) {
        row = trim(row);
        if (row.empty()) continue;
        rows.push_back(to_vector(row, what));
        if (rows.back().size() != rows.front().size())
            throw ConfigError("ragged matrix rows for " + what);
    }
    if (rows.empty()) throw ConfigError("empty matrix for " + what);
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(int(r), int(c)) = rows[r][c];
    return m;
}

AreaCurve to_curve(const std::string& text) {
    AreaCurve curve;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw ConfigError("area_curve entries must be time:fraction pairs");
        curve.points.emplace_back(to_double(tok.substr(0, colon), "area_curve"),
                                  to_double(tok.substr(colon + 1), "area_curve"));
    }
    return curve;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
}

ModalitySpec parse_modality(Section& sec) {
    constexpr std::string_view prefix = "modality ";
    ModalitySpec spec;
    spec.name = trim(sec.name.substr(prefix.size()));
    if (spec.name.empty()) throw ConfigError("modality section with empty name");
    const std::string role = sec.take("role");
    if (role == "high_res")
        spec.role = ModalityRole::HighRes;
    else if (role == "low_res")
        spec.role = ModalityRole::LowRes;
    else
        throw ConfigError("unknown role '" + role + "' in [" + sec.name + "]");
    spec.factor = to_int(sec.take_or("factor", "1"), "factor");
    if (spec.factor <= 0) throw ConfigError("factor must be positive in [" + sec.name + "]");
    const std::string kernel = sec.take_or("kernel", "uniform");
    if (kernel != "uniform") spec.kernel_weights = to_vector(kernel, "kernel");
    spec.gains = to_matrix(sec.take_or("gains", "identity"), "gains");
    spec.noise_variance = to_eigen(to_vector(sec.take("noise_variance"), "noise_variance"));
    sec.finish();
    return spec;
}

void write_modalities(std::ofstream& out, const std::vector<ModalitySpec>& modalities) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& m : modalities) {
        out << "\n[modality " << m.name << "]\n";
        out << "role = " << (m.role == ModalityRole::HighRes ? "high_res" : "low_res") << "\n";
        out << "factor = " << m.factor << "\n";
        if (!m.kernel_weights.empty()) {
            out << "kernel =";
            for (double w : m.kernel_weights) out << ' ' << fmt(w);
            out << "\n";
        }
        if (m.gains.size() != 0) {
            out << "gains = ";
            for (Eigen::Index r = 0; r < m.gains.rows(); ++r) {
                if (r) out << " ; ";
                for (Eigen::Index c = 0; c < m.gains.cols(); ++c) {
                    if (c) out << ' ';
                    out << fmt(m.gains(r, c));
                }
            }
            out << "\n";
        }
        out << "noise_variance =";
        for (Eigen::Index i = 0; i < m.noise_variance.size(); ++i)
            out << ' ' << fmt(m.noise_variance[i]);
        out << "\n";
    }
}

}  // namespace

void RunConfig::validate() const {
    if (observations_manifest.empty()) throw ConfigError("missing observations manifest");
    if (historical_manifest.empty()) throw ConfigError("missing historical manifest");
    if (modalities.empty()) throw ConfigError("no modalities configured");
    int high = 0;
    for (const auto& m : modalities) high += (m.role == ModalityRole::HighRes);
    if (high != 1)
        throw ConfigError("expected exactly one high_res modality, found " + std::to_string(high));
    for (const auto& m : modalities) {
        if (m.role != ModalityRole::HighRes) continue;
        // The latent grid is defined by the high-resolution instrument.
        if (m.factor != 1)
            throw ConfigError("high_res modality '" + m.name + "' must have factor 1");
        if (m.gains.size() != 0 && !m.gains.isIdentity(0.0))
            throw ConfigError("high_res modality '" + m.name + "' must use identity gains");
    }
    if (epsilon2 <= 0.0) throw ConfigError("epsilon2 must be positive");
    if (window < 1) throw ConfigError("window must be at least 1");
    if (smax_policy == SmaxPolicy::Fixed && smax_fixed <= 0.0)
        throw ConfigError("fixed s_max must be positive");
    if (p0_scale <= 0.0) throw ConfigError("p0_scale must be positive");
    if (classify.nir_band < 0) throw ConfigError("nir_band must be nonnegative");
    for (const auto& m : modalities)
        if ((m.noise_variance.array() <= 0.0).any())
            throw ConfigError("modality '" + m.name + "' needs positive noise variances");
}

const ModalitySpec* RunConfig::find_modality(const std::string& name) const {
    for (const auto& m : modalities)
        if (m.name == name) return &m;
    return nullptr;
}

const ModalitySpec& RunConfig::high_res_modality() const {
    for (const auto& m : modalities)
        if (m.role == ModalityRole::HighRes) return m;
    throw ConfigError("no high_res modality configured");
}

std::vector<const ModalitySpec*> RunConfig::canonical_order() const {
    std::vector<const ModalitySpec*> order;
    for (const auto& m : modalities) order.push_back(&m);
    std::sort(order.begin(), order.end(), [](const ModalitySpec* a, const ModalitySpec* b) {
        if (a->role != b->role) return a->role == ModalityRole::HighRes;
        return a->name < b->name;
    });
    return order;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    IniFile ini = parse_ini(path);
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    RunConfig cfg;

    Section* run = ini.find("run");
    if (!run) throw ConfigError("config '" + path.string() + "' has no [run] section");
    cfg.observations_manifest = resolve(base, run->take("observations"));
    cfg.historical_manifest = resolve(base, run->take("historical"));
    cfg.out_dir = resolve(base, run->take_or("out", "out"));
    cfg.structure = parse_covariance_kind(run->take_or("structure", "pixel"));
    cfg.epsilon2 = to_double(run->take_or("epsilon2", "1e-5"), "epsilon2");
    cfg.window = to_int(run->take_or("window", "1"), "window");
    const std::string divisor = run->take_or("variance_divisor", "unbiased");
    if (divisor == "unbiased")
        cfg.divisor = VarianceDivisor::Unbiased;
    else if (divisor == "population")
        cfg.divisor = VarianceDivisor::Population;
    else
        throw ConfigError("unknown variance_divisor '" + divisor + "'");
    const std::string smax = run->take_or("smax_policy", "historical");
    if (smax == "historical")
        cfg.smax_policy = SmaxPolicy::Historical;
    else if (smax == "window")
        cfg.smax_policy = SmaxPolicy::Window;
    else if (smax == "fixed")
        cfg.smax_policy = SmaxPolicy::Fixed;
    else
        throw ConfigError("unknown smax_policy '" + smax + "'");
    cfg.smax_fixed = to_double(run->take_or("smax", "1"), "smax");
    cfg.p0_scale = to_double(run->take_or("p0_scale", "1e-10"), "p0_scale");
    cfg.smoother = to_bool(run->take_or("smoother", "true"), "smoother");
    cfg.seed = std::uint64_t(to_double(run->take_or("seed", "0"), "seed"));
    run->finish();

    if (Section* cls = ini.find("classify")) {
        cfg.classify.nir_band = to_int(cls->take_or("nir_band", "1"), "nir_band");
        const std::string policy = cls->take_or("centroids", "initial");
        if (policy == "initial")
            cfg.classify.centroids_per_date = false;
        else if (policy == "per_date")
            cfg.classify.centroids_per_date = true;
        else
            throw ConfigError("unknown centroids policy '" + policy + "'");
        cls->finish();
    }

    for (Section* sec : ini.with_prefix("modality "))
        cfg.modalities.push_back(parse_modality(*sec));

    for (const auto& s : ini.sections)
        if (s.name != "run" && s.name != "classify" && s.name.rfind("modality ", 0) != 0)
            throw ConfigError("unknown section [" + s.name + "] in '" + path.string() + "'");

    cfg.validate();
    for (const auto& manifest : {cfg.observations_manifest, cfg.historical_manifest})
        if (!std::filesystem::exists(manifest))
            throw ConfigError("manifest '" + manifest.string() + "' does not exist");
    return cfg;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "[run]\n";
    out << "observations = " << cfg.observations_manifest.string() << "\n";
    out << "historical = " << cfg.historical_manifest.string() << "\n";
    out << "out = " << cfg.out_dir.string() << "\n";
    out << "structure = " << to_string(cfg.structure) << "\n";
    out << "epsilon2 = " << fmt(cfg.epsilon2) << "\n";
    out << "window = " << cfg.window << "\n";
    out << "variance_divisor = "
        << (cfg.divisor == VarianceDivisor::Unbiased ? "unbiased" : "population") << "\n";
    out << "smax_policy = "
        << (cfg.smax_policy == SmaxPolicy::Historical
                ? "historical"
                : (cfg.smax_policy == SmaxPolicy::Window ? "window" : "fixed"))
        << "\n";
    out << "smax = " << fmt(cfg.smax_fixed) << "\n";
    out << "p0_scale = " << fmt(cfg.p0_scale) << "\n";
    out << "smoother = " << (cfg.smoother ? "true" : "false") << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "\n[classify]\n";
    out << "nir_band = " << cfg.classify.nir_band << "\n";
    out << "centroids = " << (cfg.classify.centroids_per_date ? "per_date" : "initial") << "\n";
    write_modalities(out, cfg.modalities);
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

void SynthConfig::validate() const {
    scene.validate();
    if (instants < 1) throw ConfigError("schedule needs at least one instant");
    if (spacing_days < 1) throw ConfigError("spacing_days must be at least 1");
    if (outage_rate < 0.0 || outage_rate > 1.0)
        throw ConfigError("outage_rate must lie in [0, 1]");
    if (hist_frames < 2) throw ConfigError("historical archive needs at least 2 frames");
    if (hist_spacing_days < 1) throw ConfigError("hist_spacing_days must be at least 1");
    if ((hist_start + (hist_frames - 1) * hist_spacing_days).days >= start.days)
        throw ConfigError("historical archive must predate the schedule");
    if (!hist_area.points.empty()) hist_area.validate();
    if (modalities.empty()) throw ConfigError("no modalities configured");
    int high = 0;
    for (const auto& m : modalities) high += (m.role == ModalityRole::HighRes);
    if (high != 1)
        throw ConfigError("expected exactly one high_res modality, found " + std::to_string(high));
    for (int k : resolved_hr_instants())
        if (k < 0 || k >= instants)
            throw ConfigError("hr instant " + std::to_string(k) + " outside schedule");
}

std::vector<Date> SynthConfig::schedule_dates() const {
    std::vector<Date> dates;
    for (int k = 0; k < instants; ++k) dates.push_back(start + k * spacing_days);
    return dates;
}

std::vector<Date> SynthConfig::historical_dates() const {
    std::vector<Date> dates;
    for (int k = 0; k < hist_frames; ++k) dates.push_back(hist_start + k * hist_spacing_days);
    return dates;
}

std::vector<int> SynthConfig::resolved_hr_instants() const {
    if (!hr_instants.empty()) return hr_instants;
    if (instants == 1) return {0};
    return {0, instants - 1};
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    IniFile ini = parse_ini(path);
    SynthConfig cfg;

    Section* scene = ini.find("scene");
    if (!scene) throw ConfigError("synth config '" + path.string() + "' has no [scene] section");
    cfg.scene.height = to_int(scene->take_or("height", "81"), "height");
    cfg.scene.width = to_int(scene->take_or("width", "81"), "width");
    const std::string shape = scene->take_or("shape", "disk");
    if (shape == "disk")
        cfg.scene.shape = WaterShape::Disk;
    else if (shape == "sweep")
        cfg.scene.shape = WaterShape::Sweep;
    else if (shape == "channel")
        cfg.scene.shape = WaterShape::Channel;
    else
        throw ConfigError("unknown scene shape '" + shape +
                          "' (expected disk|sweep|channel)");
    cfg.scene.channel_width = to_int(scene->take_or("channel_width", "18"), "channel_width");
    if (cfg.scene.channel_width < 1) throw ConfigError("channel_width must be positive");
    cfg.scene.water_levels = to_eigen(to_vector(scene->take_or("water", "0.06 0.03"), "water"));
    cfg.scene.land_levels = to_eigen(to_vector(scene->take_or("land", "0.12 0.38"), "land"));
    cfg.scene.texture_sigma = to_double(scene->take_or("texture_sigma", "0.01"), "texture_sigma");
    cfg.scene.s_max = to_double(scene->take_or("smax", "1"), "smax");
    cfg.scene.seed = std::uint64_t(to_double(scene->take_or("seed", "0"), "seed"));
    cfg.scene.area = to_curve(scene->take_or("area_curve", "0:0.2 1:0.4"));
    scene->finish();

    Section* schedule = ini.find("schedule");
    if (!schedule)
        throw ConfigError("synth config '" + path.string() + "' has no [schedule] section");
    cfg.start = parse_date(schedule->take_or("start", "2018-07-03"));
    cfg.instants = to_int(schedule->take_or("instants", "17"), "instants");
    cfg.spacing_days = to_int(schedule->take_or("spacing_days", "5"), "spacing_days");
    const std::string hr = schedule->take_or("hr", "first_last");
    if (hr != "first_last")
        for (double v : to_vector(hr, "hr")) cfg.hr_instants.push_back(int(v));
    cfg.outage_rate = to_double(schedule->take_or("outage_rate", "0"), "outage_rate");
    schedule->finish();

    if (Section* hist = ini.find("historical")) {
        cfg.hist_start = parse_date(hist->take_or("start", "2017-08-01"));
        cfg.hist_frames = to_int(hist->take_or("frames", "5"), "frames");
        cfg.hist_spacing_days = to_int(hist->take_or("spacing_days", "30"), "spacing_days");
        if (hist->has("area_curve")) cfg.hist_area = to_curve(hist->take("area_curve"));
        hist->finish();
    } else {
        cfg.hist_start = parse_date("2017-08-01");
    }

    if (Section* run = ini.find("run")) {
        cfg.run_defaults.structure = parse_covariance_kind(run->take_or("structure", "pixel"));
        cfg.run_defaults.epsilon2 = to_double(run->take_or("epsilon2", "1e-5"), "epsilon2");
        cfg.run_defaults.window = to_int(run->take_or("window", "1"), "window");
        cfg.run_defaults.smoother = to_bool(run->take_or("smoother", "true"), "smoother");
        const std::string nir = run->take_or("nir_band", "1");
        cfg.run_defaults.classify.nir_band = to_int(nir, "nir_band");
        run->finish();
    }

    for (Section* sec : ini.with_prefix("modality "))
        cfg.modalities.push_back(parse_modality(*sec));
    for (const auto& s : ini.sections)
        if (s.name != "scene" && s.name != "schedule" && s.name != "historical" &&
            s.name != "run" && s.name.rfind("modality ", 0) != 0)
            throw ConfigError("unknown section [" + s.name + "] in '" + path.string() + "'");

    cfg.validate();
    return cfg;
}

}  // namespace kalfuse
