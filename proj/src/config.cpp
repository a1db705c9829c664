#include "sipvol/config.hpp"

#include "sipvol/errors.hpp"
#include "sipvol/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace sipvol {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

template <typename Int = long long>
Int to_integer(const std::string& key, const std::string& v) {
    Int d{};
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || end != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected an integer in range, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& xs, std::function<std::string(const T&)> fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt(xs[i]);
    }
    return out;
}

struct Field {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

Field real(const std::string& key, double RunConfig::*outer) {
    return {key, [=](RunConfig& c, const std::string& v) { c.*outer = to_double(key, v); },
            [=](const RunConfig& c) { return io::format_double(c.*outer); }};
}

template <typename Sub>
Field real_in(const std::string& key, Sub RunConfig::*sub, double Sub::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { (c.*sub).*member = to_double(key, v); },
            [=](const RunConfig& c) { return io::format_double((c.*sub).*member); }};
}

template <typename Sub, typename Int>
Field int_in(const std::string& key, Sub RunConfig::*sub, Int Sub::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { (c.*sub).*member = to_integer<Int>(key, v); },
            [=](const RunConfig& c) { return std::to_string((c.*sub).*member); }};
}

Field integer(const std::string& key, int RunConfig::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { c.*member = to_integer<int>(key, v); },
            [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field text(const std::string& key, std::string RunConfig::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { c.*member = v; },
            [=](const RunConfig& c) { return c.*member; }};
}

Field reals(const std::string& key, std::vector<double> RunConfig::*member) {
    return {key,
            [=](RunConfig& c, const std::string& v) {
                std::vector<double> xs;
                for (const auto& s : split_list(v)) xs.push_back(to_double(key, s));
                c.*member = xs;
            },
            [=](const RunConfig& c) {
                return join<double>(c.*member, [](const double& d) { return io::format_double(d); });
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(real_in("dgp.mu", &RunConfig::dgp, &DgpParams::mu));
        f.push_back(real_in("dgp.gamma0", &RunConfig::dgp, &DgpParams::gamma0));
        f.push_back(real_in("dgp.gamma1", &RunConfig::dgp, &DgpParams::gamma1));
        f.push_back(real_in("dgp.b0", &RunConfig::dgp, &DgpParams::b0));
        f.push_back(real_in("dgp.b1", &RunConfig::dgp, &DgpParams::b1));
        f.push_back(real_in("dgp.b2", &RunConfig::dgp, &DgpParams::b2));
        f.push_back(real_in("dgp.b3", &RunConfig::dgp, &DgpParams::b3));
        f.push_back(real_in("dgp.noise_sd", &RunConfig::dgp, &DgpParams::noise_sd));
        f.push_back(real_in("dgp.jump_mean", &RunConfig::dgp, &DgpParams::jump_mean));
        f.push_back(real_in("dgp.jump_sd", &RunConfig::dgp, &DgpParams::jump_sd));
        f.push_back(real_in("dgp.jump_intensity", &RunConfig::dgp, &DgpParams::jump_intensity));
        f.push_back(real_in("dgp.eps_scale_sd", &RunConfig::dgp, &DgpParams::eps_scale_sd));
        f.push_back(int_in("dgp.m", &RunConfig::dgp, &DgpParams::m));
        f.push_back(int_in("dgp.n", &RunConfig::dgp, &DgpParams::n));
        f.push_back(int_in("dgp.days", &RunConfig::dgp, &DgpParams::D_total));
        f.push_back(int_in("dgp.seed", &RunConfig::dgp, &DgpParams::seed));
        f.push_back(int_in("dgp.burn_in", &RunConfig::dgp, &DgpParams::burn_in));
        f.push_back(int_in("dgp.positivity_retries", &RunConfig::dgp, &DgpParams::positivity_retries));

        f.push_back(int_in("spot.k_m", &RunConfig::spot, &PreAvgConfig::k_m));
        f.push_back(real_in("spot.theta", &RunConfig::spot, &PreAvgConfig::theta));
        f.push_back(real_in("spot.bandwidth", &RunConfig::spot, &PreAvgConfig::bandwidth));
        f.push_back({"spot.kernel",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "symmetric") c.spot.kernel = KernelShape::UniformSymmetric;
                         else if (v == "left") c.spot.kernel = KernelShape::UniformLeft;
                         else throw ConfigError("spot.kernel: expected symmetric or left");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.spot.kernel == KernelShape::UniformSymmetric ? "symmetric" : "left");
                     }});
        f.push_back({"spot.weight",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "doubled") c.spot.weight = WeightFunction::Doubled;
                         else if (v == "standard") c.spot.weight = WeightFunction::Standard;
                         else throw ConfigError("spot.weight: expected doubled or standard");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.spot.weight == WeightFunction::Doubled ? "doubled" : "standard");
                     }});
        f.push_back(real_in("spot.trunc_const", &RunConfig::spot, &PreAvgConfig::trunc_const));
        f.push_back(real_in("spot.trunc_exp", &RunConfig::spot, &PreAvgConfig::trunc_exp));
        f.push_back({"spot.boundary_renormalize",
                     [](RunConfig& c, const std::string& v) {
                         c.spot.boundary_renormalize = to_bool("spot.boundary_renormalize", v);
                     },
                     [](const RunConfig& c) { return std::string(c.spot.boundary_renormalize ? "true" : "false"); }});
        f.push_back(real_in("spot.floor_eps", &RunConfig::spot, &PreAvgConfig::floor_eps));

        f.push_back({"predict.methods",
                     [](RunConfig& c, const std::string& v) {
                         std::vector<Method> ms;
                         for (const auto& s : split_list(v)) ms.push_back(parse_method(s));
                         c.methods = ms;
                     },
                     [](const RunConfig& c) {
                         return join<Method>(c.methods, [](const Method& m) { return to_string(m); });
                     }});
        f.push_back({"predict.rank",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "ratio") c.rank.kind = RankPolicy::Kind::Ratio;
                         else if (v == "gap") c.rank.kind = RankPolicy::Kind::Gap;
                         else {
                             c.rank.kind = RankPolicy::Kind::Fixed;
                             c.rank.rank = static_cast<int>(to_integer("predict.rank", v));
                         }
                     },
                     [](const RunConfig& c) {
                         switch (c.rank.kind) {
                             case RankPolicy::Kind::Ratio: return std::string("ratio");
                             case RankPolicy::Kind::Gap: return std::string("gap");
                             default: return std::to_string(c.rank.rank);
                         }
                     }});
        f.push_back(int_in("predict.r_max", &RunConfig::rank, &RankPolicy::r_max));
        f.push_back(real("predict.ridge", &RunConfig::ridge));
        f.push_back(reals("predict.omegas", &RunConfig::omegas));

        f.push_back({"study.D_list",
                     [](RunConfig& c, const std::string& v) {
                         std::vector<int> ds;
                         for (const auto& s : split_list(v)) ds.push_back(static_cast<int>(to_integer("study.D_list", s)));
                         c.D_list = ds;
                     },
                     [](const RunConfig& c) {
                         return join<int>(c.D_list, [](const int& d) { return std::to_string(d); });
                     }});
        f.push_back(reals("study.omegas", &RunConfig::study_omegas));
        f.push_back(integer("study.replications", &RunConfig::replications));

        f.push_back(integer("backtest.window", &RunConfig::window));
        f.push_back(reals("backtest.q0s", &RunConfig::q0s));

        f.push_back(integer("run.threads", &RunConfig::threads));
        f.push_back(text("run.output_dir", &RunConfig::output_dir));
        f.push_back(text("run.ticks", &RunConfig::ticks_path));
        f.push_back(text("run.volmatrix", &RunConfig::volmatrix_path));
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    find_field(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_field(key).get(cfg); }

void validate(const RunConfig& cfg) {
    cfg.dgp.validate();
    cfg.spot.validate(cfg.dgp.m);
    if (cfg.methods.empty()) throw ConfigError("predict.methods is empty");
    if (cfg.rank.kind == RankPolicy::Kind::Fixed && cfg.rank.rank < 1) throw ConfigError("predict.rank must be >= 1");
    if (cfg.rank.r_max < 1) throw ConfigError("predict.r_max must be >= 1");
    if (cfg.ridge < 0.0) throw ConfigError("predict.ridge must be >= 0");
    for (double w : cfg.omegas)
        if (!(w > 0.0 && w < 1.0)) throw ConfigError("predict.omegas must lie in (0, 1)");
    for (double w : cfg.study_omegas)
        if (!(w > 0.0 && w < 1.0)) throw ConfigError("study.omegas must lie in (0, 1)");
    for (double q : cfg.q0s)
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("backtest.q0s must lie in (0, 1)");
    for (int D : cfg.D_list)
        if (D < 2) throw ConfigError("study.D_list entries must be >= 2");
    if (cfg.window < 2) throw ConfigError("backtest.window must be >= 2");
    if (cfg.replications < 1) throw ConfigError("study.replications must be >= 1");
    if (cfg.threads < 1) throw ConfigError("run.threads must be >= 1");
}

std::string serialize(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string qualified = section.empty() ? key : section + "." + key;
        set_config_value(base, qualified, line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* dir = std::getenv("SIPVOL_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
    if (const char* th = std::getenv("SIPVOL_THREADS"); th && *th) set_config_value(cfg, "run.threads", th);
}

StudyConfig study_config(const RunConfig& cfg) {
    StudyConfig s;
    s.dgp = cfg.dgp;
    s.spot = cfg.spot;
    s.D_list = cfg.D_list;
    s.omegas = cfg.study_omegas;
    s.methods = cfg.methods;
    s.rank = cfg.rank;
    s.sip.ridge = cfg.ridge;
    s.replications = cfg.replications;
    s.threads = cfg.threads;
    return s;
}

}  // namespace sipvol
