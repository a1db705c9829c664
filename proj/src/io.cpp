#include "sipvol/io.hpp"

#include "sipvol/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sipvol::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": cannot parse number '" + s + "'");
    }
}

long parse_long(const std::string& s, const std::string& where) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError(where + ": cannot parse integer '" + s + "'");
    return v;
}

}  // namespace

void write_ticks_csv(const std::filesystem::path& path, const std::vector<TickDay>& days) {
    auto out = open_out(path);
    out << "day,s,t,y\n";
    for (std::size_t i = 0; i < days.size(); ++i) {
        const int m = days[i].m();
        for (int s = 0; s <= m; ++s)
            out << i + 1 << ',' << s << ',' << format_double(static_cast<double>(s) / m) << ','
                << format_double(days[i].y[static_cast<std::size_t>(s)]) << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<TickDay> read_ticks_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    const auto header = split(line);
    if (header != std::vector<std::string>{"day", "s", "t", "y"})
        throw DataError(path.string() + ": expected header day,s,t,y");

    std::vector<TickDay> days;
    long current = 0;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        const std::string where = path.string() + ":" + std::to_string(row);
        if (cells.size() != 4) throw DataError(where + ": expected 4 columns");
        const long day = parse_long(cells[0], where);
        const long s = parse_long(cells[1], where);
        const double y = parse_double(cells[3], where);
        if (day != current) {
            if (day != current + 1) throw DataError(where + ": days must be consecutive from 1");
            current = day;
            days.emplace_back();
        }
        if (s != static_cast<long>(days.back().y.size())) throw DataError(where + ": tick index out of sequence");
        days.back().y.push_back(y);
    }
    if (days.empty()) throw DataError(path.string() + ": no ticks");
    for (const auto& d : days)
        if (d.m() != days.front().m()) throw DataError(path.string() + ": days have different tick counts");
    return days;
}

VolTable make_table(const Eigen::MatrixXd& values) {
    VolTable t;
    t.values = values;
    for (Eigen::Index i = 0; i < values.rows(); ++i) t.days.push_back(static_cast<int>(i) + 1);
    for (Eigen::Index j = 1; j <= values.cols(); ++j) t.grid.push_back(static_cast<double>(j) / values.cols());
    return t;
}

void write_volmatrix_csv(const std::filesystem::path& path, const VolTable& table) {
    auto out = open_out(path);
    out << "day";
    for (double g : table.grid) out << ',' << format_double(g);
    out << '\n';
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        out << table.days[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << ',' << format_double(table.values(i, j));
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

VolTable read_volmatrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "day") throw DataError(path.string() + ": expected header 'day,<grid times>'");

    VolTable t;
    for (std::size_t j = 1; j < header.size(); ++j) t.grid.push_back(parse_double(header[j], path.string() + ":1"));
    std::vector<std::vector<double>> rows;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        const std::string where = path.string() + ":" + std::to_string(row);
        if (cells.size() != header.size()) throw DataError(where + ": wrong column count");
        t.days.push_back(static_cast<int>(parse_long(cells[0], where)));
        std::vector<double> r;
        for (std::size_t j = 1; j < cells.size(); ++j) r.push_back(parse_double(cells[j], where));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError(path.string() + ": no rows");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.grid.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

json to_json(const DgpParams& p) {
    return json{{"mu", p.mu},
                {"gamma0", p.gamma0},
                {"gamma1", p.gamma1},
                {"b0", p.b0},
                {"b1", p.b1},
                {"b2", p.b2},
                {"b3", p.b3},
                {"noise_sd", p.noise_sd},
                {"jump_mean", p.jump_mean},
                {"jump_sd", p.jump_sd},
                {"jump_intensity", p.jump_intensity},
                {"eps_scale_sd", p.eps_scale_sd},
                {"m", p.m},
                {"n", p.n},
                {"D_total", p.D_total},
                {"seed", p.seed},
                {"burn_in", p.burn_in},
                {"positivity_retries", p.positivity_retries}};
}

DgpParams dgp_from_json(const json& j) {
    DgpParams p;
    try {
        p.mu = j.value("mu", p.mu);
        p.gamma0 = j.value("gamma0", p.gamma0);
        p.gamma1 = j.value("gamma1", p.gamma1);
        p.b0 = j.value("b0", p.b0);
        p.b1 = j.value("b1", p.b1);
        p.b2 = j.value("b2", p.b2);
        p.b3 = j.value("b3", p.b3);
        p.noise_sd = j.value("noise_sd", p.noise_sd);
        p.jump_mean = j.value("jump_mean", p.jump_mean);
        p.jump_sd = j.value("jump_sd", p.jump_sd);
        p.jump_intensity = j.value("jump_intensity", p.jump_intensity);
        p.eps_scale_sd = j.value("eps_scale_sd", p.eps_scale_sd);
        p.m = j.value("m", p.m);
        p.n = j.value("n", p.n);
        p.D_total = j.value("D_total", p.D_total);
        p.seed = j.value("seed", p.seed);
        p.burn_in = j.value("burn_in", p.burn_in);
        p.positivity_retries = j.value("positivity_retries", p.positivity_retries);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad DGP parameter JSON: ") + e.what());
    }
    return p;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const Prediction& p) {
    json j{{"method", p.method}, {"rank", p.rank_used}, {"values", std::vector<double>(p.values.data(), p.values.data() + p.values.size())}};
    j["conditioning"] = p.conditioning ? finite_or_null(*p.conditioning) : json(nullptr);
    j["flags"] = p.flags;
    return j;
}

json to_json(const SpotCurve& c, int day) {
    return json{{"day", day},
                {"k_m", c.k_m},
                {"bpv", c.bpv},
                {"nu", c.nu},
                {"truncation_hits", c.truncation_hits},
                {"negative_count", c.negative_count}};
}

json to_json(const BacktestReport& r) {
    json j;
    j["window"] = r.window;
    j["days"] = r.days;
    j["n"] = r.n;
    j["out_of_sample_days"] = r.out_of_sample_days;
    j["methods"] = r.methods;
    j["omegas"] = r.omegas;
    j["q0s"] = r.q0s;
    j["flags"] = r.flags;
    j["scores"] = json::array();
    for (const auto& s : r.scores)
        j["scores"].push_back({{"method", s.method}, {"omega", s.omega}, {"mspe", s.mspe}, {"qlike", s.qlike}});
    j["dm"] = json::array();
    for (const auto& d : r.dm)
        j["dm"].push_back({{"method", d.method},
                           {"baseline", d.baseline},
                           {"loss", d.loss},
                           {"omega", d.omega},
                           {"statistic", finite_or_null(d.statistic)},
                           {"p_value", d.p_value},
                           {"p_adj", d.p_adj},
                           {"reject", d.reject}});
    j["coverage"] = json::array();
    for (const auto& c : r.coverage)
        j["coverage"].push_back({{"method", c.method},
                                 {"omega", c.omega},
                                 {"q0", c.q0},
                                 {"observations", c.observations},
                                 {"violations", c.violations},
                                 {"lruc", {{"statistic", c.lruc}, {"p_value", c.lruc_p}, {"p_adj", c.lruc_p_adj}}},
                                 {"lrcc", {{"statistic", c.lrcc}, {"p_value", c.lrcc_p}, {"p_adj", c.lrcc_p_adj}}},
                                 {"dq", {{"statistic", c.dq}, {"p_value", c.dq_p}, {"p_adj", c.dq_p_adj}, {"dof", c.dq_dof}}}});
    return j;
}

json to_json(const StudyResult& r, const StudyConfig& cfg) {
    json j;
    j["seed"] = r.seed;
    j["replications"] = r.replications;
    j["dgp"] = to_json(cfg.dgp);
    j["cells"] = json::array();
    for (const auto& c : r.cells)
        j["cells"].push_back({{"method", to_string(c.method)},
                              {"D", c.D},
                              {"omega", c.omega},
                              {"mean_mspe", finite_or_null(c.mean())},
                              {"std_error", finite_or_null(c.std_error())},
                              {"count", c.mspe.size()},
                              {"failures", c.failures}});
    return j;
}

void write_report_table_csv(const std::filesystem::path& path, const BacktestReport& r) {
    auto out = open_out(path);
    const int D = r.window + 1;
    out << "method,metric,omega,D,value,p_adj\n";
    auto row = [&](const std::string& method, const std::string& metric, double omega, double value, const std::string& padj) {
        out << method << ',' << metric << ',' << format_double(omega) << ',' << D << ',' << format_double(value) << ','
            << padj << '\n';
    };
    for (const auto& s : r.scores) {
        row(s.method, "mspe", s.omega, s.mspe, "");
        row(s.method, "qlike", s.omega, s.qlike, "");
    }
    for (const auto& d : r.dm) row(d.method, "dm_" + d.loss, d.omega, d.statistic, format_double(d.p_adj));
    for (const auto& c : r.coverage) {
        const std::string q = "@q" + format_double(c.q0);
        row(c.method, "violation_rate" + q, c.omega, static_cast<double>(c.violations) / c.observations, "");
        row(c.method, "lruc" + q, c.omega, c.lruc, format_double(c.lruc_p_adj));
        row(c.method, "lrcc" + q, c.omega, c.lrcc, format_double(c.lrcc_p_adj));
        row(c.method, "dq" + q, c.omega, c.dq, format_double(c.dq_p_adj));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

void write_study_csv(const std::filesystem::path& path, const StudyResult& r) {
    auto out = open_out(path);
    out << "method,metric,omega,D,value,std_error,count,failures\n";
    for (const auto& c : r.cells)
        out << to_string(c.method) << ",mspe," << format_double(c.omega) << ',' << c.D << ',' << format_double(c.mean())
            << ',' << format_double(c.std_error()) << ',' << c.mspe.size() << ',' << c.failures << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace sipvol::io
