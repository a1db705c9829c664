#include "sipvol/config.hpp"
#include "sipvol/errors.hpp"
#include "sipvol/experiment.hpp"
#include "sipvol/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

using namespace sipvol;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "sipvol_unit";
    fs::create_directories(dir);
    return dir / name;
}

RunConfig random_config(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> small(2, 9);
    RunConfig c;
    c.dgp.mu = u(rng) * 1e-3;
    c.dgp.gamma0 = 1e-4 * u(rng) + 1e-6;
    c.dgp.noise_sd = 1e-3 * u(rng);
    c.dgp.jump_intensity = u(rng);
    c.dgp.m = 100 * small(rng);
    c.dgp.n = small(rng) * 2;
    c.dgp.seed = rng();
    c.spot.theta = 0.1 + u(rng);
    c.spot.kernel = u(rng) < 0.5 ? KernelShape::UniformLeft : KernelShape::UniformSymmetric;
    c.spot.weight = u(rng) < 0.5 ? WeightFunction::Standard : WeightFunction::Doubled;
    c.spot.boundary_renormalize = u(rng) < 0.5;
    c.spot.bandwidth = u(rng) < 0.5 ? 0.0 : 0.05 * u(rng) + 0.01;
    c.rank.kind = u(rng) < 0.3 ? RankPolicy::Kind::Fixed : u(rng) < 0.5 ? RankPolicy::Kind::Gap : RankPolicy::Kind::Ratio;
    c.rank.rank = small(rng);
    c.rank.r_max = small(rng);
    c.ridge = u(rng) < 0.5 ? 0.0 : u(rng);
    c.methods = {Method::Pc, Method::Sip};
    c.omegas = {0.1 + 0.5 * u(rng), 0.75};
    c.D_list = {small(rng) * 10, 200};
    c.window = small(rng) * 7;
    c.replications = small(rng);
    c.threads = small(rng);
    c.output_dir = "out dir/" + std::to_string(small(rng));
    return c;
}

}  // namespace

TEST_CASE("config serialisation round-trips") {
    CHECK(parse_config(serialize(RunConfig{})) == RunConfig{});
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        RunConfig c = random_config(rng);
        if (c.rank.kind != RankPolicy::Kind::Fixed) c.rank.rank = 1;  // rank only serialised for a fixed policy
        const RunConfig back = parse_config(serialize(c));
        CHECK(back == c);
        CHECK(serialize(back) == serialize(c));
    }
}

TEST_CASE("config keys, values and errors") {
    RunConfig c;
    for (const auto& key : config_keys()) CHECK_NOTHROW(set_config_value(c, key, get_config_value(c, key)));
    CHECK(c == RunConfig{});
    CHECK_THROWS_AS(set_config_value(c, "dgp.nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "dgp.m", "many"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "predict.methods", "sip,xgboost"), ConfigError);
    CHECK_THROWS_AS(parse_config("[dgp]\nunknown = 3\n"), ConfigError);
    const RunConfig p = parse_config("# comment\n[dgp]\nm = 2340 # trailing\n[predict]\nrank = 2\nmethods = sip, ave\n");
    CHECK(p.dgp.m == 2340);
    CHECK(p.rank.kind == RankPolicy::Kind::Fixed);
    CHECK(p.rank.rank == 2);
    CHECK(p.methods == std::vector<Method>{Method::Sip, Method::Ave});
    RunConfig bad;
    bad.dgp.n = bad.dgp.m + 1;
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("environment overrides") {
    RunConfig c;
    ::setenv("SIPVOL_OUTPUT_DIR", "/tmp/elsewhere", 1);
    ::setenv("SIPVOL_THREADS", "3", 1);
    apply_env_overrides(c);
    CHECK(c.output_dir == "/tmp/elsewhere");
    CHECK(c.threads == 3);
    ::unsetenv("SIPVOL_OUTPUT_DIR");
    ::unsetenv("SIPVOL_THREADS");
}

TEST_CASE("number formatting is lossless") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 1e-3);
    for (int i = 0; i < 1000; ++i) {
        const double v = z(rng);
        CHECK(std::stod(io::format_double(v)) == v);
    }
}

TEST_CASE("tick CSV round-trip") {
    DgpParams p;
    p.m = 50;
    p.n = 5;
    p.D_total = 3;
    p.seed = 4;
    const SimPanel panel = gen_panel(p);
    const fs::path path = scratch("ticks.csv");
    io::write_ticks_csv(path, panel.ticks);
    const auto back = io::read_ticks_csv(path);
    REQUIRE(back.size() == 3);
    for (std::size_t d = 0; d < 3; ++d) CHECK(back[d].y == panel.ticks[d].y);

    std::ofstream(scratch("bad_ticks.csv")) << "day,s,t,y\n1,0,0,1.0\n1,2,0.5,1.1\n";
    CHECK_THROWS_AS(io::read_ticks_csv(scratch("bad_ticks.csv")), DataError);
    CHECK_THROWS_AS(io::read_ticks_csv(scratch("missing.csv")), DataError);
}

TEST_CASE("volmatrix CSV round-trip") {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(4, 6).cwiseAbs();
    const io::VolTable t = io::make_table(m);
    CHECK(t.days == std::vector<int>{1, 2, 3, 4});
    CHECK(t.grid.back() == doctest::Approx(1.0));
    const fs::path path = scratch("vol.csv");
    io::write_volmatrix_csv(path, t);
    const io::VolTable back = io::read_volmatrix_csv(path);
    CHECK(back.values == m);
    CHECK(back.grid == t.grid);
}

TEST_CASE("JSON round-trip of DGP parameters") {
    DgpParams p;
    p.seed = 987654321012345ULL;
    p.noise_sd = 0.0;
    const fs::path path = scratch("params.json");
    io::write_json(path, io::to_json(p));
    CHECK(io::dgp_from_json(io::read_json(path)) == p);
}

TEST_CASE("small study is deterministic across thread counts") {
    StudyConfig cfg;
    cfg.dgp.m = 390;
    cfg.dgp.n = 13;
    cfg.dgp.D_total = 30;
    cfg.dgp.seed = 5;
    cfg.D_list = {10, 30};
    cfg.omegas = {0.5};
    cfg.replications = 3;
    cfg.spot.theta = 0.3;
    const StudyResult a = run_study(cfg);
    cfg.threads = 2;
    const StudyResult b = run_study(cfg);
    REQUIRE(a.cells.size() == 2 * 5);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].mspe == b.cells[i].mspe);
        CHECK(a.cells[i].mspe.size() + static_cast<std::size_t>(a.cells[i].failures) == 3);
    }
    // HAR-D needs 24 days: the D = 10 cell fails every replication.
    CHECK(a.cell(Method::HarD, 10, 0.5).failures == 3);
    CHECK(replication_seed(5, 0) != replication_seed(5, 1));
}
