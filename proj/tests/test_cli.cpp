#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "ksg/config.hpp"
#include "ksg/expression.hpp"
#include "ksg/io.hpp"
#include "ksg/steady.hpp"

#ifndef KSG_CLI_PATH
#error "KSG_CLI_PATH must point at the command-line tool"
#endif

using namespace ksg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ksg_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + KSG_CLI_PATH + "\" " + args + " > \"" + o.string() + "\" 2> \"" +
                            e.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "run.ini";
    std::ofstream(p) << text;
    return p;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// value printed on a "name = value" line of the tool's summary
double printed(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind(name, 0) != 0) continue;
        const auto eq = line.find('=');
        if (eq != std::string::npos) return std::stod(line.substr(eq + 1));
    }
    return std::nan("");
}

}  // namespace

TEST_CASE("config parsing and diagnostics") {
    const auto f = ConfigFile::parse(
        "# comment\n[run]\nseed = 9\nresolution = 12.5\n\n[steady]\nmu = 0.3 ; trailing comment\n"
        "[sweep]\nvalues = 0.1, 0.2 0.3\n",
        "test.ini");
    CHECK(f.get_int("run.seed", 0) == 9);
    CHECK(f.get_double("run.resolution") == 12.5);
    CHECK(f.get_double("steady.mu") == 0.3);
    CHECK(f.get_list("sweep.values") == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(f.get_double("steady.c", 0.7) == 0.7);
    CHECK(f.where("steady.mu") == "test.ini:7");
    CHECK(contains(f.echo(), "mu = 0.3"));

    auto expect_error = [](const std::string& text, const std::string& fragment) {
        try {
            ConfigFile::parse(text, "bad.ini");
            FAIL("expected a configuration error for: " << text);
        } catch (const ConfigError& e) {
            CHECK_MESSAGE(contains(e.what(), fragment), e.what());
        }
    };
    expect_error("[run]\nbogus = 1\n", "bad.ini:2");
    expect_error("[nosuch]\n", "nosuch");
    expect_error("[run]\nseed = 1\nseed = 2\n", "bad.ini:3");
    expect_error("seed = 1\n", "bad.ini:1");
    expect_error("[run]\nseed =\n", "bad.ini:2");
    expect_error("[run\n", "bad.ini:1");

    auto g = ConfigFile::parse("[steady]\nmu = abc\n", "x.ini");
    CHECK_THROWS_AS(g.get_double("steady.mu"), ConfigError);
    g.set("steady.mu", "0.25", "--set steady.mu=0.25");
    CHECK(g.get_double("steady.mu") == 0.25);
    CHECK(contains(g.where("steady.mu"), "--set"));
    CHECK_THROWS_AS(g.set("nosuch.key", "1", "--set"), ConfigError);
}

TEST_CASE("mode requirements are validated") {
    auto empty = ConfigFile::parse("", "<defaults>");
    try {
        resolve_config(empty, Mode::Evolve);
        FAIL("evolve without a mass must fail");
    } catch (const ConfigError& e) {
        CHECK(contains(e.what(), "evolve.lambda"));
    }
    CHECK_THROWS_AS(resolve_config(empty, Mode::Steady), ConfigError);
    const auto t = resolve_config(empty, Mode::Thresholds);
    CHECK(t.alpha == 0.05);
    CHECK(std::get<Ellipse>(t.domain).alpha == 0.05);

    auto s = ConfigFile::parse("[steady]\nalpha = 0.2\nmu = 0.4\n[run]\nresolution = 10\n", "s.ini");
    const auto c = resolve_config(s, Mode::Steady);
    CHECK(std::get<Ellipse>(c.domain).alpha == 0.2);
    CHECK(*c.mu == 0.4);
    CHECK(c.resolution == 10.0);

    auto w = ConfigFile::parse("[weight]\nkind = expression\nexpr = 1 + sin(x\na = 0.5\nb = 2\n", "w.ini");
    CHECK_THROWS_AS(resolve_config(w, Mode::Thresholds), ConfigError);
    auto bounds = ConfigFile::parse("[weight]\nvalue = 2\na = 3\nb = 1\n", "b.ini");
    CHECK_THROWS_AS(resolve_config(bounds, Mode::Thresholds), ConfigError);
    auto sweep = ConfigFile::parse("[sweep]\nmode = steady\nkey = steady.mu\nvalues = 0.1 -1\n[steady]\nalpha = 0.2\n",
                                   "sw.ini");
    // every swept value is validated before any run starts
    CHECK_THROWS_AS(resolve_config(sweep, Mode::Sweep), ConfigError);
    auto bad_sweep = ConfigFile::parse("[sweep]\nmode = steady\nkey = steady.alpha\nvalues = 0.1 1.5\n"
                                       "[steady]\nmu = 0.1\n",
                                       "sw.ini");
    CHECK_THROWS_AS(resolve_config(bad_sweep, Mode::Sweep), ConfigError);
    CHECK(parse_mode("thresholds") == Mode::Thresholds);
    CHECK_THROWS(parse_mode("nonsense"));
}

TEST_CASE("weight expressions") {
    CHECK(Expression("1 + 2 * 3")(0, 0) == 7.0);
    CHECK(Expression("2 ^ 3 ^ 2")(0, 0) == 512.0);
    CHECK(Expression("-x^2")(3, 0) == -9.0);
    CHECK(Expression("(x - y) / 2")(5, 1) == 2.0);
    CHECK(Expression("max(x, y) + min(1, 2)")(3, 4) == 5.0);
    CHECK(Expression("exp(log(2)) + sqrt(16) + abs(-1)")(0, 0) == doctest::Approx(7.0));
    CHECK(Expression("cos(pi) + e")(0, 0) == doctest::Approx(std::numbers::e - 1.0));
    CHECK(Expression("1.5e1 + .5")(0, 0) == 15.5);
    CHECK(Expression("tanh(0) + cosh(0) + sinh(0) + tan(0) + sin(0)")(0, 0) == 1.0);
    for (const char* bad : {"", "1 +", "foo(1)", "sin 1", "(1", "1)", "max(1)", "x y", "2 $ 3"}) {
        CHECK_THROWS_AS(Expression{bad}, ExpressionError);
    }
    try {
        Expression("1 + * 2");
    } catch (const ExpressionError& e) {
        CHECK(e.position() == 4);
    }
}

TEST_CASE("csv and pgm writers") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
    CHECK(hex_hash(255) == "00000000000000ff");

    CsvWriter w({"a", "b"});
    w.add_row(std::vector<double>{1.0, 2.5});
    w.add_row(std::vector<std::string>{"x", "y"});
    CHECK(w.str() == "a,b\n1,2.5\nx,y\n");
    CHECK_THROWS(w.add_row(std::vector<double>{1.0}));

    const fs::path dir = scratch("writers");
    auto g = MaskedGrid::build(Ellipse{1.0, 1.0}, 5);
    auto f = ScalarField::sample(g, BoundaryRole::NoFlux, [](double x, double y) { return x + 2 * y; });
    write_field_csv(dir / "sub" / "f.csv", f, "f");
    const std::string csv = slurp(dir / "sub" / "f.csv");
    CHECK(csv.rfind("i,j,x,y,f\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(g->size()) + 1);

    write_field_pgm(dir / "f.pgm", f);
    const std::string pgm = slurp(dir / "f.pgm");
    std::ostringstream header;
    header << "P5\n" << g->nx() << " " << g->ny() << "\n65535\n";
    REQUIRE(pgm.rfind(header.str(), 0) == 0);
    CHECK(pgm.size() == header.str().size() + 2u * g->nx() * g->ny());
    // exterior corner pixel is zero
    CHECK(pgm[header.str().size()] == 0);
    CHECK(pgm[header.str().size() + 1] == 0);
}

TEST_CASE("profile round trip") {
    const fs::path dir = scratch("profile");
    EllipseRegime reg{0.3, 1.0, 1.0, 1.0};
    auto g = MaskedGrid::build(Ellipse{0.3, 1.0}, 8);
    auto V = WeightField::constant(g, 1.0);
    const auto p = monotone_iterate(0.5, reg, g, V).profile;
    ProfileMetadata meta;
    meta.alpha = 0.3;
    meta.mu = p.mu;
    meta.lambda = p.lambda;
    meta.grid_hash = hex_hash(g->hash());
    meta.resolution = 8;
    write_profile(dir, p, meta);
    ProfileMetadata back;
    const auto q = load_profile(dir / "profile.csv", g, &back);
    CHECK(q.u.data() == p.u.data());
    CHECK(q.lambda == p.lambda);
    CHECK(q.mu == p.mu);
    CHECK(back.grid_hash == meta.grid_hash);
    CHECK(contains(slurp(dir / "profile.json"), "\"lambda\""));
    CHECK_THROWS(load_profile(dir / "profile.csv", MaskedGrid::build(Ellipse{0.3, 1.0}, 9)));
}

TEST_CASE("command line: thresholds") {
    const fs::path dir = scratch("thresholds");
    const auto r = cli("thresholds --set thresholds.alpha=0.05 --set thresholds.c_D=1 --out \"" +
                           (dir / "out").string() + "\"",
                       dir);
    CHECK(r.code == 0);
    CHECK(printed(r.out, "lambda_under") == doctest::Approx(36.10).epsilon(2e-4));
    CHECK(printed(r.out, "lambda_over") == doctest::Approx(42.13).epsilon(2e-4));
    CHECK(printed(r.out, "8 pi") == doctest::Approx(8 * std::numbers::pi).epsilon(1e-5));
    CHECK(contains(r.out, "supercritical window nonempty"));
    CHECK(fs::exists(dir / "out" / "results.csv"));
    const std::string meta = slurp(dir / "out" / "meta.txt");
    CHECK(contains(meta, "mode = thresholds"));
    CHECK(contains(meta, "alpha = 0.05  # from --set thresholds.alpha=0.05"));

    const auto wide = cli("thresholds --set thresholds.alpha=0.5 --out \"" + (dir / "wide").string() + "\"", dir);
    CHECK(wide.code == 0);
    CHECK(contains(wide.out, "supercritical window empty"));
}

TEST_CASE("command line: configuration errors") {
    const fs::path dir = scratch("errors");
    const auto missing = cli("evolve --out \"" + (dir / "o").string() + "\"", dir);
    CHECK(missing.code != 0);
    CHECK(contains(missing.err, "evolve.lambda"));

    const fs::path cfg = write_config(dir, "[run]\nseed = 1\n[evolve]\nlamda = 3\n");
    const auto typo = cli("evolve --config \"" + cfg.string() + "\"", dir);
    CHECK(typo.code == 1);
    CHECK(contains(typo.err, "run.ini:4"));

    CHECK(cli("", dir).code != 0);
    CHECK(cli("steady --jobs 0", dir).code != 0);
}

TEST_CASE("command line: steady then spectrum") {
    const fs::path dir = scratch("chain");
    const fs::path cfg = write_config(dir, "[run]\nresolution = 10\n[steady]\nalpha = 0.2\nmu = 0.5\n");
    const auto s = cli("steady --config \"" + cfg.string() + "\" --out \"" + (dir / "steady").string() + "\"", dir);
    REQUIRE(s.code == 0);
    for (const char* f : {"results.csv", "history.csv", "meta.txt", "fields/profile.csv", "fields/profile.json",
                          "fields/u.pgm", "fields/rho.csv"}) {
        CHECK_MESSAGE(fs::exists(dir / "steady" / f), f);
    }
    const auto sp = cli("spectrum --config \"" + cfg.string() + "\" --set spectrum.profile=\"" +
                            (dir / "steady" / "fields" / "profile.csv").string() + "\" --out \"" +
                            (dir / "spectrum").string() + "\"",
                        dir);
    REQUIRE(sp.code == 0);
    CHECK(contains(sp.out, "(positive)"));
    CHECK(fs::exists(dir / "spectrum" / "fields" / "eigenfield.pgm"));
    CHECK(contains(slurp(dir / "spectrum" / "meta.txt"), "tau1 = "));
}

TEST_CASE("command line: evolve is reproducible") {
    const fs::path dir = scratch("evolve");
    const fs::path cfg = write_config(dir,
                                      "[run]\nresolution = 8\nseed = 5\n[steady]\nalpha = 0.2\n"
                                      "[evolve]\nlambda = 6\nsigma = 0.25\nt_end = 0.2\nsample_dt = 0.05\n"
                                      "snapshots = 0.1\n");
    const auto a = cli("evolve --config \"" + cfg.string() + "\" --out \"" + (dir / "a").string() + "\"", dir);
    const auto b = cli("evolve --config \"" + cfg.string() + "\" --out \"" + (dir / "b").string() + "\"", dir);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    for (const char* f : {"results.csv", "fields/rho_final.csv", "fields/rho_initial.csv", "fields/rho_t0.1000.csv"}) {
        REQUIRE_MESSAGE(fs::exists(dir / "a" / f), f);
        CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
    }
    const auto c = cli("evolve --config \"" + cfg.string() + "\" --seed 6 --out \"" + (dir / "c").string() + "\"",
                       dir);
    REQUIRE(c.code == 0);
    CHECK(slurp(dir / "a" / "fields/rho_initial.csv") != slurp(dir / "c" / "fields/rho_initial.csv"));
    CHECK(contains(slurp(dir / "c" / "meta.txt"), "seed = 6"));
}

TEST_CASE("command line: sweep and norms") {
    const fs::path dir = scratch("sweep");
    const fs::path cfg = write_config(dir,
                                      "[run]\nresolution = 8\n[steady]\nalpha = 0.2\n"
                                      "[sweep]\nmode = steady\nkey = steady.mu\nvalues = 0.2 0.4 0.5\n");
    const auto s = cli("sweep --jobs 2 --config \"" + cfg.string() + "\" --out \"" + (dir / "s").string() + "\"", dir);
    CHECK(s.code == 0);
    for (const char* d : {"run_000", "run_001", "run_002"}) CHECK(fs::exists(dir / "s" / d / "results.csv"));
    const std::string res = slurp(dir / "s" / "results.csv");
    CHECK(std::count(res.begin(), res.end(), '\n') == 4);

    const auto n = cli("norms --set norms.density=uniform --set steady.alpha=0.3 --resolution 8 --out \"" +
                           (dir / "n").string() + "\"",
                       dir);
    CHECK(n.code == 0);
    CHECK(fs::exists(dir / "n" / "green_rows.csv"));
    CHECK(fs::exists(dir / "n" / "results.csv"));
}
