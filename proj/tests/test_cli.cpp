#include "catch_amalgamated.hpp"

#include "pathcor/cli.hpp"
#include "pathcor/simulation.hpp"
#include "support.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pathcor;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string data_path(const std::string& name) { return std::string(PATHCOR_TEST_DATA_DIR) + "/" + name; }

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> keys_of(const json& j) {
    std::vector<std::string> k;
    for (auto it = j.begin(); it != j.end(); ++it) k.push_back(it.key());
    return k;
}

class TempDir {
public:
    TempDir() : path_(fs::temp_directory_path() / ("pathcor_cli_" + std::to_string(counter_++))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static inline int counter_ = 0;
    fs::path path_;
};

std::string write_figure1_data(const TempDir& dir, Eigen::Index n = 500, std::uint64_t seed = 1) {
    const PathParams params = symmetric_params(test::figure1_loading(), Matrix::Identity(3, 3), 0.5);
    const std::string path = dir.file("data.csv");
    std::ofstream out(path);
    write_csv(out, generate_dataset(params, n, seed));
    return path;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"bogus"}).code == cli::kUsage);
    CHECK(run({"fit"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kSuccess);
    TempDir dir;
    const std::string data = write_figure1_data(dir);
    CHECK(run({"fit", data, "--p", "3", "--r", "3", "--method", "magic"}).code == cli::kUsage);
    CHECK(run({"fit", data, "--p", "2", "--r", "3"}).code == cli::kUsage);
    CHECK(run({"fit", data, "--p", "3", "--r", "3", "--method", "serr", "--ux", "4"}).code == cli::kUsage);
    CHECK(run({"fit", data, "--p", "3", "--r", "3", "--method", "rrr", "--ux", "1"}).code == cli::kUsage);
    CHECK(run({"simulate", data_path("figure1_params.json"), "--out", dir.file("x.csv")}).code == cli::kUsage);
    CHECK(run({"reproduce", "--figure", "4", "--out", dir.file("x.csv")}).code == cli::kUsage);
    CHECK(run({"reproduce", "--figure", "9", "--seed", "1", "--out", dir.file("x.csv")}).code == cli::kUsage);
}

TEST_CASE("fit rrr") {
    TempDir dir;
    const std::string data = write_figure1_data(dir);
    const Run r = run({"fit", data, "--p", "3", "--r", "3", "--method", "rrr"});
    REQUIRE(r.code == cli::kSuccess);
    const json j = json::parse(r.out);
    CHECK(keys_of(j) == read_lines(data_path("fit_rrr.keys")));
    const double est = j["estimate_cor_regression"].get<double>();
    CHECK(est >= 0.0);
    CHECK(est <= 1.0);
    CHECK(j["rho"].is_null());
    CHECK(j["n"] == 500);
}

TEST_CASE("fit sem reports both scales") {
    TempDir dir;
    const std::string data = write_figure1_data(dir, 1000);
    const Run r = run({"fit", data, "--p", "3", "--r", "3", "--method", "sem", "--seed", "3"});
    REQUIRE(r.code == cli::kSuccess);
    const json j = json::parse(r.out);
    CHECK(keys_of(j) == read_lines(data_path("fit_sem.keys")));
    CHECK(std::abs(j["rho"].get<double>() - 0.5) < 0.1);
    CHECK(j["implied_reg_correlation"].get<double>() <= std::abs(j["rho"].get<double>()));
    CHECK(j["converged"] == true);
}

TEST_CASE("sem non-convergence exits with 3") {
    TempDir dir;
    const std::string data = write_figure1_data(dir);
    const Run r = run({"fit", data, "--p", "3", "--r", "3", "--method", "sem", "--max-iterations", "1", "--starts", "1"});
    CHECK(r.code == cli::kNotConverged);
    CHECK(json::parse(r.out)["converged"] == false);
}

TEST_CASE("full-dimension serr equals rrr") {
    TempDir dir;
    const std::string data = write_figure1_data(dir);
    const json rrr = json::parse(run({"fit", data, "--p", "3", "--r", "3", "--method", "rrr"}).out);
    const Run r = run({"fit", data, "--p", "3", "--r", "3", "--method", "serr", "--ux", "3", "--uy", "3"});
    REQUIRE(r.code == cli::kSuccess);
    const json serr = json::parse(r.out);
    CHECK(keys_of(serr) == read_lines(data_path("fit_serr.keys")));
    CHECK(serr["estimate_cor_regression"] == rrr["estimate_cor_regression"]);
    CHECK(serr["weights"]["u_x"] == 3);
}

TEST_CASE("composite methods and dimension selection") {
    TempDir dir;
    const std::string data = write_figure1_data(dir, 1000);
    for (const char* method : {"pls", "serr", "pca", "unit"}) {
        const Run r = run({"fit", data, "--p", "3", "--r", "3", "--method", method});
        REQUIRE(r.code == cli::kSuccess);
        const json j = json::parse(r.out);
        CHECK(j["weights"]["u_x"] == 1);
        CHECK(std::abs(j["estimate_cor_regression"].get<double>() - 0.38) < 0.1);
    }
    const Run sel = run({"fit", data, "--p", "3", "--r", "3", "--method", "serr", "--select-dims"});
    REQUIRE(sel.code == cli::kSuccess);
    const json j = json::parse(sel.out);
    CHECK(j["diagnostics"]["dimension_source"] == "selected");
    CHECK(j["weights"]["u_x"].get<int>() >= 1);
    const Run zero = run({"fit", data, "--p", "3", "--r", "3", "--method", "pls", "--ux", "0"});
    REQUIRE(zero.code == cli::kSuccess);
    CHECK(json::parse(zero.out)["degenerate"] == true);
}

TEST_CASE("malformed data exits with 2 and names the position") {
    TempDir dir;
    const std::string path = dir.file("bad.csv");
    std::ofstream(path) << "1,2,3,4\n5,6,oops,8\n";
    const Run r = run({"fit", path, "--p", "2", "--r", "2"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("row 2") != std::string::npos);
    CHECK(r.err.find("column 3") != std::string::npos);

    const std::string singular = dir.file("singular.csv");
    std::ofstream(singular) << "1,1,1\n2,2,2\n3,3,3\n";
    CHECK(run({"fit", singular, "--p", "2", "--r", "1"}).code == cli::kDataError);
}

TEST_CASE("population quantities") {
    const Run r = run({"population", data_path("figure1_params.json")});
    REQUIRE(r.code == cli::kSuccess);
    const json j = json::parse(r.out);
    CHECK(keys_of(j) == read_lines(data_path("population.keys")));
    CHECK(std::abs(j["bias_factor"].get<double>() - 0.7675) < 1e-4);
    CHECK(std::abs(j["cor_regression"].get<double>() - 0.3837) < 1e-4);
    CHECK(j["cor_xi_eta"] == 0.5);
    CHECK(j["identifiability"]["correlation_identified"] == true);

    TempDir dir;
    json params = json::parse(slurp(data_path("figure1_params.json")));
    params["cov_xi_eta"] = 0.0;
    std::ofstream(dir.file("zero.json")) << params.dump();
    const json z = json::parse(run({"population", dir.file("zero.json")}).out);
    CHECK(z["cor_regression"] == 0.0);
    CHECK(z["cor_xi_eta"] == 0.0);

    params["beta_x_xi"] = {4, 4, 4};
    params["beta_y_eta"] = {4, 4, 4};
    std::ofstream(dir.file("strong.json")) << params.dump();
    const json s = json::parse(run({"population", dir.file("strong.json")}).out);
    CHECK(std::abs(s["bias_factor"].get<double>() - 48.0 / 49.0) < 1e-12);

    params.erase("var_eta");
    std::ofstream(dir.file("missing.json")) << params.dump();
    const Run m = run({"population", dir.file("missing.json")});
    CHECK(m.code == cli::kDataError);
    CHECK(m.err.find("var_eta") != std::string::npos);

    std::ofstream(dir.file("broken.json")) << "{ not json";
    CHECK(run({"population", dir.file("broken.json")}).code == cli::kDataError);
}

TEST_CASE("simulate writes the requested estimators only") {
    TempDir dir;
    const json cfg = {{"loading", {1.3333333333333333, 0.98, 0.75}},
                      {"n", 100},
                      {"rho_grid", {0.2, 0.4}},
                      {"estimators", {"rrr"}}};
    std::ofstream(dir.file("cfg.json")) << cfg.dump();
    const Run r = run({"simulate", dir.file("cfg.json"), "--out", dir.file("out.csv"), "--seed", "5", "--reps", "2"});
    REQUIRE(r.code == cli::kSuccess);
    const auto lines = read_lines(dir.file("out.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == read_lines(data_path("sim_header.csv"))[0]);
    CHECK(lines[1].find(",rrr,") != std::string::npos);
    CHECK(lines[2].find(",rrr,") != std::string::npos);
    CHECK(r.out.find("rrr:") != std::string::npos);

    CHECK(run({"simulate", dir.file("cfg.json"), "--out", "/nonexistent-dir/out.csv", "--seed", "5", "--reps", "1"}).code ==
          cli::kDataError);
}

TEST_CASE("reproduce is deterministic") {
    TempDir dir;
    const Run a = run({"reproduce", "--figure", "4", "--seed", "42", "--reps", "2", "--out", dir.file("a.csv")});
    const Run b = run({"reproduce", "--figure", "4", "--seed", "42", "--reps", "2", "--out", dir.file("b.csv")});
    REQUIRE(a.code == cli::kSuccess);
    REQUIRE(b.code == cli::kSuccess);
    CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
    CHECK(read_lines(dir.file("a.csv")).size() == 1 + 13 * 6);
}
