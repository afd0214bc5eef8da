#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string cli_path() {
    const char* env = std::getenv("HOCA_CLI");
    REQUIRE(env != nullptr);
    return env;
}

RunResult run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    std::array<char, 512> buf{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("hoca_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& mechanism,
                      const std::string& arities, std::size_t epochs,
                      std::uint64_t seed = 11) {
    fs::path path = dir / "config.json";
    std::ofstream out(path);
    out << "{\n"
        << "  \"seed\": " << seed << ",\n"
        << "  \"mechanism\": \"" << mechanism << "\",\n"
        << "  \"arities\": [" << arities << "],\n"
        << "  \"rank\": 1,\n"
        << "  \"hidden\": 8, \"enc_hidden\": 3, \"emb_dim\": 4,\n"
        << "  \"common_dim\": 6, \"hier_dim\": 6,\n"
        << "  \"learning_rate\": 0.005, \"epochs\": " << epochs << ",\n"
        << "  \"beam_width\": 5,\n"
        << "  \"dataset\": {\"n_modalities\": 3, \"d_raw\": 8, \"vocab\": 8,\n"
        << "    \"t_range\": [[4,4],[4,4],[4,4]], \"n_items\": 24,\n"
        << "    \"correlation_strength\": 1.0, \"caption_len\": 1, \"noise\": 0.02}\n"
        << "}\n";
    return path;
}

std::vector<std::vector<std::string>> parse_csv(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST_CASE("verify runs a green suite and rejects unknown names") {
    RunResult ok = run_cli("verify --suite simplex");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("simplex") != std::string::npos);
    CHECK(ok.output.find("pass") != std::string::npos);

    RunResult bad = run_cli("verify --suite nonexistent");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("training twice with the same config gives byte-identical outputs") {
    fs::path dir = temp_dir("det");
    fs::path cfg = write_config(dir, "lowrank", "1,2,3", 3);
    RunResult a = run_cli("train --config " + cfg.string() + " --out " + (dir / "a").string());
    RunResult b = run_cli("train --config " + cfg.string() + " --out " + (dir / "b").string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "a" / "curve.csv") == slurp(dir / "b" / "curve.csv"));
    CHECK(slurp(dir / "a" / "params.bin") == slurp(dir / "b" / "params.bin"));
    CHECK(fs::exists(dir / "a" / "config.json"));
}

TEST_CASE("unary mechanism and arity-1 low-rank give byte-identical curves") {
    fs::path dir = temp_dir("unary_equiv");
    fs::path unary_cfg = write_config(dir, "unary", "1", 3);
    fs::rename(dir / "config.json", dir / "unary.json");
    fs::path low_cfg = write_config(dir, "lowrank", "1", 3);
    RunResult a =
        run_cli("train --config " + (dir / "unary.json").string() + " --out " + (dir / "u").string());
    RunResult b = run_cli("train --config " + low_cfg.string() + " --out " + (dir / "l").string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "u" / "curve.csv") == slurp(dir / "l" / "curve.csv"));
}

TEST_CASE("zero epochs writes the initial checkpoint and an empty curve body") {
    fs::path dir = temp_dir("zero");
    fs::path cfg = write_config(dir, "lowrank", "1,2", 0);
    RunResult r = run_cli("train --config " + cfg.string() + " --out " + (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    auto curve = parse_csv(dir / "o" / "curve.csv");
    REQUIRE(curve.size() == 1); // header only
    CHECK(curve[0][0] == "epoch");
    CHECK(fs::exists(dir / "o" / "params.bin"));
}

TEST_CASE("flag overrides beat the config file") {
    fs::path dir = temp_dir("flags");
    fs::path cfg = write_config(dir, "lowrank", "1,2,3", 1);
    RunResult r = run_cli("train --config " + cfg.string() + " --seed 99 --mechanism unary" +
                          " --arities 1 --out " + (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    std::string resolved = slurp(dir / "o" / "config.json");
    CHECK(resolved.find("\"seed\": 99") != std::string::npos);
    CHECK(resolved.find("\"mechanism\": \"unary\"") != std::string::npos);
}

TEST_CASE("bench emits the grid CSV with exact counts and CAPPED markers") {
    fs::path dir = temp_dir("bench");
    RunResult r = run_cli("bench --n-list 2,3 --t-list 4,8 --k-list 1 --d 8 --out " +
                          (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    auto rows = parse_csv(dir / "o" / "bench.csv");
    REQUIRE(rows.size() == 1 + 2 * 2 * 3); // header + (unary+dense+lowrank) per cell
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][5] == rows[i][6]);

    RunResult capped = run_cli("bench --n-list 3 --t-list 16 --k-list 1 --max-elements 1000" +
                               std::string(" --out ") + (dir / "c").string());
    REQUIRE(capped.exit_code == 0);
    bool saw_capped = false;
    for (const auto& row : parse_csv(dir / "c" / "bench.csv"))
        saw_capped = saw_capped || (row.size() > 5 && row[5] == "CAPPED");
    CHECK(saw_capped);
}

TEST_CASE("sweep-rank emits one row per rank and seed plus a summary") {
    fs::path dir = temp_dir("sweep");
    fs::path cfg = write_config(dir, "lowrank", "1,2,3", 1);
    RunResult r = run_cli("sweep-rank --config " + cfg.string() +
                          " --ranks 1,2 --seeds 5,6 --out " + (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    auto rows = parse_csv(dir / "o" / "sweep_rank.csv");
    REQUIRE(rows.size() == 1 + 4);
    CHECK(rows[1][0] == "1");
    CHECK(rows[4][0] == "2");
    auto summary = parse_csv(dir / "o" / "sweep_rank_summary.csv");
    REQUIRE(summary.size() == 1 + 2);
}

TEST_CASE("emit-attention rows are simplex vectors and count steps x modalities x families") {
    fs::path dir = temp_dir("emit");
    fs::path cfg = write_config(dir, "lowrank", "1,2,3", 4);
    RunResult tr = run_cli("train --config " + cfg.string() + " --out " + (dir / "o").string());
    REQUIRE(tr.exit_code == 0);
    RunResult em = run_cli("emit-attention --checkpoint " + (dir / "o").string() +
                           " --item 0 --out " + (dir / "att").string());
    REQUIRE(em.exit_code == 0);

    auto fam = parse_csv(dir / "att" / "attention_families.csv");
    REQUIRE(fam.size() > 1);
    const std::size_t n = 3, families = 4;
    std::size_t steps = 0;
    for (std::size_t i = 1; i < fam.size(); ++i)
        steps = std::max(steps, static_cast<std::size_t>(std::stoul(fam[i][0]) + 1));
    CHECK(fam.size() - 1 == steps * n * families);

    for (std::size_t i = 1; i < fam.size(); ++i) {
        const auto& row = fam[i];
        double beta_sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) beta_sum += std::stod(row[4 + k]);
        CHECK(std::fabs(beta_sum - 1.0) < 1e-9);
        double w_sum = 0.0;
        for (std::size_t j = 4 + n; j < row.size(); ++j) w_sum += std::stod(row[j]);
        CHECK(std::fabs(w_sum - 1.0) < 1e-9);
    }
    auto comb = parse_csv(dir / "att" / "attention_combined.csv");
    CHECK(comb.size() - 1 == steps * n);
    for (std::size_t i = 1; i < comb.size(); ++i) {
        double w_sum = 0.0;
        for (std::size_t j = 3 + n; j < comb[i].size(); ++j) w_sum += std::stod(comb[i][j]);
        CHECK(std::fabs(w_sum - 1.0) < 1e-9);
    }
}

TEST_CASE("export-item writes a readable feature bundle") {
    fs::path dir = temp_dir("export");
    fs::path cfg = write_config(dir, "lowrank", "1,2", 1);
    RunResult r = run_cli("export-item --config " + cfg.string() + " --item 1 --out " +
                          (dir / "b").string());
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir / "b" / "bundle.json"));
    CHECK(fs::exists(dir / "b" / "m0.bin"));
    CHECK(fs::file_size(dir / "b" / "m0.bin") == 8 * 8 * 4);
}

TEST_CASE("error paths map to the documented exit codes") {
    fs::path dir = temp_dir("errors");
    // missing checkpoint: I/O error
    RunResult io = run_cli("emit-attention --checkpoint " + (dir / "nope").string() +
                           " --item 0 --out " + (dir / "x").string());
    CHECK(io.exit_code == 3);

    // malformed config: usage error
    std::ofstream(dir / "bad.json") << "{broken";
    RunResult usage = run_cli("train --config " + (dir / "bad.json").string());
    CHECK(usage.exit_code == 2);

    // unknown flag: usage error
    RunResult flag = run_cli("train --definitely-not-a-flag");
    CHECK(flag.exit_code == 2);

    // training without a dataset block: usage error
    std::ofstream(dir / "nodata.json") << "{\"seed\": 1}";
    RunResult nodata = run_cli("train --config " + (dir / "nodata.json").string());
    CHECK(nodata.exit_code == 2);
}
