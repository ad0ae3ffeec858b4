#include "tfa/harness.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace tfa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status = -1;
    std::string output;
};

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

Outcome lab(const std::string& args, const std::string& prefix = "") {
    const std::string cmd = prefix + " '" + env("TFA_LAB") + "' " + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) o.output += buf.data();
    const int raw = pclose(pipe);
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return o;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tfa_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string default_config() { return "'" + env("TFA_SOURCE") + "/config/default.conf'"; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("lacunarity summary") {
    if (env("TFA_LAB").empty()) return;
    const fs::path out = scratch("lac");
    const Outcome o = lab("--config " + default_config() + " --out '" + out.string() + "' verify-lacunarity");
    CHECK(o.status == 0);
    CHECK(o.output.find("10 a x 10 b x 2 parities of s' x 6 ordered pairs = 1200 cases, 0 violations") !=
          std::string::npos);
    std::ifstream csv(out / "lacunarity.csv");
    Metadata meta;
    const auto rows = read_records_csv(csv, &meta);
    CHECK(meta.at("seed") == "1");
    CHECK(meta.at("version") == kLibraryVersion);
    bool passRow = false;
    for (const auto& r : rows) passRow = passRow || (r.metric == "pass" && r.value == 1.0);
    CHECK(passRow);
    fs::remove_all(out);
}

TEST_CASE("variation oracle") {
    if (env("TFA_LAB").empty()) return;
    const fs::path out = scratch("vo");
    const Outcome o =
        lab("--config " + default_config() + " --out '" + out.string() + "' variation-oracle --max-len 8");
    CHECK(o.status == 0);
    CHECK(o.output.find("0 mismatches") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("configuration errors") {
    if (env("TFA_LAB").empty()) return;
    const fs::path out = scratch("bad");
    Outcome o = lab("--config /nonexistent/tfa.conf --out '" + out.string() + "' verify-frames");
    CHECK(o.status == 2);
    CHECK(o.output.find("config file not found") != std::string::npos);

    std::ofstream(out / "broken.conf") << "[frames\ncount = 3\n";
    o = lab("--config '" + (out / "broken.conf").string() + "' --out '" + out.string() + "' verify-frames");
    CHECK(o.status != 0);
    CHECK(o.output.find("Usage") != std::string::npos);

    o = lab("--config " + default_config() + " no-such-command");
    CHECK(o.status != 0);
    CHECK(o.output.find("Usage") != std::string::npos);

    o = lab("--config " + default_config());
    CHECK(o.status != 0);
    fs::remove_all(out);
}

TEST_CASE("csv output is independent of the worker count") {
    if (env("TFA_LAB").empty()) return;
    const fs::path out = scratch("threads");
    std::ofstream(out / "small.conf") << "[frames]\ncount = 6\ngrid_size = 1024\n";
    const std::string common = "--config '" + (out / "small.conf").string() + "' --seed 17 ";
    const Outcome a = lab(common + "--out '" + (out / "a").string() + "' verify-frames", "TFA_LAB_THREADS=1");
    const Outcome b = lab(common + "--out '" + (out / "b").string() + "' verify-frames", "TFA_LAB_THREADS=4");
    CHECK(a.status == 0);
    CHECK(b.status == 0);
    const std::string ca = slurp(out / "a" / "frames.csv");
    CHECK_FALSE(ca.empty());
    CHECK(ca == slurp(out / "b" / "frames.csv"));
    CHECK(ca.find("seed=17") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("ergodic exit status follows the pass rows") {
    if (env("TFA_LAB").empty()) return;
    const fs::path out = scratch("ergodic");
    std::ofstream(out / "small.conf") << "[ergodic]\nN = 256\ntrials = 2\nfew_scales = 3\nmany_scales = 6\n"
                                         "samples_per_octave = 8\n";
    const Outcome o =
        lab("--config '" + (out / "small.conf").string() + "' --out '" + out.string() + "' ergodic");
    std::ifstream csv(out / "ergodic.csv");
    bool pass = false;
    for (const auto& r : read_records_csv(csv))
        if (r.metric == "pass") pass = r.value == 1.0;
    CHECK(o.status == (pass ? 0 : 1));
    CHECK(fs::exists(out / "long_variation.csv"));
    CHECK(fs::exists(out / "short_variation.csv"));
    fs::remove_all(out);
}

}  // TEST_SUITE
