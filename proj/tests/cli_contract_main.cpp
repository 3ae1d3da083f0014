// Exit-code and output contract of the CLI binary (path via --cli):
//   0 ok, 2 config error, 3 numeric failure, 4 bound violation.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace {

std::string cli_path;
int failures = 0;

int run(const std::string& args) {
    const std::string cmd = cli_path + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void expect_exit(const std::string& what, const std::string& args, int want) {
    const int got = run(args);
    const bool ok = got == want;
    std::printf("%s %s (exit %d, expected %d)\n", ok ? "PASS" : "FAIL", what.c_str(), got, want);
    if (!ok) ++failures;
}

void put(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli_path = argv[i + 1];
    if (cli_path.empty()) {
        std::printf("FAIL no --cli path\n");
        return 1;
    }
    const std::string base = "cli_contract_tmp";
    const int rc = std::system(("rm -rf " + base + " && mkdir -p " + base + "/out").c_str());
    (void)rc;

    const std::string norm_pot =
        R"("potential":{"alphabet":"01","memory_order":1,"normalized":true,"table":{)"
        R"("00":-0.105360515657826301,"01":-2.30258509299404568,)"
        R"("10":-1.6094379124341003,"11":-0.22314355131420976}})";

    put(base + "/ok.json", "{" + norm_pot + R"(,"past":"0","steps":5,"seed":1})");
    expect_exit("simulate with a valid config", "simulate --config " + base + "/ok.json --out " + base + "/out", 0);

    put(base + "/badref.json", R"({"potential":"no_such_file.json","past":"0","steps":5,"seed":1})");
    expect_exit("missing potential file", "simulate --config " + base + "/badref.json --out " + base + "/out", 2);

    put(base + "/notjson.json", "this is not json");
    expect_exit("malformed config", "simulate --config " + base + "/notjson.json --out " + base + "/out", 2);

    put(base + "/noseed.json", "{" + norm_pot + R"(,"past":"0","steps":5})");
    expect_exit("stochastic command without a seed", "simulate --config " + base + "/noseed.json --out " + base + "/out", 2);

    put(base + "/notnorm.json",
        R"({"potential":{"alphabet":"01","memory_order":0,"table":{"0":0.0,"1":0.0}},)"
        R"("past":"0","steps":5,"seed":1})");
    expect_exit("non-normalized potential in simulate", "simulate --config " + base + "/notnorm.json --out " + base + "/out", 2);

    put(base + "/reducible.json",
        R"({"potential":{"alphabet":"01","memory_order":1,)"
        R"("table":{"00":0.0,"01":null,"10":0.0,"11":null}}})");
    expect_exit("reducible table in normalize", "normalize --config " + base + "/reducible.json --out " + base + "/out", 3);

    put(base + "/verify_ok.json",
        "{" + norm_pot + R"(,"f":{"indicator_last":"0"},"g":{"indicator_last":"0"},)"
        R"("n_max":40,"method":"exact"})");
    expect_exit("verify with honest modulus", "verify --config " + base + "/verify_ok.json --out " + base + "/out", 0);

    put(base + "/verify_bad.json",
        "{" + norm_pot + R"(,"f":{"indicator_last":"0"},"g":{"indicator_last":"0"},)"
        R"("n_max":80,"method":"exact","gamma_scale":0.2})");
    expect_exit("verify with a corrupted modulus", "verify --config " + base + "/verify_bad.json --out " + base + "/out", 4);

    put(base + "/badtheta.json",
        "{" + norm_pot + R"(,"f":{"indicator_last":"0"},"g":{"indicator_last":"0"},)"
        R"("n_max":5,"method":"exact","theta":1.5})");
    expect_exit("theta outside (0,1)", "verify --config " + base + "/badtheta.json --out " + base + "/out", 2);

    const int rc2 = std::system(("rm -rf " + base).c_str());
    (void)rc2;
    std::printf("%s\n", failures == 0 ? "all CLI contract checks passed" : "CLI contract failures");
    return failures == 0 ? 0 : 1;
}
