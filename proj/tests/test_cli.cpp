#include "iossnet/pipeline.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using namespace iossnet;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "iossnet-cli-test";

int run(const std::string& args) {
  const std::string cmd = std::string(IOSSNET_CLI) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

const char* kScalar = R"({"model": "scalar", "params": {"coupling": 0.1}, "M": [3, "inf"],
  "eta_sweep": [0.5, 0.8], "falsify": {"samples": 100, "ascent_steps": 5}, "threads": 2})";

struct Workdir {
  Workdir() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Workdir, "configuration errors exit with 1") {
  const auto bad_model = write("bad.json", R"({"model": "boat"})");
  CHECK(run("verify --config " + bad_model.string()) == 1);
  CHECK(slurp(kWork / "stderr.txt").find("unknown model") != std::string::npos);

  const auto syntax = write("syntax.json", "{\n  \"grid\": 5,\n  \"seed\" 1\n}");
  CHECK(run("verify --config " + syntax.string()) == 1);
  CHECK(slurp(kWork / "stderr.txt").find("line 3") != std::string::npos);

  CHECK(run("verify --m zero") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("verify --config " + (kWork / "missing.json").string()) == 1);
}

TEST_CASE_FIXTURE(Workdir, "verify, smallgain and falsify on the scalar chain") {
  const auto cfg = write("scalar.json", kScalar);
  const auto out = kWork / "out";
  CHECK(run("verify --config " + cfg.string() + " --out " + out.string()) == 0);
  const json verify = json::parse(slurp(out / "report.json"));
  // M = 3 uses the end and middle classes only.
  CHECK(verify["class_verifications"] == 2);
  CHECK(fs::exists(out / "report.md"));
  CHECK(fs::exists(out / "provenance.json"));
  CHECK(verify.dump().find("timestamp") == std::string::npos);

  CHECK(run("smallgain --config " + cfg.string() + " --out " + out.string()) == 0);
  const json sg = json::parse(slurp(out / "report.json"));
  CHECK(sg["networks"].size() == 2);
  CHECK(fs::exists(out / "certificates-M3.json"));

  CHECK(run("falsify --config " + cfg.string() + " --out " + out.string() + " --certificates " +
            (out / "certificates-M3.json").string()) == 0);

  json certs = json::parse(slurp(out / "certificates-M3.json"));
  // The measured state lets R absorb any decrease; drop the supply weights too.
  for (auto& c : certs["lmi_lyap"]) {
    c["eta_tilde"] = c["eta_tilde"].get<double>() * 0.1;
    c["Q"] = json::array({json::array({0.0})});
    c["R"] = json::array({json::array({0.0})});
  }
  const auto tampered = write("tampered.json", certs.dump());
  const auto out2 = kWork / "out2";
  CHECK(run("falsify --config " + cfg.string() + " --out " + out2.string() + " --certificates " +
            tampered.string()) == 2);
  const auto witness = out2 / "witness-M3-decrease.json";
  REQUIRE(fs::exists(witness));
  CHECK(run("replay --in " + witness.string()) == 2);

  CHECK(run("falsify --config " + cfg.string() + " --samples 0 --out " + out2.string() + " --certificates " +
            (out / "certificates-M3.json").string()) == 0);
  for (const auto& r : json::parse(slurp(out2 / "report.json"))["falsify"]) CHECK(r["status"] == "not-run");
}

TEST_CASE_FIXTURE(Workdir, "handmade certificate file") {
  const auto certs = write("hand.json", R"({
    "M": 2, "neighbors": [[1], [0]],
    "ioss": [{"eta": 0.5, "p": 1, "q": 1, "r": 1, "g": [{"neighbor": 1, "value": 0.2}]},
             {"eta": 0.5, "p": 1, "q": 1, "r": 1, "g": [{"neighbor": 0, "value": 0.2}]}],
    "lyap": [{"lambda": 0.5, "P1": [[1]], "P2": [[1]], "Q": [[1]], "R": [[1]], "gamma": [{"neighbor": 1, "value": 0.2}]},
             {"lambda": 0.5, "P1": [[1]], "P2": [[1]], "Q": [[1]], "R": [[1]], "gamma": [{"neighbor": 0, "value": 0.2}]}]})");
  const auto out = kWork / "hand";
  CHECK(run("smallgain --certificates " + certs.string() + " --out " + out.string()) == 0);
  const json r = json::parse(slurp(out / "report.json"));
  CHECK(r["networks"][0]["rho_G"].get<double>() == doctest::Approx(0.4));
  CHECK(r["networks"][0]["rho_LG"].get<double>() == doctest::Approx(0.4));

  const auto hot = write("hot.json", std::regex_replace(slurp(certs), std::regex("0\\.2"), "0.6"));
  CHECK(run("smallgain --certificates " + hot.string() + " --out " + out.string()) == 2);
}

TEST_CASE_FIXTURE(Workdir, "report merges runs sorted by M") {
  Report a, b;
  NetworkRecord n;
  n.M = "inf";
  a.networks.push_back(n);
  n.M = "4";
  b.networks.push_back(n);
  n.M = "3";
  b.networks.push_back(n);
  const auto pa = write("a.json", dump_report(a));
  const auto pb = write("b.json", dump_report(b));
  CHECK(run("report --in " + pa.string() + " " + pb.string()) == 0);
  const std::string md = slurp(kWork / "stdout.txt");
  const auto i3 = md.find("| 3 |"), i4 = md.find("| 4 |"), iinf = md.find("| ∞ |");
  REQUIRE(i3 != std::string::npos);
  CHECK(i3 < i4);
  CHECK(i4 < iinf);
  CHECK(run("report --in " + (kWork / "nope.json").string()) == 1);
}

TEST_CASE_FIXTURE(Workdir, "train verification solves once per class") {
  const auto out = kWork / "train";
  CHECK(run("verify --m 3,4,7,inf --eta-sweep 0.5 --out " + out.string()) == 0);
  const json r = json::parse(slurp(out / "report.json"));
  CHECK(r["class_verifications"] == 2);
  CHECK(r["classes"].size() == 2);
}
