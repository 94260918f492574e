#include "tomac/train/config.hpp"

#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using tomac::train::ConfigError;
using tomac::train::json;

namespace
{

const fs::path kSource = TOMAC_SOURCE_DIR;
const std::string kProfiles[] = {"boxpushing6", "boxpushing8", "boxpushing10", "boxpushing12", "boxpushing14"};

struct Run
{
  int code = -1;
  std::string output;
};

Run shell(const std::string & command)
{
  Run r;
  FILE * pipe = popen((command + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    r.output.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string quote(const fs::path & p) {return "'" + p.string() + "'";}

Run cli(const std::string & args) {return shell(std::string("'") + TOMAC_BINARY + "' " + args);}

Run validate(const std::string & schema, const fs::path & doc, bool lines = false)
{
  return shell("python3 " + quote(kSource / "tools" / "validate_json.py") + " " +
           quote(kSource / "schemas" / (schema + ".schema.json")) + " " + quote(doc) + (lines ? " --lines" : ""));
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path & p) {return json::parse(slurp(p));}

void write_file(const fs::path & p, const std::string & text) {std::ofstream(p, std::ios::binary) << text;}

struct TempDir
{
  fs::path path;
  explicit TempDir(const std::string & tag)
  : path(fs::temp_directory_path() / ("tomac-cli-" + tag + "-" + std::to_string(::getpid())))
  {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {fs::remove_all(path);}
};

json tiny_config()
{
  json j = read_json(kSource / "configs" / "boxpushing6.json");
  j["episodes"] = 4;
  j["train_freq"] = 2;
  j["episodes_per_train"] = 2;
  j["batch_size"] = 8;
  j["env"]["horizon"] = 30;
  j["model"]["rnn_hidden"] = 8;
  j["model"]["attention_dim"] = 8;
  j["model"]["mixer_hidden"] = 8;
  return j;
}

int count_lines(const std::string & text)
{
  int n = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {++n;}
  }
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("shipped profiles round-trip and satisfy the schema") {
  for (const std::string & name : kProfiles) {
    CAPTURE(name);
    const fs::path path = kSource / "configs" / (name + ".json");
    const json original = read_json(path);
    const auto config = tomac::train::config_from_json(original);
    CHECK_NOTHROW(tomac::train::validate(config));
    const json again = tomac::train::to_json(config);
    CHECK(tomac::train::to_json(tomac::train::config_from_json(again)) == again);
    CHECK(config.env.grid_size == std::stoi(name.substr(std::string("boxpushing").size())));
    const Run v = validate("train_config", path);
    CHECK_MESSAGE(v.code == 0, v.output);
  }
}

TEST_CASE("config errors name the offending field") {
  json j = tiny_config();
  j["bogus_key"] = 1;
  try {
    tomac::train::config_from_json(j);
    FAIL("unknown key accepted");
  } catch (const ConfigError & e) {
    CHECK(e.path() == "bogus_key");
  }

  j = tiny_config();
  j["epsilon"]["start"] = "high";
  try {
    tomac::train::config_from_json(j);
    FAIL("wrong type accepted");
  } catch (const ConfigError & e) {
    CHECK(e.path() == "epsilon.start");
  }

  TempDir dir("bad");
  write_file(dir.path / "bad.json", j.dump());
  const Run v = validate("train_config", dir.path / "bad.json");
  CHECK(v.code != 0);
  const Run r = cli("train --config " + quote(dir.path / "bad.json") + " --out " + quote(dir.path / "run"));
  CHECK(r.code == 2);
  CHECK(r.output.find("epsilon.start") != std::string::npos);
}

TEST_CASE("train writes a resolved config and one metrics row per episode") {
  TempDir dir("train");
  write_file(dir.path / "tiny.json", tiny_config().dump(2));
  const Run r = cli("train --config " + quote(dir.path / "tiny.json") + " --out " + quote(dir.path / "run") +
      " --eval-every 2 --eval-episodes 2");
  REQUIRE_MESSAGE(r.code == 0, r.output);

  const json resolved = read_json(dir.path / "run" / "resolved-config.json");
  CHECK(resolved["subcommand"] == "train");
  CHECK(resolved["train"]["episodes"] == 4);
  CHECK(resolved["train"]["variant"] == "full");
  CHECK(fs::exists(dir.path / "run" / "checkpoint"));

  const std::string jsonl = slurp(dir.path / "run" / "metrics.jsonl");
  CHECK(count_lines(jsonl) == 4);
  CHECK(count_lines(slurp(dir.path / "run" / "metrics.csv")) == 5);  // header
  const Run v = validate("metrics_row", dir.path / "run" / "metrics.jsonl", true);
  CHECK_MESSAGE(v.code == 0, v.output);

  // A resolved config is itself a valid input and reproduces the run.
  const Run again = cli("train --config " + quote(dir.path / "run" / "resolved-config.json") + " --out " +
      quote(dir.path / "rerun") + " --eval-every 2 --eval-episodes 2");
  REQUIRE_MESSAGE(again.code == 0, again.output);
  CHECK(slurp(dir.path / "rerun" / "metrics.jsonl") == jsonl);
}

TEST_CASE("usage errors exit with code 2") {
  TempDir dir("usage");
  Run r = cli("train --config " + quote(dir.path / "missing.json") + " --out " + quote(dir.path / "run"));
  CHECK(r.code == 2);
  CHECK(r.output.find("missing.json") != std::string::npos);

  write_file(dir.path / "tiny.json", tiny_config().dump());
  r = cli("ablate --variant sideways --config " + quote(dir.path / "tiny.json"));
  CHECK(r.code == 2);
  r = cli("train");
  CHECK(r.code == 2);
  r = cli("frobnicate");
  CHECK(r.code == 2);
  write_file(dir.path / "broken.json", "{\"episodes\": ");
  r = cli("train --config " + quote(dir.path / "broken.json") + " --out " + quote(dir.path / "run"));
  CHECK(r.code == 2);
}

TEST_CASE("ablate changes only the ablated modules") {
  TempDir dir("ablate");
  write_file(dir.path / "tiny.json", tiny_config().dump());
  const Run base = cli("train --config " + quote(dir.path / "tiny.json") + " --out " + quote(dir.path / "full"));
  REQUIRE_MESSAGE(base.code == 0, base.output);
  const json full = read_json(dir.path / "full" / "resolved-config.json")["train"];

  struct Expect { std::string variant, buffer; bool atpg; };
  for (const Expect & e : {Expect{"mac-jert", "mac-jert", true}, Expect{"no-atpg", "mac-sjert", false},
                           Expect{"both", "mac-jert", false}}) {
    CAPTURE(e.variant);
    const fs::path out = dir.path / e.variant;
    const Run r = cli("ablate --variant " + e.variant + " --config " + quote(dir.path / "tiny.json") +
        " --out " + quote(out));
    REQUIRE_MESSAGE(r.code == 0, r.output);
    const json resolved = read_json(out / "resolved-config.json");
    CHECK(resolved["subcommand"] == "ablate");
    json ablated = resolved["train"];
    CHECK(ablated["buffer"] == e.buffer);
    CHECK(ablated["atpg"] == e.atpg);
    CHECK(ablated["variant"] == e.variant);
    ablated["buffer"] = full["buffer"];
    ablated["atpg"] = full["atpg"];
    ablated["variant"] = full["variant"];
    CHECK(ablated == full);
  }
}

TEST_CASE("eval is deterministic and its trace replays") {
  TempDir dir("eval");
  write_file(dir.path / "tiny.json", tiny_config().dump());
  REQUIRE(cli("train --config " + quote(dir.path / "tiny.json") + " --out " + quote(dir.path / "run")).code == 0);
  const std::string ckpt = quote(dir.path / "run" / "checkpoint");

  Run a = cli("eval --checkpoint " + ckpt + " --episodes 3 --seed 11 --out " + quote(dir.path / "a.json") +
      " --trace " + quote(dir.path / "a.trace"));
  REQUIRE_MESSAGE(a.code == 0, a.output);
  Run b = cli("eval --checkpoint " + ckpt + " --episodes 3 --seed 11 --out " + quote(dir.path / "b.json") +
      " --trace " + quote(dir.path / "b.trace"));
  REQUIRE(b.code == 0);
  CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "b.json"));
  CHECK(slurp(dir.path / "a.trace") == slurp(dir.path / "b.trace"));
  CHECK(a.output == b.output);

  const json stats = read_json(dir.path / "a.json");
  CHECK(stats["episodes"] == 3);

  // Trace lines are everything except the header.
  const std::string trace = slurp(dir.path / "a.trace");
  const int trace_lines = count_lines(trace) - 1;
  double reward_sum = 0.0;
  {
    std::istringstream in(trace);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') {continue;}
      std::istringstream fields(line);
      std::string t, macros, steps, reward;
      std::getline(fields, t, '\t');
      std::getline(fields, macros, '\t');
      std::getline(fields, steps, '\t');
      std::getline(fields, reward, '\t');
      reward_sum += std::stod(reward);
    }
  }
  const Run replay = cli("replay " + quote(dir.path / "a.trace"));
  REQUIRE_MESSAGE(replay.code == 0, replay.output);
  std::ostringstream expect;
  expect << trace_lines << " frames, return " << reward_sum;
  CHECK(replay.output.find(expect.str()) != std::string::npos);

  // The first evaluation episode is the traced one.
  const double first = stats["returns"][0].get<double>();
  CHECK(first == doctest::Approx(reward_sum).epsilon(1e-12));
}

TEST_CASE("eval refuses a checkpoint with a different format version") {
  TempDir dir("version");
  write_file(dir.path / "tiny.json", tiny_config().dump());
  REQUIRE(cli("train --config " + quote(dir.path / "tiny.json") + " --out " + quote(dir.path / "run")).code == 0);
  const fs::path manifest = dir.path / "run" / "checkpoint" / "manifest.txt";
  std::string text = slurp(manifest);
  const auto pos = text.find("format_version=1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "format_version=2");
  write_file(manifest, text);
  const Run r = cli("eval --checkpoint " + quote(dir.path / "run" / "checkpoint") + " --out " +
      quote(dir.path / "e.json"));
  CHECK(r.code == 4);
  CHECK_FALSE(fs::exists(dir.path / "e.json"));

  const Run missing = cli("eval --checkpoint " + quote(dir.path / "nowhere"));
  CHECK(missing.code == 2);
}

TEST_CASE("verify-igm on a small grid passes and writes a valid report") {
  TempDir dir("igm");
  const std::string args = "verify-igm --max-agents 2 --max-actions 2 --max-duration 2 --draws 2 --adv-draws 50 --out ";
  const Run r = cli(args + quote(dir.path / "a.json"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const Run v = validate("verify_igm_report", dir.path / "a.json");
  CHECK_MESSAGE(v.code == 0, v.output);
  REQUIRE(cli(args + quote(dir.path / "b.json")).code == 0);
  CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "b.json"));
}

TEST_CASE("replay handles empty and malformed traces") {
  TempDir dir("replay");
  write_file(dir.path / "empty.trace", "");
  Run r = cli("replay " + quote(dir.path / "empty.trace"));
  CHECK(r.code == 0);
  CHECK(r.output.find("0 frames") != std::string::npos);

  write_file(dir.path / "bad.trace", "# env=boxpushing grid=6 horizon=100 seed=0\n0\t7,7\t0,0\t-0.1\t1,1\nnot a line\n");
  r = cli("replay " + quote(dir.path / "bad.trace"));
  CHECK(r.code == 2);
  CHECK(r.output.find("line 3") != std::string::npos);

  r = cli("replay " + quote(dir.path / "absent.trace"));
  CHECK(r.code == 2);
}

}  // TEST_SUITE
