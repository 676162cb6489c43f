// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: verb behavior, determinism,
// and the error-class to exit-code contract.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = EVIDR_CLI_PATH;
const fs::path kTmp = EVIDR_TEST_TMP;

/// Run one CLI invocation, capturing stdout+stderr to a log file; returns the
/// process exit code.
int run(const std::string& args, const fs::path& log) {
  std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

/// Shared fixtures, built once on first use: a small synthetic corpus and a
/// micro checkpoint trained on it. Failures throw so any test touching the
/// environment reports them.
struct Env {
  fs::path dir = kTmp;
  fs::path corpus_a = kTmp / "corpus_a";
  fs::path micro_ckpt = kTmp / "micro.ckpt";

  Env() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    if (run("synth --seed 7 --train 24 --dev 8 --out " + corpus_a.string(),
            dir / "synth_a.log") != 0)
      throw std::runtime_error("fixture synth failed");
    std::ofstream cfg(dir / "micro.cfg");
    cfg << "hidden_size = 16\nepochs = 2\nbatch_size = 8\nseed = 7\n";
    cfg.close();
    if (run("train --config " + (dir / "micro.cfg").string() + " --train " +
                (corpus_a / "train.json").string() + " --dev " + (corpus_a / "dev.json").string() +
                " --out " + micro_ckpt.string(),
            dir / "micro_train.log") != 0)
      throw std::runtime_error("fixture train failed");
  }
};

const Env& env() {
  static Env e;
  return e;
}

/// First query id in a dataset, pulled from a label run's JSONL output.
std::string first_query_id(const fs::path& data) {
  fs::path out = kTmp / "qid_probe.jsonl";
  if (run("label --data " + data.string() + " --out " + out.string(), kTmp / "qid.log") != 0)
    throw std::runtime_error("label probe failed");
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  const std::string key = "\"query_id\":\"";
  auto pos = line.find(key);
  if (pos == std::string::npos) throw std::runtime_error("no query_id in label row");
  pos += key.size();
  return line.substr(pos, line.find('"', pos) - pos);
}

}  // namespace

TEST_CASE("synth is deterministic for a fixed seed") {
  const Env& e = env();
  fs::path again = kTmp / "corpus_a2";
  REQUIRE(run("synth --seed 7 --train 24 --dev 8 --out " + again.string(),
              kTmp / "synth_a2.log") == 0);
  REQUIRE(same_bytes(e.corpus_a / "train.json", again / "train.json"));
  REQUIRE(same_bytes(e.corpus_a / "dev.json", again / "dev.json"));

  fs::path other = kTmp / "corpus_b";
  REQUIRE(run("synth --seed 8 --train 24 --dev 8 --out " + other.string(),
              kTmp / "synth_b.log") == 0);
  REQUIRE(!same_bytes(e.corpus_a / "train.json", other / "train.json"));
}

TEST_CASE("ingest normalizes a dataset and is idempotent") {
  const Env& e = env();
  fs::path out1 = kTmp / "ingest1", out2 = kTmp / "ingest2";
  REQUIRE(run("ingest --data " + (e.corpus_a / "train.json").string() + " --out " + out1.string(),
              kTmp / "ingest1.log") == 0);
  std::string log = slurp(kTmp / "ingest1.log");
  REQUIRE(log.find("24 instances") != std::string::npos);
  REQUIRE(fs::exists(out1 / "data.json"));

  // A second pass over already-normalized data is a fixed point.
  REQUIRE(run("ingest --data " + (out1 / "data.json").string() + " --out " + out2.string(),
              kTmp / "ingest2.log") == 0);
  REQUIRE(same_bytes(out1 / "data.json", out2 / "data.json"));
}

TEST_CASE("label writes one JSONL row per instance") {
  const Env& e = env();
  fs::path out = kTmp / "labels.jsonl";
  REQUIRE(run("label --data " + (e.corpus_a / "dev.json").string() + " --out " + out.string() +
                  " --report-akr",
              kTmp / "label.log") == 0);
  REQUIRE(line_count(out) == 8);
  std::ifstream in(out);
  std::string first;
  std::getline(in, first);
  REQUIRE(first.find("\"query_id\"") != std::string::npos);
  REQUIRE(first.find("\"sentence_labels\"") != std::string::npos);
  std::string log = slurp(kTmp / "label.log");
  REQUIRE(log.find("akr_sentence") != std::string::npos);
  REQUIRE(log.find("akr_clause") != std::string::npos);
}

TEST_CASE("gradcheck passes on the tiny fixture") {
  REQUIRE(run("gradcheck --eps 5e-6", kTmp / "gradcheck.log") == 0);
  std::string log = slurp(kTmp / "gradcheck.log");
  REQUIRE(log.find("PASS") != std::string::npos);
}

TEST_CASE("eval reports metrics and writes the report pair") {
  const Env& e = env();
  fs::path report = kTmp / "report.json";
  REQUIRE(run("eval --ckpt " + e.micro_ckpt.string() + " --data " +
                  (e.corpus_a / "dev.json").string() + " --report " + report.string(),
              kTmp / "eval.log") == 0);
  std::string log = slurp(kTmp / "eval.log");
  REQUIRE(log.find("overall") != std::string::npos);
  REQUIRE(log.find("detector sentence") != std::string::npos);
  REQUIRE(fs::exists(report));
  REQUIRE(slurp(report).find("\"em\"") != std::string::npos);
  // Per-question predictions land in a sidecar next to the report.
  fs::path preds = kTmp / "report.predictions.jsonl";
  REQUIRE(fs::exists(preds));
  REQUIRE(line_count(preds) == 8);
}

TEST_CASE("inspect prints per-fragment evidence probabilities") {
  const Env& e = env();
  REQUIRE(run("inspect --ckpt " + e.micro_ckpt.string() + " --data " +
                  (e.corpus_a / "dev.json").string(),
              kTmp / "inspect.log") == 0);
  std::string log = slurp(kTmp / "inspect.log");
  REQUIRE(log.find("sentences:") != std::string::npos);
  REQUIRE(log.find("clauses:") != std::string::npos);
}

TEST_CASE("inspect-graph writes a DOT file for a named instance") {
  const Env& e = env();
  std::string qid = first_query_id(e.corpus_a / "dev.json");
  fs::path dot = kTmp / "graph.dot";
  REQUIRE(run("inspect-graph --data " + (e.corpus_a / "dev.json").string() + " --query-id " + qid +
                  " --out " + dot.string(),
              kTmp / "igraph.log") == 0);
  std::string body = slurp(dot);
  REQUIRE(body.find("digraph") != std::string::npos);
  REQUIRE(body.find("->") != std::string::npos);

  REQUIRE(run("inspect-graph --data " + (e.corpus_a / "dev.json").string() +
                  " --query-id no_such_id --out " + dot.string(),
              kTmp / "igraph_bad.log") != 0);
}

TEST_CASE("missing input files exit with the file error code") {
  const Env& e = env();
  REQUIRE(run("ingest --data " + (kTmp / "nope.json").string() + " --out " +
                  (kTmp / "nope_out").string(),
              kTmp / "missing1.log") == 2);
  REQUIRE(run("train --train " + (kTmp / "nope.json").string() + " --dev " +
                  (e.corpus_a / "dev.json").string() + " --out " + (kTmp / "nope.ckpt").string(),
              kTmp / "missing2.log") == 2);
}

TEST_CASE("bad config files exit with the config error code") {
  const Env& e = env();
  std::ofstream bad(kTmp / "bad.cfg");
  bad << "no_such_key = 1\n";
  bad.close();
  REQUIRE(run("train --config " + (kTmp / "bad.cfg").string() + " --train " +
                  (e.corpus_a / "train.json").string() + " --dev " +
                  (e.corpus_a / "dev.json").string() + " --out " + (kTmp / "bad.ckpt").string(),
              kTmp / "badcfg.log") == 3);
  std::string log = slurp(kTmp / "badcfg.log");
  REQUIRE(log.find("no_such_key") != std::string::npos);
}

TEST_CASE("corrupt checkpoints are rejected before any report is written") {
  const Env& e = env();
  // Copy the checkpoint and its sidecars, then flip one payload byte.
  fs::path bad = kTmp / "corrupt.ckpt";
  fs::copy_file(e.micro_ckpt, bad, fs::copy_options::overwrite_existing);
  fs::copy_file(e.micro_ckpt.string() + ".config", bad.string() + ".config",
                fs::copy_options::overwrite_existing);
  fs::copy_file(e.micro_ckpt.string() + ".vocab", bad.string() + ".vocab",
                fs::copy_options::overwrite_existing);
  {
    std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    char c;
    f.seekg(64);
    f.get(c);
    c ^= 0x01;
    f.seekp(64);
    f.put(c);
  }
  fs::path report = kTmp / "corrupt_report.json";
  REQUIRE(run("eval --ckpt " + bad.string() + " --data " + (e.corpus_a / "dev.json").string() +
                  " --report " + report.string(),
              kTmp / "corrupt.log") == 4);
  REQUIRE(slurp(kTmp / "corrupt.log").find("CRC") != std::string::npos);
  REQUIRE(!fs::exists(report));

  // Wrong magic with intact sidecars fails the same way.
  fs::path fake = kTmp / "fake.ckpt";
  std::ofstream(fake, std::ios::binary) << "XXXXXXnot a checkpoint at all, only padding bytes";
  fs::copy_file(e.micro_ckpt.string() + ".config", fake.string() + ".config",
                fs::copy_options::overwrite_existing);
  fs::copy_file(e.micro_ckpt.string() + ".vocab", fake.string() + ".vocab",
                fs::copy_options::overwrite_existing);
  REQUIRE(run("eval --ckpt " + fake.string() + " --data " + (e.corpus_a / "dev.json").string(),
              kTmp / "fake.log") == 4);
}

TEST_CASE("malformed dataset JSON exits with the parse error code") {
  std::ofstream(kTmp / "mangled.json") << "{ this is not json";
  REQUIRE(run("ingest --data " + (kTmp / "mangled.json").string() + " --out " +
                  (kTmp / "mangled_out").string(),
              kTmp / "mangled.log") == 5);
}

TEST_CASE("unknown verbs are rejected") {
  REQUIRE(run("frobnicate", kTmp / "unknown.log") != 0);
}
