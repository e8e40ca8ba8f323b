// Drives the command-line binary as a subprocess and checks its outputs and
// exit codes. The binary's path arrives through the UNIRET_CLI_PATH macro.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "uniret/model.hpp"

#ifndef UNIRET_CLI_PATH
#error "UNIRET_CLI_PATH must point at the CLI binary"
#endif

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CmdResult run_cli(const testutil::TempDir& dir, const std::string& args) {
  static std::atomic<unsigned> counter{0};
  const unsigned id = counter.fetch_add(1);
  const std::string out_path = dir.file("cli-out-" + std::to_string(id) + ".txt");
  const std::string err_path = dir.file("cli-err-" + std::to_string(id) + ".txt");
  const std::string command = std::string(UNIRET_CLI_PATH) + " " + args + " >" + out_path +
                              " 2>" + err_path;
  const int raw = std::system(command.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = testutil::read_text(out_path);
  result.err = testutil::read_text(err_path);
  return result;
}

std::string v1_jsonl() {
  std::string out;
  for (int i = 0; i < 4; ++i) {
    const std::string qi = std::to_string(i);
    out += "{\"query_id\":\"q" + qi + "\",\"query\":\"question number " + qi +
           "\",\"positive_passages\":[{\"docid\":\"d" + qi +
           "\",\"title\":\"\",\"text\":\"answer body " + qi +
           "\"}],\"negative_passages\":[{\"docid\":\"d" + std::to_string((i + 1) % 4) +
           "\",\"title\":\"\",\"text\":\"answer body " + std::to_string((i + 1) % 4) + "\"}]}\n";
  }
  return out;
}

}  // namespace

TEST_CASE("help and argument errors use the usage exit code") {
  testutil::TempDir dir("cli-basic");
  const CmdResult help = run_cli(dir, "--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(help.out.find("search") != std::string::npos);

  const CmdResult bare = run_cli(dir, "");
  CHECK(bare.exit_code == 2);
  CHECK(!bare.err.empty());

  const CmdResult unknown = run_cli(dir, "train --no-such-flag");
  CHECK(unknown.exit_code == 2);

  const CmdResult missing_required = run_cli(dir, "encode");
  CHECK(missing_required.exit_code == 2);
}

TEST_CASE("the pipeline round-trips end to end through the binary") {
  testutil::TempDir dir("cli-pipeline");
  testutil::write_text(dir.file("v1.jsonl"), v1_jsonl());

  const CmdResult convert = run_cli(
      dir, "convert --input " + dir.file("v1.jsonl") + " --out-corpus " +
               dir.file("corpus.jsonl") + " --out-queries " + dir.file("queries.jsonl"));
  REQUIRE(convert.exit_code == 0);
  CHECK(convert.out.find("duplication factor") != std::string::npos);

  const CmdResult validate = run_cli(dir, "validate --queries " + dir.file("queries.jsonl") +
                                              " --corpus " + dir.file("corpus.jsonl"));
  CHECK(validate.exit_code == 0);
  CHECK(validate.out.find("ok") != std::string::npos);

  const CmdResult train = run_cli(
      dir, "train --dataset queries=" + dir.file("queries.jsonl") + ",corpus=" +
               dir.file("corpus.jsonl") + " --out " + dir.file("model.uret") +
               " --dim 8 --feature-width 128 --batch-size 2 --negatives 1 --seed 3 --threads 2");
  REQUIRE(train.exit_code == 0);
  CHECK(train.out.find("checkpoint written") != std::string::npos);
  CHECK(uniret::load_checkpoint(dir.file("model.uret")).dim == 8);

  const CmdResult encode = run_cli(dir, "encode --checkpoint " + dir.file("model.uret") +
                                            " --corpus " + dir.file("corpus.jsonl") + " --out " +
                                            dir.file("corpus.urix") + " --threads 2");
  REQUIRE(encode.exit_code == 0);

  const CmdResult search = run_cli(
      dir, "search --checkpoint " + dir.file("model.uret") + " --index " +
               dir.file("corpus.urix") + " --queries " + dir.file("queries.jsonl") + " --out " +
               dir.file("out.run") + " --k 2 --tag cli");
  REQUIRE(search.exit_code == 0);

  // qrels from the conversion's positive labels
  std::string qrels;
  for (int i = 0; i < 4; ++i)
    qrels += "q" + std::to_string(i) + " 0 d" + std::to_string(i) + " 1\n";
  testutil::write_text(dir.file("qrels.txt"), qrels);
  const CmdResult eval = run_cli(dir, "eval --run " + dir.file("out.run") + " --qrels " +
                                          dir.file("qrels.txt") + " --ndcg-k 2 --recall-k 1,2");
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.out.find("ndcg@2") != std::string::npos);
  CHECK(eval.out.find("recall@1") != std::string::npos);
  CHECK(eval.out.find("recall@2") != std::string::npos);

  const std::string mine_args = "mine --checkpoint " + dir.file("model.uret") + " --index " +
                                dir.file("corpus.urix") + " --queries " +
                                dir.file("queries.jsonl") + " --out " + dir.file("mined.jsonl") +
                                " --top-n 4 --m-out 2 --seed 9";
  const CmdResult mine = run_cli(dir, mine_args);
  REQUIRE(mine.exit_code == 0);
  const std::string mined1 = testutil::read_text(dir.file("mined.jsonl"));
  CHECK(mined1.find("negative_document_ids") != std::string::npos);

  // byte-for-byte determinism of a rerun
  const CmdResult again = run_cli(dir, mine_args);
  REQUIRE(again.exit_code == 0);
  CHECK(testutil::read_text(dir.file("mined.jsonl")) == mined1);
}

TEST_CASE("failures map to the documented exit codes") {
  testutil::TempDir dir("cli-errors");

  // io: missing input file
  const CmdResult io = run_cli(dir, "encode --checkpoint " + dir.file("nope.uret") +
                                        " --corpus " + dir.file("nope.jsonl") + " --out " +
                                        dir.file("x.urix"));
  CHECK(io.exit_code == 4);
  CHECK(!io.err.empty());

  // data: malformed input
  testutil::write_text(dir.file("bad.jsonl"), "this is not json\n");
  const CmdResult data = run_cli(
      dir, "convert --input " + dir.file("bad.jsonl") + " --out-corpus " + dir.file("c.jsonl") +
               " --out-queries " + dir.file("q.jsonl"));
  CHECK(data.exit_code == 3);
  CHECK(data.err.find("line 1") != std::string::npos);

  // data: validation failures flip the exit code even though the tool ran
  const auto task = testutil::make_synth_task(3, 16, 1, 2);
  auto queries = task.queries;
  queries[0].positive_ids.push_back("ghost");
  testutil::write_text(dir.file("corpus.jsonl"), testutil::corpus_jsonl(task.corpus));
  testutil::write_text(dir.file("queries.jsonl"), testutil::queries_jsonl(queries));
  const CmdResult invalid = run_cli(dir, "validate --queries " + dir.file("queries.jsonl") +
                                             " --corpus " + dir.file("corpus.jsonl"));
  CHECK(invalid.exit_code == 3);
  CHECK(invalid.out.find("FAILED") != std::string::npos);
}

TEST_CASE("a config file supplies defaults that flags can override") {
  testutil::TempDir dir("cli-config");
  const auto task = testutil::make_synth_task(4, 16, 1, 4);
  testutil::write_text(dir.file("corpus.jsonl"), testutil::corpus_jsonl(task.corpus));
  testutil::write_text(dir.file("queries.jsonl"), testutil::queries_jsonl(task.queries));
  testutil::write_text(dir.file("train.cfg"),
                       "[train]\ndim=8\nfeature-width=64\nbatch-size=2\nnegatives=1\n");

  const CmdResult with_config = run_cli(
      dir, "--config " + dir.file("train.cfg") + " train --dataset queries=" +
               dir.file("queries.jsonl") + ",corpus=" + dir.file("corpus.jsonl") + " --out " +
               dir.file("a.uret"));
  REQUIRE(with_config.exit_code == 0);
  CHECK(uniret::load_checkpoint(dir.file("a.uret")).dim == 8);
  CHECK(uniret::load_checkpoint(dir.file("a.uret")).feature_width == 64);

  // a flag on the command line beats the config file
  const CmdResult overridden = run_cli(
      dir, "--config " + dir.file("train.cfg") + " train --dim 16 --dataset queries=" +
               dir.file("queries.jsonl") + ",corpus=" + dir.file("corpus.jsonl") + " --out " +
               dir.file("b.uret"));
  REQUIRE(overridden.exit_code == 0);
  CHECK(uniret::load_checkpoint(dir.file("b.uret")).dim == 16);

  // unknown config keys are rejected
  testutil::write_text(dir.file("bad.cfg"), "[train]\nno-such-option=1\n");
  const CmdResult bad = run_cli(
      dir, "--config " + dir.file("bad.cfg") + " train --dataset queries=" +
               dir.file("queries.jsonl") + ",corpus=" + dir.file("corpus.jsonl") + " --out " +
               dir.file("c.uret"));
  CHECK(bad.exit_code == 2);
}
