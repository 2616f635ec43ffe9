// Command-line driver for the retrieval pipeline.
//
//   lcr <command> [--config FILE] [--set key=value]... [--out DIR]
//
// Relative paths inside a config file are resolved against the directory
// holding that file.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lcr/pipeline.hpp"
#include "lcr/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

lcr::PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides, const std::string& out) {
  lcr::PipelineConfig config;
  if (!path.empty()) {
    config = lcr::parse_config(lcr::read_text_file(path), path);
    const fs::path base = fs::path(path).parent_path();
    for (std::string* p : {&config.corpus_root, &config.test_root, &config.scorer_train_root, &config.embeddings_path})
      if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  for (const auto& o : overrides) lcr::apply_override(config, o);
  if (!out.empty()) config.out = out;
  return config;
}

struct SynthOptions {
  std::size_t queries = 8;
  std::size_t candidates = 12;
  std::size_t noticed = 3;
  std::size_t paraphrased = 1;
  std::size_t scorer_docs = 12;
  std::size_t dim = 16;
  std::uint64_t seed = 7;
};

// A small planted corpus, matching embeddings, scorer training documents and
// a config that uses them with reduced model sizes.
void write_synthetic(const SynthOptions& o, const fs::path& dir) {
  namespace syn = lcr::synthetic;
  syn::WorldSpec ws;
  ws.embedding_dim = o.dim;
  ws.topics = o.queries + 4;
  ws.words_per_topic = 16;
  ws.filler_words = 120;
  ws.seed = o.seed;
  syn::World world(ws);
  fs::create_directories(dir);
  world.write_embeddings(dir / "embeddings.txt");

  syn::SummarizedSpec ss;
  ss.documents = o.scorer_docs;
  ss.sentences = 10;
  ss.salient_sentences = 3;
  ss.summary_sentences = 2;
  ss.seed = o.seed + 1;
  fs::create_directories(dir / "scorer_docs");
  for (const auto& [id, text] : syn::summarized_documents(world, ss))
    lcr::detail::write_file(dir / "scorer_docs" / (id + ".txt"), text);

  syn::RetrievalSpec rs;
  rs.queries = o.queries;
  rs.candidates = o.candidates;
  rs.noticed = o.noticed;
  rs.paraphrased_noticed = o.paraphrased;
  rs.query_sentences = 8;
  rs.candidate_sentences = 8;
  rs.seed = o.seed + 2;
  syn::write_corpus(syn::retrieval_corpus(world, rs), dir / "corpus");

  lcr::PipelineConfig c;
  c.corpus_root = "corpus";
  c.scorer_train_root = "scorer_docs";
  c.embeddings_path = "embeddings.txt";
  c.scorer.embedding_dim = o.dim;
  c.scorer.filters = 8;
  c.scorer.window = 3;
  c.scorer.hidden = 8;
  c.scorer.learning_rate = 1e-3;
  c.scorer.epochs = 3;
  c.top_k = o.noticed;
  c.seed = o.seed;
  lcr::detail::write_file(dir / "config.json", lcr::serialize_config(c));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legal case retrieval pipeline"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "Override a config key (key=value)");
    sub->add_option("--out", out, "Output directory");
  };

  struct Command {
    const char* name;
    const char* help;
    std::function<void(lcr::Pipeline&)> run;
  };
  const std::vector<Command> commands = {
      {"ingest", "Parse the corpus and write stats.json", [](lcr::Pipeline& p) { p.ingest(); }},
      {"train-scorer", "Train the phrase scoring model", [](lcr::Pipeline& p) { p.train_scorer(); }},
      {"summarize", "Generate candidate summaries", [](lcr::Pipeline& p) { p.summarize(); }},
      {"encode", "Write encoded-summarization document vectors", [](lcr::Pipeline& p) { p.encode(); }},
      {"features", "Write combined feature rows", [](lcr::Pipeline& p) { p.features(); }},
      {"train-ranker", "Train the pairwise ranker", [](lcr::Pipeline& p) { p.train_ranker(); }},
      {"rank", "Rank candidates and write predictions", [](lcr::Pipeline& p) { p.rank(); }},
      {"evaluate", "Score predictions against the labels", [](lcr::Pipeline& p) {
         auto r = p.evaluate();
         std::cout << lcr::format_table({{p.config().subset, r}});
       }},
      {"loo", "Leave-one-out validation of the ranker", [](lcr::Pipeline& p) {
         auto r = p.loo();
         std::cout << lcr::format_table({{p.config().subset, r}});
       }},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help));

  SynthOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a small synthetic corpus with embeddings and config");
  synth_cmd->add_option("--out", synth_out, "Destination directory")->required();
  synth_cmd->add_option("--queries", synth.queries);
  synth_cmd->add_option("--candidates", synth.candidates);
  synth_cmd->add_option("--noticed", synth.noticed);
  synth_cmd->add_option("--paraphrased", synth.paraphrased);
  synth_cmd->add_option("--scorer-docs", synth.scorer_docs);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--seed", synth.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      write_synthetic(synth, synth_out);
      return 0;
    }
    for (const auto& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      lcr::Pipeline pipeline(load_config(config_path, overrides, out));
      c.run(pipeline);
    }
  } catch (const std::exception& e) {
    std::cerr << "lcr: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
