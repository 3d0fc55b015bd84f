// Command-line front end: train / update / eval / search / synth / export.
//
// Exit codes: 0 success, 2 data or configuration error, 3 numeric failure.
// HETEMBED_LOG=quiet|info|debug controls verbosity on stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hetembed/hetembed.hpp"

namespace he = hetembed;

namespace {

// Options shared by every subcommand that reads a graph.
struct GraphPaths {
  std::string schema, nodes, edges, content;

  void attach(CLI::App* cmd, bool content_too = true) {
    cmd->add_option("--schema", schema, "Schema TSV (node types and relations)")->required();
    cmd->add_option("--nodes", nodes, "Nodes TSV: label<TAB>type")->required();
    cmd->add_option("--edges", edges, "Edges TSV: src<TAB>relation<TAB>dst")->required();
    if (content_too)
      cmd->add_option("--content", content, "Content TSV: label<TAB>text (defines V_S)");
  }

  he::HetGraph load() const {
    return he::load_graph(nodes, edges, content, he::load_schema(schema));
  }
};

std::vector<he::MetaPathScheme> parse_schemes(const he::GraphSchema& schema,
                                              const std::vector<std::string>& names) {
  std::vector<he::MetaPathScheme> out;
  for (const auto& n : names) out.push_back(he::parse_scheme(schema, n));
  return out;
}

// Dumps the invoked subcommand's options as `<cmd>.<option>` keys, the form
// the root --config option reads back.
void maybe_write_config(const CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw he::DataError("cannot open " + path);
  out << cmd->get_config_formatter()->to_config(cmd, true, false, cmd->get_name() + ".");
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
  GraphPaths graph;
  std::string word_vectors;
  std::string variant = "se-hsg";
  he::TrainConfig train;
  he::WalkConfig walks;
  std::vector<std::string> scheme_names{"APA", "APPA", "APVPA"};
  std::string walk_mode = "metapath";
  std::string noise_support = "corpus";
  std::string out_model;
  std::string out_embeddings, out_log, out_corpus;
  std::string write_config;
  uint64_t seed = 1;
  size_t dim = 128;
};

void run_train(const TrainOpts& o) {
  he::TrainConfig cfg = o.train;
  cfg.variant = he::variant_from_name(o.variant);
  cfg.dim = static_cast<Eigen::Index>(o.dim);
  cfg.seed = o.seed;
  cfg.word_vec_path = o.word_vectors;
  cfg.noise_support = [&] {
    if (o.noise_support == "corpus") return he::NoiseSupport::kCorpusVisited;
    if (o.noise_support == "all") return he::NoiseSupport::kAllNodes;
    throw he::DataError("--noise-support must be corpus or all");
  }();
  if (cfg.variant != he::Variant::kHsg && o.word_vectors.empty())
    throw he::DataError("variant " + o.variant + " requires --word-vectors");

  he::HetGraph g = o.graph.load();

  he::WalkConfig wcfg = o.walks;
  wcfg.seed = o.seed;
  wcfg.workers = cfg.workers;
  wcfg.mode = [&] {
    if (o.walk_mode == "metapath") return he::WalkMode::kMetaPath;
    if (o.walk_mode == "random") return he::WalkMode::kRandom;
    throw he::DataError("--walk-mode must be metapath or random");
  }();
  if (wcfg.mode == he::WalkMode::kMetaPath)
    wcfg.schemes = parse_schemes(g.schema(), o.scheme_names);

  std::optional<he::WordTable> words;
  if (!o.word_vectors.empty()) words = he::load_word_vectors(o.word_vectors);

  he::Trainer trainer(g, cfg, wcfg, words ? &*words : nullptr);
  trainer.prepare();
  if (!o.out_corpus.empty()) he::save_corpus(trainer.corpus(), g, o.out_corpus);

  he::TrainResult res = trainer.run();
  he::save_model(res.model, o.out_model);
  if (!o.out_embeddings.empty()) he::export_embeddings(res.model, o.out_embeddings);
  if (!o.out_log.empty()) he::export_training_log(res.log, o.out_log);
  if (he::log_level() >= 1)
    std::cerr << "[hetembed] trained " << o.variant << " on " << g.num_nodes() << " nodes, "
              << res.triplet_count << " triplets, " << res.log.size() << " epochs, final loss "
              << (res.log.empty() ? 0.0 : res.log.back().loss) << "\n";
}

// --------------------------------------------------------------- update ----

struct UpdateOpts {
  GraphPaths graph;
  std::string model_path;
  std::string delta_nodes, delta_edges, delta_content;
  std::string word_vectors;
  he::OnlineConfig online;
  std::string out_embeddings;
  std::string write_config;
  uint64_t seed = 1;
};

void run_update(const UpdateOpts& o) {
  he::TrainedModel model = he::load_model(o.model_path);
  he::HetGraph g = o.graph.load();

  // Apply the delta: new nodes, their content, then the new edges.
  std::vector<he::NodeIndex> new_nodes;
  he::for_each_tsv_row(o.delta_nodes, [&](size_t lineno, const std::vector<std::string>& f) {
    try {
      if (f.size() != 2) throw he::DataError("expected `label<TAB>type`");
      new_nodes.push_back(g.add_node(f[0], f[1]));
    } catch (const he::DataError& e) {
      throw he::DataError(he::tsv_context(o.delta_nodes, lineno) + ": " + e.what());
    }
  });
  if (!o.delta_content.empty()) {
    he::for_each_tsv_row(o.delta_content, [&](size_t lineno, const std::vector<std::string>& f) {
      try {
        if (f.size() != 2) throw he::DataError("expected `label<TAB>text`");
        g.set_content(g.index_of(f[0]), f[1]);
      } catch (const he::DataError& e) {
        throw he::DataError(he::tsv_context(o.delta_content, lineno) + ": " + e.what());
      }
    });
  }
  he::for_each_tsv_row(o.delta_edges, [&](size_t lineno, const std::vector<std::string>& f) {
    try {
      if (f.size() != 3) throw he::DataError("expected `src<TAB>relation<TAB>dst`");
      g.add_edge(f[0], f[1], f[2]);
    } catch (const he::DataError& e) {
      throw he::DataError(he::tsv_context(o.delta_edges, lineno) + ": " + e.what());
    }
  });

  if (new_nodes.empty()) {
    if (he::log_level() >= 1) std::cerr << "[hetembed] empty delta, nothing to update\n";
    return;
  }

  bool needs_words = false;
  for (he::NodeIndex v : new_nodes) needs_words = needs_words || g.has_content(v);
  std::optional<he::WordTable> words;
  std::string wv_path = !o.word_vectors.empty() ? o.word_vectors : model.word_vec_path;
  if (needs_words) {
    if (wv_path.empty())
      throw he::DataError("delta contains content nodes but no word vectors are available");
    words = he::load_word_vectors(wv_path);
  }

  he::OnlineConfig cfg = o.online;
  cfg.seed = o.seed;
  if (cfg.scheme.empty()) {
    if (model.scheme_names.empty())
      throw he::DataError("--scheme required (model stores no meta-path schemes)");
    cfg.scheme = model.scheme_names.front();
  }

  he::OnlineSession session(model, g, words ? &*words : nullptr);
  auto results = session.process(new_nodes, cfg);

  std::vector<std::pair<std::string, he::Vec>> rows;
  for (const auto& r : results) rows.emplace_back(r.label, r.rep);
  he::append_embeddings(rows, o.out_embeddings);
  if (he::log_level() >= 1)
    std::cerr << "[hetembed] appended " << rows.size() << " vector(s) to " << o.out_embeddings
              << "\n";
}

// ----------------------------------------------------------------- eval ----

struct EvalOpts {
  GraphPaths graph;  // only required for linkpred
  std::string model_path;
  std::string task;
  std::string events;
  std::vector<size_t> ks;
  size_t num_negatives = 100;
  bool shared_negatives = false;
  std::string out;
  std::string write_config;
  uint64_t seed = 1;
};

void run_eval(const EvalOpts& o) {
  he::TrainedModel model = he::load_model(o.model_path);
  he::Mat reps = he::resolved_reps(model);
  std::vector<he::MetricRow> rows;

  if (o.task == "linkpred") {
    if (o.graph.nodes.empty())
      throw he::DataError("linkpred needs the training graph (--schema/--nodes/--edges)");
    he::HetGraph g = o.graph.load();
    auto pairs = he::resolve_event_pairs(model, he::load_event_pairs(o.events, true));
    auto report = he::link_prediction(reps, g, model, pairs, o.seed);
    rows.push_back({"linkpred_accuracy", "-", report.accuracy, report.test_count, o.seed});
    rows.push_back({"linkpred_f1", "-", report.f1, report.test_count, o.seed});
  } else if (o.task == "retrieval") {
    auto pairs = he::resolve_event_pairs(model, he::load_event_pairs(o.events, false));
    auto queries =
        he::make_ranking_queries(model, pairs, o.num_negatives, o.seed, o.shared_negatives);
    std::vector<size_t> ks = o.ks.empty() ? std::vector<size_t>{1, 5, 10} : o.ks;
    for (size_t k : ks)
      rows.push_back({"hit_ratio", std::to_string(k), he::hit_ratio_at_k(reps, queries, k),
                      queries.size(), o.seed});
  } else if (o.task == "recommend") {
    auto pairs = he::resolve_event_pairs(model, he::load_event_pairs(o.events, false));
    auto truth = he::group_truth(pairs);
    if (truth.empty()) throw he::DataError("no evaluation pairs");
    he::TypeId venue_type = model.types[pairs[0].second];
    std::vector<he::NodeIndex> candidates;
    for (he::NodeIndex v = 0; v < model.num_nodes(); ++v)
      if (model.types[v] == venue_type) candidates.push_back(v);
    std::vector<size_t> ks = o.ks.empty() ? std::vector<size_t>{1, 3, 5} : o.ks;
    for (size_t k : ks)
      rows.push_back({"recall", std::to_string(k), he::recall_at_k(reps, truth, candidates, k),
                      truth.size(), o.seed});
  } else {
    throw he::DataError("--task must be linkpred, retrieval or recommend");
  }

  if (o.out.empty()) {
    he::write_metric_report(rows, std::cout);
  } else {
    std::ofstream out(o.out);
    if (!out) throw he::DataError("cannot open " + o.out);
    he::write_metric_report(rows, out);
  }
}

// ---------------------------------------------------------------- search ----

struct SearchOpts {
  std::string model_path;
  std::string query;
  std::string type;
  size_t k = 5;
  std::string out;
};

void run_search(const SearchOpts& o) {
  he::TrainedModel model = he::load_model(o.model_path);
  he::Mat reps = he::resolved_reps(model);
  he::TypeId t = model.schema.node_type_id(o.type);
  auto ranked = he::top_k_relevant(reps, model.types, model.node(o.query), t, o.k);

  std::ostream* outp = &std::cout;
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw he::DataError("cannot open " + o.out);
    outp = &file;
  }
  *outp << "rank\tlabel\tscore\n";
  outp->precision(6);
  *outp << std::fixed;
  for (size_t i = 0; i < ranked.size(); ++i)
    *outp << (i + 1) << "\t" << model.labels[ranked[i].node] << "\t" << ranked[i].score << "\n";
}

// ----------------------------------------------------------------- synth ----

struct SynthOpts {
  he::SynthConfig cfg;
  std::string out_dir;
  std::string write_config;
};

void run_synth(const SynthOpts& o) {
  he::SynthData data = he::synthesize(o.cfg);
  he::write_synth(data, o.out_dir);
  if (he::log_level() >= 1)
    std::cerr << "[hetembed] wrote fixture to " << o.out_dir << ": " << data.nodes.size()
              << " nodes, " << data.edges.size() << " edges, "
              << data.collaboration_events.size() << " collaboration events\n";
}

// ---------------------------------------------------------------- export ----

struct ExportOpts {
  std::string model_path;
  std::string vectors, metadata, categories;
  std::string embeddings;
};

void run_export(const ExportOpts& o) {
  he::TrainedModel model = he::load_model(o.model_path);
  if (!o.embeddings.empty()) he::export_embeddings(model, o.embeddings);
  if (o.vectors.empty() && o.metadata.empty()) return;
  if (o.vectors.empty() || o.metadata.empty())
    throw he::DataError("projector export needs both --vectors and --metadata");

  std::unordered_map<std::string, std::string> category_of;
  if (!o.categories.empty()) {
    he::for_each_tsv_row(o.categories, [&](size_t lineno, const std::vector<std::string>& f) {
      if (f.size() != 2)
        throw he::DataError(he::tsv_context(o.categories, lineno) + ": expected `label<TAB>category`");
      category_of[f[0]] = f[1];
    });
  }

  he::Mat reps = he::resolved_reps(model);
  std::vector<std::string> types, categories;
  for (he::NodeIndex v = 0; v < model.num_nodes(); ++v) {
    std::string type = model.schema.node_type_name(model.types[v]);
    types.push_back(type);
    auto it = category_of.find(model.labels[v]);
    categories.push_back(it != category_of.end() ? it->second : type);
  }
  he::export_projector_tsv(reps, model.labels, types, categories, o.vectors, o.metadata);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetembed: embeddings for typed graphs with per-node text"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hetembed 1.0.0");
  app.fallthrough();  // lets `hetembed <cmd> --config file` reach the root option
  app.set_config("--config", "", "Read options from a key=value file (keys: <cmd>.<option>)");

  TrainOpts train_opts;
  UpdateOpts update_opts;
  EvalOpts eval_opts;
  SearchOpts search_opts;
  SynthOpts synth_opts;
  ExportOpts export_opts;

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "Train embeddings on a typed graph");
  train_opts.graph.attach(train_cmd);
  train_cmd->add_option("--word-vectors", train_opts.word_vectors,
                        "Pretrained word vectors (required unless --variant hsg)");
  train_cmd->add_option("--variant", train_opts.variant, "hsg | hsg-sr | se-hsg")
      ->default_str("se-hsg");
  train_cmd->add_option("--d", train_opts.dim, "Embedding dimension")->default_val(128);
  train_cmd->add_option("--tau", train_opts.walks.window, "Context window")->default_val(7);
  train_cmd->add_option("--walks", train_opts.walks.walks_per_node, "Walks per start node")
      ->default_val(10);
  train_cmd->add_option("--len", train_opts.walks.walk_length, "Walk length")->default_val(30);
  train_cmd->add_option("--schemes", train_opts.scheme_names,
                        "Meta-path schemes, e.g. APA APPA APVPA")
      ->delimiter(',');
  train_cmd->add_option("--walk-mode", train_opts.walk_mode, "metapath | random")
      ->default_str("metapath");
  train_cmd->add_option("--negatives", train_opts.train.negatives, "Negatives per context pair")
      ->default_val(1);
  train_cmd->add_option("--gamma", train_opts.train.gamma, "Text regularization weight (hsg-sr)")
      ->default_val(1.0);
  train_cmd->add_option("--batch", train_opts.train.batch_size, "Mini-batch size")
      ->default_val(512);
  train_cmd->add_option("--lr", train_opts.train.lr, "Adam learning rate")->default_val(0.001);
  train_cmd->add_option("--beta1", train_opts.train.beta1, "Adam beta1")->default_val(0.9);
  train_cmd->add_option("--beta2", train_opts.train.beta2, "Adam beta2")->default_val(0.999);
  train_cmd->add_option("--eps", train_opts.train.eps, "Adam epsilon")->default_val(1e-8);
  train_cmd->add_option("--epochs", train_opts.train.max_epochs, "Maximum epochs")
      ->default_val(200);
  train_cmd->add_option("--tolerance", train_opts.train.tolerance,
                        "Relative epoch-loss change for convergence (inf disables)")
      ->default_val(1e-4);
  train_cmd->add_option("--t-max", train_opts.train.max_tokens, "Maximum tokens per text")
      ->default_val(100);
  train_cmd->add_option("--noise-support", train_opts.noise_support,
                        "Negative-sampling support: corpus | all")
      ->default_str("corpus");
  train_cmd->add_option("--workers", train_opts.train.workers, "Worker threads")->default_val(1);
  train_cmd->add_option("--seed", train_opts.seed, "Master seed")->default_val(1);
  train_cmd->add_option("--out", train_opts.out_model, "Output model file")->required();
  train_cmd->add_option("--embeddings", train_opts.out_embeddings, "Embeddings TSV to write");
  train_cmd->add_option("--log", train_opts.out_log, "Training-log CSV to write");
  train_cmd->add_option("--corpus-out", train_opts.out_corpus, "Walk-corpus dump to write");
  train_cmd->add_option("--write-config", train_opts.write_config,
                        "Dump the resolved configuration to a file");
  train_cmd->callback([&] {
    maybe_write_config(train_cmd, train_opts.write_config);
    run_train(train_opts);
  });

  // update
  CLI::App* update_cmd =
      app.add_subcommand("update", "Embed nodes that arrived after training (model is frozen)");
  update_opts.graph.attach(update_cmd);
  update_cmd->add_option("--model", update_opts.model_path, "Trained model file")->required();
  update_cmd->add_option("--delta-nodes", update_opts.delta_nodes, "New nodes TSV")->required();
  update_cmd->add_option("--delta-edges", update_opts.delta_edges, "New edges TSV")->required();
  update_cmd->add_option("--delta-content", update_opts.delta_content, "New content TSV");
  update_cmd->add_option("--word-vectors", update_opts.word_vectors,
                         "Word vectors (default: path stored in the model)");
  update_cmd->add_option("--scheme", update_opts.online.scheme,
                         "Meta-path for rooted walks (default: first scheme in the model)");
  update_cmd->add_option("--num-walks", update_opts.online.num_walks, "Rooted walks per node")
      ->default_val(100);
  update_cmd->add_option("--lr", update_opts.online.lr, "SGD learning rate")->default_val(0.025);
  update_cmd->add_option("--tolerance", update_opts.online.tolerance, "Sweep convergence")
      ->default_val(1e-4);
  update_cmd->add_option("--max-sweeps", update_opts.online.max_sweeps, "Maximum SGD sweeps")
      ->default_val(50);
  update_cmd->add_option("--t-max", update_opts.online.max_tokens, "Maximum tokens per text")
      ->default_val(100);
  update_cmd->add_option("--seed", update_opts.seed, "Master seed")->default_val(1);
  update_cmd->add_option("--out", update_opts.out_embeddings,
                         "Embeddings TSV to append new vectors to")
      ->required();
  update_cmd->add_option("--write-config", update_opts.write_config,
                         "Dump the resolved configuration to a file");
  update_cmd->callback([&] {
    maybe_write_config(update_cmd, update_opts.write_config);
    run_update(update_opts);
  });

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on held-out events");
  eval_cmd->add_option("--model", eval_opts.model_path, "Trained model file")->required();
  eval_cmd->add_option("--task", eval_opts.task, "linkpred | retrieval | recommend")->required();
  eval_cmd->add_option("--events", eval_opts.events, "Event pairs TSV")->required();
  eval_cmd->add_option("--schema", eval_opts.graph.schema, "Schema TSV (linkpred only)");
  eval_cmd->add_option("--nodes", eval_opts.graph.nodes, "Nodes TSV (linkpred only)");
  eval_cmd->add_option("--edges", eval_opts.graph.edges, "Edges TSV (linkpred only)");
  eval_cmd->add_option("--content", eval_opts.graph.content, "Content TSV (linkpred only)");
  eval_cmd->add_option("--k", eval_opts.ks, "Cut-offs to report (repeatable)")->delimiter(',');
  eval_cmd->add_option("--num-negatives", eval_opts.num_negatives,
                       "Negatives per ranking query (retrieval)")
      ->default_val(100);
  eval_cmd->add_flag("--shared-negatives", eval_opts.shared_negatives,
                     "Draw ranking negatives from one shared stream");
  eval_cmd->add_option("--seed", eval_opts.seed, "Master seed")->default_val(1);
  eval_cmd->add_option("--out", eval_opts.out, "Metric report CSV (default: stdout)");
  eval_cmd->add_option("--write-config", eval_opts.write_config,
                       "Dump the resolved configuration to a file");
  eval_cmd->callback([&] {
    maybe_write_config(eval_cmd, eval_opts.write_config);
    run_eval(eval_opts);
  });

  // search
  CLI::App* search_cmd = app.add_subcommand("search", "Top-k nodes most similar to a query node");
  search_cmd->add_option("--model", search_opts.model_path, "Trained model file")->required();
  search_cmd->add_option("--query", search_opts.query, "Query node label")->required();
  search_cmd->add_option("--type", search_opts.type, "Node type to return")->required();
  search_cmd->add_option("--k", search_opts.k, "Result count")->default_val(5);
  search_cmd->add_option("--out", search_opts.out, "Output file (default: stdout)");
  search_cmd->callback([&] { run_search(search_opts); });

  // synth
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic community fixture");
  synth_cmd->add_option("--out-dir", synth_opts.out_dir, "Directory for the fixture files")
      ->required();
  synth_cmd->add_option("--communities", synth_opts.cfg.communities)->default_val(2);
  synth_cmd->add_option("--authors", synth_opts.cfg.authors_per, "Authors per community")
      ->default_val(60);
  synth_cmd->add_option("--papers", synth_opts.cfg.papers_per, "Papers per community")
      ->default_val(80);
  synth_cmd->add_option("--venues", synth_opts.cfg.venues_per, "Venues per community")
      ->default_val(3);
  synth_cmd->add_option("--cross-prob", synth_opts.cfg.cross_prob,
                        "Probability an affiliation crosses communities")
      ->default_val(0.05);
  synth_cmd->add_option("--vocab", synth_opts.cfg.vocab_per_community, "Tokens per community")
      ->default_val(50);
  synth_cmd->add_option("--tokens-per-paper", synth_opts.cfg.tokens_per_paper)->default_val(10);
  synth_cmd->add_option("--word-dim", synth_opts.cfg.word_dim)->default_val(16);
  synth_cmd->add_option("--future-papers", synth_opts.cfg.future_papers_per,
                        "Held-out papers per community (event sources)")
      ->default_val(30);
  synth_cmd->add_option("--delta-authors", synth_opts.cfg.delta_authors,
                        "New author+paper pairs in the delta")
      ->default_val(1);
  synth_cmd->add_option("--seed", synth_opts.cfg.seed, "Master seed")->default_val(1);
  synth_cmd->add_option("--write-config", synth_opts.write_config,
                        "Dump the resolved configuration to a file");
  synth_cmd->callback([&] {
    maybe_write_config(synth_cmd, synth_opts.write_config);
    run_synth(synth_opts);
  });

  // export
  CLI::App* export_cmd = app.add_subcommand("export", "Export representations from a model");
  export_cmd->add_option("--model", export_opts.model_path, "Trained model file")->required();
  export_cmd->add_option("--embeddings", export_opts.embeddings, "Plain embeddings TSV to write");
  export_cmd->add_option("--vectors", export_opts.vectors, "Projector vectors TSV to write");
  export_cmd->add_option("--metadata", export_opts.metadata, "Projector metadata TSV to write");
  export_cmd->add_option("--categories", export_opts.categories,
                         "Optional label<TAB>category TSV for the metadata category column");
  export_cmd->callback([&] { run_export(export_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // flag/config problems are configuration errors
  } catch (const he::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const he::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
