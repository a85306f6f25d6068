// basketemb: train basket embeddings and drive the downstream pipeline
// (pooling, indexing, recommendation, clustering, 2-D projection) over the
// shared file formats. Every stage is a batch subcommand; outputs are
// byte-reproducible for a fixed --seed with --threads 1.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "basket/aggregate.hpp"
#include "basket/annindex.hpp"
#include "basket/cluster.hpp"
#include "basket/corpus.hpp"
#include "basket/efemb.hpp"
#include "basket/embedding_store.hpp"
#include "basket/project2d.hpp"
#include "basket/recommend.hpp"
#include "basket/rng.hpp"
#include "basket/textembed.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOpts {
  std::uint64_t seed = 42;
  std::uint32_t threads = 1;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower((unsigned char)c));
  return s;
}

// --- synth -------------------------------------------------------------------

struct SynthOpts {
  std::string out_dir;
  basket::SynthSpec spec;
};

void run_synth(const GlobalOpts& g, const SynthOpts& o) {
  basket::SynthSpec spec = o.spec;
  spec.seed = g.seed;
  const basket::SynthResult result = basket::generate_synthetic_files(spec, o.out_dir);
  const fs::path dir(o.out_dir);
  const json summary = {{"catalog", (dir / "catalog.csv").string()},
                        {"trips", (dir / "trips.csv").string()},
                        {"ground_truth", (dir / "ground_truth.csv").string()},
                        {"products", result.corpus.catalog.size()},
                        {"trips_written", result.corpus.trips.size()},
                        {"customers", spec.n_customers}};
  std::cout << summary.dump(2) << "\n";
}

// --- train -------------------------------------------------------------------

struct TrainOpts {
  std::string catalog;
  std::string trips;
  std::string out_dir;
  std::uint32_t min_basket = 5;
  bool tsv = false;
  basket::TrainConfig config;
  std::string pooling = "mean";
};

json report_to_json(const basket::TrainReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"mean_objective", e.mean_objective}});
  }
  return {{"epochs", epochs},
          {"wall_seconds", report.wall_seconds},
          {"rho_norm", report.rho_norm},
          {"alpha_norm", report.alpha_norm},
          {"vocab_size", report.vocab_size},
          {"pruned_items", report.pruned_items},
          {"pairs_per_epoch", report.pairs_per_epoch}};
}

void run_train(const GlobalOpts& g, const TrainOpts& o) {
  const basket::Catalog catalog = basket::load_catalog(o.catalog);
  basket::LoadCounts counts;
  const basket::Corpus corpus = basket::load_trips(o.trips, catalog, o.min_basket, &counts);

  basket::TrainConfig config = o.config;
  config.context_pooling = basket::pooling_from_string(o.pooling);
  config.seed = g.seed;
  config.threads = g.threads;

  const auto [pair, report] = basket::train(corpus, config);

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  basket::save_embeddings(pair.rho, (dir / "rho.bin").string());
  basket::save_embeddings(pair.alpha, (dir / "alpha.bin").string());
  if (o.tsv) {
    basket::save_embeddings_tsv(pair.rho, (dir / "rho.tsv").string());
    basket::save_embeddings_tsv(pair.alpha, (dir / "alpha.tsv").string());
  }
  json rj = report_to_json(report);
  rj["dim"] = config.dim;
  rj["kept_trips"] = counts.kept;
  rj["dropped_trips"] = counts.dropped;
  write_text((dir / "train_report.json").string(), rj.dump(2) + "\n");

  const json summary = {{"rho", (dir / "rho.bin").string()},
                        {"alpha", (dir / "alpha.bin").string()},
                        {"report", (dir / "train_report.json").string()},
                        {"vocab_size", report.vocab_size},
                        {"pairs_per_epoch", report.pairs_per_epoch}};
  std::cout << summary.dump(2) << "\n";
}

// --- pool-trips / pool-customers ----------------------------------------------

struct PoolOpts {
  std::string catalog;
  std::string trips;
  std::string rho;
  std::string out;
  std::string tsv;
  std::uint32_t min_basket = 5;
  std::uint64_t sample = 0;
};

void run_pool(const GlobalOpts& g, const PoolOpts& o, basket::PoolKind kind) {
  const basket::Catalog catalog = basket::load_catalog(o.catalog);
  const basket::Corpus corpus = basket::load_trips(o.trips, catalog, o.min_basket);
  const basket::EmbeddingTable rho = basket::load_embeddings(o.rho);

  std::optional<basket::SampleSpec> sample;
  if (o.sample > 0) {
    sample = basket::SampleSpec{o.sample, basket::derive_seed(g.seed, "pool-sample")};
  }
  basket::PoolStats stats;
  const auto pooled = basket::pool_all(corpus, rho, kind, sample, &stats);
  const basket::EmbeddingTable table = basket::pooled_to_table(pooled);
  basket::save_embeddings(table, o.out);
  if (!o.tsv.empty()) basket::save_embeddings_tsv(table, o.tsv);

  const json summary = {{"out", o.out},
                        {"pooled", table.size()},
                        {"skipped_owners", stats.skipped_owners},
                        {"skipped_oov_items", stats.skipped_oov_items},
                        {"sample_clamped", stats.sample_clamped}};
  std::cout << summary.dump(2) << "\n";
}

// --- text-embed ----------------------------------------------------------------

struct TextEmbedOpts {
  std::string catalog;
  std::string out_dir;
  basket::TrainConfig config;
};

void run_text_embed(const GlobalOpts& g, const TextEmbedOpts& o) {
  const basket::Catalog catalog = basket::load_catalog(o.catalog);
  basket::TrainConfig config = o.config;
  config.seed = basket::derive_seed(g.seed, "text-embed");
  config.threads = g.threads;

  const basket::NameEmbeddings names = basket::train_name_embeddings(catalog, config);

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  basket::save_embeddings(names.tokens.rho, (dir / "tokens_rho.bin").string());
  basket::save_embeddings(names.tokens.alpha, (dir / "tokens_alpha.bin").string());

  std::string token_tsv;
  for (std::uint32_t t = 0; t < names.vocab.size(); ++t) {
    token_tsv += std::to_string(t) + '\t' + names.vocab.tokens[t] + '\n';
  }
  write_text((dir / "tokens.tsv").string(), token_tsv);

  // Per-product sentence vectors over the full catalog, in sorted id order.
  basket::EmbeddingTable sentences;
  sentences.dim = names.tokens.rho.dim;
  std::uint64_t all_oov = 0;
  std::vector<std::uint64_t> order;
  order.reserve(catalog.size());
  for (const auto& [id, product] : catalog) order.push_back(id);
  std::sort(order.begin(), order.end());
  for (std::uint64_t id : order) {
    const basket::SentenceVector sv = basket::sentence_embedding(catalog.at(id).name, names);
    if (sv.in_vocab_tokens == 0) ++all_oov;
    const auto row = sentences.add(id);
    std::copy(sv.values.begin(), sv.values.end(), sentences.row_mut(row).begin());
  }
  basket::save_embeddings(sentences, (dir / "sentence.bin").string());
  write_text((dir / "name_report.json").string(), report_to_json(names.report).dump(2) + "\n");

  const json summary = {{"tokens", names.vocab.size()},
                        {"sentence", (dir / "sentence.bin").string()},
                        {"all_oov_names", all_oov}};
  std::cout << summary.dump(2) << "\n";
  if (all_oov > 0) {
    std::cerr << "warning: " << all_oov << " product names have no in-vocabulary tokens\n";
  }
}

// --- combine --------------------------------------------------------------------

struct CombineOpts {
  std::string rho;
  std::string sentence;
  std::string out;
  std::string meta;
  bool normalize = false;
};

void run_combine(const CombineOpts& o) {
  basket::EmbeddingPair products;
  products.rho = basket::load_embeddings(o.rho);
  const basket::EmbeddingTable sentences = basket::load_embeddings(o.sentence);

  basket::EmbeddingTable combined;
  combined.dim = products.rho.dim + sentences.dim;
  std::uint64_t missing = 0;

  std::vector<std::uint64_t> order = products.rho.ids;
  std::sort(order.begin(), order.end());
  std::vector<float> sentence(sentences.dim, 0.0f);
  for (std::uint64_t id : order) {
    const float* s = sentences.find(id);
    if (s == nullptr) {
      ++missing;
      std::fill(sentence.begin(), sentence.end(), 0.0f);
    } else {
      std::copy(s, s + sentences.dim, sentence.begin());
    }
    const basket::CombinedEmbedding one = basket::combine(id, products, sentence, o.normalize);
    const auto row = combined.add(id);
    std::copy(one.values.begin(), one.values.end(), combined.row_mut(row).begin());
  }
  basket::save_embeddings(combined, o.out);

  const std::string meta_path = o.meta.empty() ? o.out + ".meta.json" : o.meta;
  const json meta = {{"d_product", products.rho.dim},
                     {"d_sentence", sentences.dim},
                     {"normalized", o.normalize},
                     {"missing_sentences", missing}};
  write_text(meta_path, meta.dump(2) + "\n");

  const json summary = {
      {"out", o.out}, {"meta", meta_path}, {"dim", combined.dim}, {"products", combined.size()}};
  std::cout << summary.dump(2) << "\n";
}

// --- index ----------------------------------------------------------------------

struct IndexOpts {
  std::string input;
  std::string out;
  std::uint32_t trees = 20;
  std::uint32_t leaf_size = 16;
};

void run_index(const GlobalOpts& g, const IndexOpts& o) {
  const basket::EmbeddingTable table = basket::load_embeddings(o.input);
  const basket::AnnForest forest =
      basket::AnnForest::build(table, o.trees, o.leaf_size, basket::derive_seed(g.seed, "index"));
  forest.save(o.out);
  const json summary = {
      {"out", o.out}, {"items", table.size()}, {"dim", table.dim}, {"trees", o.trees}};
  std::cout << summary.dump(2) << "\n";
}

// --- recommend --------------------------------------------------------------------

struct RecommendOpts {
  std::string catalog;
  std::string kind = "similar";
  std::string rho;
  std::string alpha;
  std::string index;
  std::string name;
  std::string metric = "dot";
  std::string out;
  std::uint64_t id = 0;
  bool id_set = false;
  std::uint64_t a = 0, b = 0, c = 0;
  std::uint32_t k = 10;
  std::uint32_t trees = 20;
  std::uint32_t leaf_size = 16;
  std::uint32_t search_k = 0;
  bool json_out = false;
};

std::uint64_t resolve_product(const basket::Catalog& catalog, const std::string& name) {
  const std::string needle = lower(name);
  std::vector<std::pair<std::uint64_t, std::string>> matches;
  for (const auto& [id, product] : catalog) {
    if (lower(product.name).find(needle) != std::string::npos) {
      matches.emplace_back(id, product.name);
    }
  }
  std::sort(matches.begin(), matches.end());
  if (matches.size() == 1) return matches.front().first;
  if (matches.empty()) {
    throw std::invalid_argument("no product name matches '" + name + "'");
  }
  std::string msg = "product name '" + name + "' is ambiguous; candidates:";
  for (std::size_t i = 0; i < std::min<std::size_t>(matches.size(), 5); ++i) {
    msg += " " + std::to_string(matches[i].first) + "='" + matches[i].second + "'";
  }
  if (matches.size() > 5) msg += " ...";
  throw std::invalid_argument(msg);
}

void print_recommendation(const basket::Recommendation& rec, const basket::Catalog& catalog) {
  const auto it = catalog.find(rec.query_id);
  std::printf("query: %llu (%s)  kind: %s\n", (unsigned long long)rec.query_id,
              it == catalog.end() ? "?" : it->second.name.c_str(),
              basket::rec_kind_name(rec.kind));
  std::printf("%-5s %-10s %-14s %s\n", "rank", "id", "score", "name");
  for (std::size_t i = 0; i < rec.results.size(); ++i) {
    const auto& r = rec.results[i];
    std::printf("%-5zu %-10llu %-14.6f %s\n", i + 1, (unsigned long long)r.product_id, r.score,
                r.name.c_str());
  }
}

void run_recommend(const GlobalOpts& g, const RecommendOpts& o) {
  const basket::Catalog catalog = basket::load_catalog(o.catalog);

  const auto build_or_load = [&](const std::string& table_path) -> basket::AnnForest {
    if (!o.index.empty()) return basket::AnnForest::load(o.index);
    if (table_path.empty()) {
      throw std::invalid_argument("recommend: provide --index or the embedding file to build from");
    }
    return basket::AnnForest::build(basket::load_embeddings(table_path), o.trees, o.leaf_size,
                                    basket::derive_seed(g.seed, "index"));
  };

  basket::Recommendation rec;
  if (o.kind == "analogy") {
    if (o.a == 0 || o.b == 0 || o.c == 0) {
      throw std::invalid_argument("recommend --kind analogy needs --a, --b and --c");
    }
    const basket::AnnForest forest = build_or_load(o.rho);
    rec = basket::analogy(o.a, o.b, o.c, forest, o.k, catalog);
  } else {
    std::uint64_t query = o.id;
    if (!o.name.empty()) {
      query = resolve_product(catalog, o.name);
    } else if (!o.id_set) {
      throw std::invalid_argument("recommend needs --id or --name");
    }
    if (o.kind == "similar") {
      const basket::AnnForest forest = build_or_load(o.rho);
      rec = basket::similar(query, forest, o.k, catalog);
    } else if (o.kind == "cooccur") {
      if (o.rho.empty()) throw std::invalid_argument("recommend --kind cooccur needs --rho");
      const basket::EmbeddingTable rho = basket::load_embeddings(o.rho);
      const basket::AnnForest forest = build_or_load(o.alpha);
      const auto metric = o.metric == "cosine" ? basket::CooccurMetric::cosine
                                               : basket::CooccurMetric::dot;
      rec = basket::cooccur(query, rho, forest, o.k, catalog, metric);
    } else {
      throw std::invalid_argument("unknown --kind '" + o.kind + "'");
    }
  }

  const std::string doc = basket::recommendation_to_json(rec);
  if (o.json_out) {
    std::cout << doc << "\n";
  } else {
    print_recommendation(rec, catalog);
  }
  if (!o.out.empty()) write_text(o.out, doc + "\n");
}

// --- cluster ---------------------------------------------------------------------

struct ClusterOpts {
  std::string embeddings;
  std::string coords;
  std::string catalog;
  std::string trips;
  std::string kind = "trips";
  std::string out_csv;
  std::string out_json;
  std::string assignments;
  std::uint32_t min_basket = 5;
  basket::ClusterAnalysisConfig config;
};

void run_cluster(const GlobalOpts& g, const ClusterOpts& o) {
  if (o.embeddings.empty() == o.coords.empty()) {
    throw std::invalid_argument("cluster: provide exactly one of --embeddings or --coords");
  }
  const basket::Catalog catalog = basket::load_catalog(o.catalog);
  const basket::Corpus corpus = basket::load_trips(o.trips, catalog, o.min_basket);
  const basket::EmbeddingTable table = o.embeddings.empty()
                                           ? basket::load_plot_csv(o.coords)
                                           : basket::load_embeddings(o.embeddings);
  const basket::PoolKind kind =
      o.kind == "customers" ? basket::PoolKind::customer : basket::PoolKind::trip;

  basket::ClusterAnalysisConfig config = o.config;
  config.kmeans.seed = basket::derive_seed(g.seed, "cluster");
  const basket::ClusterAnalysis analysis =
      basket::analyze_clusters(table, kind, corpus, config);

  const std::string csv = basket::cluster_report_csv(analysis.reports);
  std::cout << csv;
  if (!o.out_csv.empty()) write_text(o.out_csv, csv);
  if (!o.out_json.empty()) {
    write_text(o.out_json, basket::cluster_analysis_json(analysis) + "\n");
  }
  if (!o.assignments.empty()) {
    std::string rows = "owner_id,cluster\n";
    for (std::uint32_t r = 0; r < table.size(); ++r) {
      rows += std::to_string(table.ids[r]) + ',' +
              std::to_string(analysis.clustering.assignment[r]) + '\n';
    }
    write_text(o.assignments, rows);
  }
}

// --- tsne ------------------------------------------------------------------------

struct TsneOpts {
  std::string input;
  std::string out;
  std::string catalog;
  std::string labels_csv;
  basket::TsneConfig config;
};

std::unordered_map<std::uint64_t, std::string> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::unordered_map<std::uint64_t, std::string> labels;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("labels csv line " + std::to_string(line_no) +
                               ": expected id,label");
    }
    const std::string head = line.substr(0, comma);
    if (line_no == 1 && !head.empty() && !std::isdigit((unsigned char)head[0])) {
      continue;  // header row
    }
    try {
      labels[std::stoull(head)] = line.substr(comma + 1);
    } catch (const std::logic_error&) {
      throw std::runtime_error("labels csv line " + std::to_string(line_no) + ": bad id");
    }
  }
  return labels;
}

void run_tsne(const GlobalOpts& g, const TsneOpts& o) {
  const basket::EmbeddingTable table = basket::load_embeddings(o.input);
  basket::TsneConfig config = o.config;
  config.seed = g.seed;

  std::unordered_map<std::uint64_t, std::string> labels;
  if (!o.labels_csv.empty()) {
    labels = load_labels_csv(o.labels_csv);
  } else if (!o.catalog.empty()) {
    for (const auto& [id, product] : basket::load_catalog(o.catalog)) {
      labels[id] = product.department;
    }
  }

  const basket::Projection projection = basket::tsne(table, config);
  basket::save_plot_csv(projection, o.out, labels);

  json trace = json::array();
  for (const auto& [iter, kl] : projection.kl_trace) {
    trace.push_back({{"iteration", iter}, {"kl", kl}});
  }
  const json summary = {{"out", o.out}, {"points", table.size()}, {"kl_trace", trace}};
  std::cout << summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bernoulli basket embeddings: train, pool, index, recommend, cluster, project."};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags win");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Global seed; every stage derives its own stream from it")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (1 = fully deterministic)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // synth
  SynthOpts synth;
  CLI::App* s = app.add_subcommand("synth", "Generate a synthetic corpus with planted categories");
  s->fallthrough();
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s->add_option("--categories", synth.spec.n_categories)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--products-per-category", synth.spec.products_per_category)
      ->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--trips", synth.spec.n_trips)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--basket-min", synth.spec.basket_min)->capture_default_str();
  s->add_option("--basket-max", synth.spec.basket_max)->capture_default_str();
  s->add_option("--in-category-prob", synth.spec.in_category_prob)
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  s->add_option("--paired-category-prob", synth.spec.paired_category_prob)
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  s->add_option("--customers", synth.spec.n_customers)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--customer-affinity", synth.spec.customer_affinity)
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  s->callback([&] { run_synth(g, synth); });

  // train
  TrainOpts train;
  CLI::App* t = app.add_subcommand("train", "Train product rho/alpha embeddings");
  t->fallthrough();
  t->add_option("--catalog", train.catalog, "catalog.csv")->required();
  t->add_option("--trips", train.trips, "trips.csv")->required();
  t->add_option("--out-dir", train.out_dir, "Directory for rho.bin, alpha.bin, train_report.json")
      ->required();
  t->add_option("--dim", train.config.dim)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--epochs", train.config.epochs)->capture_default_str();
  t->add_option("--negative", train.config.n_negative)->check(CLI::PositiveNumber)
      ->capture_default_str();
  t->add_option("--lr", train.config.learning_rate)->capture_default_str();
  t->add_option("--l2", train.config.l2_lambda)->capture_default_str();
  t->add_option("--init-scale", train.config.init_scale,
                "<= 0 selects 0.1/sqrt(dim)")->capture_default_str();
  t->add_option("--pooling", train.pooling, "mean|sum")
      ->check(CLI::IsMember({"mean", "sum"}))->capture_default_str();
  t->add_option("--min-count", train.config.min_count)->capture_default_str();
  t->add_option("--min-basket", train.min_basket)->capture_default_str();
  t->add_flag("--tsv", train.tsv, "Also export rho.tsv / alpha.tsv");
  t->callback([&] { run_train(g, train); });

  // pool-trips / pool-customers
  PoolOpts pool_trips;
  CLI::App* pt = app.add_subcommand("pool-trips", "Mean-pool product rho into trip embeddings");
  pt->fallthrough();
  pt->add_option("--catalog", pool_trips.catalog)->required();
  pt->add_option("--trips", pool_trips.trips)->required();
  pt->add_option("--rho", pool_trips.rho, "rho.bin")->required();
  pt->add_option("--out", pool_trips.out, "Output EFEMB1 file keyed by trip_id")->required();
  pt->add_option("--tsv", pool_trips.tsv, "Optional TSV export path");
  pt->add_option("--min-basket", pool_trips.min_basket)->capture_default_str();
  pt->add_option("--sample", pool_trips.sample, "Subsample this many owners (0 = all)")
      ->capture_default_str();
  pt->callback([&] { run_pool(g, pool_trips, basket::PoolKind::trip); });

  PoolOpts pool_customers;
  CLI::App* pc =
      app.add_subcommand("pool-customers", "Mean-pool each customer's purchased products");
  pc->fallthrough();
  pc->add_option("--catalog", pool_customers.catalog)->required();
  pc->add_option("--trips", pool_customers.trips)->required();
  pc->add_option("--rho", pool_customers.rho, "rho.bin")->required();
  pc->add_option("--out", pool_customers.out, "Output EFEMB1 file keyed by customer_id")
      ->required();
  pc->add_option("--tsv", pool_customers.tsv, "Optional TSV export path");
  pc->add_option("--min-basket", pool_customers.min_basket)->capture_default_str();
  pc->add_option("--sample", pool_customers.sample, "Subsample this many owners (0 = all)")
      ->capture_default_str();
  pc->callback([&] { run_pool(g, pool_customers, basket::PoolKind::customer); });

  // text-embed
  TextEmbedOpts text;
  text.config.dim = 25;
  text.config.n_negative = 5;
  text.config.min_count = 1;
  CLI::App* te = app.add_subcommand(
      "text-embed", "Train token embeddings over product names; emit sentence vectors");
  te->fallthrough();
  te->add_option("--catalog", text.catalog)->required();
  te->add_option("--out-dir", text.out_dir,
                 "Directory for tokens_rho.bin, tokens_alpha.bin, tokens.tsv, sentence.bin")
      ->required();
  te->add_option("--dim", text.config.dim)->check(CLI::PositiveNumber)->capture_default_str();
  te->add_option("--epochs", text.config.epochs)->capture_default_str();
  te->add_option("--negative", text.config.n_negative)->check(CLI::PositiveNumber)
      ->capture_default_str();
  te->add_option("--lr", text.config.learning_rate)->capture_default_str();
  te->add_option("--l2", text.config.l2_lambda)->capture_default_str();
  te->add_option("--min-count", text.config.min_count)->capture_default_str();
  te->callback([&] { run_text_embed(g, text); });

  // combine
  CombineOpts combine;
  CLI::App* cb = app.add_subcommand("combine",
                                    "Concatenate product rho with sentence vectors per product");
  cb->fallthrough();
  cb->add_option("--rho", combine.rho, "rho.bin")->required();
  cb->add_option("--sentence", combine.sentence, "sentence.bin from text-embed")->required();
  cb->add_option("--out", combine.out, "Combined EFEMB1 output")->required();
  cb->add_option("--meta", combine.meta, "Sidecar JSON path (default <out>.meta.json)");
  cb->add_flag("--normalize", combine.normalize, "Scale each block to unit L2 norm first");
  cb->callback([&] { run_combine(combine); });

  // index
  IndexOpts index;
  CLI::App* ix = app.add_subcommand("index", "Build a random-projection forest over embeddings");
  ix->fallthrough();
  ix->add_option("--input", index.input, "Any EFEMB1 file")->required();
  ix->add_option("--out", index.out, "ANNF1 output")->required();
  ix->add_option("--trees", index.trees)->check(CLI::PositiveNumber)->capture_default_str();
  ix->add_option("--leaf-size", index.leaf_size)->check(CLI::PositiveNumber)
      ->capture_default_str();
  ix->callback([&] { run_index(g, index); });

  // recommend
  RecommendOpts rec;
  CLI::App* rc = app.add_subcommand("recommend", "similar / cooccur / analogy product queries");
  rc->fallthrough();
  rc->add_option("--catalog", rec.catalog)->required();
  rc->add_option("--kind", rec.kind, "similar|cooccur|analogy")
      ->check(CLI::IsMember({"similar", "cooccur", "analogy"}))->capture_default_str();
  rc->add_option("--id", rec.id, "Query product id")->each([&](const std::string&) {
    rec.id_set = true;
  });
  rc->add_option("--name", rec.name, "Query product by (unique) name substring");
  rc->add_option("--a", rec.a, "Analogy: a is to b as c is to ?");
  rc->add_option("--b", rec.b);
  rc->add_option("--c", rec.c);
  rc->add_option("--k", rec.k, "Results to return")->check(CLI::PositiveNumber)
      ->capture_default_str();
  rc->add_option("--rho", rec.rho, "rho.bin (similar/analogy query space; cooccur query vector)");
  rc->add_option("--alpha", rec.alpha, "alpha.bin (cooccur candidate space)");
  rc->add_option("--index", rec.index, "Prebuilt ANNF1 (over rho, or alpha for cooccur)");
  rc->add_option("--cooccur-metric", rec.metric, "dot|cosine")
      ->check(CLI::IsMember({"dot", "cosine"}))->capture_default_str();
  rc->add_option("--trees", rec.trees)->capture_default_str();
  rc->add_option("--leaf-size", rec.leaf_size)->capture_default_str();
  rc->add_option("--search-k", rec.search_k, "Node budget (0 = trees*k*10)")
      ->capture_default_str();
  rc->add_option("--out", rec.out, "Also write the JSON result here");
  rc->add_flag("--json", rec.json_out, "Print JSON instead of the table");
  rc->callback([&] { run_recommend(g, rec); });

  // cluster
  ClusterOpts cluster;
  CLI::App* cl = app.add_subcommand(
      "cluster", "K-means over pooled embeddings with pair scoring and department profiles");
  cl->fallthrough();
  cl->add_option("--embeddings", cluster.embeddings, "Pooled EFEMB1 file");
  cl->add_option("--coords", cluster.coords, "Cluster tsne plot CSV instead (paper-literal mode)");
  cl->add_option("--catalog", cluster.catalog)->required();
  cl->add_option("--trips", cluster.trips)->required();
  cl->add_option("--kind", cluster.kind, "trips|customers: how owner ids map back to items")
      ->check(CLI::IsMember({"trips", "customers"}))->capture_default_str();
  cl->add_option("--k", cluster.config.kmeans.k)->check(CLI::PositiveNumber)
      ->capture_default_str();
  cl->add_option("--max-iter", cluster.config.kmeans.max_iter)->check(CLI::PositiveNumber)
      ->capture_default_str();
  cl->add_option("--n-init", cluster.config.kmeans.n_init)->check(CLI::PositiveNumber)
      ->capture_default_str();
  cl->add_option("--neighbors", cluster.config.neighbors_per_point,
                 "Neighbors per point for true/fake pair scoring")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cl->add_option("--top-depts", cluster.config.top_departments)->capture_default_str();
  cl->add_option("--trees", cluster.config.n_trees)->capture_default_str();
  cl->add_option("--leaf-size", cluster.config.leaf_size)->capture_default_str();
  cl->add_option("--min-basket", cluster.min_basket)->capture_default_str();
  cl->add_option("--out-csv", cluster.out_csv, "Write the report CSV here too");
  cl->add_option("--out-json", cluster.out_json, "Write the report JSON here");
  cl->add_option("--assignments", cluster.assignments, "Write owner_id,cluster CSV here");
  cl->callback([&] { run_cluster(g, cluster); });

  // tsne
  TsneOpts tsne;
  CLI::App* ts = app.add_subcommand("tsne", "Exact t-SNE projection to 2-D plot data");
  ts->fallthrough();
  ts->add_option("--input", tsne.input, "Any EFEMB1 file")->required();
  ts->add_option("--out", tsne.out, "Plot CSV (id,x,y,label)")->required();
  ts->add_option("--perplexity", tsne.config.perplexity)->capture_default_str();
  ts->add_option("--iters", tsne.config.n_iter)->check(CLI::PositiveNumber)
      ->capture_default_str();
  ts->add_option("--lr", tsne.config.learning_rate)->capture_default_str();
  ts->add_option("--exaggeration", tsne.config.early_exaggeration)->capture_default_str();
  ts->add_option("--catalog", tsne.catalog, "Label points by department from this catalog");
  ts->add_option("--labels-csv", tsne.labels_csv, "id,label CSV supplying point labels");
  ts->callback([&] { run_tsne(g, tsne); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
