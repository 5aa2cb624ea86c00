#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>

#include "gcp/binary_io.hpp"
#include "gcp/dataset.hpp"
#include "gcp/embed.hpp"
#include "gcp/error.hpp"
#include "gcp/pairs.hpp"
#include "gcp/prior.hpp"
#include "gcp/pyramid.hpp"
#include "gcp/retrieval.hpp"

namespace gcp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string manifest;
  fs::path out_dir = ".";
  std::string dist, affinity, pairs, model, index;
  std::size_t k_a = 10;
  std::size_t k_p = 5;
  std::size_t n_bound = 0;  // 0 = half the image count
  std::size_t grid = kDefaultPriorGrid;
  double beta = 2.0;
  std::uint64_t seed = 0;
  bool raw = false;
  bool rare_class = false;
  std::string freq_split = "all";
  bool all_classes = false;
  bool descriptors_only = false;
  std::string query;
  std::size_t positives = 1000;
  std::size_t negatives = 1000;
  TrainConfig train;
};

fs::path input_or(const std::string& flag, const fs::path& out_dir, const char* canonical) {
  return flag.empty() ? out_dir / canonical : fs::path(flag);
}

Dataset require_manifest(const Options& o) {
  if (o.manifest.empty()) throw Error("--manifest is required");
  return load_manifest(o.manifest);
}

const DescriptorSet& require_descriptors(const Dataset& ds) {
  if (!ds.descriptors) throw Error("manifest lists no descriptors");
  return *ds.descriptors;
}

std::size_t resolve_query(const Dataset& ds, const std::string& q) {
  if (q.empty()) throw Error("--query is required");
  if (auto hit = ds.find(q)) return *hit;
  if (std::all_of(q.begin(), q.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto idx = std::stoull(q);
    if (idx < ds.size()) return idx;
  }
  throw Error("unknown query '" + q + "'");
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(1) + "\n"); }

json gt_dist(const Options& o) {
  const auto ds = require_manifest(o);
  MetricOptions m;
  m.mode = o.raw ? HistogramMode::raw : HistogramMode::normalized;
  m.rare_class = o.rare_class;
  m.frequency_split = o.freq_split;
  const auto dist = pairwise_distances(ds, m);
  const auto out = o.out_dir / "dist.gcdm";
  write_distance_matrix(dist, out);
  return {{"images", ds.size()},
          {"histograms", o.raw ? "raw" : "normalized"},
          {"rare_class", o.rare_class},
          {"output", out.string()}};
}

json build_affinity_cmd(const Options& o) {
  const auto dist = read_distance_matrix(input_or(o.dist, o.out_dir, "dist.gcdm"));
  validate_distance_matrix(dist);
  const auto aff = build_affinity(dist, o.k_a);
  const auto out = o.out_dir / "affinity.jsonl";
  write_affinity(aff, out);
  return {{"images", aff.size()}, {"k_a", aff.k()}, {"output", out.string()}};
}

json sample_pairs_cmd(const Options& o) {
  const auto dist = read_distance_matrix(input_or(o.dist, o.out_dir, "dist.gcdm"));
  const auto aff = read_affinity(input_or(o.affinity, o.out_dir, "affinity.jsonl"));
  if (aff.size() != dist.size()) throw Error("affinity and distance matrix disagree on image count");
  const std::size_t n_bound = o.n_bound == 0 ? default_n_bound(dist.size()) : o.n_bound;
  const auto batch = sample_pairs(aff, dist, o.positives, o.negatives, n_bound, o.seed);
  const auto out = o.out_dir / "pairs.jsonl";
  write_pairs(batch, out);
  return {{"positives", batch.count(1)},
          {"negatives", batch.count(0)},
          {"k_a", aff.k()},
          {"n_bound", n_bound},
          {"seed", o.seed},
          {"output", out.string()}};
}

json train_embed(const Options& o) {
  const auto ds = require_manifest(o);
  const auto& desc = require_descriptors(ds);
  const auto batch = read_pairs(input_or(o.pairs, o.out_dir, "pairs.jsonl"));
  for (const auto& p : batch.pairs) {
    if (p.i >= desc.count() || p.j >= desc.count()) throw Error("pair references an image outside the manifest");
  }
  const PairPool pool(batch.pairs);
  TrainConfig tc = o.train;
  tc.seed = o.seed + 1;
  EmbeddingDims dims;
  dims.descriptor = desc.dim;
  auto result = train(EmbeddingModel::glorot(dims, o.seed), desc,
                      pool_source(pool, tc.positives_per_batch, tc.negatives_per_batch), tc);
  const auto model_path = o.out_dir / "model.gcem";
  const auto loss_path = o.out_dir / "loss.txt";
  write_model(result.model, model_path);
  io::write_file_atomic(loss_path, encode_loss_trace(result.loss_trace));
  return {{"steps", result.loss_trace.size()},
          {"first_loss", result.loss_trace.front()},
          {"final_loss", result.loss_trace.back()},
          {"pair_accuracy", pair_accuracy(result.model, desc, batch.pairs)},
          {"output", model_path.string()}};
}

json build_index(const Options& o) {
  const auto ds = require_manifest(o);
  const auto& desc = require_descriptors(ds);
  const auto index = o.descriptors_only
                         ? FeatureIndex::from_descriptors(desc)
                         : FeatureIndex::from_model(read_model(input_or(o.model, o.out_dir, "model.gcem")), desc);
  const auto out = o.out_dir / "index.gcpd";
  write_descriptors(index.to_descriptors(), out);
  return {{"images", index.size()}, {"dim", index.dim()}, {"output", out.string()}};
}

FeatureIndex load_index(const Options& o, const Dataset& ds) {
  const auto set = read_descriptors(input_or(o.index, o.out_dir, "index.gcpd"));
  if (set.count() != ds.size()) {
    throw Error("index holds " + std::to_string(set.count()) + " rows, manifest lists " + std::to_string(ds.size()));
  }
  return FeatureIndex(set.dim, std::vector<double>(set.values.begin(), set.values.end()));
}

json neighbors_json(const Dataset& ds, const RetrievalResult& r) {
  json ids = json::array(), dists = json::array();
  for (const auto& n : r.neighbors) {
    ids.push_back(ds.images[n.id].id);
    dists.push_back(n.distance);
  }
  return {{"ids", ids}, {"distances", dists}};
}

json retrieve(const Options& o) {
  const auto ds = require_manifest(o);
  const auto index = load_index(o, ds);
  const auto q = resolve_query(ds, o.query);
  const auto r = knn_query(index, q, o.k_p);
  const auto nb = neighbors_json(ds, r);
  const auto out = o.out_dir / ("retrieval_" + ds.images[q].id + ".json");
  write_json(out, {{"query", ds.images[q].id}, {"k_p", o.k_p}, {"retrieved", nb["ids"]}, {"distances", nb["distances"]}});
  return {{"query", ds.images[q].id}, {"retrieved", nb["ids"]}, {"output", out.string()}};
}

json gen_prior(const Options& o) {
  const auto ds = require_manifest(o);
  const auto index = load_index(o, ds);
  const auto q = resolve_query(ds, o.query);
  const auto r = knn_query(index, q, o.k_p);
  LabelMapRefs maps;
  for (const auto& n : r.neighbors) maps.emplace_back(ds.labels[n.id]);
  const auto mode = o.raw ? PriorMode::raw : PriorMode::normalized;
  const auto spatial = spatial_prior(maps, ds.classes.num_classes(), o.grid, mode);
  const auto mask = o.all_classes ? all_classes_mask(ds.classes) : things_mask(ds.classes);
  const auto global = global_prior(maps, mask);

  const auto& id = ds.images[q].id;
  const auto prior_path = o.out_dir / ("prior_" + id + ".gcpr");
  const auto side_path = o.out_dir / ("prior_" + id + ".json");
  const auto nb = neighbors_json(ds, r);
  write_prior(spatial, prior_path);
  write_json(side_path, {{"query", id},
                         {"k_p", o.k_p},
                         {"grid", o.grid},
                         {"mode", o.raw ? "raw" : "normalized"},
                         {"global_classes", o.all_classes ? "all" : "things"},
                         {"retrieved", nb["ids"]},
                         {"distances", nb["distances"]},
                         {"global_prior", global.values}});
  return {{"query", id}, {"retrieved", nb["ids"]}, {"output", prior_path.string()}};
}

json eval_retrieval(const Options& o) {
  const auto ds = require_manifest(o);
  const auto index = load_index(o, ds);
  const auto ev = f_beta_retrieval(ds, index, o.k_p, o.beta);
  json per = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double f = ev.per_query[i];
    per.push_back({{"id", ds.images[i].id}, {"f_beta", std::isnan(f) ? json(nullptr) : json(f)}});
  }
  const auto out = o.out_dir / "eval.json";
  write_json(out, {{"k_p", o.k_p}, {"beta", o.beta}, {"mean", ev.mean}, {"evaluated", ev.evaluated}, {"per_query", per}});
  return {{"mean", ev.mean}, {"evaluated", ev.evaluated}, {"k_p", o.k_p}, {"beta", o.beta}, {"output", out.string()}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global-context pipeline: ground-truth distances, pair mining, embedding, retrieval, priors"};
  app.name("gcp");
  app.require_subcommand(1);
  Options o;

  auto out_dir = [&](CLI::App* s) { s->add_option("--out-dir", o.out_dir, "Directory for outputs and default inputs"); };
  auto manifest = [&](CLI::App* s) { s->add_option("--manifest", o.manifest, "Dataset manifest (JSON lines)")->required(); };

  auto* gt = app.add_subcommand("gt-dist", "Pairwise ground-truth distances -> dist.gcdm");
  manifest(gt);
  out_dir(gt);
  gt->add_flag("--raw", o.raw, "Raw pixel counts instead of per-block normalized histograms");
  gt->add_flag("--rare-class", o.rare_class, "Divide class counts by image frequency");
  gt->add_option("--freq-split", o.freq_split, "Split used for class frequencies ('all' = every image)");

  auto* ba = app.add_subcommand("build-affinity", "KNN affinity from dist.gcdm -> affinity.jsonl");
  out_dir(ba);
  ba->add_option("--dist", o.dist, "Distance matrix (default <out-dir>/dist.gcdm)");
  ba->add_option("--k-a", o.k_a, "Neighbours per row")->check(CLI::PositiveNumber);

  auto* sp = app.add_subcommand("sample-pairs", "Positive and hard-negative pairs -> pairs.jsonl");
  out_dir(sp);
  sp->add_option("--dist", o.dist, "Distance matrix (default <out-dir>/dist.gcdm)");
  sp->add_option("--affinity", o.affinity, "Affinity (default <out-dir>/affinity.jsonl)");
  sp->add_option("--n-bound", o.n_bound, "Largest negative rank (default n/2)");
  sp->add_option("--positives", o.positives, "Positive pairs to draw");
  sp->add_option("--negatives", o.negatives, "Negative pairs to draw");
  sp->add_option("--seed", o.seed);

  auto* te = app.add_subcommand("train-embed", "Train the Siamese network -> model.gcem, loss.txt");
  manifest(te);
  out_dir(te);
  te->add_option("--pairs", o.pairs, "Pair pool (default <out-dir>/pairs.jsonl)");
  te->add_option("--seed", o.seed);
  te->add_option("--iterations", o.train.max_iterations);
  te->add_option("--lr", o.train.learning_rate);
  te->add_option("--lr-drop", o.train.lr_drop_factor);
  te->add_option("--lr-drop-step", o.train.lr_drop_step, "0 keeps the rate constant");
  te->add_option("--momentum", o.train.momentum);
  te->add_option("--weight-decay", o.train.weight_decay);
  te->add_option("--batch-pos", o.train.positives_per_batch);
  te->add_option("--batch-neg", o.train.negatives_per_batch);

  auto* bi = app.add_subcommand("build-index", "Embed every descriptor -> index.gcpd");
  manifest(bi);
  out_dir(bi);
  bi->add_option("--model", o.model, "Model (default <out-dir>/model.gcem)");
  bi->add_flag("--descriptors-only", o.descriptors_only, "Index the raw descriptors, no model");

  auto add_retrieval = [&](CLI::App* s) {
    manifest(s);
    out_dir(s);
    s->add_option("--index", o.index, "Feature index (default <out-dir>/index.gcpd)");
    s->add_option("--k-p,--k", o.k_p, "Images retrieved per query")->check(CLI::PositiveNumber);
  };
  auto* rt = app.add_subcommand("retrieve", "K_p nearest images of a query");
  add_retrieval(rt);
  rt->add_option("--query", o.query, "Image id or manifest index")->required();

  auto* gp = app.add_subcommand("gen-prior", "Spatial and global priors of a query");
  add_retrieval(gp);
  gp->add_option("--query", o.query, "Image id or manifest index")->required();
  gp->add_option("--grid", o.grid, "Spatial prior resolution")->check(CLI::PositiveNumber);
  gp->add_flag("--raw", o.raw, "Average raw counts instead of per-cell fractions");
  gp->add_flag("--all-classes", o.all_classes, "Global prior over every class, not only things");

  auto* ev = app.add_subcommand("eval-retrieval", "Mean F-beta of retrieval over the dataset -> eval.json");
  add_retrieval(ev);
  ev->add_option("--beta", o.beta)->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code;
  }

  const CLI::App* cmd = app.get_subcommands().front();
  try {
    json summary;
    const auto& name = cmd->get_name();
    fs::create_directories(o.out_dir);
    if (name == "gt-dist") summary = gt_dist(o);
    else if (name == "build-affinity") summary = build_affinity_cmd(o);
    else if (name == "sample-pairs") summary = sample_pairs_cmd(o);
    else if (name == "train-embed") summary = train_embed(o);
    else if (name == "build-index") summary = build_index(o);
    else if (name == "retrieve") summary = retrieve(o);
    else if (name == "gen-prior") summary = gen_prior(o);
    else summary = eval_retrieval(o);
    json line = {{"command", name}, {"status", "ok"}};
    line.update(summary);
    out << line.dump() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "gcp " << cmd->get_name() << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gcp::cli
