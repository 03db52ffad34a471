#include "kgcn/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace kgcn {

namespace {

// ------------------------------------------------------------ binary helpers

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& os, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const T v = byteswap_value(data[i]);
      os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
  }
}

template <typename T>
void read_le(std::istream& is, T* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) data[i] = byteswap_value(data[i]);
  }
}

std::ofstream open_out(const fs::path& path, bool append = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!os) fail(ErrorCode::BadConfig, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, ErrorCode missing) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(missing, "cannot read " + path.string());
  return is;
}

// Byte size check before reading a bulk array.
void expect_size(const fs::path& path, std::uintmax_t expected) {
  if (!fs::exists(path)) fail(ErrorCode::MissingDataset, "missing " + path.string());
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    fail(ErrorCode::BadContainer, path.filename().string() + " has " + std::to_string(actual) +
                                      " bytes, meta.json implies " + std::to_string(expected));
  }
}

// --------------------------------------------------------------- json checks

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  fail(ErrorCode::BadConfig, "config: '" + key + "' " + msg);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where.empty() ? "<root>" : where, "must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad(where.empty() ? k : where + "." + k, "is not a recognized key");
  }
}

std::string key_of(const std::string& where, const char* k) {
  return where.empty() ? k : where + "." + k;
}

double get_number(const json& obj, const std::string& where, const char* k, double fallback) {
  if (!obj.contains(k)) return fallback;
  const auto& v = obj.at(k);
  if (!v.is_number()) bad(key_of(where, k), "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key_of(where, k), "must be finite");
  return d;
}

std::uint64_t get_uint(const json& obj, const std::string& where, const char* k, std::uint64_t fallback) {
  if (!obj.contains(k)) return fallback;
  const auto& v = obj.at(k);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    bad(key_of(where, k), "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& where, const char* k, std::string fallback) {
  if (!obj.contains(k)) return fallback;
  const auto& v = obj.at(k);
  if (!v.is_string()) bad(key_of(where, k), "must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& obj, const std::string& where, const char* k, bool fallback) {
  if (!obj.contains(k)) return fallback;
  const auto& v = obj.at(k);
  if (!v.is_boolean()) bad(key_of(where, k), "must be true or false");
  return v.get<bool>();
}

template <typename Fn>
auto parse_enum(const std::string& key, const std::string& value, Fn&& fn) {
  try {
    return fn(value);
  } catch (const Error&) {
    bad(key, "has unknown value '" + value + "'");
  }
}

void parse_split(const json& j, const std::string& where, SplitMode& mode, double& percent) {
  only_keys(j, where, {"mode", "percent"});
  mode = parse_enum(key_of(where, "mode"), get_string(j, where, "mode", "public"),
                    [](const std::string& s) { return parse_split_mode(s); });
  percent = get_number(j, where, "percent", percent);
  if (mode != SplitMode::public_split && !(percent > 0.0 && percent <= 1.0)) {
    bad(key_of(where, "percent"), "must lie in (0, 1] for percentage splits");
  }
}

// Returns true when the published row should fill the table columns.
bool parse_hyperparams(const json& j, const std::string& where, Hyperparams& hp) {
  if (j.is_string()) {
    if (j.get<std::string>() != "reference") bad(where, "must be an object or \"reference\"");
    return true;
  }
  only_keys(j, where, {"reference", "lr", "weight_decay", "hidden", "layers_or_blocks",
                       "krylov_layers", "dropout", "optimizer", "max_episodes", "patience",
                       "min_delta", "runs", "width_cap"});
  const bool reference = get_bool(j, where, "reference", false);
  if (reference) {
    for (const char* k : {"lr", "weight_decay", "hidden", "layers_or_blocks", "dropout", "optimizer"}) {
      if (j.contains(k)) bad(key_of(where, k), "conflicts with \"reference\": true");
    }
  }
  hp.lr = get_number(j, where, "lr", hp.lr);
  if (!(hp.lr > 0.0)) bad(key_of(where, "lr"), "must be positive");
  hp.weight_decay = get_number(j, where, "weight_decay", hp.weight_decay);
  if (hp.weight_decay < 0.0) bad(key_of(where, "weight_decay"), "must be non-negative");
  hp.hidden = get_uint(j, where, "hidden", hp.hidden);
  if (hp.hidden == 0) bad(key_of(where, "hidden"), "must be positive");
  hp.layers_or_blocks = get_uint(j, where, "layers_or_blocks", hp.layers_or_blocks);
  if (hp.layers_or_blocks == 0) bad(key_of(where, "layers_or_blocks"), "must be positive");
  hp.krylov_layers = get_uint(j, where, "krylov_layers", hp.krylov_layers);
  if (hp.krylov_layers == 0) bad(key_of(where, "krylov_layers"), "must be positive");
  hp.dropout = get_number(j, where, "dropout", hp.dropout);
  if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) bad(key_of(where, "dropout"), "must lie in [0, 1)");
  if (j.contains("optimizer")) {
    hp.optimizer = parse_enum(key_of(where, "optimizer"), get_string(j, where, "optimizer", ""),
                              [](const std::string& s) { return parse_optimizer(s); });
  }
  hp.max_episodes = get_uint(j, where, "max_episodes", hp.max_episodes);
  if (hp.max_episodes == 0) bad(key_of(where, "max_episodes"), "must be positive");
  hp.patience = get_uint(j, where, "patience", hp.patience);
  hp.min_delta = get_number(j, where, "min_delta", hp.min_delta);
  if (hp.min_delta < 0.0) bad(key_of(where, "min_delta"), "must be non-negative");
  hp.runs = get_uint(j, where, "runs", hp.runs);
  if (hp.runs == 0) bad(key_of(where, "runs"), "must be positive");
  hp.width_cap = get_uint(j, where, "width_cap", hp.width_cap);
  return reference;
}

void check_preset(const std::string& key, const std::string& preset) {
  if (preset != "vanilla_gcn" && preset != "linear_snowball" && preset != "snowball" &&
      preset != "truncated_krylov") {
    bad(key, "has unknown value '" + preset + "'");
  }
}

}  // namespace

// ------------------------------------------------------------------- helpers

SplitMode parse_split_mode(std::string_view name) {
  if (name == "public") return SplitMode::public_split;
  if (name == "percent") return SplitMode::percent;
  if (name == "percent_no_validation") return SplitMode::percent_no_validation;
  fail(ErrorCode::BadConfig, "unknown split mode '" + std::string(name) + "'");
}

std::string_view to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::public_split: return "public";
    case SplitMode::percent: return "percent";
    case SplitMode::percent_no_validation: return "percent_no_validation";
  }
  return "public";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

std::string read_text(const fs::path& path) {
  auto is = open_in(path, ErrorCode::BadConfig);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string error_json(const std::string& code, const std::string& message) {
  json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  return j.dump();
}

// --------------------------------------------------------- dataset container

void write_container(const GraphDataset& data, const fs::path& dir) {
  const std::size_t n = data.n_nodes();
  if (data.labels.size() != n || data.features.rows() != n) {
    fail(ErrorCode::ShapeError, "write_container: node counts disagree");
  }
  fs::create_directories(dir);
  json meta;
  meta["name"] = data.name;
  meta["n_nodes"] = n;
  meta["n_features"] = data.features.cols();
  meta["n_classes"] = data.n_classes;
  meta["n_edges"] = data.graph.n_edges();
  meta["features_normalized"] = data.features_normalized;
  if (data.public_split) {
    meta["split"]["train"] = data.public_split->train_idx;
    meta["split"]["val"] = data.public_split->val_idx;
    meta["split"]["test"] = data.public_split->test_idx;
  }
  write_text(dir / "meta.json", meta.dump(2) + "\n");

  {
    auto os = open_out(dir / "edges.bin");
    std::vector<std::uint32_t> flat;
    flat.reserve(2 * data.graph.n_edges());
    for (auto [u, v] : data.graph.edges) {
      flat.push_back(static_cast<std::uint32_t>(u));
      flat.push_back(static_cast<std::uint32_t>(v));
    }
    write_le(os, flat.data(), flat.size());
  }
  {
    auto os = open_out(dir / "features.bin");
    const DenseMatrix x = data.features.to_dense();
    write_le(os, x.data(), x.size());
  }
  {
    auto os = open_out(dir / "labels.bin");
    write_le(os, data.labels.data(), data.labels.size());
  }
}

GraphDataset read_container(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::MissingDataset, "no dataset directory " + dir.string());
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) fail(ErrorCode::MissingDataset, "missing " + meta_path.string());
  json meta;
  try {
    meta = json::parse(read_text(meta_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadContainer, "meta.json: " + std::string(e.what()));
  }
  auto need_uint = [&](const char* k) -> std::uint64_t {
    if (!meta.contains(k) || !meta[k].is_number_unsigned()) {
      fail(ErrorCode::BadContainer, std::string("meta.json: '") + k + "' must be a non-negative integer");
    }
    return meta[k].get<std::uint64_t>();
  };
  GraphDataset d;
  d.name = meta.value("name", dir.filename().string());
  const std::size_t n = need_uint("n_nodes");
  const std::size_t f = need_uint("n_features");
  d.n_classes = need_uint("n_classes");
  d.features_normalized = meta.value("features_normalized", false);
  if (n == 0 || f == 0 || d.n_classes == 0) fail(ErrorCode::BadContainer, "meta.json: empty dimensions");

  const fs::path edges_path = dir / "edges.bin";
  if (!fs::exists(edges_path)) fail(ErrorCode::MissingDataset, "missing " + edges_path.string());
  const auto edge_bytes = fs::file_size(edges_path);
  if (edge_bytes % 8 != 0) fail(ErrorCode::BadContainer, "edges.bin size is not a multiple of 8");
  if (meta.contains("n_edges")) expect_size(edges_path, need_uint("n_edges") * 8);
  std::vector<std::uint32_t> flat(edge_bytes / 4);
  {
    auto is = open_in(edges_path, ErrorCode::MissingDataset);
    read_le(is, flat.data(), flat.size());
  }
  std::vector<Edge> edges;
  edges.reserve(flat.size() / 2);
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    if (flat[i] >= n || flat[i + 1] >= n) {
      fail(ErrorCode::BadContainer, "edges.bin: endpoint out of range at pair " + std::to_string(i / 2));
    }
    edges.emplace_back(flat[i], flat[i + 1]);
  }
  d.graph = build_graph(edges, n);

  const fs::path feat_path = dir / "features.bin";
  expect_size(feat_path, static_cast<std::uintmax_t>(n) * f * 8);
  std::vector<double> values(n * f);
  {
    auto is = open_in(feat_path, ErrorCode::MissingDataset);
    read_le(is, values.data(), values.size());
  }
  DenseMatrix x;
  try {
    x = DenseMatrix::from_external(n, f, std::move(values));
  } catch (const Error& e) {
    fail(ErrorCode::BadContainer, "features.bin: " + std::string(e.what()));
  }
  d.features = FeatureMatrix::choose_storage(x);

  const fs::path label_path = dir / "labels.bin";
  expect_size(label_path, static_cast<std::uintmax_t>(n) * 2);
  d.labels.resize(n);
  {
    auto is = open_in(label_path, ErrorCode::MissingDataset);
    read_le(is, d.labels.data(), n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (d.labels[i] >= d.n_classes) {
      fail(ErrorCode::BadContainer, "labels.bin: label " + std::to_string(d.labels[i]) +
                                        " at node " + std::to_string(i) + " >= n_classes");
    }
  }

  if (meta.contains("split")) {
    const auto& s = meta["split"];
    SplitSpec split;
    split.mode = SplitMode::public_split;
    std::set<std::size_t> seen;
    auto take = [&](const char* k, std::vector<std::size_t>& out) {
      if (!s.contains(k) || !s[k].is_array()) {
        fail(ErrorCode::BadContainer, std::string("meta.json: split.") + k + " must be an array");
      }
      for (const auto& v : s[k]) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() >= n) {
          fail(ErrorCode::BadContainer, std::string("meta.json: split.") + k + " has an invalid index");
        }
        const std::size_t idx = v.get<std::size_t>();
        if (!seen.insert(idx).second) {
          fail(ErrorCode::BadContainer, "meta.json: split sets overlap at node " + std::to_string(idx));
        }
        out.push_back(idx);
      }
      std::sort(out.begin(), out.end());
    };
    take("train", split.train_idx);
    take("val", split.val_idx);
    take("test", split.test_idx);
    d.public_split = std::move(split);
  }
  return d;
}

fs::path resolve_dataset(const std::string& name_or_path, const std::optional<fs::path>& root) {
  const fs::path direct(name_or_path);
  if (fs::exists(direct / "meta.json")) return direct;
  std::vector<fs::path> tried{direct};
  if (root) {
    if (fs::exists(*root / name_or_path / "meta.json")) return *root / name_or_path;
    tried.push_back(*root / name_or_path);
  }
  if (const char* env = std::getenv("KGCN_DATA"); env != nullptr && *env != '\0') {
    const fs::path p = fs::path(env) / name_or_path;
    if (fs::exists(p / "meta.json")) return p;
    tried.push_back(p);
  }
  std::string msg = "dataset '" + name_or_path + "' not found (tried";
  for (const auto& t : tried) msg += " " + t.string();
  msg += "; set --dataset-dir or KGCN_DATA)";
  fail(ErrorCode::MissingDataset, msg);
}

// ---------------------------------------------------------------- run config

void apply_reference(Hyperparams& hp, std::string_view preset, std::string_view dataset,
                     SplitMode mode, double percent) {
  const auto row = find_reference(preset, dataset, mode, percent);
  if (!row) {
    fail(ErrorCode::BadConfig, "no published hyperparameters for " + std::string(preset) + " on " +
                                   std::string(dataset) + " (" + split_label(mode, percent) + ")");
  }
  hp.lr = row->lr;
  hp.weight_decay = row->weight_decay;
  hp.hidden = row->hidden;
  hp.layers_or_blocks = row->layers_or_blocks;
  hp.dropout = row->dropout;
  hp.optimizer = row->optimizer;
}

RunConfig parse_run_config(const json& j) {
  only_keys(j, "", {"experiment", "dataset", "dataset_dir", "preset", "split", "hyperparams",
                    "seed", "jobs", "deterministic", "output", "rank", "spectrum", "bench"});
  RunConfig c;
  c.experiment = get_string(j, "", "experiment", c.experiment);
  if (c.experiment != "train" && c.experiment != "rank" && c.experiment != "spectrum" &&
      c.experiment != "bench") {
    bad("experiment", "must be one of train, rank, spectrum, bench");
  }
  c.dataset = get_string(j, "", "dataset", "");
  if (j.contains("dataset_dir")) c.dataset_dir = get_string(j, "", "dataset_dir", "");
  c.preset = get_string(j, "", "preset", c.preset);
  check_preset("preset", c.preset);
  if (j.contains("split")) parse_split(j.at("split"), "split", c.split_mode, c.split_percent);
  if (j.contains("hyperparams")) c.reference_hyperparams = parse_hyperparams(j.at("hyperparams"), "hyperparams", c.hp);
  c.seed = get_uint(j, "", "seed", c.seed);
  c.hp.seed = c.seed;
  c.jobs = get_uint(j, "", "jobs", c.jobs);
  if (c.jobs == 0) bad("jobs", "must be positive");
  c.deterministic = get_bool(j, "", "deterministic", c.deterministic);

  if (j.contains("output")) {
    const auto& o = j.at("output");
    only_keys(o, "output", {"dir", "dump_embeddings"});
    c.out_dir = get_string(o, "output", "dir", c.out_dir.string());
    c.dump_embeddings = get_bool(o, "output", "dump_embeddings", c.dump_embeddings);
  }

  c.rank.seed = c.seed;
  c.rank.jobs = c.jobs;
  if (j.contains("rank")) {
    const auto& r = j.at("rank");
    only_keys(r, "rank", {"arch", "activation", "depth", "reps", "n_nodes", "edge_prob",
                          "n_features", "width", "n_blocks", "tolerance"});
    if (r.contains("arch")) {
      c.rank.arch = parse_enum("rank.arch", get_string(r, "rank", "arch", ""),
                               [](const std::string& s) { return parse_architecture(s); });
    }
    if (r.contains("activation")) {
      c.rank.act = parse_enum("rank.activation", get_string(r, "rank", "activation", ""),
                              [](const std::string& s) { return parse_activation(s); });
    }
    c.rank.depth = get_uint(r, "rank", "depth", c.rank.depth);
    c.rank.reps = get_uint(r, "rank", "reps", c.rank.reps);
    c.rank.n_nodes = get_uint(r, "rank", "n_nodes", c.rank.n_nodes);
    c.rank.edge_prob = get_number(r, "rank", "edge_prob", c.rank.edge_prob);
    c.rank.n_features = get_uint(r, "rank", "n_features", c.rank.n_features);
    c.rank.width = get_uint(r, "rank", "width", c.rank.width);
    c.rank.n_blocks = get_uint(r, "rank", "n_blocks", c.rank.n_blocks);
    if (r.contains("tolerance") && !r.at("tolerance").is_null()) {
      c.rank.tol = get_number(r, "rank", "tolerance", 0.0);
      if (*c.rank.tol < 0.0) bad("rank.tolerance", "must be non-negative");
    }
    for (const char* k : {"depth", "reps", "n_nodes", "n_features", "width", "n_blocks"}) {
      if (r.contains(k) && r.at(k).get<std::uint64_t>() == 0) bad(std::string("rank.") + k, "must be positive");
    }
    if (!(c.rank.edge_prob >= 0.0 && c.rank.edge_prob <= 1.0)) bad("rank.edge_prob", "must lie in [0, 1]");
  }

  if (j.contains("spectrum")) {
    const auto& s = j.at("spectrum");
    only_keys(s, "spectrum", {"lanczos_iters"});
    c.lanczos_iters = get_uint(s, "spectrum", "lanczos_iters", c.lanczos_iters);
    if (c.lanczos_iters == 0) bad("spectrum.lanczos_iters", "must be positive");
  }

  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    only_keys(b, "bench", {"cells", "width_cap", "runs"});
    const std::size_t cap = get_uint(b, "bench", "width_cap", 0);
    const std::size_t runs = get_uint(b, "bench", "runs", c.hp.runs);
    if (!b.contains("cells") || !b.at("cells").is_array()) bad("bench.cells", "must be an array");
    std::size_t i = 0;
    for (const auto& cell : b.at("cells")) {
      const std::string where = "bench.cells[" + std::to_string(i++) + "]";
      only_keys(cell, where, {"dataset", "preset", "split", "hyperparams"});
      BenchCell bc;
      bc.dataset = get_string(cell, where, "dataset", "");
      if (bc.dataset.empty()) bad(where + ".dataset", "is required");
      bc.preset = get_string(cell, where, "preset", c.preset);
      check_preset(where + ".preset", bc.preset);
      if (cell.contains("split")) parse_split(cell.at("split"), where + ".split", bc.mode, bc.percent);
      bc.hp = c.hp;
      bc.hp.runs = runs;
      bc.hp.width_cap = cap;
      bool reference = true;
      if (cell.contains("hyperparams")) reference = parse_hyperparams(cell.at("hyperparams"), where + ".hyperparams", bc.hp);
      if (const auto row = find_reference(bc.preset, bc.dataset, bc.mode, bc.percent)) {
        bc.reference = row->accuracy;
      }
      if (reference) {
        try {
          apply_reference(bc.hp, bc.preset, bc.dataset, bc.mode, bc.percent);
        } catch (const Error& e) {
          bad(where, e.what());
        }
      }
      bc.hp.seed = c.seed;
      c.bench_cells.push_back(std::move(bc));
    }
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::BadConfig, "config file " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadConfig, "config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------- checkpoint

json spec_to_json(const ModelSpec& s) {
  json j;
  j["arch"] = to_string(s.arch);
  j["n_features"] = s.n_features;
  j["hidden"] = s.hidden;
  j["n_blocks"] = s.n_blocks;
  j["f_act"] = to_string(s.f_act);
  j["g_act"] = to_string(s.g_act);
  j["p"] = s.p;
  j["identity_classifier"] = s.identity_classifier;
  j["classifier_width"] = s.classifier_width;
  j["n_classes"] = s.n_classes;
  j["dropout"] = s.dropout;
  j["dropout_classifier"] = s.dropout_classifier;
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  try {
    s.arch = parse_architecture(j.at("arch").get<std::string>());
    s.n_features = j.at("n_features").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.n_blocks = j.at("n_blocks").get<std::size_t>();
    s.f_act = parse_activation(j.at("f_act").get<std::string>());
    s.g_act = parse_activation(j.at("g_act").get<std::string>());
    s.p = j.at("p").get<int>();
    s.identity_classifier = j.at("identity_classifier").get<bool>();
    s.classifier_width = j.at("classifier_width").get<std::size_t>();
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.dropout = j.at("dropout").get<double>();
    s.dropout_classifier = j.at("dropout_classifier").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BadContainer, "model spec: " + std::string(e.what()));
  }
  validate(s);
  return s;
}

namespace {
constexpr char kCheckpointMagic[8] = {'K', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  check_shapes(ckpt.spec, ckpt.params);
  json header;
  header["version"] = 1;
  header["seed"] = ckpt.seed;
  header["spec"] = spec_to_json(ckpt.spec);
  header["tensors"] = json::array();
  for (const auto* t : ckpt.params.tensors()) header["tensors"].push_back({t->rows(), t->cols()});
  const std::string h = header.dump();
  auto os = open_out(path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = h.size();
  write_le(os, &len, 1);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto* t : ckpt.params.tensors()) write_le(os, t->data(), t->size());
}

Checkpoint read_checkpoint(const fs::path& path) {
  auto is = open_in(path, ErrorCode::BadContainer);
  const auto total = fs::file_size(path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    fail(ErrorCode::BadContainer, path.string() + " is not a checkpoint");
  }
  std::uint64_t len = 0;
  read_le(is, &len, 1);
  if (!is || len > total - 16) fail(ErrorCode::BadContainer, "checkpoint header length is corrupt");
  std::string h(len, '\0');
  is.read(h.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadContainer, "checkpoint header: " + std::string(e.what()));
  }
  Checkpoint c;
  c.spec = spec_from_json(header.at("spec"));
  c.seed = header.value("seed", std::uint64_t{0});
  const auto shapes = parameter_shapes(c.spec);
  const auto& listed = header.at("tensors");
  if (listed.size() != shapes.size()) fail(ErrorCode::BadContainer, "checkpoint tensor count mismatch");
  std::uintmax_t payload = 0;
  std::vector<DenseMatrix> mats;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto rows = listed[i].at(0).get<std::size_t>();
    const auto cols = listed[i].at(1).get<std::size_t>();
    if (rows != shapes[i].first || cols != shapes[i].second) {
      fail(ErrorCode::BadContainer, "checkpoint tensor " + std::to_string(i) + " has the wrong shape");
    }
    payload += static_cast<std::uintmax_t>(rows) * cols * 8;
    mats.emplace_back(rows, cols);
  }
  if (16 + len + payload != total) fail(ErrorCode::BadContainer, "checkpoint size does not match its header");
  for (auto& m : mats) read_le(is, m.data(), m.size());
  const std::size_t n = c.spec.depth();
  for (std::size_t l = 0; l < n; ++l) c.params.layers.push_back(std::move(mats[l]));
  if (mats.size() == n + 2) c.params.classifier = std::move(mats[n]);
  c.params.output = std::move(mats.back());
  return c;
}

// ------------------------------------------------------------------- outputs

json hyperparams_to_json(const Hyperparams& hp) {
  json j;
  j["lr"] = hp.lr;
  j["weight_decay"] = hp.weight_decay;
  j["hidden"] = hp.hidden;
  j["layers_or_blocks"] = hp.layers_or_blocks;
  j["krylov_layers"] = hp.krylov_layers;
  j["dropout"] = hp.dropout;
  j["optimizer"] = to_string(hp.optimizer);
  j["max_episodes"] = hp.max_episodes;
  j["patience"] = hp.patience;
  j["min_delta"] = hp.min_delta;
  j["runs"] = hp.runs;
  j["width_cap"] = hp.width_cap;
  return j;
}

json report_to_json(const TrainReport& r, const Hyperparams& hp, std::uint64_t seed,
                    bool deterministic) {
  json j;
  j["dataset"] = r.dataset;
  j["arch"] = r.arch;
  j["split"] = r.split;
  j["seed"] = seed;
  j["hyperparams"] = hyperparams_to_json(hp);
  j["runs"] = json::array();
  for (const auto& run : r.runs) {
    json o;
    o["seed"] = run.seed;
    o["test_accuracy"] = run.test_accuracy;
    o["best_val_accuracy"] = run.best_val_accuracy;
    o["episodes"] = run.episodes;
    o["best_episode"] = run.best_episode;
    o["diverged"] = run.diverged;
    if (!run.error.empty()) o["error"] = run.error;
    j["runs"].push_back(std::move(o));
  }
  j["accuracies"] = r.accuracies;
  j["mean"] = r.mean;
  j["std"] = r.std;
  if (!deterministic) j["wall_seconds"] = r.wall_seconds;
  return j;
}

void append_results_csv(const fs::path& path, const TrainReport& r) {
  const bool fresh = !fs::exists(path);
  auto os = open_out(path, true);
  if (fresh) os << kResultsCsvHeader << "\n";
  std::size_t diverged = 0;
  std::string seeds;
  for (const auto& run : r.runs) {
    diverged += run.diverged ? 1 : 0;
    if (!seeds.empty()) seeds += ";";
    seeds += std::to_string(run.seed);
  }
  os << r.dataset << "," << r.arch << "," << r.split << "," << format_double(r.mean) << ","
     << format_double(r.std) << "," << r.runs.size() << "," << diverged << "," << seeds << "\n";
}

void write_rank_trace_csv(const fs::path& path, const RankTrace& t) {
  auto os = open_out(path);
  os << "arch,activation,layer,mean_rank,std_rank,reps,width,tolerance,seed,feature_normalization\n";
  const std::string tol = t.config.tol ? format_double(*t.config.tol) : "default";
  for (std::size_t l = 0; l < t.mean.size(); ++l) {
    os << to_string(t.config.arch) << "," << to_string(t.config.act) << "," << l + 1 << ","
       << format_double(t.mean[l]) << "," << format_double(t.std[l]) << "," << t.config.reps << ","
       << t.config.width << "," << tol << "," << t.config.seed << "," << t.feature_normalization << "\n";
  }
}

void write_rank_reps_csv(const fs::path& path, const RankTrace& t) {
  auto os = open_out(path);
  os << "arch,activation,rep,seed,layer,rank\n";
  for (std::size_t r = 0; r < t.ranks.size(); ++r)
    for (std::size_t l = 0; l < t.ranks[r].size(); ++l)
      os << to_string(t.config.arch) << "," << to_string(t.config.act) << "," << r << ","
         << t.seeds[r] << "," << l + 1 << "," << t.ranks[r][l] << "\n";
}

void write_spectrum_csv(const fs::path& path, const SpectrumSummary& s) {
  auto os = open_out(path);
  os << "dataset,method,bin,lower,upper,count\n";
  const double width = 2.0 / static_cast<double>(s.histogram.size());
  for (std::size_t b = 0; b < s.histogram.size(); ++b) {
    os << s.dataset << "," << s.method << "," << b << ","
       << format_double(-1.0 + width * static_cast<double>(b)) << ","
       << format_double(-1.0 + width * static_cast<double>(b + 1)) << "," << s.histogram[b] << "\n";
  }
}

void write_eigenvalues_csv(const fs::path& path, const SpectrumSummary& s) {
  auto os = open_out(path);
  os << "dataset,index,eigenvalue\n";
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
    os << s.dataset << "," << i << "," << format_double(s.eigenvalues[i]) << "\n";
}

void write_bench_csv(const fs::path& path, const std::vector<BenchResult>& results) {
  auto os = open_out(path);
  os << "dataset,split,arch,mean,std,runs,diverged,reference,status,seeds\n";
  for (const auto& res : results) {
    const auto& c = res.cell;
    os << c.dataset << "," << split_label(c.mode, c.percent) << "," << c.preset << ",";
    std::string seeds;
    if (res.report) {
      std::size_t diverged = 0;
      for (const auto& run : res.report->runs) {
        diverged += run.diverged ? 1 : 0;
        if (!seeds.empty()) seeds += ";";
        seeds += std::to_string(run.seed);
      }
      os << format_double(res.report->mean) << "," << format_double(res.report->std) << ","
         << res.report->runs.size() << "," << diverged << ",";
    } else {
      os << ",,0,0,";
    }
    if (c.reference) {
      // Published values carry two decimals in percent.
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.4f", *c.reference / 100.0);
      os << buf;
    }
    os << ",";
    std::string status = res.report ? "ok" : res.error;
    std::replace(status.begin(), status.end(), ',', ';');
    os << status << "," << seeds << "\n";
  }
}

void write_embeddings_csv(const fs::path& path, const DenseMatrix& features,
                          const std::vector<std::uint16_t>& labels) {
  auto os = open_out(path);
  os << "node,label";
  for (std::size_t c = 0; c < features.cols(); ++c) os << ",f" << c;
  os << "\n";
  for (std::size_t r = 0; r < features.rows(); ++r) {
    os << r << "," << labels[r];
    for (double v : features.row(r)) os << "," << format_double(v);
    os << "\n";
  }
}

}  // namespace kgcn
