#include "flsim/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "flsim/errors.hpp"
#include "flsim/rng.hpp"

#include <json.hpp>

namespace flsim {

namespace {

using nlohmann::json;

// Generator substreams.
constexpr uint64_t kLabels = 1;
constexpr uint64_t kProto = 2;
constexpr uint64_t kMixing = 3;
constexpr uint64_t kLatent = 4;
constexpr uint64_t kObs = 5;
constexpr uint64_t kMeta = 6;

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_matrix(const std::string& path, const std::vector<Vec>& rows) {
  std::ofstream out(path);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << format_double(row[i]);
    }
    out << "\n";
  }
}

std::vector<Vec> read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<Vec> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Vec row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (n_samples < 1) throw ConfigError("dataset: n_samples must be >= 1");
  if (n_modalities < 2 || n_modalities > 4) {
    throw ConfigError("dataset: n_modalities must be in [2, 4]");
  }
  if (static_cast<int>(modality_dims.size()) != n_modalities) {
    throw ConfigError("dataset: modality_dims must list one dim per modality");
  }
  for (int d : modality_dims) {
    if (d < 1) throw ConfigError("dataset: modality dims must be positive");
  }
  if (latent_dim < 1) throw ConfigError("dataset: latent_dim must be >= 1");
  if (sigma_within < 0 || sigma_obs < 0) throw ConfigError("dataset: noise sigmas must be >= 0");
  if (task == TaskKind::Multiclass && n_classes < 2) {
    throw ConfigError("dataset: multiclass needs n_classes >= 2");
  }
  if (task == TaskKind::Multilabel) {
    if (label_base_rates.size() < 2) throw ConfigError("dataset: multilabel needs >= 2 label rates");
    for (double r : label_base_rates) {
      if (r < 0.0 || r > 1.0) throw ConfigError("dataset: label base rates must be in [0, 1]");
    }
  }
  if (metadata_categories < 1) throw ConfigError("dataset: metadata_categories must be >= 1");
  if (metadata_correlation < 0.0 || metadata_correlation > 1.0) {
    throw ConfigError("dataset: metadata_correlation must be in [0, 1]");
  }
  if (shared_mixing) {
    for (int d : modality_dims) {
      if (d != modality_dims[0]) {
        throw ConfigError("dataset: shared_mixing requires equal modality dims");
      }
    }
  }
}

int SyntheticConfig::n_outputs() const {
  switch (task) {
    case TaskKind::Multiclass: return n_classes;
    case TaskKind::Multilabel: return static_cast<int>(label_base_rates.size());
    case TaskKind::Retrieval: return 0;
  }
  return 0;
}

DatasetBundle generate(const SyntheticConfig& config) {
  config.validate();
  DatasetBundle bundle;
  bundle.config = config;
  const int n = config.n_samples;
  const int M = config.n_modalities;
  const int L = config.latent_dim;

  // Labels first so the class structure is independent of noise draws.
  Rng rng_labels(seed_chain(config.seed, {stream::kData, kLabels}));
  std::vector<int> classes(n, -1);
  std::vector<std::vector<int>> bits(n);
  if (config.task == TaskKind::Multiclass) {
    for (int i = 0; i < n; ++i) classes[i] = rng_labels.uniform_int(config.n_classes);
  } else if (config.task == TaskKind::Multilabel) {
    const int nl = static_cast<int>(config.label_base_rates.size());
    for (int i = 0; i < n; ++i) {
      bits[i].resize(nl);
      for (int l = 0; l < nl; ++l) {
        bits[i][l] = rng_labels.uniform() < config.label_base_rates[l] ? 1 : 0;
      }
    }
  }

  // Latent prototypes per class/label.
  Rng rng_proto(seed_chain(config.seed, {stream::kData, kProto}));
  const int n_protos = config.task == TaskKind::Retrieval ? 0 : config.n_outputs();
  std::vector<Vec> protos(n_protos, Vec(L));
  for (auto& p : protos) {
    for (auto& x : p) x = rng_proto.normal();
  }

  // Per-modality observation maps, entries N(0, 1/latent_dim).
  Rng rng_mix(seed_chain(config.seed, {stream::kData, kMixing}));
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(L));
  std::vector<std::vector<Vec>> mixing(M);
  for (int m = 0; m < M; ++m) {
    if (config.shared_mixing && m > 0) {
      mixing[m] = mixing[0];
      continue;
    }
    mixing[m].assign(config.modality_dims[m], Vec(L));
    for (auto& row : mixing[m]) {
      for (auto& x : row) x = rng_mix.normal() * mix_scale;
    }
  }

  Rng rng_latent(seed_chain(config.seed, {stream::kData, kLatent}));
  Rng rng_obs(seed_chain(config.seed, {stream::kData, kObs}));
  bundle.samples.resize(n);
  bundle.latents.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec latent(L, 0.0);
    if (config.task == TaskKind::Multiclass) {
      latent = protos[classes[i]];
    } else if (config.task == TaskKind::Multilabel) {
      for (std::size_t l = 0; l < bits[i].size(); ++l) {
        if (bits[i][l]) axpy(1.0, protos[l], latent);
      }
    }
    if (config.task == TaskKind::Retrieval) {
      for (auto& x : latent) x = rng_latent.normal();
    } else {
      for (auto& x : latent) x += config.sigma_within * rng_latent.normal();
    }
    MultimodalSample& s = bundle.samples[i];
    s.class_label = classes[i];
    s.label_bits = bits[i];
    s.modality_inputs.resize(M);
    for (int m = 0; m < M; ++m) {
      Vec x(config.modality_dims[m]);
      for (int d = 0; d < config.modality_dims[m]; ++d) {
        x[d] = dot(mixing[m][d], latent) + config.sigma_obs * rng_obs.normal();
      }
      s.modality_inputs[m] = std::move(x);
    }
    bundle.latents[i] = std::move(latent);
  }

  // Metadata column, correlated with the class anchor where one exists.
  Rng rng_meta(seed_chain(config.seed, {stream::kData, kMeta}));
  const int G = config.metadata_categories;
  bundle.metadata.resize(n);
  for (int i = 0; i < n; ++i) {
    int anchor = -1;
    if (config.task == TaskKind::Multiclass) {
      anchor = classes[i];
    } else if (config.task == TaskKind::Multilabel) {
      for (std::size_t l = 0; l < bits[i].size(); ++l) {
        if (bits[i][l]) {
          anchor = static_cast<int>(l);
          break;
        }
      }
      if (anchor < 0) anchor = static_cast<int>(bits[i].size());
    }
    const double u = rng_meta.uniform();
    const int random_cat = rng_meta.uniform_int(G);  // drawn unconditionally to keep the stream aligned
    bundle.metadata[i] = (anchor >= 0 && u < config.metadata_correlation) ? anchor % G : random_cat;
  }
  return bundle;
}

void split(DatasetBundle& bundle, double val_frac, double test_frac, uint64_t seed) {
  const int n = static_cast<int>(bundle.samples.size());
  if (val_frac <= 0.0 || test_frac <= 0.0 || val_frac + test_frac >= 1.0) {
    throw ConfigError("split: fractions must be in (0,1) and sum below 1");
  }
  const long n_val = std::lround(val_frac * n);
  const long n_test = std::lround(test_frac * n);
  if (n_val < 1 || n_test < 1 || n_val + n_test >= n) {
    throw ConfigError("split: degenerate split sizes");
  }

  Rng rng(seed_chain(seed, {stream::kSplit}));
  bundle.train_idx.clear();
  bundle.val_idx.clear();
  bundle.test_idx.clear();

  if (bundle.config.task == TaskKind::Retrieval) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    bundle.val_idx.assign(order.begin(), order.begin() + n_val);
    bundle.test_idx.assign(order.begin() + n_val, order.begin() + n_val + n_test);
    bundle.train_idx.assign(order.begin() + n_val + n_test, order.end());
  } else {
    // Stratify by class (lowest positive label anchors multilabel rows).
    auto anchor_of = [&](int i) {
      if (bundle.config.task == TaskKind::Multiclass) return bundle.samples[i].class_label;
      const auto& row = bundle.samples[i].label_bits;
      for (std::size_t l = 0; l < row.size(); ++l) {
        if (row[l]) return static_cast<int>(l);
      }
      return static_cast<int>(row.size());
    };
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[anchor_of(i)].push_back(i);

    // Largest-remainder apportionment of the exact global counts.
    auto apportion = [&](long target) {
      std::vector<std::pair<double, int>> remainders;
      std::map<int, long> take;
      long assigned = 0;
      for (auto& [cls, idxs] : groups) {
        const double exact = static_cast<double>(target) * idxs.size() / n;
        take[cls] = static_cast<long>(exact);
        assigned += take[cls];
        remainders.push_back({exact - static_cast<double>(take[cls]), cls});
      }
      std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned) {
        take[remainders[i].second] += 1;
      }
      return take;
    };
    std::map<int, long> val_take = apportion(n_val);
    std::map<int, long> test_take = apportion(n_test);

    for (auto& [cls, idxs] : groups) {
      rng.shuffle(idxs);
      long nv = std::min<long>(val_take[cls], static_cast<long>(idxs.size()));
      long nt = std::min<long>(test_take[cls], static_cast<long>(idxs.size()) - nv);
      for (long i = 0; i < nv; ++i) bundle.val_idx.push_back(idxs[i]);
      for (long i = nv; i < nv + nt; ++i) bundle.test_idx.push_back(idxs[i]);
      for (long i = nv + nt; i < static_cast<long>(idxs.size()); ++i) bundle.train_idx.push_back(idxs[i]);
    }
    std::sort(bundle.val_idx.begin(), bundle.val_idx.end());
    std::sort(bundle.test_idx.begin(), bundle.test_idx.end());
    std::sort(bundle.train_idx.begin(), bundle.train_idx.end());
  }
}

void save_bundle(const DatasetBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const SyntheticConfig& c = bundle.config;

  json prov;
  prov["n_samples"] = c.n_samples;
  prov["n_modalities"] = c.n_modalities;
  prov["modality_dims"] = c.modality_dims;
  prov["latent_dim"] = c.latent_dim;
  prov["task"] = c.task == TaskKind::Multiclass   ? "multiclass"
                 : c.task == TaskKind::Multilabel ? "multilabel"
                                                  : "retrieval";
  prov["n_classes"] = c.n_classes;
  prov["label_base_rates"] = c.label_base_rates;
  prov["sigma_within"] = c.sigma_within;
  prov["sigma_obs"] = c.sigma_obs;
  prov["metadata_categories"] = c.metadata_categories;
  prov["metadata_correlation"] = c.metadata_correlation;
  prov["shared_mixing"] = c.shared_mixing;
  prov["seed"] = c.seed;
  std::ofstream(fs::path(dir) / "provenance.json") << prov.dump(2) << "\n";

  for (int m = 0; m < c.n_modalities; ++m) {
    std::vector<Vec> rows;
    rows.reserve(bundle.samples.size());
    for (const auto& s : bundle.samples) rows.push_back(s.modality_inputs[m]);
    write_matrix((fs::path(dir) / ("modality_" + std::to_string(m) + ".csv")).string(), rows);
  }

  {
    std::ofstream out(fs::path(dir) / "labels.csv");
    for (const auto& s : bundle.samples) {
      if (c.task == TaskKind::Multiclass) {
        out << s.class_label << "\n";
      } else if (c.task == TaskKind::Multilabel) {
        for (std::size_t l = 0; l < s.label_bits.size(); ++l) {
          if (l) out << ",";
          out << s.label_bits[l];
        }
        out << "\n";
      } else {
        out << -1 << "\n";
      }
    }
  }
  {
    std::ofstream out(fs::path(dir) / "metadata.csv");
    for (int g : bundle.metadata) out << g << "\n";
  }
  write_matrix((fs::path(dir) / "latents.csv").string(), bundle.latents);
  {
    std::ofstream out(fs::path(dir) / "splits.csv");
    for (int i : bundle.train_idx) out << i << ",train\n";
    for (int i : bundle.val_idx) out << i << ",val\n";
    for (int i : bundle.test_idx) out << i << ",test\n";
  }
}

DatasetBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream pin(fs::path(dir) / "provenance.json");
  if (!pin) throw ConfigError("load_bundle: missing provenance.json in " + dir);
  json prov = json::parse(pin);

  DatasetBundle bundle;
  SyntheticConfig& c = bundle.config;
  c.n_samples = prov.at("n_samples").get<int>();
  c.n_modalities = prov.at("n_modalities").get<int>();
  c.modality_dims = prov.at("modality_dims").get<std::vector<int>>();
  c.latent_dim = prov.at("latent_dim").get<int>();
  const std::string task = prov.at("task").get<std::string>();
  c.task = task == "multiclass"   ? TaskKind::Multiclass
           : task == "multilabel" ? TaskKind::Multilabel
                                  : TaskKind::Retrieval;
  c.n_classes = prov.at("n_classes").get<int>();
  c.label_base_rates = prov.at("label_base_rates").get<std::vector<double>>();
  c.sigma_within = prov.at("sigma_within").get<double>();
  c.sigma_obs = prov.at("sigma_obs").get<double>();
  c.metadata_categories = prov.at("metadata_categories").get<int>();
  c.metadata_correlation = prov.at("metadata_correlation").get<double>();
  c.shared_mixing = prov.at("shared_mixing").get<bool>();
  c.seed = prov.at("seed").get<uint64_t>();

  std::vector<std::vector<Vec>> mods(c.n_modalities);
  for (int m = 0; m < c.n_modalities; ++m) {
    mods[m] = read_matrix((fs::path(dir) / ("modality_" + std::to_string(m) + ".csv")).string());
  }
  bundle.latents = read_matrix((fs::path(dir) / "latents.csv").string());
  bundle.samples.resize(c.n_samples);
  {
    std::ifstream in(fs::path(dir) / "labels.csv");
    std::string line;
    int i = 0;
    while (std::getline(in, line) && i < c.n_samples) {
      MultimodalSample& s = bundle.samples[i];
      if (c.task == TaskKind::Multilabel) {
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) s.label_bits.push_back(std::stoi(cell));
      } else {
        s.class_label = std::stoi(line);
      }
      ++i;
    }
  }
  {
    std::ifstream in(fs::path(dir) / "metadata.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) bundle.metadata.push_back(std::stoi(line));
    }
  }
  for (int i = 0; i < c.n_samples; ++i) {
    bundle.samples[i].modality_inputs.resize(c.n_modalities);
    for (int m = 0; m < c.n_modalities; ++m) {
      bundle.samples[i].modality_inputs[m] = mods[m][i];
    }
  }
  {
    std::ifstream in(fs::path(dir) / "splits.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      const int idx = std::stoi(line.substr(0, comma));
      const std::string split_name = line.substr(comma + 1);
      if (split_name == "train") bundle.train_idx.push_back(idx);
      else if (split_name == "val") bundle.val_idx.push_back(idx);
      else if (split_name == "test") bundle.test_idx.push_back(idx);
      else throw ConfigError("load_bundle: bad split name " + split_name);
    }
  }
  return bundle;
}

}  // namespace flsim
