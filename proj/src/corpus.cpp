#include "ust/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ust/error.hpp"
#include "ust/rng.hpp"

namespace ust {

namespace {

void load_file(const std::string& path, const std::string& format,
               std::unordered_map<std::string, int>& label_index,
               std::vector<std::string>& class_names,
               std::vector<std::pair<std::string, int>>& out,
               LoadStats& stats) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open corpus file: " + path);

  const bool csv = format == "csv";
  if (format != "tsv" && !csv) throw_invalid("unknown corpus format: " + format);
  const char sep = csv ? ',' : '\t';

  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv && first) {
      first = false;
      if (line == "label,text") continue;  // header
    }
    first = false;
    const std::size_t pos = line.find(sep);
    if (pos == std::string::npos || pos == 0 || pos + 1 >= line.size()) {
      if (!line.empty()) ++stats.skipped;
      continue;
    }
    const std::string label = line.substr(0, pos);
    std::string text = line.substr(pos + 1);
    auto [it, inserted] =
        label_index.emplace(label, static_cast<int>(class_names.size()));
    if (inserted) class_names.push_back(label);
    out.emplace_back(std::move(text), it->second);
    ++stats.parsed;
  }
}

}  // namespace

Corpus load_corpus(const std::string& train_path, const std::string& test_path,
                   const std::string& format, LoadStats* stats) {
  Corpus corpus;
  LoadStats local;
  std::unordered_map<std::string, int> label_index;
  load_file(train_path, format, label_index, corpus.class_names, corpus.train,
            local);
  if (!test_path.empty()) {
    load_file(test_path, format, label_index, corpus.class_names, corpus.test,
              local);
  }
  if (corpus.train.empty()) throw_data("corpus has zero train examples: " + train_path);
  if (corpus.num_classes() < 2) {
    throw_data("corpus has a single class; need at least 2: " + train_path);
  }
  if (stats) *stats = local;
  return corpus;
}

void save_corpus_tsv(const Corpus& corpus, const std::string& train_path,
                     const std::string& test_path) {
  auto write = [&](const std::string& path,
                   const std::vector<std::pair<std::string, int>>& rows) {
    std::ofstream out(path);
    if (!out) throw_io("cannot write corpus file: " + path);
    for (const auto& [text, label] : rows) {
      out << corpus.class_names[static_cast<std::size_t>(label)] << '\t' << text
          << '\n';
    }
  };
  write(train_path, corpus.train);
  if (!test_path.empty()) write(test_path, corpus.test);
}

Corpus generate_corpus(const GenConfig& cfg) {
  if (cfg.classes < 2) throw_invalid("generator needs at least 2 classes");
  if (cfg.vocab_overlap < 0.0 || cfg.vocab_overlap > 1.0) {
    throw_invalid("vocab_overlap must be in [0,1]");
  }
  Corpus corpus;
  for (int c = 0; c < cfg.classes; ++c) {
    corpus.class_names.push_back("class" + std::to_string(c));
  }

  Rng rng(derive_seed(cfg.seed, {stream_tag("gen-corpus")}));
  auto make_doc = [&](int label) {
    const int len = 6 + static_cast<int>(rng.below(12));
    std::string doc;
    for (int i = 0; i < len; ++i) {
      if (i) doc.push_back(' ');
      if (rng.bernoulli(cfg.vocab_overlap)) {
        doc += "s" + std::to_string(rng.below(static_cast<std::uint64_t>(
                         cfg.shared_vocab)));
      } else {
        doc += "c" + std::to_string(label) + "w" +
               std::to_string(
                   rng.below(static_cast<std::uint64_t>(cfg.class_vocab)));
      }
    }
    return doc;
  };

  // Round-robin labels keep classes balanced; order shuffled afterwards.
  for (int i = 0; i < cfg.train_size; ++i) {
    const int label = i % cfg.classes;
    corpus.train.emplace_back(make_doc(label), label);
  }
  for (int i = 0; i < cfg.test_size; ++i) {
    const int label = i % cfg.classes;
    corpus.test.emplace_back(make_doc(label), label);
  }
  rng.shuffle(corpus.train);
  rng.shuffle(corpus.test);
  return corpus;
}

FewShotSplit few_shot_split(const Corpus& corpus, int k, std::uint64_t seed,
                            SplitDiagnostics* diag) {
  if (k < 1) throw_invalid("K must be positive");
  const int c_count = corpus.num_classes();

  std::vector<std::vector<std::int64_t>> by_class(
      static_cast<std::size_t>(c_count));
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    by_class[static_cast<std::size_t>(corpus.train[i].second)].push_back(
        static_cast<std::int64_t>(i));
  }
  for (int c = 0; c < c_count; ++c) {
    if (by_class[static_cast<std::size_t>(c)].size() <
        static_cast<std::size_t>(2 * k)) {
      throw_data("class \"" + corpus.class_names[static_cast<std::size_t>(c)] +
                 "\" has fewer than 2K=" + std::to_string(2 * k) +
                 " train examples");
    }
  }

  FewShotSplit split;
  split.num_classes = c_count;
  for (int c = 0; c < c_count; ++c) {
    auto& ids = by_class[static_cast<std::size_t>(c)];
    Rng rng(derive_seed(seed, {stream_tag("split"),
                               static_cast<std::uint64_t>(c)}));
    rng.shuffle(ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::int64_t id = ids[i];
      const auto& [text, label] = corpus.train[static_cast<std::size_t>(id)];
      if (i < static_cast<std::size_t>(k)) {
        split.labeled.push_back({featurize(text), label});
        split.labeled_ids.push_back(id);
      } else if (i < static_cast<std::size_t>(2 * k)) {
        split.valid.push_back({featurize(text), label});
        split.valid_ids.push_back(id);
      } else {
        split.unlabeled.push_back({id, featurize(text)});
        if (diag) diag->unlabeled_labels.emplace_back(id, label);
      }
    }
  }
  std::sort(split.unlabeled.begin(), split.unlabeled.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  if (diag) {
    std::sort(diag->unlabeled_labels.begin(), diag->unlabeled_labels.end());
  }
  for (const auto& [text, label] : corpus.test) {
    split.test.push_back({featurize(text), label});
  }
  return split;
}

}  // namespace ust
