#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "atd/classify.hpp"
#include "atd/corpus.hpp"
#include "atd/crosslingual.hpp"
#include "atd/error.hpp"
#include "atd/generation.hpp"
#include "atd/inference.hpp"
#include "atd/model.hpp"
#include "atd/similarity.hpp"
#include "atd/snapshot.hpp"
#include "atd/trainer.hpp"

namespace atd {

namespace {

struct Common {
  std::uint64_t seed = 1;
};

void add_seed(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

std::string config_text(const TrainConfig& c) {
  std::ostringstream s;
  write_train_config(s, c);
  return s.str();
}

TrainConfig config_from(const std::string& path, const TrainConfig& base) {
  return path.empty() ? base : load_train_config(path, base);
}

int language_of(const Model& m, const std::string& key) {
  if (key.empty()) return 0;
  return m.vocab.languages.id(key);
}

int word_of(const Model& m, int lang, const std::string& word) {
  const Vocabulary& v = m.vocab.vocabularies[static_cast<std::size_t>(lang)];
  auto id = v.find(normalize_token(word));
  if (!id) throw DataError("word '" + word + "' is not in the vocabulary");
  return *id;
}

std::vector<int> words_of(const Model& m, int lang, const std::string& text) {
  std::vector<int> out;
  const Vocabulary& v = m.vocab.vocabularies[static_cast<std::size_t>(lang)];
  for (const auto& t : tokenize(text)) out.push_back(v.id(t));
  return out;
}

void print_neighbors(std::ostream& out, const Vocabulary& vocab,
                     const std::vector<Neighbor>& ns) {
  out << "rank\tword\tcosine\n";
  for (std::size_t i = 0; i < ns.size(); ++i) {
    out << i + 1 << '\t' << vocab.word(ns[i].word) << '\t' << ns[i].cosine << '\n';
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct TrainLmArgs {
  std::string corpus, out, config, held_out, embeddings, embeddings_lang, resume;
  int K = 50, F = 50, D = 10, context = 3, min_count = 1, max_vocab = 0;
  int epochs = -1, batch = -1, threads = -1;
  double lr = -1.0, init_scale = 0.2, attr_scale = 1.0;
  bool no_rectify = false;
};

int train_lm(const TrainLmArgs& a, const Common& c, std::ostream& out) {
  TrainConfig cfg;
  Model m;
  std::vector<RawDocument> raw = read_corpus_file(a.corpus);
  if (!a.resume.empty()) {
    m = load_snapshot(a.resume);
    if (auto it = m.hyper.find("train_config"); it != m.hyper.end()) {
      std::istringstream s(it->second);
      cfg = parse_train_config(s);
    }
  } else {
    if (a.K < 1 || a.F < 1 || a.D < 1 || a.context < 1) {
      throw UsageError("K, F, D and context must be positive");
    }
    m.vocab = build_corpus_vocabulary(raw, a.min_count, a.max_vocab);
  }
  cfg = config_from(a.config, cfg);
  cfg.seed = c.seed;
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  if (a.batch >= 0) cfg.batch_size = a.batch;
  if (a.threads >= 0) cfg.threads = a.threads;
  if (a.lr >= 0.0) cfg.lr0 = a.lr;
  cfg.validate();

  const int context = a.resume.empty() ? a.context : m.params.dims.context_size;
  const EncodedCorpus corpus = encode(raw, m.vocab, context);
  std::vector<int> sizes;
  for (const auto& v : m.vocab.vocabularies) sizes.push_back(v.size());
  if (a.resume.empty()) {
    m.params = FactoredParams::zeros({a.K, a.F, a.D, a.context}, sizes);
    m.table = AttributeTable::zeros(a.D, m.vocab.attributes.size(), !a.no_rectify);
    const auto counts = unigram_counts(corpus, sizes);
    initialize(m.params, m.table, c.seed, {a.init_scale, a.attr_scale, true}, counts);
    if (!a.embeddings.empty()) {
      std::ifstream in(a.embeddings);
      if (!in) throw DataError("cannot open " + a.embeddings);
      const int lang = language_of(m, a.embeddings_lang);
      const int found =
          import_embeddings(in, m.vocab.vocabularies[static_cast<std::size_t>(lang)], m.params, lang);
      out << "# imported " << found << " embeddings\n";
    }
    m.hyper["init_scale"] = std::to_string(a.init_scale);
    m.hyper["attribute_scale"] = std::to_string(a.attr_scale);
    m.hyper["min_count"] = std::to_string(a.min_count);
  }
  m.hyper["objective"] = "lm";
  m.hyper["train_config"] = config_text(cfg);

  std::vector<TrainingExample> held;
  if (!a.held_out.empty()) {
    held = encode(read_corpus_file(a.held_out), m.vocab, context).examples();
    if (cfg.eval_every == 0) cfg.eval_every = 1;
  }
  const auto examples = corpus.examples();
  TrainerState state = m.trainer.value_or(TrainerState{});
  out << "epoch\tnll\tperplexity\tlr\tmomentum" << (held.empty() ? "" : "\theld_out_nll") << '\n';
  TrainCallbacks cb;
  cb.held_out = held;
  cb.on_epoch = [&out](const EpochStats& s) {
    out << s.epoch << '\t' << s.mean_nll << '\t' << s.perplexity << '\t' << s.lr << '\t'
        << s.momentum;
    if (s.held_out_nll) out << '\t' << *s.held_out_nll;
    out << '\n';
  };
  train(m.params, m.table, examples, cfg, cb, &state);
  m.trainer = std::move(state);
  save_snapshot(m, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainRankingArgs {
  std::string parallel, out, config;
  int K = 40, F = 80, D = 8, min_count = 1, max_vocab = 0, contrastive = 5;
  int epochs = -1, batch = -1;
  double margin = 1.0, lambda = -1.0, lr = -1.0, init_scale = 0.2, attr_scale = 1.0;
  bool no_share = false;
};

int train_ranking_cmd(const TrainRankingArgs& a, const Common& c, std::ostream& out) {
  const auto raw = read_parallel_file(a.parallel);
  Model m;
  m.vocab = build_parallel_vocabulary(raw, a.min_count, a.max_vocab);
  const ParallelCorpus corpus = encode_parallel(raw, m.vocab);
  RankingConfig rc;
  rc.optim = config_from(a.config, rc.optim);
  rc.optim.seed = c.seed;
  if (a.epochs >= 0) rc.optim.epochs = a.epochs;
  if (a.batch >= 0) rc.optim.batch_size = a.batch;
  if (a.lr >= 0.0) rc.optim.lr0 = a.lr;
  if (a.lambda >= 0.0) rc.optim.weight_decay = a.lambda;
  rc.margin = a.margin;
  rc.contrastive = a.contrastive;
  rc.share_factors = !a.no_share;
  rc.validate();

  std::vector<int> sizes;
  for (const auto& v : m.vocab.vocabularies) sizes.push_back(v.size());
  m.params = FactoredParams::zeros({a.K, a.F, a.D, 1}, sizes);
  m.table = AttributeTable::zeros(a.D, m.vocab.attributes.size());
  initialize(m.params, m.table, c.seed, {a.init_scale, a.attr_scale, false});
  m.hyper["objective"] = "ranking";
  m.hyper["train_config"] = config_text(rc.optim);
  m.hyper["margin"] = std::to_string(a.margin);
  m.hyper["contrastive"] = std::to_string(a.contrastive);
  m.hyper["share_factors"] = a.no_share ? "0" : "1";
  out << "epoch\tloss\tlr\tmomentum\n";
  train_ranking(m.params, m.table, corpus, rc, [&out](const RankingEpoch& e) {
    out << e.epoch << '\t' << e.mean_loss << '\t' << e.lr << '\t' << e.momentum << '\n';
  });
  out << "train_precision_at_1\t" << retrieval_precision(m.params, m.table, corpus.pairs) << '\n';
  save_snapshot(m, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string model, text, input, lang, init = "random";
  int steps = 30;
  double lr = 0.1;
};

int infer_attr(const InferArgs& a, const Common& c, std::ostream& out) {
  const Model m = load_snapshot(a.model);
  const int lang = language_of(m, a.lang);
  std::vector<std::string> lines;
  if (!a.text.empty()) lines.push_back(a.text);
  if (!a.input.empty()) {
    for (auto& l : read_lines(a.input)) lines.push_back(std::move(l));
  }
  if (lines.empty()) throw UsageError("give --text or --input");
  InferenceConfig cfg;
  cfg.steps = a.steps;
  cfg.lr = a.lr;
  cfg.seed = c.seed;
  if (a.init == "zeros") cfg.init = InitMode::Zeros;
  else if (a.init == "random") cfg.init = InitMode::Random;
  else if (a.init == "average") cfg.init = InitMode::WordAverage;
  else throw UsageError("--init must be zeros, random or average");

  out << "line\tnll_initial\tnll_final\tnearest_attribute\tvector\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Document doc;
    doc.words = words_of(m, lang, lines[i]);
    doc.language = lang;
    if (doc.words.empty()) throw DataError("line " + std::to_string(i + 1) + " has no tokens");
    const auto examples = document_examples(doc, m.params.dims.context_size);
    const InferenceResult r = infer_attribute(m.params, m.table.rectify, examples, cfg);
    std::string nearest = "-";
    double best = -2.0;
    if (r.x.norm() > 0.0) {
      for (int k = 0; k < m.table.size(); ++k) {
        const VectorXd v = attribute_vector(m.table, k);
        if (v.norm() == 0.0) continue;
        const double cs = cosine(v, r.x);
        if (cs > best) {
          best = cs;
          nearest = m.vocab.attributes.key(k);
        }
      }
    }
    out << i + 1 << '\t' << r.losses.front() << '\t' << r.losses.back() << '\t' << nearest << '\t';
    for (Eigen::Index k = 0; k < r.x.size(); ++k) out << (k ? "," : "") << r.x[k];
    out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string model, lang, context, tags;
  std::vector<std::string> attrs;
  std::vector<double> weights;
  int len = 20, samples = 1;
  double temperature = 1.0;
  bool greedy = false, allow_special = false;
};

int generate(const GenerateArgs& a, const Common& c, std::ostream& out) {
  const Model m = load_snapshot(a.model);
  SampleConfig cfg;
  cfg.lang = language_of(m, a.lang);
  cfg.length = a.len;
  cfg.temperature = a.temperature;
  cfg.greedy = a.greedy;
  cfg.allow_special = a.allow_special;
  const std::vector<int> context = words_of(m, cfg.lang, a.context);
  const Vocabulary& vocab = m.vocab.vocabularies[static_cast<std::size_t>(cfg.lang)];

  std::vector<int> tag_ids;
  VectorXd x;
  if (!a.tags.empty()) {
    if (!a.attrs.empty()) throw UsageError("--tags and --attr are exclusive");
    std::istringstream s(a.tags);
    std::string t;
    while (s >> t) tag_ids.push_back(m.vocab.attributes.id(t));
  } else {
    if (a.attrs.empty()) throw UsageError("give --attr or --tags");
    std::vector<int> ids;
    for (const auto& k : a.attrs) ids.push_back(m.vocab.attributes.id(k));
    std::vector<double> w = a.weights;
    if (w.empty()) w.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
    x = mix_attributes(m.table, ids, w);
  }
  for (int s = 0; s < a.samples; ++s) {
    cfg.seed = mix_seed(c.seed, static_cast<std::uint64_t>(s));
    const auto ids = tag_ids.empty()
                         ? sample(m.params, x, context, cfg)
                         : sample_with_attribute_sequence(m.params, m.table, tag_ids, context, cfg);
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << vocab.word(ids[i]);
    out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct NeighborArgs {
  std::string model, word, lang, to_lang;
  std::vector<std::string> attrs;
  int top = 10, report = 3;
};

int neighbors(const NeighborArgs& a, const Common&, std::ostream& out) {
  const Model m = load_snapshot(a.model);
  const int lang = language_of(m, a.lang);
  const int w = word_of(m, lang, a.word);
  if (!a.to_lang.empty()) {
    if (!a.attrs.empty()) throw UsageError("--to-lang conditions on language vectors; drop --attr");
    const int target = language_of(m, a.to_lang);
    const auto ns = crosslingual_neighbors(m.params, m.table, w, lang, target, a.top);
    print_neighbors(out, m.vocab.vocabularies[static_cast<std::size_t>(target)], ns);
    return 0;
  }
  const Vocabulary& vocab = m.vocab.vocabularies[static_cast<std::size_t>(lang)];
  if (a.attrs.size() == 1) {
    const int attr = m.vocab.attributes.id(a.attrs[0]);
    print_neighbors(out, vocab, conditional_neighbors(m.params, m.table, w, attr, a.top, lang));
    return 0;
  }
  if (a.attrs.size() != 2) throw UsageError("give one or two --attr");
  const int A = m.vocab.attributes.id(a.attrs[0]);
  const int B = m.vocab.attributes.id(a.attrs[1]);
  const CommonUnique cu = common_unique(m.params, m.table, w, A, B, a.top, a.report, lang);
  out << "rank\tcommon\tunique_" << a.attrs[0] << "\tunique_" << a.attrs[1] << '\n';
  auto cell = [&vocab](const std::vector<Neighbor>& xs, int i) {
    return static_cast<std::size_t>(i) < xs.size() ? vocab.word(xs[static_cast<std::size_t>(i)].word)
                                                   : std::string("-");
  };
  for (int i = 0; i < a.report; ++i) {
    out << i + 1 << '\t' << cell(cu.common, i) << '\t' << cell(cu.unique_a, i) << '\t'
        << cell(cu.unique_b, i) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CollocateArgs {
  std::string model, words, attr, candidates, lang;
  int top = 10;
};

int collocate(const CollocateArgs& a, const Common&, std::ostream& out) {
  const Model m = load_snapshot(a.model);
  const int lang = language_of(m, a.lang);
  const int attr = m.vocab.attributes.id(a.attr);
  std::vector<int> query_words;
  {
    std::istringstream s(a.words);
    std::string t;
    while (s >> t) query_words.push_back(word_of(m, lang, t));
  }
  const VectorXd q = collocation_repr(m.params, m.table, query_words, attr, lang);
  const Vocabulary& vocab = m.vocab.vocabularies[static_cast<std::size_t>(lang)];
  if (a.candidates.empty()) {
    print_neighbors(out, vocab, neighbors_of_vector(m.params, m.table, q, attr, a.top, lang));
    return 0;
  }
  const auto lines = read_lines(a.candidates);
  std::vector<std::vector<int>> cands;
  for (const auto& l : lines) {
    std::vector<int> ids;
    std::istringstream s(l);
    std::string t;
    while (s >> t) ids.push_back(word_of(m, lang, t));
    cands.push_back(std::move(ids));
  }
  const auto ranked = rank_collocations(m.params, m.table, q, cands, attr, a.top, lang);
  out << "rank\tcollocation\tcosine\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << i + 1 << '\t' << lines[static_cast<std::size_t>(ranked[i].word)] << '\t'
        << ranked[i].cosine << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct CorrArgs {
  std::string model;
  std::vector<std::string> attrs;
  bool use_cosine = false;
};

int attr_corr(const CorrArgs& a, const Common&, std::ostream& out) {
  const Model m = load_snapshot(a.model);
  std::vector<int> ids;
  std::vector<std::string> names = a.attrs;
  if (names.empty()) names = m.vocab.attributes.keys();
  for (const auto& k : names) ids.push_back(m.vocab.attributes.id(k));
  const auto corr = attribute_correlation(
      m.table, ids, a.use_cosine ? CorrelationKind::Cosine : CorrelationKind::Pearson);
  out << "attribute";
  for (const auto& k : names) out << '\t' << k;
  out << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double v = corr.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << '\t';
      if (std::isnan(v)) out << "nan";
      else out << v;
    }
    out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string features, model, corpus, labels, write_features, classifier = "logistic";
  std::vector<std::string> kinds;
  int folds = 10, epochs = 20;
  double lr = 0.1, l2 = 1e-4;
};

int eval_classify(const ClassifyArgs& a, const Common& c, std::ostream& out) {
  FeatureMatrix x;
  std::vector<int> y;
  if (!a.features.empty()) {
    if (!a.corpus.empty()) throw UsageError("--features and --corpus are exclusive");
    std::ifstream in(a.features);
    if (!in) throw DataError("cannot open " + a.features);
    LabeledFeatures lf = read_labeled_features(in);
    x = std::move(lf.features);
    y = std::move(lf.labels);
  } else {
    if (a.corpus.empty() || a.labels.empty()) {
      throw UsageError("give --features, or --corpus with --labels");
    }
    const auto raw = read_corpus_file(a.corpus);
    for (const auto& l : read_lines(a.labels)) {
      try {
        y.push_back(std::stoi(l));
      } catch (const std::exception&) {
        throw DataError("bad label '" + l + "'");
      }
    }
    if (y.size() != raw.size()) throw DataError("label count differs from document count");
    std::vector<std::string> kinds = a.kinds;
    if (kinds.empty()) kinds.push_back("tfidf");
    std::optional<Model> m;
    if (!a.model.empty()) m = load_snapshot(a.model);
    std::optional<CorpusVocabulary> own;
    if (!m) own = build_corpus_vocabulary(raw, 1);
    const CorpusVocabulary& cv = m ? m->vocab : *own;
    const EncodedCorpus corpus = encode(raw, cv, 1);
    std::vector<FeatureMatrix> blocks;
    for (const auto& k : kinds) {
      if (k == "tfidf") {
        std::vector<std::vector<int>> docs;
        int width = 0;
        for (const auto& d : corpus.documents) docs.push_back(d.words);
        for (const auto& v : cv.vocabularies) width = std::max(width, v.size());
        blocks.push_back(tfidf_features(docs, width).features);
      } else if (k == "conditioned" || k == "unconditioned") {
        if (!m) throw UsageError("embedding features need --model");
        blocks.push_back(to_features(
            embedding_features(m->params, m->table, corpus.documents, k == "conditioned")));
      } else {
        throw UsageError("unknown feature kind '" + k + "'");
      }
    }
    x = concat_features(blocks);
  }
  if (!a.write_features.empty()) {
    std::ofstream o(a.write_features);
    if (!o) throw DataError("cannot write " + a.write_features);
    write_labeled_features(o, x, y);
  }
  Trainer trainer;
  if (a.classifier == "logistic") {
    LogisticConfig lc{a.l2, a.epochs, a.lr, c.seed};
    trainer = [lc](const FeatureMatrix& tx, std::span<const int> ty) {
      auto model = std::make_shared<LogisticModel>(train_logistic(tx, ty, lc));
      return std::function<int(const FeatureRow&)>(
          [model](const FeatureRow& r) { return model->predict(r); });
    };
  } else if (a.classifier == "perceptron") {
    const int epochs = a.epochs;
    const std::uint64_t seed = c.seed;
    trainer = [epochs, seed](const FeatureMatrix& tx, std::span<const int> ty) {
      auto model = std::make_shared<PerceptronModel>(train_avg_perceptron(tx, ty, epochs, seed));
      return std::function<int(const FeatureRow&)>(
          [model](const FeatureRow& r) { return model->predict(r); });
    };
  } else {
    throw UsageError("--classifier must be logistic or perceptron");
  }
  const CrossValidation cv = cross_validate(x, y, a.folds, c.seed, trainer);
  out << "fold\taccuracy\n";
  for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
    out << f << '\t' << cv.fold_accuracy[f] << '\n';
  }
  out << "mean\t" << cv.mean << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int inspect(const std::string& path, const Common&, std::ostream& out) {
  const Model m = load_snapshot(path);
  const ModelDims& d = m.params.dims;
  out << "format_version\t" << kSnapshotVersion << '\n'
      << "K\t" << d.K << "\nF\t" << d.F << "\nD\t" << d.D << "\ncontext\t" << d.context_size
      << "\nrectify\t" << (m.table.rectify ? 1 : 0) << '\n';
  for (int l = 0; l < m.vocab.languages.size(); ++l) {
    out << "language\t" << m.vocab.languages.key(l) << '\t'
        << m.vocab.vocabularies[static_cast<std::size_t>(l)].size() << '\n';
  }
  out << "attributes\t" << m.vocab.attributes.size() << '\n';
  for (const auto& [k, v] : m.hyper) {
    std::string flat = v;
    for (auto& ch : flat) {
      if (ch == '\n') ch = ' ';
    }
    out << "setting\t" << k << '\t' << flat << '\n';
  }
  out << "trainer_epochs\t" << (m.trainer ? std::to_string(m.trainer->epoch) : "-") << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attribute-conditioned factored language models"};
  app.name("atd");
  app.require_subcommand(1, 1);
  Common common;
  std::function<int()> action;

  TrainLmArgs lm;
  auto* s = app.add_subcommand("train-lm", "train a conditional language model");
  s->add_option("--corpus", lm.corpus, "attr<TAB>lang<TAB>text file")->required();
  s->add_option("--out", lm.out, "snapshot to write")->required();
  s->add_option("--config", lm.config, "key=value training config");
  s->add_option("--held-out", lm.held_out, "held-out corpus");
  s->add_option("--resume", lm.resume, "continue from a snapshot");
  s->add_option("--embeddings", lm.embeddings, "pretrained `word v1 ... vK` vectors");
  s->add_option("--embeddings-lang", lm.embeddings_lang, "language of --embeddings");
  s->add_option("--K", lm.K)->capture_default_str();
  s->add_option("--F", lm.F)->capture_default_str();
  s->add_option("--D", lm.D)->capture_default_str();
  s->add_option("--context", lm.context, "n - 1")->capture_default_str();
  s->add_option("--min-count", lm.min_count)->capture_default_str();
  s->add_option("--max-vocab", lm.max_vocab)->capture_default_str();
  s->add_option("--epochs", lm.epochs, "epochs to run (further epochs when resuming)");
  s->add_option("--batch", lm.batch);
  s->add_option("--threads", lm.threads);
  s->add_option("--lr", lm.lr);
  s->add_option("--init-scale", lm.init_scale)->capture_default_str();
  s->add_option("--attr-scale", lm.attr_scale)->capture_default_str();
  s->add_flag("--no-rectify", lm.no_rectify);
  add_seed(s, common);
  s->callback([&] { action = [&] { return train_lm(lm, common, out); }; });

  TrainRankingArgs rk;
  s = app.add_subcommand("train-ranking", "train cross-lingual representations from parallel text");
  s->add_option("--parallel", rk.parallel, "lang1<TAB>lang2<TAB>sent1<TAB>sent2 file")->required();
  s->add_option("--out", rk.out)->required();
  s->add_option("--config", rk.config);
  s->add_option("--K", rk.K)->capture_default_str();
  s->add_option("--F", rk.F)->capture_default_str();
  s->add_option("--D", rk.D)->capture_default_str();
  s->add_option("--min-count", rk.min_count)->capture_default_str();
  s->add_option("--max-vocab", rk.max_vocab)->capture_default_str();
  s->add_option("--margin", rk.margin)->capture_default_str();
  s->add_option("--contrastive", rk.contrastive)->capture_default_str();
  s->add_option("--lambda", rk.lambda);
  s->add_option("--epochs", rk.epochs);
  s->add_option("--batch", rk.batch);
  s->add_option("--lr", rk.lr);
  s->add_option("--init-scale", rk.init_scale)->capture_default_str();
  s->add_option("--attr-scale", rk.attr_scale)->capture_default_str();
  s->add_flag("--no-share", rk.no_share, "confine each language to its own factor block");
  add_seed(s, common);
  s->callback([&] { action = [&] { return train_ranking_cmd(rk, common, out); }; });

  InferArgs ia;
  s = app.add_subcommand("infer-attr", "infer an attribute vector for unseen text");
  s->add_option("--model", ia.model)->required();
  s->add_option("--text", ia.text);
  s->add_option("--input", ia.input, "one sentence per line");
  s->add_option("--lang", ia.lang);
  s->add_option("--init", ia.init, "zeros, random or average")->capture_default_str();
  s->add_option("--steps", ia.steps)->capture_default_str();
  s->add_option("--lr", ia.lr)->capture_default_str();
  add_seed(s, common);
  s->callback([&] { action = [&] { return infer_attr(ia, common, out); }; });

  GenerateArgs ga;
  s = app.add_subcommand("generate", "sample text under attributes");
  s->add_option("--model", ga.model)->required();
  s->add_option("--attr", ga.attrs, "attribute key; repeat to mix");
  s->add_option("--weight", ga.weights, "mixture weight per --attr");
  s->add_option("--tags", ga.tags, "space-separated attribute per generated word");
  s->add_option("--context", ga.context, "seed text");
  s->add_option("--lang", ga.lang);
  s->add_option("--len", ga.len)->capture_default_str();
  s->add_option("--samples", ga.samples)->capture_default_str();
  s->add_option("--temperature", ga.temperature)->capture_default_str();
  s->add_flag("--greedy", ga.greedy);
  s->add_flag("--allow-special", ga.allow_special);
  add_seed(s, common);
  s->callback([&] { action = [&] { return generate(ga, common, out); }; });

  NeighborArgs na;
  s = app.add_subcommand("neighbors", "nearest neighbours under attributes or languages");
  s->add_option("--model", na.model)->required();
  s->add_option("--word", na.word)->required();
  s->add_option("--attr", na.attrs, "one attribute, or two to contrast");
  s->add_option("--lang", na.lang);
  s->add_option("--to-lang", na.to_lang, "rank words of this language");
  s->add_option("--top", na.top)->capture_default_str();
  s->add_option("--report", na.report)->capture_default_str();
  add_seed(s, common);
  s->callback([&] { action = [&] { return neighbors(na, common, out); }; });

  CollocateArgs ca;
  s = app.add_subcommand("collocate", "neighbours of a multi-word query");
  s->add_option("--model", ca.model)->required();
  s->add_option("--words", ca.words)->required();
  s->add_option("--attr", ca.attr)->required();
  s->add_option("--candidates", ca.candidates, "one candidate collocation per line");
  s->add_option("--lang", ca.lang);
  s->add_option("--top", ca.top)->capture_default_str();
  add_seed(s, common);
  s->callback([&] { action = [&] { return collocate(ca, common, out); }; });

  CorrArgs co;
  s = app.add_subcommand("attr-corr", "correlation matrix of attribute vectors");
  s->add_option("--model", co.model)->required();
  s->add_option("--attr", co.attrs, "attributes to include (default all)");
  s->add_flag("--cosine", co.use_cosine, "cosine instead of Pearson");
  add_seed(s, common);
  s->callback([&] { action = [&] { return attr_corr(co, common, out); }; });

  ClassifyArgs cl;
  s = app.add_subcommand("eval-classify", "cross-validated classification");
  s->add_option("--features", cl.features, "labeled feature file");
  s->add_option("--corpus", cl.corpus);
  s->add_option("--labels", cl.labels, "one integer label per corpus line");
  s->add_option("--model", cl.model);
  s->add_option("--feature", cl.kinds, "tfidf, conditioned or unconditioned; repeat to concatenate");
  s->add_option("--write-features", cl.write_features);
  s->add_option("--classifier", cl.classifier, "logistic or perceptron")->capture_default_str();
  s->add_option("--folds", cl.folds)->capture_default_str();
  s->add_option("--epochs", cl.epochs)->capture_default_str();
  s->add_option("--lr", cl.lr)->capture_default_str();
  s->add_option("--l2", cl.l2)->capture_default_str();
  add_seed(s, common);
  s->callback([&] { action = [&] { return eval_classify(cl, common, out); }; });

  std::string inspect_path;
  s = app.add_subcommand("inspect", "summarize a snapshot");
  s->add_option("--model", inspect_path)->required();
  add_seed(s, common);
  s->callback([&] { action = [&] { return inspect(inspect_path, common, out); }; });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 1;
  }
  auto precision = out.precision(6);
  try {
    const int rc = action();
    out.precision(precision);
    return rc;
  } catch (const UsageError& e) {
    out.precision(precision);
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    out.precision(precision);
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace atd
