#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "layoutmrc/metrics.hpp"
#include "layoutmrc/runconfig.hpp"
#include "layoutmrc/trainer.hpp"

namespace {

using namespace layoutmrc;

// Writes the per-epoch training log to stdout and the log file at once.
class TeeStream : public std::ostream {
 public:
  TeeStream(std::ostream& a, std::ostream& b) : std::ostream(&buf_), buf_(a, b) {}

 private:
  class Buf : public std::streambuf {
   public:
    Buf(std::ostream& a, std::ostream& b) : a_(a), b_(b) {}

   protected:
    int overflow(int c) override {
      if (c != EOF) {
        a_.put(static_cast<char>(c));
        b_.put(static_cast<char>(c));
      }
      return c;
    }

   private:
    std::ostream& a_;
    std::ostream& b_;
  };
  Buf buf_;
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::vector<DocumentRecord> load(const std::string& path) {
  std::vector<std::string> warnings;
  auto corpus = load_corpus(path, &warnings);
  print_warnings(warnings);
  return corpus;
}

int cmd_train(const RunConfig& cfg) {
  auto train_path = cfg.require_path("train_corpus");
  auto dev_path = cfg.has("dev_corpus") ? cfg.require_path("dev_corpus")
                                        : train_path;
  auto train_corpus = load(train_path);
  auto dev_corpus = dev_path == train_path ? train_corpus : load(dev_path);

  Vocabulary vocab = build_vocabulary(
      train_corpus, static_cast<std::size_t>(cfg.get_int("vocab_size", 8000)));
  ModelConfig mcfg = cfg.model_config();
  mcfg.vocab_size = static_cast<int>(vocab.size());
  TrainConfig tcfg = cfg.train_config();

  ModelParams params = init_params(mcfg, tcfg.seed);
  std::string ckpt = cfg.get_str("checkpoint", "model.ckpt");
  std::ofstream log_file(ckpt + ".log");
  TeeStream log(std::cout, log_file);
  TrainResult result = train(train_corpus, dev_corpus, vocab, params, mcfg,
                             tcfg, &log);
  save_checkpoint(ckpt, params);
  vocab.save(ckpt + ".vocab");
  std::cout << "selected epoch " << result.best_epoch << "; wrote " << ckpt
            << "\n";
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  auto ckpt = cfg.require_path("checkpoint");
  auto corpus_path = cfg.require_path("test_corpus");
  auto corpus = load(corpus_path);

  Vocabulary vocab = Vocabulary::load(ckpt + ".vocab");
  ModelConfig mcfg = cfg.model_config();
  mcfg.vocab_size = static_cast<int>(vocab.size());
  ModelParams params = init_params(mcfg, 0);
  load_checkpoint(ckpt, params);

  std::string mode_s = cfg.get_str("decode_mode", "greedy");
  DecodeMode mode;
  if (mode_s == "greedy") {
    mode = DecodeMode::Greedy;
  } else if (mode_s == "beam") {
    mode = DecodeMode::Beam;
  } else {
    throw ConfigError("decode_mode must be greedy or beam");
  }
  int beam_size = cfg.get_int("beam_size", 4);
  int max_len = cfg.get_int("max_len", 32);

  std::string out_path = cfg.get_str("predictions", "predictions.txt");
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write predictions: " + out_path);
  for (const auto& doc : corpus) {
    for (const auto& qa : doc.qas) {
      out << generate(qa.question, doc, params, mcfg, vocab, mode, beam_size,
                      max_len)
          << "\n";
    }
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  auto preds_path = cfg.require_path("predictions");
  metrics::EvalReport report;
  if (cfg.has("references")) {
    report = metrics::evaluate_files(preds_path, cfg.require_path("references"));
  } else {
    auto corpus = load(cfg.require_path("test_corpus"));
    auto preds = metrics::read_lines(preds_path);
    std::vector<metrics::EvalPair> pairs;
    for (const auto& doc : corpus) {
      for (const auto& qa : doc.qas) {
        if (pairs.size() == preds.size()) break;
        pairs.push_back({preds[pairs.size()], {qa.answer}});
      }
    }
    std::size_t n_refs = 0;
    for (const auto& doc : corpus) n_refs += doc.qas.size();
    if (preds.size() != n_refs) {
      throw std::runtime_error("line count mismatch: predictions has " +
                               std::to_string(preds.size()) +
                               " lines, corpus has " + std::to_string(n_refs) +
                               " QA pairs");
    }
    report = metrics::evaluate(pairs);
  }
  std::cout << report.to_text();
  std::string report_path = cfg.get_str("report", "");
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << report.to_text();
  }
  return 0;
}

int cmd_inspect(const RunConfig& cfg) {
  auto corpus = load(cfg.require_path("test_corpus"));
  int index = cfg.get_int("index", 0);

  std::vector<std::pair<const DocumentRecord*, const QaPair*>> flat;
  for (const auto& doc : corpus) {
    for (const auto& qa : doc.qas) flat.emplace_back(&doc, &qa);
  }
  if (index < 0 || index >= static_cast<int>(flat.size())) {
    throw ConfigError("index " + std::to_string(index) +
                      " out of range; corpus has " +
                      std::to_string(flat.size()) + " QA pairs");
  }
  const auto& [doc, qa] = flat[static_cast<std::size_t>(index)];
  Vocabulary vocab = build_vocabulary(
      corpus, static_cast<std::size_t>(cfg.get_int("vocab_size", 8000)));
  InputSequence seq = build_input_sequence(qa->question, *doc, vocab,
                                           static_cast<std::size_t>(cfg.get_int("l_max", 512)));
  SaliencyLabels labels = pseudo_saliency_labels(seq, *qa);
  std::vector<int> label_by_pos(seq.size(), -1);
  for (const auto& e : labels.entries) {
    label_by_pos[static_cast<std::size_t>(e.pos)] = e.label;
  }

  std::cout << "question: " << qa->question << "\n";
  std::cout << "answer:   " << qa->answer << "\n";
  const char* origin_names[] = {"special", "question", "roi_label", "ocr"};
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const InputPosition& p = seq.positions[k];
    std::cout << k << "\t" << p.piece << "\t"
              << origin_names[static_cast<int>(p.origin)];
    if (p.seg_class) std::cout << "\tseg=" << roi_class_name(*p.seg_class);
    if (p.loc) {
      std::cout << "\tloc=[" << (*p.loc)[0] << "," << (*p.loc)[1] << ","
                << (*p.loc)[2] << "," << (*p.loc)[3] << "]";
    }
    if (label_by_pos[k] >= 0) std::cout << "\tlabel=" << label_by_pos[k];
    std::cout << "\n";
  }
  return 0;
}

int cmd_stats(const RunConfig& cfg) {
  auto corpus = load(cfg.require_path("test_corpus"));
  CorpusStats s = compute_stats(corpus);
  std::cout << "num_images            " << s.num_images << "\n"
            << "num_questions         " << s.num_questions << "\n"
            << "num_unique_questions  " << s.num_unique_questions << "\n"
            << "pct_unique_answers    " << s.pct_unique_answers << "\n"
            << "avg_len_questions     " << s.avg_len_questions << "\n"
            << "avg_len_documents     " << s.avg_len_documents << "\n"
            << "avg_len_answers       " << s.avg_len_answers << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("LAYOUTMRC_THREADS")) {
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  }

  CLI::App app{"layoutmrc: layout-aware document QA pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  int seed = -1;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", sets, "override a config key (repeatable)");
  app.add_option("--seed", seed, "RNG seed (overrides config)");

  // Subcommand-specific settings come from the config (see README).
  auto* sub_train = app.add_subcommand("train", "train a model");
  auto* sub_gen = app.add_subcommand("generate", "generate answers");
  auto* sub_eval = app.add_subcommand("eval", "score predictions");
  auto* sub_inspect = app.add_subcommand("inspect", "dump one input sequence");
  auto* sub_stats = app.add_subcommand("stats", "corpus statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    cfg.apply_overrides(sets);
    if (seed >= 0) cfg.set("seed", std::to_string(seed));

    if (sub_train->parsed()) return cmd_train(cfg);
    if (sub_gen->parsed()) return cmd_generate(cfg);
    if (sub_eval->parsed()) return cmd_eval(cfg);
    if (sub_inspect->parsed()) return cmd_inspect(cfg);
    if (sub_stats->parsed()) return cmd_stats(cfg);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
