// nowcast command-line tool.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nowcast/contribution.hpp"
#include "nowcast/dfm.hpp"
#include "nowcast/outlier.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/server.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/vectorize.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nowcast;

namespace {

// Flags shared by the pipeline stages; applied on top of --config.
struct PipelineFlags {
  std::string config;
  std::string corpus, survey, out, scores, attention;
  std::vector<std::string> references;
  std::string bucket;
  double nu = 0.0;
  std::size_t min_df = 0;
  std::uint64_t seed = 0;
  std::vector<double> lambda_grid;
  bool no_filter = false;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* nu_opt = nullptr;
  CLI::Option* min_df_opt = nullptr;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Corpus JSONL (id, date, title, body)");
    app->add_option("--survey", survey, "Survey CSV (region,occupation,condition,reason,month)");
    app->add_option("--out", out, "Output directory for artifacts");
    app->add_option("--scores", scores, "Sentence score TSV replacing the ridge scorer");
    app->add_option("--attention", attention, "Attention records for rollout contributions");
    app->add_option("--reference", references, "Reference series as name=path (repeatable)");
    app->add_option("--bucket", bucket, "Bucket unit")->check(CLI::IsMember({"day", "week", "month"}));
    nu_opt = app->add_option("--nu", nu, "One-class SVM nu in (0, 1]");
    min_df_opt = app->add_option("--min-df", min_df, "Minimum document frequency");
    seed_opt = app->add_option("--seed", seed, "Seed for every random choice");
    app->add_option("--lambda-grid", lambda_grid, "Ridge penalties tried on the validation split");
    app->add_flag("--no-filter", no_filter, "Skip the outlier filter when scoring");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) {
      const fs::path path(config);
      c = RunConfig::from_json(read_file(path), path.parent_path());
    }
    if (!corpus.empty()) c.corpus = corpus;
    if (!survey.empty()) c.survey = survey;
    if (!out.empty()) c.output_dir = out;
    if (!scores.empty()) c.scores = scores;
    if (!attention.empty()) c.attention = attention;
    for (const auto& r : references) {
      const auto eq = r.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw InvalidArgument("--reference expects name=path, got '" + r + "'");
      }
      c.references.push_back({r.substr(0, eq), r.substr(eq + 1)});
    }
    if (!bucket.empty()) c.bucket = parse_bucket_unit(bucket);
    if (nu_opt->count()) c.nu = nu;
    if (min_df_opt->count()) c.min_df = min_df;
    if (seed_opt->count()) c.seed = seed;
    if (!lambda_grid.empty()) c.lambda_grid = lambda_grid;
    if (no_filter) c.filter = false;
    c.validate();
    return c;
  }
};

int fail(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return 1;
}

void print_file(const fs::path& path) { std::cout << read_file(path); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"News-based business sentiment nowcasting"};
  app.require_subcommand(1);

  PipelineFlags flags;
  struct Stage {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&);
  };
  const Stage stages[] = {
      {"train-outlier", "Fit tfidf and the one-class SVM on survey reasons", &stage_train_outlier},
      {"train-sentiment", "Fit the ridge scorer on labeled survey reasons", &stage_train_sentiment},
      {"score", "Segment, filter and score the corpus", &stage_score},
      {"index", "Aggregate scores into index series and reports", &stage_index},
      {"run", "Run every stage in order", &run_pipeline},
  };
  std::vector<std::pair<CLI::App*, const Stage*>> stage_cmds;
  for (const auto& stage : stages) {
    CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
    flags.add_to(cmd);
    stage_cmds.emplace_back(cmd, &stage);
  }

  // contrib
  std::string contrib_run = "run", contrib_bucket = "month", contrib_method = "uniform",
              contrib_variant = "filtered", contrib_out;
  std::vector<std::string> contrib_terms;
  bool contrib_once = false;
  CLI::App* contrib = app.add_subcommand("contrib", "Per-term contribution series for a run");
  contrib->add_option("--run", contrib_run, "Run directory")->check(CLI::ExistingDirectory);
  contrib->add_option("--term", contrib_terms, "Query term (repeatable)")->required();
  contrib->add_option("--bucket", contrib_bucket)->check(CLI::IsMember({"day", "week", "month"}));
  contrib->add_option("--method", contrib_method)->check(CLI::IsMember({"uniform", "rollout"}));
  contrib->add_option("--variant", contrib_variant)->check(CLI::IsMember({"filtered", "unfiltered"}));
  contrib->add_flag("--once-per-sentence", contrib_once, "Count a term at most once per sentence");
  contrib->add_option("--out", contrib_out, "Output CSV (default: stdout)");

  // dfm
  std::string dfm_input, dfm_out = "dfm";
  std::size_t dfm_p = 2, dfm_q = 2, dfm_iter = 1000;
  CLI::App* dfm = app.add_subcommand("dfm", "Fit the single-factor dynamic factor model");
  dfm->add_option("--input", dfm_input, "CSV month,series1,...,seriesN")->required()->check(CLI::ExistingFile);
  dfm->add_option("--p", dfm_p, "Factor AR order");
  dfm->add_option("--q", dfm_q, "Idiosyncratic AR order");
  dfm->add_option("--max-iterations", dfm_iter);
  dfm->add_option("--out", dfm_out, "Output directory");

  // eval
  std::string eval_run, eval_index, eval_reference, eval_inliers, eval_outliers;
  CLI::App* eval = app.add_subcommand("eval", "Correlations and filter metrics");
  eval->add_option("--run", eval_run, "Run directory (prints its report)");
  eval->add_option("--index", eval_index, "Index CSV to correlate")->check(CLI::ExistingFile);
  eval->add_option("--reference", eval_reference, "Reference CSV month,value")->check(CLI::ExistingFile);
  eval->add_option("--inliers", eval_inliers, "Corpus JSONL of relevant documents")->check(CLI::ExistingFile);
  eval->add_option("--outliers", eval_outliers, "Corpus JSONL of irrelevant documents")->check(CLI::ExistingFile);

  // synth
  SyntheticConfig synth_cfg;
  std::string synth_out = "synthetic", synth_waveform = "sine";
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic corpus, survey and ground truth");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--months", synth_cfg.months);
  synth->add_option("--docs-per-month", synth_cfg.docs_per_month);
  synth->add_option("--sentences-per-doc", synth_cfg.sentences_per_doc);
  synth->add_option("--survey-per-month", synth_cfg.survey_per_month);
  synth->add_option("--waveform", synth_waveform)->check(CLI::IsMember({"sine", "constant"}));
  synth->add_option("--amplitude", synth_cfg.amplitude);
  synth->add_option("--period", synth_cfg.period);
  synth->add_option("--level", synth_cfg.level, "Value of the constant waveform");
  synth->add_option("--outlier-rate", synth_cfg.outlier_rate);

  // serve
  std::string serve_run = "run", serve_host = "127.0.0.1";
  int serve_port = 8080;
  CLI::App* serve = app.add_subcommand("serve", "Serve a run directory over HTTP");
  serve->add_option("--run", serve_run, "Run directory")->check(CLI::ExistingDirectory);
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, stage] : stage_cmds) {
      if (!cmd->parsed()) continue;
      const RunConfig config = flags.resolve();
      stage->run(config);
      std::cerr << stage->name << ": wrote artifacts to " << config.output_dir.string() << '\n';
      return 0;
    }

    if (contrib->parsed()) {
      ContributionOptions options;
      options.method = parse_method(contrib_method);
      options.variant = parse_variant(contrib_variant);
      if (contrib_once) options.mode = OccurrenceMode::kOncePerSentence;
      RolloutTable rollout;
      if (options.method == ContributionMethod::kRollout) {
        std::ifstream in(fs::path(contrib_run) / artifact::kAttention, std::ios::binary);
        if (!in) throw Error("run has no attention data; rerun score with --attention");
        rollout = build_rollout_table(load_attention(in));
        options.rollout = &rollout;
      }
      const auto series =
          run_contributions(contrib_run, contrib_terms, parse_bucket_unit(contrib_bucket), options);
      std::ostringstream csv;
      write_contribution_csv(csv, series);
      if (contrib_out.empty()) std::cout << csv.str();
      else write_file(contrib_out, csv.str());
      return 0;
    }

    if (dfm->parsed()) {
      std::ifstream in(dfm_input, std::ios::binary);
      const DfmData data = read_dfm_csv(in);
      DfmFitOptions options;
      options.p = dfm_p;
      options.q = dfm_q;
      options.max_iterations = dfm_iter;
      const DfmFit fit = fit_dfm(data.y, options);
      json spec = json::parse(fit.spec.to_json());
      spec["series"] = data.names;
      spec["loglik"] = fit.loglik;
      spec["iterations"] = fit.iterations;
      spec["gradient_norm"] = fit.gradient_norm;
      write_file(fs::path(dfm_out) / "dfm_spec.json", spec.dump(2) + "\n");
      std::ostringstream csv;
      write_factor_csv(csv, data.months, fit);
      write_file(fs::path(dfm_out) / "factor.csv", csv.str());
      std::printf("loglik %.6f after %zu iterations\n", fit.loglik, fit.iterations);
      return 0;
    }

    if (eval->parsed()) {
      bool did = false;
      if (!eval_index.empty() || !eval_reference.empty()) {
        if (eval_index.empty() || eval_reference.empty()) {
          throw InvalidArgument("--index and --reference go together");
        }
        std::ifstream a(eval_index, std::ios::binary), b(eval_reference, std::ios::binary);
        const IndexSeries index = read_index_csv(a, BucketUnit::kMonth);
        const ReferenceSeries ref = read_reference_csv(b, "reference");
        std::printf("pearson %.6f\n", pearson(index.view(), ref.view()));
        did = true;
      }
      if (!eval_inliers.empty() || !eval_outliers.empty()) {
        if (eval_run.empty() || eval_inliers.empty() || eval_outliers.empty()) {
          throw InvalidArgument("filter evaluation needs --run, --inliers and --outliers");
        }
        const TfidfModel tfidf = TfidfModel::from_json(read_file(fs::path(eval_run) / artifact::kTfidf));
        const OneClassSvmModel model =
            OneClassSvmModel::from_json(read_file(fs::path(eval_run) / artifact::kOcsvm));
        const BigramTokenizer tokenizer;
        auto vectors = [&](const std::string& path) {
          std::ifstream in(path, std::ios::binary);
          const auto docs = load_corpus(in);
          std::vector<SparseVector> out;
          for (const auto& s : segment_corpus(docs, tokenizer)) out.push_back(tfidf.transform(s.tokens));
          return out;
        };
        const FilterReport r = evaluate_filter(model, vectors(eval_inliers), vectors(eval_outliers));
        std::printf("class     precision  recall  f1      support\n");
        std::printf("inlier    %.4f     %.4f  %.4f  %zu\n", r.inlier.precision, r.inlier.recall,
                    r.inlier.f1, r.inlier.support);
        std::printf("outlier   %.4f     %.4f  %.4f  %zu\n", r.outlier.precision, r.outlier.recall,
                    r.outlier.f1, r.outlier.support);
        std::printf("macro     %.4f     %.4f  %.4f\n", r.macro_precision, r.macro_recall, r.macro_f1);
        did = true;
      }
      if (!did) {
        if (eval_run.empty()) throw InvalidArgument("nothing to evaluate; see --help");
        print_file(fs::path(eval_run) / artifact::kReport);
      }
      return 0;
    }

    if (synth->parsed()) {
      synth_cfg.waveform = parse_waveform(synth_waveform);
      const SyntheticData data = generate_synthetic(synth_cfg);
      const fs::path dir(synth_out);
      write_synthetic(data, dir);
      const json config = {{"corpus", "corpus.jsonl"},
                           {"survey", "survey.csv"},
                           {"output_dir", "run"},
                           {"references", {{"truth", "truth.csv"}}},
                           {"seed", synth_cfg.seed}};
      write_file(dir / "config.json", config.dump(2) + "\n");
      std::cerr << "synth: wrote " << data.corpus.size() << " documents and " << data.survey.size()
                << " survey responses to " << dir.string() << '\n';
      return 0;
    }

    if (serve->parsed()) {
      const ServedState state = ServedState::load(serve_run);
      HttpServer server(state);
      const int port = server.bind(serve_host, serve_port);
      if (port < 0) throw Error("cannot bind " + serve_host + ":" + std::to_string(serve_port));
      std::cerr << "serving run " << state.run_id() << " on http://" << serve_host << ':' << port
                << '\n';
      server.listen();
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 0;
}
