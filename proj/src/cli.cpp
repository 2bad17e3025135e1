#include "dsas/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dsas/attention_dump.hpp"
#include "dsas/errors.hpp"
#include "dsas/flow_metrics.hpp"
#include "dsas/io_util.hpp"
#include "dsas/prompt_builder.hpp"
#include "dsas/qa_eval.hpp"
#include "dsas/reports.hpp"
#include "dsas/toy_transformer.hpp"

namespace dsas::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<nlohmann::json> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

bool same_geometry(const PromptLayout& a, const PromptLayout& b) {
  if (a.total_len != b.total_len || a.question != b.question || a.target != b.target ||
      a.paragraphs.size() != b.paragraphs.size()) {
    return false;
  }
  for (std::size_t m = 0; m < a.paragraphs.size(); ++m) {
    if (a.paragraphs[m].range() != b.paragraphs[m].range()) return false;
  }
  return true;
}

std::string layer_tag(int layer) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", layer);
  return buf;
}

struct InitModelArgs {
  std::string out;
  ModelConfig config;
};

int init_model(const InitModelArgs& a, std::ostream& out) {
  Model model(a.config);
  model.save(a.out);
  out << "wrote " << a.out << " checksum " << std::hex << model.checksum() << std::dec << '\n';
  return 0;
}

struct BuildPromptArgs {
  std::string input;
  std::string out;
  std::string template_id{kMultiDocQaTemplate};
  std::optional<std::uint64_t> shuffle_seed;
  bool edge_bias = false;
};

int build_prompt_cmd(const BuildPromptArgs& a, std::ostream& out) {
  auto sample = sample_from_json(read_json(a.input));
  sample.validate();
  if (a.shuffle_seed) sample = shuffle_paragraphs(sample, *a.shuffle_seed, a.edge_bias);
  const auto prompt = build_prompt(sample, Tokenizer{}, a.template_id);
  auto j = prompt_to_json(prompt);
  j["answers"] = sample.answers;
  write_file_atomic(a.out, j.dump() + "\n");
  out << "wrote " << a.out << " (" << prompt.layout.total_len << " tokens, "
      << prompt.layout.num_paragraphs() << " paragraphs)\n";
  return 0;
}

struct RunArgs {
  std::string model;
  std::string prompt;
  DsasConfig dsas;
  bool no_cgw = false;
  bool no_ras = false;
  bool no_position_weight = false;
  bool vanilla = false;
  int max_new_tokens = 32;
  std::string trace;
  std::string output;
};

int run_cmd(const RunArgs& a, std::ostream& out) {
  const auto model = Model::load(a.model);
  const auto prompt = prompt_from_json(read_json(a.prompt));
  std::optional<DsasConfig> dsas;
  if (!a.vanilla) {
    DsasConfig c = a.dsas;
    c.cgw_enabled = !a.no_cgw;
    c.ras_enabled = !a.no_ras;
    c.position_weight_enabled = !a.no_position_weight;
    c.validate();
    dsas = c;
  }
  GenerateOptions opts;
  opts.max_new_tokens = a.max_new_tokens;
  opts.capture_matrices = !a.trace.empty();
  const auto gen = generate(model, prompt, dsas, opts);
  const auto text = Tokenizer{}.decode(gen.tokens);

  if (!a.trace.empty()) {
    const fs::path target = a.trace;
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const auto staged = staging_path(target);
    fs::remove_all(staged);
    fs::create_directories(staged);

    AttentionDump dump;
    dump.manifest.model_id = "dsas-toy:" + fs::path(a.model).filename().string();
    dump.manifest.num_heads = model.config().num_heads;
    dump.manifest.seq_len = prompt.layout.total_len;
    dump.manifest.reduction = Reduction::HeadSummed;
    dump.manifest.matrix_kind = MatrixKind::Weight;
    dump.manifest.layout = prompt.layout;
    for (const auto& w : gen.trace.layer_weights) dump.layers.push_back({w});
    write_dump(dump, staged / "attention");

    for (const auto& st : gen.trace.selected) {
      write_text_file(staged / ("gate_weights_layer_" + layer_tag(st.layer) + ".csv"),
                      gate_weights_csv(st.gates));
    }
    write_text_file(staged / "partition.csv", partition_csv(gen.trace.selected));
    nlohmann::json gen_json = {{"tokens", gen.tokens}, {"text", text}};
    write_text_file(staged / "generation.json", gen_json.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
    commit_staged(staged, target);
  }
  if (!a.output.empty()) {
    nlohmann::json gen_json = {{"tokens", gen.tokens}, {"text", text}};
    write_file_atomic(a.output, gen_json.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
  }
  out << text << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string dump;
  std::string prompt;
  int topk = 10;
  std::string flows = "flows.csv";
  std::string confusion = "confusion.csv";
  std::string groups;
};

int analyze_cmd(const AnalyzeArgs& a, std::ostream& out) {
  fs::path dir = a.dump;
  if (!fs::exists(dir / "manifest.json") && fs::exists(dir / "attention" / "manifest.json")) {
    dir /= "attention";
  }
  const auto dump = read_dump(dir);

  PromptLayout layout;
  if (!a.prompt.empty()) {
    layout = prompt_from_json(read_json(a.prompt)).layout;
    if (dump.manifest.seq_len != layout.total_len) {
      throw Error(Errc::LayoutMismatch, "dump seq_len " + std::to_string(dump.manifest.seq_len) +
                                            " differs from prompt length " +
                                            std::to_string(layout.total_len));
    }
    if (dump.manifest.layout && !same_geometry(*dump.manifest.layout, layout)) {
      throw Error(Errc::LayoutMismatch, "dump spans differ from the prompt layout");
    }
  } else if (dump.manifest.layout) {
    layout = *dump.manifest.layout;
  } else {
    throw Error(Errc::LayoutMismatch, "dump has no spans and no --prompt was given");
  }
  validate_layout(layout);

  const auto report = layerwise_flows(dump, layout, a.topk);
  const auto cm = confusion_matrix(dump, layout, a.topk);
  write_file_atomic(a.flows, flows_csv(report));
  write_file_atomic(a.confusion, confusion_csv(cm));
  if (!a.groups.empty()) write_file_atomic(a.groups, flow_groups_csv(report));

  const auto agg = report.aggregate();
  out << "layers " << report.num_layers() << ", paragraphs " << report.num_paragraphs() << '\n';
  if (agg.supporting_q && agg.negative_q) {
    out << "supporting flow_q " << format_double(*agg.supporting_q) << " flow_t "
        << format_double(*agg.supporting_t) << '\n';
    out << "negative flow_q " << format_double(*agg.negative_q) << " flow_t "
        << format_double(*agg.negative_t) << '\n';
  }
  return 0;
}

struct ScoreArgs {
  std::string predictions;
  std::string references;
  std::string out = "scores.csv";
};

std::string id_of(const nlohmann::json& row) {
  const auto& id = row.at("id");
  return id.is_string() ? id.get<std::string>() : id.dump();
}

int score_cmd(const ScoreArgs& a, std::ostream& out) {
  const auto preds = read_jsonl(a.predictions);
  const auto refs = read_jsonl(a.references);
  if (preds.size() != refs.size()) {
    throw Error(Errc::KeyMismatch, std::to_string(preds.size()) + " predictions vs " +
                                       std::to_string(refs.size()) + " references");
  }
  std::map<std::string, std::vector<std::string>> ref_by_id;
  try {
    for (const auto& r : refs) {
      std::vector<std::string> answers;
      if (r.contains("answers")) {
        answers = r["answers"].get<std::vector<std::string>>();
      } else {
        answers.push_back(r.at("answer").get<std::string>());
      }
      if (!ref_by_id.emplace(id_of(r), std::move(answers)).second) {
        throw Error(Errc::KeyMismatch, "duplicate reference id " + id_of(r));
      }
    }
    std::string csv = "id,f1,precision,class\n";
    double total = 0.0;
    std::set<std::string> seen;
    for (const auto& p : preds) {
      const auto id = id_of(p);
      const auto it = ref_by_id.find(id);
      if (it == ref_by_id.end() || !seen.insert(id).second) {
        throw Error(Errc::KeyMismatch, "prediction id " + id + " has no unique reference");
      }
      const auto s = best_f1(p.at("prediction").get<std::string>(), it->second);
      total += s.f1;
      csv += id + ',' + format_double(s.f1) + ',' + format_double(s.precision) + ',' +
             std::string(to_string(classify_reasoning(s.f1, s.precision))) + '\n';
    }
    write_file_atomic(a.out, csv);
    const double mean = preds.empty() ? 0.0 : total / static_cast<double>(preds.size());
    out << "samples " << preds.size() << " mean_f1 " << format_double(mean) << '\n';
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, e.what());
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stage adaptive sharpening toolkit", "dsas"};
  app.require_subcommand(1);

  InitModelArgs im;
  auto* im_cmd = app.add_subcommand("init-model", "Create a seeded toy model file");
  im_cmd->add_option("--out", im.out, "Model file to write")->required();
  im_cmd->add_option("--d-model", im.config.d_model)->capture_default_str();
  im_cmd->add_option("--heads", im.config.num_heads)->capture_default_str();
  im_cmd->add_option("--layers", im.config.num_layers)->capture_default_str();
  im_cmd->add_option("--max-seq-len", im.config.max_seq_len)->capture_default_str();
  im_cmd->add_option("--seed", im.config.seed)->capture_default_str();

  BuildPromptArgs bp;
  auto* bp_cmd = app.add_subcommand("build-prompt", "Render a sample into a tokenized prompt");
  bp_cmd->add_option("--input", bp.input, "Sample JSON file")->required();
  bp_cmd->add_option("--out", bp.out, "Prompt JSON file to write")->required();
  bp_cmd->add_option("--template", bp.template_id)->capture_default_str();
  bp_cmd->add_option("--shuffle-seed", bp.shuffle_seed, "Permute paragraphs with this seed");
  bp_cmd->add_flag("--edge-bias", bp.edge_bias, "Favor edge slots for supporting paragraphs");

  RunArgs ra;
  auto* run_cmd_app = app.add_subcommand("run", "Greedy generation on the toy model");
  run_cmd_app->add_option("--model", ra.model)->required();
  run_cmd_app->add_option("--prompt", ra.prompt)->required();
  run_cmd_app->add_option("--topk", ra.dsas.top_k, "K")->capture_default_str();
  run_cmd_app->add_option("--alpha", ra.dsas.alpha, "alpha")->capture_default_str();
  run_cmd_app->add_option("--beta", ra.dsas.beta, "beta")->capture_default_str();
  run_cmd_app->add_option("--layer-frac", ra.dsas.layer_fraction, "n")->capture_default_str();
  run_cmd_app->add_flag("--no-cgw", ra.no_cgw, "Disable contextual gate weighting");
  run_cmd_app->add_flag("--no-ras", ra.no_ras, "Disable reciprocal attention suppression");
  run_cmd_app->add_flag("--no-position-weight", ra.no_position_weight, "Treat alpha as 0");
  run_cmd_app->add_flag("--vanilla", ra.vanilla, "Run without any intervention");
  run_cmd_app->add_option("--max-new-tokens", ra.max_new_tokens)->capture_default_str();
  run_cmd_app->add_option("--trace", ra.trace, "Directory for the attention dump and CSVs");
  run_cmd_app->add_option("--output", ra.output, "Write generation JSON here");

  AnalyzeArgs aa;
  auto* an_cmd = app.add_subcommand("analyze", "Information-flow report from an attention dump");
  an_cmd->add_option("--dump", aa.dump, "Dump directory (or a run trace directory)")->required();
  an_cmd->add_option("--prompt", aa.prompt, "Prompt JSON whose layout the dump must match");
  an_cmd->add_option("--topk", aa.topk)->capture_default_str();
  an_cmd->add_option("--flows", aa.flows)->capture_default_str();
  an_cmd->add_option("--confusion", aa.confusion)->capture_default_str();
  an_cmd->add_option("--groups", aa.groups, "Supporting/negative group means CSV");

  ScoreArgs sa;
  auto* sc_cmd = app.add_subcommand("score", "Token-level F1 scoring of predictions");
  sc_cmd->add_option("--predictions", sa.predictions, "JSONL {id, prediction}")->required();
  sc_cmd->add_option("--references", sa.references, "JSONL {id, answers}")->required();
  sc_cmd->add_option("--out", sa.out)->capture_default_str();

  std::string check_dir;
  auto* ck_cmd = app.add_subcommand("check-dump", "Validate an attention dump directory");
  ck_cmd->add_option("dir", check_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*im_cmd) return init_model(im, out);
    if (*bp_cmd) return build_prompt_cmd(bp, out);
    if (*run_cmd_app) return run_cmd(ra, out);
    if (*an_cmd) return analyze_cmd(aa, out);
    if (*sc_cmd) return score_cmd(sa, out);
    if (*ck_cmd) {
      const auto check = check_dump(check_dir);
      for (const auto& p : check.problems) err << "problem: " << p << '\n';
      if (check.ok) out << "ok\n";
      return check.ok ? 0 : 1;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dsas::cli
