// fruitscan command line: segment, extract, train, classify, evaluate,
// experiment and synth. Exit codes: 0 ok, 1 usage, 2 data error, 3 internal.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fruitscan/error.hpp"
#include "fruitscan/pipeline.hpp"
#include "fruitscan/synthetic.hpp"

namespace {

using namespace fruitscan;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

// JSON config file. Top-level keys are global options; an object keyed by a
// subcommand name holds that subcommand's options, e.g.
//   {"train": {"features": "cdh,seh,clbp", "train-per-class": 40}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string prefix) const override {
    json j = collect(app, default_also);
    (void)prefix;
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static json collect(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto results = opt->results();
        j[name] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json s = collect(sub, default_also);
      if (!s.empty()) j[sub->get_name()] = std::move(s);
    }
    return j;
  }

  static void flatten(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        flatten(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v, key));
      } else {
        item.inputs.push_back(scalar(value, key));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' must be a string, number or boolean");
  }
};

void add_kmeans_options(CLI::App* sub, KMeansConfig& c) {
  sub->add_option("--clusters", c.k, "k-means cluster count")->capture_default_str();
  sub->add_option("--kmeans-iterations", c.max_iterations, "k-means iteration cap")->capture_default_str();
  sub->add_option("--kmeans-tolerance", c.tolerance, "centroid displacement that ends k-means")->capture_default_str();
  sub->add_option("--kmeans-seed", c.seed, "k-means++ seed")->capture_default_str();
  sub->add_option("--kmeans-restarts", c.restarts, "k-means restarts (lowest SSE wins)")->capture_default_str();
}

struct DescriptorFlags {
  DescriptorConfig config;
  std::string clbp_threshold = "magnitude-mean";
  // Each option with the field it sets, so explicit flags can be laid over
  // another configuration.
  std::vector<std::pair<CLI::Option*, std::function<void(DescriptorConfig&, const DescriptorConfig&)>>> fields;

  bool any_given() const {
    for (const auto& [o, copy] : fields) {
      if (o->count() > 0) return true;
    }
    return false;
  }

  DescriptorConfig resolve() const {
    DescriptorConfig c = config;
    if (clbp_threshold == "magnitude-mean") {
      c.clbp_threshold = ClbpThreshold::MagnitudeMean;
    } else if (clbp_threshold == "gray-mean") {
      c.clbp_threshold = ClbpThreshold::GrayMean;
    } else {
      fail(ErrorKind::Parse, "--clbp-threshold must be magnitude-mean or gray-mean");
    }
    c.validate();
    return c;
  }

  // `base` with only the explicitly given flags applied.
  DescriptorConfig over(DescriptorConfig base) const {
    const DescriptorConfig given = resolve();
    for (const auto& [o, copy] : fields) {
      if (o->count() > 0) copy(base, given);
    }
    return base;
  }
};

#define FRUITSCAN_FIELD(member) \
  [](DescriptorConfig& to, const DescriptorConfig& from) { to.member = from.member; }

void add_descriptor_options(CLI::App* sub, DescriptorFlags& f) {
  auto& c = f.config;
  f.fields = {
      {sub->add_option("--gch-levels", c.gch_levels, "GCH levels per RGB channel")->capture_default_str(),
       FRUITSCAN_FIELD(gch_levels)},
      {sub->add_option("--ccv-levels", c.ccv_levels, "CCV levels per RGB channel")->capture_default_str(),
       FRUITSCAN_FIELD(ccv_levels)},
      {sub->add_option("--ccv-blur", c.ccv_blur_radius, "CCV box blur radius")->capture_default_str(),
       FRUITSCAN_FIELD(ccv_blur_radius)},
      {sub->add_option("--ccv-tau", c.ccv_tau, "CCV coherence threshold (fraction of region)")->capture_default_str(),
       FRUITSCAN_FIELD(ccv_tau)},
      {sub->add_option("--lbp-neighbors", c.lbp_neighbors, "LBP/LTP/CLBP neighbor count")->capture_default_str(),
       FRUITSCAN_FIELD(lbp_neighbors)},
      {sub->add_option("--lbp-radius", c.lbp_radius, "LBP/LTP/CLBP radius")->capture_default_str(),
       FRUITSCAN_FIELD(lbp_radius)},
      {sub->add_option("--ltp-theta", c.ltp_theta, "LTP dead band")->capture_default_str(),
       FRUITSCAN_FIELD(ltp_theta)},
      {sub->add_option("--clbp-threshold", f.clbp_threshold, "magnitude-mean or gray-mean")->capture_default_str(),
       FRUITSCAN_FIELD(clbp_threshold)},
      {sub->add_option("--cdh-orientations", c.cdh_orientation_bins, "CDH orientation bins")->capture_default_str(),
       FRUITSCAN_FIELD(cdh_orientation_bins)},
      {sub->add_option("--cdh-distance", c.cdh_distance, "CDH neighbor distance")->capture_default_str(),
       FRUITSCAN_FIELD(cdh_distance)},
  };
}

#undef FRUITSCAN_FIELD

void add_svm_options(CLI::App* sub, TrainingConfig& t, bool& raw) {
  sub->add_option("--svm-c", t.svm.c, "soft-margin penalty C")->capture_default_str();
  sub->add_option("--svm-epochs", t.svm.epochs, "SGD epoch cap")->capture_default_str();
  sub->add_option("--svm-eta0", t.svm.eta0, "initial SGD step")->capture_default_str();
  sub->add_option("--svm-seed", t.svm.seed, "SGD shuffle seed")->capture_default_str();
  sub->add_option("--svm-tolerance", t.svm.tolerance, "relative objective change that ends SGD")->capture_default_str();
  sub->add_flag("--no-standardize", raw, "train on raw histograms (no per-dimension scaling)");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fruitscan: fruit disease recognition from color and texture"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file mirroring the flags; flags override it");

  // segment
  auto* segment = app.add_subcommand("segment", "k-means segmentation and disease-region selection");
  std::string seg_input, seg_select = "darkest", seg_mask, seg_overlay;
  KMeansConfig seg_kmeans;
  segment->add_option("--input", seg_input, "RGB image (PNG or JPEG)")->required();
  segment->add_option("--select", seg_select, "darkest or manual:<cluster>")->capture_default_str();
  segment->add_option("--out-mask", seg_mask, "write the selected region as a PNG mask");
  segment->add_option("--out-overlay", seg_overlay, "write the image with everything outside the region blacked out");
  add_kmeans_options(segment, seg_kmeans);

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "descriptor vectors for segmented images");
  std::vector<std::string> ext_inputs;
  std::string ext_features = "cdh,seh,clbp", ext_select = "darkest", ext_out;
  bool ext_full = false;
  KMeansConfig ext_kmeans;
  DescriptorFlags ext_desc;
  extract_cmd->add_option("--input", ext_inputs, "RGB images")->required();
  extract_cmd->add_option("--features", ext_features, "comma separated descriptors, fused in order")->capture_default_str();
  extract_cmd->add_option("--select", ext_select, "darkest or manual:<cluster>")->capture_default_str();
  extract_cmd->add_flag("--whole-image", ext_full, "skip segmentation and describe every pixel");
  extract_cmd->add_option("--out", ext_out, "feature file (default stdout)");
  add_kmeans_options(extract_cmd, ext_kmeans);
  add_descriptor_options(extract_cmd, ext_desc);

  // train
  auto* train = app.add_subcommand("train", "train one-vs-one SVMs on the training split");
  std::string tr_manifest, tr_features = "cdh,seh,clbp", tr_select = "darkest", tr_model;
  std::size_t tr_m = 0;
  std::uint64_t tr_seed = 0;
  bool tr_raw = false;
  PipelineConfig tr_config;
  DescriptorFlags tr_desc;
  train->add_option("--manifest", tr_manifest, "CSV with a path,label header")->required();
  train->add_option("--features", tr_features, "comma separated descriptors, fused in order")->capture_default_str();
  train->add_option("--train-per-class", tr_m, "training images per class (M)")->required();
  train->add_option("--seed", tr_seed, "split seed")->capture_default_str();
  train->add_option("--select", tr_select, "darkest or manual:<cluster>")->capture_default_str();
  train->add_option("--model-out", tr_model, "model file to write")->required();
  add_kmeans_options(train, tr_config.kmeans);
  add_descriptor_options(train, tr_desc);
  add_svm_options(train, tr_config.training, tr_raw);

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "predict the class of one image");
  std::string cl_model, cl_input, cl_select, cl_features, cl_mask, cl_overlay;
  bool cl_json = false;
  DescriptorFlags cl_desc;
  classify_cmd->add_option("--model", cl_model, "model file")->required();
  classify_cmd->add_option("--input", cl_input, "RGB image")->required();
  classify_cmd->add_option("--select", cl_select, "override the model's region selection");
  classify_cmd->add_option("--features", cl_features, "must match the model's features if given");
  classify_cmd->add_option("--out-mask", cl_mask, "write the selected region as a PNG mask");
  classify_cmd->add_option("--out-overlay", cl_overlay, "write the segmented image");
  classify_cmd->add_flag("--json", cl_json, "print the prediction as JSON");
  add_descriptor_options(classify_cmd, cl_desc);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "accuracy of a model on the held-out split");
  std::string ev_model, ev_manifest, ev_report, ev_format = "table";
  std::optional<std::uint64_t> ev_seed;
  std::optional<std::size_t> ev_m;
  evaluate_cmd->add_option("--model", ev_model, "model file")->required();
  evaluate_cmd->add_option("--manifest", ev_manifest, "CSV with a path,label header")->required();
  evaluate_cmd->add_option("--split-seed", ev_seed, "split seed (default: the one stored in the model)");
  evaluate_cmd->add_option("--train-per-class", ev_m, "M (default: the one stored in the model)");
  evaluate_cmd->add_option("--report", ev_report, "report file (default stdout)");
  evaluate_cmd->add_option("--format", ev_format, "json, csv or table")->capture_default_str();

  // experiment
  auto* experiment = app.add_subcommand(
      "experiment", "train and evaluate several feature sets over one or more random splits");
  std::string ex_manifest, ex_select = "darkest", ex_report, ex_format = "table";
  std::vector<std::string> ex_features{"cdh,seh,clbp"};
  std::size_t ex_m = 0;
  std::uint64_t ex_seed = 0;
  int ex_repeats = 1;
  bool ex_raw = false;
  PipelineConfig ex_config;
  DescriptorFlags ex_desc;
  experiment->add_option("--manifest", ex_manifest, "CSV with a path,label header")->required();
  experiment->add_option("--features", ex_features, "feature set; repeat the flag to compare several")->capture_default_str();
  experiment->add_option("--train-per-class", ex_m, "training images per class (M)")->required();
  experiment->add_option("--seed", ex_seed, "seed of the first split; repeat i uses seed + i")->capture_default_str();
  experiment->add_option("--repeats", ex_repeats, "number of random splits")->capture_default_str()->check(CLI::PositiveNumber);
  experiment->add_option("--select", ex_select, "darkest or manual:<cluster>")->capture_default_str();
  experiment->add_option("--report", ex_report, "report file (default stdout)");
  experiment->add_option("--format", ex_format, "json, csv or table")->capture_default_str();
  add_kmeans_options(experiment, ex_config.kmeans);
  add_descriptor_options(experiment, ex_desc);
  add_svm_options(experiment, ex_config.training, ex_raw);

  // synth
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic apple corpus with a manifest");
  std::string sy_out;
  SyntheticCorpusSpec sy_spec;
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->add_option("--per-class", sy_spec.images_per_class, "images per class")->capture_default_str();
  synth->add_option("--size", sy_spec.size, "image side in pixels")->capture_default_str();
  synth->add_option("--seed", sy_spec.seed, "corpus seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (segment->parsed()) {
      const ImageBuffer rgb = load_image(seg_input);
      const SegmentationResult seg =
          select_disease_cluster(segment_image(rgb, seg_kmeans), parse_selection(seg_select));
      std::printf("cluster  pixels  mean_L  mean_a  mean_b\n");
      for (std::size_t c = 0; c < seg.cluster_stats.size(); ++c) {
        const auto& s = seg.cluster_stats[c];
        std::printf("%7zu  %6zu  %6.2f  %6.2f  %6.2f%s\n", c, s.pixel_count, s.mean_l, s.mean_a,
                    s.mean_b, seg.selected_cluster == c ? "  <- selected" : "");
      }
      if (!seg_mask.empty()) save_mask_png(seg.mask, seg_mask);
      if (!seg_overlay.empty()) save_png(mask_to_image(rgb, seg.mask), seg_overlay);
    } else if (extract_cmd->parsed()) {
      const auto names = parse_feature_list(ext_features);
      const DescriptorConfig desc = ext_desc.resolve();
      const SelectionStrategy selection = parse_selection(ext_select);
      std::vector<FeatureVector> vectors;
      for (const auto& path : ext_inputs) {
        const ImageBuffer rgb = load_image(path);
        if (ext_full) {
          vectors.push_back(extract_fused(names, rgb, Mask::filled(rgb.width(), rgb.height(), true), desc));
        } else {
          vectors.push_back(analyze_image(rgb, names, desc, ext_kmeans, selection).features);
        }
      }
      std::ostringstream out;
      write_feature_file(vectors, out);
      write_text(ext_out, out.str());
    } else if (train->parsed()) {
      tr_config.features = parse_feature_list(tr_features);
      tr_config.descriptor = tr_desc.resolve();
      tr_config.selection = parse_selection(tr_select);
      tr_config.training.standardize = !tr_raw;
      const DatasetManifest manifest = load_manifest(tr_manifest);
      const SplitSpec spec{tr_m, tr_seed};
      const DatasetSplit split = split_dataset(manifest, spec);
      const TrainingOutcome outcome = run_training(manifest, split, spec, tr_config);
      save_model(outcome.model, tr_model);
      std::cerr << "trained " << outcome.model.learners.size() << " pairwise SVMs on "
                << split.train.size() - outcome.skipped.size() << " images ("
                << outcome.skipped.size() << " skipped), feature dimension "
                << outcome.model.dimension() << "\n";
    } else if (classify_cmd->parsed()) {
      const MulticlassModel model = load_model(cl_model);
      std::vector<std::string> requested;
      if (!cl_features.empty()) requested = parse_feature_list(cl_features);
      const bool check_desc = cl_desc.any_given();
      const DescriptorConfig desc = cl_desc.over(model.extraction.descriptor);
      require_compatible(model, requested, check_desc ? &desc : nullptr);
      std::optional<SelectionStrategy> selection;
      if (!cl_select.empty()) selection = parse_selection(cl_select);
      std::optional<std::filesystem::path> mask_path, overlay_path;
      if (!cl_mask.empty()) mask_path = cl_mask;
      if (!cl_overlay.empty()) overlay_path = cl_overlay;
      const ClassifyOutcome result = classify_one(cl_model, cl_input, selection, mask_path, overlay_path);
      const Prediction& p = result.prediction;
      if (cl_json) {
        json j = {{"label", p.label},         {"class_index", p.class_index},
                  {"outcomes", p.outcomes},   {"distances", p.distances},
                  {"tie", p.tie},             {"classes", model.classes}};
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << p.label << (p.tie ? " (tie)" : "") << "\n";
      }
    } else if (evaluate_cmd->parsed()) {
      const MulticlassModel model = load_model(ev_model);
      const ReportFormat format = parse_report_format(ev_format);
      const DatasetManifest manifest = load_manifest(ev_manifest);
      const SplitSpec spec{ev_m.value_or(model.extraction.train_per_class),
                           ev_seed.value_or(model.extraction.split_seed)};
      const DatasetSplit split = split_dataset(manifest, spec);
      EvaluationReport report = evaluate(model, split.test);
      report.train_per_class = spec.train_per_class;
      report.split_seed = spec.seed;
      write_text(ev_report, emit_report(report, format));
    } else if (experiment->parsed()) {
      ex_config.descriptor = ex_desc.resolve();
      ex_config.selection = parse_selection(ex_select);
      ex_config.training.standardize = !ex_raw;
      const ReportFormat format = parse_report_format(ex_format);
      std::vector<std::vector<std::string>> sets;
      std::vector<std::string> needed;
      for (const auto& text : ex_features) {
        sets.push_back(parse_feature_list(text));
        for (const auto& n : sets.back()) {
          if (std::find(needed.begin(), needed.end(), n) == needed.end()) needed.push_back(n);
        }
      }
      const DatasetManifest manifest = load_manifest(ex_manifest);
      // Every image is described once; splits only choose rows.
      const DescriptorTable table = compute_descriptors(manifest.entries, needed, ex_config);
      std::vector<std::vector<EvaluationReport>> by_set(sets.size());
      for (int r = 0; r < ex_repeats; ++r) {
        const SplitSpec spec{ex_m, ex_seed + static_cast<std::uint64_t>(r)};
        const DatasetSplit split = split_dataset(manifest, spec);
        std::vector<std::size_t> train_rows, test_rows;
        std::size_t next_train = 0;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
          const bool is_train = next_train < split.train.size() && split.train[next_train] == manifest.entries[i];
          if (is_train) ++next_train;
          (is_train ? train_rows : test_rows).push_back(i);
        }
        for (std::size_t s = 0; s < sets.size(); ++s) {
          PipelineConfig config = ex_config;
          config.features = sets[s];
          const MulticlassModel model = train_from_table(table, train_rows, manifest.classes, spec, config).model;
          by_set[s].push_back(evaluate_from_table(model, table, test_rows));
        }
      }
      std::string text;
      if (format == ReportFormat::Json) {
        json j = {{"repeats", ex_repeats}, {"results", json::array()}};
        for (std::size_t s = 0; s < sets.size(); ++s) {
          const RepeatSummary sum = summarize(by_set[s]);
          json reports = json::array();
          for (const auto& rep : by_set[s]) reports.push_back(json::parse(emit_report(rep, ReportFormat::Json)));
          j["results"].push_back({{"features", sets[s]},
                                  {"mean_accuracy", sum.mean_accuracy},
                                  {"stddev_accuracy", sum.stddev_accuracy},
                                  {"mean_average_accuracy", sum.mean_average_accuracy},
                                  {"stddev_average_accuracy", sum.stddev_average_accuracy},
                                  {"reports", reports}});
        }
        text = j.dump(2) + "\n";
      } else {
        for (int r = 0; r < ex_repeats; ++r) {
          std::vector<EvaluationReport> row;
          for (const auto& reports : by_set) row.push_back(reports[r]);
          if (format == ReportFormat::Table) {
            text += emit_comparison_table(row);
          } else {
            for (const auto& rep : row) {
              text += "# " + join_feature_list(rep.features) + " seed " + std::to_string(rep.split_seed) + "\n";
              text += emit_report(rep, ReportFormat::Csv);
            }
          }
          text += "\n";
        }
        if (ex_repeats > 1) {
          text += "summary over " + std::to_string(ex_repeats) + " splits (mean +- sd):\n";
          for (std::size_t s = 0; s < sets.size(); ++s) {
            const RepeatSummary sum = summarize(by_set[s]);
            text += "  " + join_feature_list(sets[s]) + ": pooled " + fmt(sum.mean_accuracy) + " +- " +
                    fmt(sum.stddev_accuracy) + ", average " + fmt(sum.mean_average_accuracy) + " +- " +
                    fmt(sum.stddev_average_accuracy) + "\n";
          }
        }
      }
      write_text(ex_report, text);
    } else if (synth->parsed()) {
      const auto manifest = write_synthetic_corpus(sy_out, sy_spec);
      std::cerr << "wrote " << manifest.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return 0;
}
