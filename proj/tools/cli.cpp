#include "cli.hpp"

#include "grass/core/random.hpp"
#include "grass/data/generator.hpp"
#include "grass/data/io.hpp"
#include "grass/eval/eval.hpp"
#include "grass/gen/gan.hpp"
#include "grass/geometry/part_geometry.hpp"
#include "grass/shape/json.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>

namespace grass {

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string model;
  std::string out;
};

std::string need(const std::string& value, const std::string& flag) {
  if (value.empty()) throw std::invalid_argument(flag + " is required");
  return value;
}

std::filesystem::path out_dir(const Globals& g) {
  std::filesystem::path dir = need(g.out, "--out");
  std::filesystem::create_directories(dir);
  return dir;
}

Json load_config(const std::string& path) { return path.empty() ? Json::object() : read_json_file(path); }

const Json& section(const Json& config, const char* key) {
  static const Json empty = Json::object();
  return config.contains(key) ? config.at(key) : empty;
}

struct Selection {
  std::string data;
  std::vector<std::string> categories;
  std::string split = "all";

  void add(CLI::App* app, const std::string& default_split) {
    split = default_split;
    app->add_option("--data", data, "Dataset manifest")->required();
    app->add_option("--category", categories, "Restrict to these categories");
    app->add_option("--split", split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  }

  std::vector<ShapeRecord> shapes() const {
    const Dataset d = load_dataset(data);
    std::vector<ShapeRecord> out;
    for (std::size_t i = 0; i < d.shapes.size(); ++i) {
      const auto& e = d.manifest.entries[i];
      if (split == "train" && e.split != Split::train) continue;
      if (split == "test" && e.split != Split::test) continue;
      if (!categories.empty() && std::find(categories.begin(), categories.end(), e.category) == categories.end())
        continue;
      out.push_back(d.shapes[i]);
    }
    if (out.empty()) throw std::invalid_argument("no shapes selected from " + data);
    return out;
  }
};

std::vector<PartGraph> graphs_of(const std::vector<ShapeRecord>& shapes) {
  std::vector<PartGraph> out;
  for (const auto& s : shapes) out.push_back(s.graph);
  return out;
}

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const Json& j, const std::string& path) {
  try {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  } catch (const std::exception& e) {
    throw FormatError(path, "code", e.what());
  }
}

Json structure_json(const GeneratedStructure& s) {
  Json j{{"validity", s.report.to_json()}};
  if (s.hierarchy) {
    j["hierarchy"] = hierarchy_to_json(*s.hierarchy);
    j["leaf_count"] = s.hierarchy->leaf_count();
  }
  return j;
}

void emit_structure(const std::filesystem::path& stem, const GeneratedStructure& s, const std::string& emit) {
  if (emit == "obj") {
    if (s.hierarchy) write_obj(stem.string() + ".obj", boxes_to_mesh(expand_boxes(*s.hierarchy)));
  } else {
    write_json_file(stem.string() + ".json", structure_json(s));
  }
}

void progress(std::ostream& err, const std::string& line) { err << line << '\n' << std::flush; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recursive structure autoencoding, generation and evaluation", "grass"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--model", g.model, "Model checkpoint");
  app.add_option("--out", g.out, "Output file or directory");

  std::function<void()> action;

  // Data.
  auto* gen = app.add_subcommand("generate-data", "Write a synthetic shape dataset");
  std::vector<std::string> gen_categories = kCategories;
  int gen_count = 100;
  double gen_split = 0.8;
  std::string gen_dir;
  bool gen_obj = false;
  gen->add_option("--category", gen_categories, "Categories to generate");
  gen->add_option("--count", gen_count, "Shapes per category")->check(CLI::PositiveNumber);
  gen->add_option("--split", gen_split, "Train fraction")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out-dir", gen_dir, "Dataset directory (defaults to --out)");
  gen->add_flag("--obj", gen_obj, "Also write box meshes");
  gen->callback([&] {
    action = [&] {
      const std::filesystem::path dir = gen_dir.empty() ? need(g.out, "--out-dir") : gen_dir;
      std::vector<ShapeRecord> shapes;
      for (const auto& c : gen_categories) {
        auto s = generate_shapes(c, gen_count, g.seed);
        shapes.insert(shapes.end(), s.begin(), s.end());
      }
      const Dataset d = write_dataset(dir, shapes, gen_split, derive_seed(g.seed, 1));
      if (gen_obj)
        for (const auto& s : d.shapes) write_obj(dir / (s.id + ".obj"), boxes_to_mesh(s.graph.boxes()));
      out << "wrote " << d.shapes.size() << " shapes to " << dir.string() << '\n';
    };
  });

  auto* samp = app.add_subcommand("sample-hierarchies", "Sample training hierarchies per shape");
  Selection samp_sel;
  int samp_count = 20;
  samp_sel.add(samp, "train");
  samp->add_option("--count", samp_count, "Hierarchies per shape")->check(CLI::PositiveNumber);
  samp->callback([&] {
    action = [&] {
      Rng rng(g.seed);
      Json shapes = Json::array();
      for (const auto& s : samp_sel.shapes()) {
        Json hs = Json::array();
        for (const auto& h : training_hierarchies(s, samp_count, rng)) hs.push_back(hierarchy_to_json(h));
        shapes.push_back({{"id", s.id}, {"hierarchies", hs}});
      }
      write_json_file(need(g.out, "--out"), {{"seed", g.seed}, {"shapes", shapes}});
    };
  });

  // Autoencoder.
  auto* train = app.add_subcommand("train-rvnn", "Train the recursive autoencoder");
  Selection train_sel;
  std::string train_config;
  std::optional<int> train_epochs;
  std::string train_log;
  train_sel.add(train, "train");
  train->add_option("--config", train_config, "JSON with model, train and hierarchies_per_shape");
  train->add_option("--epochs", train_epochs, "Override the configured epoch count");
  train->add_option("--log", train_log, "Training log JSON");
  train->callback([&] {
    action = [&] {
      const std::string dest = need(g.out, "--out");
      const Json config = load_config(train_config);
      const RvnnConfig mc = RvnnConfig::from_json(section(config, "model"), train_config);
      TrainConfig tc = TrainConfig::from_json(section(config, "train"), train_config);
      const int per_shape = config.value("hierarchies_per_shape", 20);
      if (train_epochs) tc.epochs = *train_epochs;
      tc.seed = derive_seed(g.seed, 3);
      tc.threads = g.threads;
      tc.recovery_checkpoint = dest + ".recovery.json";
      Rng rng(derive_seed(g.seed, 2));
      std::vector<Hierarchy> trees;
      for (const auto& s : train_sel.shapes())
        for (auto& h : training_hierarchies(s, per_shape, rng)) trees.push_back(std::move(h));
      RvnnModel model = RvnnModel::create(mc, derive_seed(g.seed, 1));
      const TrainLog log = train_autoencoder(model, trees, tc, [&](const EpochLog& e) {
        progress(err, "epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss));
      });
      save_rvnn(dest, model, true, {{"train", tc.to_json()}, {"hierarchies_per_shape", per_shape}});
      if (!train_log.empty()) write_json_file(train_log, log.to_json());
    };
  });

  auto* infer = app.add_subcommand("infer", "Infer a hierarchy for a shape");
  std::string infer_shape;
  bool infer_emit = false;
  bool infer_greedy = false;
  infer->add_option("--shape", infer_shape, "Shape JSON")->required();
  infer->add_flag("--emit-hierarchy", infer_emit, "Include the hierarchy");
  infer->add_flag("--no-lookahead", infer_greedy, "Score single merges only");
  infer->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const ShapeRecord s = load_shape(infer_shape);
      InferOptions opt;
      opt.lookahead = !infer_greedy;
      const Hierarchy h = infer_hierarchy(s.graph, model, opt);
      Json j{{"id", s.id},
             {"leaf_count", h.leaf_count()},
             {"depth", h.depth()},
             {"topology", topology_key(h)},
             {"reconstruction_error", reconstruction_error(model, h)}};
      if (infer_emit) j["hierarchy"] = hierarchy_to_json(h);
      write_json_file(need(g.out, "--out"), j);
    };
  });

  auto* encode = app.add_subcommand("encode", "Encode a shape along its inferred hierarchy");
  std::string encode_shape_path;
  encode->add_option("--shape", encode_shape_path, "Shape JSON")->required();
  encode->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const ShapeRecord s = load_shape(encode_shape_path);
      const Hierarchy h = encode_shape(model, infer_hierarchy(s.graph, model));
      write_json_file(need(g.out, "--out"), {{"id", s.id},
                                             {"code", vector_json(*h[h.root()].code)},
                                             {"feature", vector_json(avg_code_feature(h))},
                                             {"hierarchy", hierarchy_to_json(h, true)}});
    };
  });

  auto* decode = app.add_subcommand("decode", "Decode a root code into a structure");
  std::string decode_code;
  std::string decode_obj;
  decode->add_option("--code", decode_code, "JSON with a \"code\" array")->required();
  decode->add_option("--obj", decode_obj, "Also write the boxes as OBJ");
  decode->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const Json doc = read_json_file(decode_code);
      const Vector code = vector_from_json(require_field(doc, "code", decode_code, "code"), decode_code);
      if (code.size() != model.n()) throw FormatError(decode_code, "code", "length differs from the model");
      GeneratedStructure s;
      const auto r = try_decode_free(model, code);
      if (r.ok()) {
        s.hierarchy = r.hierarchy;
        s.report = check_validity(*s.hierarchy);
      } else {
        s.report.error = r.error;
      }
      write_json_file(need(g.out, "--out"), structure_json(s));
      if (!decode_obj.empty() && s.hierarchy) write_obj(decode_obj, boxes_to_mesh(expand_boxes(*s.hierarchy)));
    };
  });

  // Generation.
  auto* tgan = app.add_subcommand("train-gan", "Fine-tune the autoencoder as a VAE-GAN");
  Selection tgan_sel;
  std::string tgan_rvnn;
  std::string tgan_config;
  std::string tgan_log;
  tgan_sel.add(tgan, "train");
  tgan->add_option("--rvnn-checkpoint", tgan_rvnn, "Pretrained autoencoder")->required();
  tgan->add_option("--config", tgan_config, "JSON with gan and library_per_shape");
  tgan->add_option("--log", tgan_log, "Training log JSON");
  tgan->callback([&] {
    action = [&] {
      const std::string dest = need(g.out, "--out");
      const Json config = load_config(tgan_config);
      GanConfig gc = GanConfig::from_json(section(config, "gan"), tgan_config);
      gc.seed = g.seed;
      gc.threads = g.threads;
      gc.recovery_checkpoint = dest + ".recovery.json";
      const RvnnModel rvnn = load_rvnn(tgan_rvnn);
      const auto data =
          make_gan_dataset(rvnn, graphs_of(tgan_sel.shapes()), config.value("library_per_shape", 5), derive_seed(g.seed, 1));
      GanModel gan = GanModel::create(rvnn, gc);
      const GanTrainLog log = train_vaegan(gan, data, [&](const GanEpochLog& e) {
        progress(err, "epoch " + std::to_string(e.epoch) + " jd " + std::to_string(e.jd) + " jg " +
                          std::to_string(e.jg) + " recon " + std::to_string(e.recon));
      });
      save_gan(dest, gan);
      if (!tgan_log.empty()) write_json_file(tgan_log, log.to_json());
    };
  });

  auto* sample = app.add_subcommand("sample", "Sample structures from random latent codes");
  int sample_count = 10;
  std::string sample_emit = "json";
  sample->add_option("--count", sample_count, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--emit", sample_emit, "json or obj")->check(CLI::IsMember({"json", "obj"}));
  sample->callback([&] {
    action = [&] {
      const GanModel gan = load_gan(need(g.model, "--model"));
      const auto dir = out_dir(g);
      int valid = 0;
      for (int i = 0; i < sample_count; ++i) {
        Rng rng(derive_seed(g.seed, static_cast<std::uint64_t>(i)));
        const auto s = generate_structure(gan, sample_latent(gan.n(), rng));
        valid += s.report.valid();
        emit_structure(dir / ("sample_" + std::to_string(i)), s, sample_emit);
      }
      write_json_file(dir / "summary.json",
                      {{"count", sample_count}, {"valid", valid}, {"rate", static_cast<double>(valid) / sample_count}});
      out << valid << "/" << sample_count << " valid\n";
    };
  });

  auto* interp = app.add_subcommand("interpolate", "Interpolate between the codes of two shapes");
  std::string interp_a;
  std::string interp_b;
  int interp_steps = 8;
  std::string interp_emit = "json";
  interp->add_option("--shape-a", interp_a, "First shape JSON")->required();
  interp->add_option("--shape-b", interp_b, "Second shape JSON")->required();
  interp->add_option("--steps", interp_steps, "Structures from the first shape to the second, inclusive")->check(CLI::PositiveNumber);
  interp->add_option("--emit", interp_emit, "json or obj")->check(CLI::IsMember({"json", "obj"}));
  interp->callback([&] {
    action = [&] {
      const GanModel gan = load_gan(need(g.model, "--model"));
      const auto dir = out_dir(g);
      const auto steps = interpolate_structures(gan, load_shape(interp_a).graph, load_shape(interp_b).graph, interp_steps);
      int valid = 0;
      for (std::size_t i = 0; i < steps.size(); ++i) {
        valid += steps[i].report.valid();
        emit_structure(dir / ("step_" + std::to_string(i)), steps[i], interp_emit);
      }
      write_json_file(dir / "summary.json", {{"steps", steps.size()}, {"valid", valid}});
    };
  });

  // Part geometry.
  auto* tgeo = app.add_subcommand("train-geometry", "Train the part autoencoder and SARF mapping");
  Selection tgeo_sel;
  std::string tgeo_rvnn;
  std::string tgeo_config;
  std::string tgeo_log;
  tgeo_sel.add(tgeo, "train");
  tgeo->add_option("--rvnn-checkpoint", tgeo_rvnn, "Autoencoder providing the SARF codes")->required();
  tgeo->add_option("--config", tgeo_config, "JSON with geo and train");
  tgeo->add_option("--log", tgeo_log, "Training log JSON");
  tgeo->callback([&] {
    action = [&] {
      const std::string dest = need(g.out, "--out");
      const Json config = load_config(tgeo_config);
      const GeoConfig gc = GeoConfig::from_json(section(config, "geo"), tgeo_config);
      GeoTrainConfig tc = GeoTrainConfig::from_json(section(config, "train"), tgeo_config);
      tc.seed = derive_seed(g.seed, 2);
      tc.recovery_checkpoint = dest + ".recovery.json";
      const RvnnModel rvnn = load_rvnn(tgeo_rvnn);
      if (gc.sarf_size != 3 * rvnn.n()) throw std::invalid_argument("geo.sarf_size must be three times the code size");
      const auto samples = make_geo_samples(rvnn, tgeo_sel.shapes(), gc.resolution);
      GeoModel model = GeoModel::create(gc, derive_seed(g.seed, 1));
      GeoTrainLog log = train_geometry(model, samples, tc, [&](const GeoEpochLog& e) {
        progress(err, "epoch " + std::to_string(e.epoch) + " recon " + std::to_string(e.reconstruction) +
                          " map " + std::to_string(e.mapping));
      });
      save_geometry(dest, model);
      if (!tgeo_log.empty()) {
        const GeoIou iou = mean_iou(model, samples);
        Json j = log.to_json();
        write_json_file(tgeo_log, {{"epochs", j}, {"iou_autoencoder", iou.autoencoder}, {"iou_mapped", iou.mapped}});
      }
    };
  });

  auto* synth = app.add_subcommand("synthesize", "Generate structures with part geometry and mesh them");
  std::string synth_gan;
  int synth_count = 1;
  int synth_resolution = 64;
  int synth_attempts = 20;
  synth->add_option("--gan-model", synth_gan, "Generative checkpoint")->required();
  synth->add_option("--count", synth_count, "Shapes to synthesize")->check(CLI::PositiveNumber);
  synth->add_option("--resolution", synth_resolution, "Global grid resolution")->check(CLI::Range(2, 512));
  synth->add_option("--attempts", synth_attempts, "Latent draws per shape before giving up")
      ->check(CLI::PositiveNumber);
  synth->callback([&] {
    action = [&] {
      const GeoModel geo = load_geometry(need(g.model, "--model"));
      const GanModel gan = load_gan(synth_gan);
      if (geo.config().sarf_size != 3 * gan.n())
        throw std::invalid_argument("geometry model does not match the code size of the generative model");
      const auto dir = out_dir(g);
      Json summary = Json::array();
      for (int i = 0; i < synth_count; ++i) {
        std::optional<GeneratedStructure> found;
        int attempt = 0;
        for (; attempt < synth_attempts && !found; ++attempt) {
          Rng rng(derive_seed(g.seed, static_cast<std::uint64_t>(i) * synth_attempts + attempt));
          auto s = generate_structure(gan, sample_latent(gan.n(), rng));
          if (s.report.valid()) found = std::move(s);
        }
        if (!found) throw std::runtime_error("no valid structure in " + std::to_string(synth_attempts) + " draws");
        const auto stem = dir / ("shape_" + std::to_string(i));
        const auto leaves = synthesize_leaves(geo, *found->hierarchy);
        const VoxelGrid volume = assemble_global_volume(*found->hierarchy, leaves, synth_resolution, g.threads);
        const TriangleMesh mesh = extract_mesh(volume);
        write_obj(stem.string() + ".obj", mesh);
        save_voxels(stem.string() + ".voxels.json", volume, false);
        write_json_file(stem.string() + ".json", structure_json(*found));
        summary.push_back({{"shape", i}, {"attempts", attempt}, {"triangles", mesh.triangles.size()}});
      }
      write_json_file(dir / "summary.json", summary);
    };
  });

  // Evaluation.
  auto* classify = app.add_subcommand("classify", "Leave-one-out subclass retrieval");
  Selection classify_sel;
  classify_sel.add(classify, "all");
  classify->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const auto dir = out_dir(g);
      const auto shapes = classify_sel.shapes();
      const auto coded = encode_corpus(model, graphs_of(shapes), g.threads);
      std::vector<Vector> features;
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < shapes.size(); ++i) {
        features.push_back(avg_code_feature(coded[i]));
        labels.push_back(shapes[i].category + "/" + shapes[i].subclass);
      }
      const auto r = classify_and_pr(features, labels);
      write_pr_csv(dir / "pr.csv", r);
      write_pr_svg(dir / "pr.svg", r);
      Json j = r.to_json();
      Json ids = Json::array();
      for (const auto& s : shapes) ids.push_back(s.id);
      j["ids"] = ids;
      write_json_file(dir / "classification.json", j);
      out << "accuracy " << r.accuracy << '\n';
    };
  });

  auto* consist = app.add_subcommand("consistency", "Consistency of inferred hierarchies with part labels");
  Selection consist_sel;
  consist_sel.add(consist, "all");
  consist->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const auto shapes = consist_sel.shapes();
      const auto coded = encode_corpus(model, graphs_of(shapes), g.threads);
      std::vector<LabeledHierarchy> labeled;
      for (std::size_t i = 0; i < shapes.size(); ++i) labeled.push_back(label_hierarchy(coded[i], shapes[i].graph));
      const auto r = consistency_metric(labeled);
      write_json_file(need(g.out, "--out"), r.to_json());
      out << "consistency " << r.value << '\n';
    };
  });

  auto* partial = app.add_subcommand("partial-match", "Rank corpus subtrees against a query subtree");
  Selection partial_sel;
  std::string partial_shape;
  std::optional<int> partial_node;
  std::string partial_label;
  int partial_k = 5;
  partial_sel.add(partial, "all");
  partial->add_option("--shape", partial_shape, "Query shape JSON")->required();
  auto* node_opt = partial->add_option("--node", partial_node, "Query node of the inferred hierarchy");
  partial->add_option("--label", partial_label, "Query the largest subtree with this part label")->excludes(node_opt);
  partial->add_option("--top-k", partial_k, "Results to keep")->check(CLI::NonNegativeNumber);
  partial->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const ShapeRecord query = load_shape(partial_shape);
      const Hierarchy qh = encode_shape(model, infer_hierarchy(query.graph, model));
      const LabeledHierarchy ql = label_hierarchy(qh, query.graph);
      int node = partial_node.value_or(qh.root());
      if (!partial_label.empty()) node = largest_labeled_subtree(ql, partial_label);
      if (node < 0 || node > qh.root()) throw std::invalid_argument("query subtree not found");
      std::vector<ShapeRecord> shapes;
      for (auto& s : partial_sel.shapes())
        if (s.id != query.id) shapes.push_back(std::move(s));
      const auto coded = encode_corpus(model, graphs_of(shapes), g.threads);
      const auto matches = partial_match(avg_code_feature(qh, node), coded, partial_k);
      Json rows = Json::array();
      for (const auto& m : matches) {
        const auto& s = shapes[static_cast<std::size_t>(m.shape)];
        const LabeledHierarchy lh = label_hierarchy(coded[static_cast<std::size_t>(m.shape)], s.graph);
        rows.push_back({{"id", s.id},
                        {"node", m.node},
                        {"distance", m.distance},
                        {"label", subtree_label(lh, m.node)},
                        {"parts", lh.hierarchy[m.node].parts}});
      }
      write_json_file(need(g.out, "--out"),
                      {{"query", {{"id", query.id}, {"node", node}, {"label", subtree_label(ql, node)}}},
                       {"matches", rows}});
    };
  });

  auto* rules = app.add_subcommand("rule-report", "Parse the seven grouping-rule arrangements");
  rules->callback([&] {
    action = [&] {
      const RvnnModel model = load_rvnn(need(g.model, "--model"));
      const auto fixtures = fixture_arrangements();
      const RuleReport r = rule_fixture_report(fixtures, model);
      out << r.to_text();
      if (!g.out.empty()) write_json_file(g.out, r.to_json());
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    action();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace grass
