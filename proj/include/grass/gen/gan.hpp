#pragma once

#include "grass/rvnn/train.hpp"
#include "grass/rvnn/codec.hpp"
#include "grass/shape/part_graph.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>

namespace grass {

inline const std::string kGanCheckpointKind = "grass-gan/v1";

struct GanConfig {
  double alpha1 = 1e-2;
  double alpha2 = 10.0;
  // Plausible hierarchies kept per random code.
  int top_k = 10;
  // Distinct library topologies scored per mini-batch.
  int library_sample = 64;
  double d_learning_rate = 1e-5;
  double g_learning_rate = 1e-5;
  // Discriminator steps per generator step.
  int d_steps = 1;
  int epochs = 20;
  int batch_size = 8;
  int fl_hidden = 100;
  int disc_hidden = 100;
  // Also train the encoder that feeds f_mu and f_sigma.
  bool tune_encoder = false;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<std::filesystem::path> recovery_checkpoint;

  Json to_json() const;
  static GanConfig from_json(const Json& j, const std::string& path = "<memory>");
  void validate() const;
};

// The autoencoder plus the discriminator head, f_l, f_mu and f_sigma, all in
// one parameter store. The decoder is the generator; the encoder followed by
// the head is the discriminator.
class GanModel {
 public:
  GanModel() = default;
  // `model`'s store must also hold every head parameter.
  GanModel(RvnnModel model, GanConfig config);

  // Copies the pretrained autoencoder and adds freshly initialized heads.
  static GanModel create(const RvnnModel& pretrained, const GanConfig& config);
  static std::vector<std::string> head_parameter_names();

  const RvnnModel& rvnn() const { return model_; }
  RvnnModel& rvnn() { return model_; }
  const GanConfig& config() const { return config_; }
  int n() const { return model_.n(); }

  // Two logits per row; class 1 is "real".
  Var discriminator_logits(Graph& g, Var codes) const;
  // f_l: latent code to root code.
  Var project(Graph& g, Var z) const;
  Var latent_mean(Graph& g, Var encoded) const;
  Var latent_logvar(Graph& g, Var encoded) const;

  // Probability that a root code belongs to a real structure.
  double discriminate(const Vector& root) const;
  Vector project(const Vector& z) const;
  // (mu, logvar) of the latent Gaussian for an encoded root.
  std::pair<Vector, Vector> latent(const Vector& encoded) const;

 private:
  Matrix dense(const Matrix& x, const std::string& layer) const;

  RvnnModel model_;
  GanConfig config_;
};

// J_D = -1/2 E[log D(x)] - 1/2 E[log(1 - D(G(z)))], probabilities clamped
// to [1e-7, 1 - 1e-7].
double loss_jd(std::span<const double> d_real, std::span<const double> d_fake);
// J_G = -1/2 E[log D(G(z))].
double loss_jg(std::span<const double> d_fake);
// KL(N(mu, exp(logvar)) || N(0, I)).
double kl_diag_gaussian(const Vector& mu, const Vector& logvar);

// Hierarchies G may decode along: training hierarchies and inferred ones,
// one per topology.
struct PlausibleSet {
  std::vector<Hierarchy> hierarchies;

  // Ignores topologies already present. Returns whether `h` was added.
  bool add(const Hierarchy& h);
  std::size_t size() const { return hierarchies.size(); }
};

struct ScoredHierarchy {
  int index = 0;
  double d_fake = 0.0;
  // J_G of this single sample.
  double score = 0.0;
};

// Decodes f_l(z) along each library topology, re-encodes the result and
// scores it with the discriminator. Returns the `k` lowest J_G, sorted
// non-decreasing, ties by index; entries with a repeated topology are
// skipped. `subset` restricts the search to some library indices.
std::vector<ScoredHierarchy> select_topk_hierarchies(const GanModel& gan, const Vector& z, const PlausibleSet& set,
                                                     int k, std::span<const int> subset = {});

// Discriminator logits of the structures decoded from each row of `roots`
// along the listed topologies and re-encoded; one row per (root, topology)
// pair, in order.
Var decoded_logits(Graph& g, const GanModel& gan, Var roots,
                   const std::vector<std::vector<const Hierarchy*>>& per_root);

struct GanDataset {
  // One hierarchy per real shape (the one inferred by the autoencoder).
  std::vector<Hierarchy> real;
  PlausibleSet library;
};

// Infers a hierarchy for every shape and collects the library from those and
// `per_shape` sampled training hierarchies of each shape.
GanDataset make_gan_dataset(const RvnnModel& model, const std::vector<PartGraph>& shapes, int per_shape,
                            std::uint64_t seed);

struct GanEpochLog {
  int epoch = 0;
  double jd = 0.0;
  double jg = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
};

struct GanTrainLog {
  std::vector<GanEpochLog> epochs;
  Json to_json() const;
};

// Alternates discriminator and generator steps. Each generator step first
// tunes the geometric decoders, f_l, f_mu and f_sigma on
// J_G + alpha1 * L_recon + alpha2 * L_KL, then the node classifier on the
// D(G(z))-weighted node-type cross-entropy of the selected hierarchies. On a
// non-finite loss the model is restored to its state at the start of the
// epoch, saved to the recovery checkpoint if configured, and
// DivergenceError is thrown.
GanTrainLog train_vaegan(GanModel& gan, const GanDataset& data,
                         const std::function<void(const GanEpochLog&)>& on_epoch = {});

struct ValidityReport {
  bool terminated = false;
  bool boxes_valid = false;
  bool folds_in_range = false;
  bool within_bounds = false;
  std::string error;

  bool valid() const { return terminated && boxes_valid && folds_in_range && within_bounds; }
  Json to_json() const;
};

// Checks a decoded hierarchy: valid boxes, folds in [2, 16], every expanded
// box corner within 3 units of the origin.
ValidityReport check_validity(const Hierarchy& h);

struct GeneratedStructure {
  std::optional<Hierarchy> hierarchy;
  ValidityReport report;
};

// Free decoding of a root code; never throws on a cap violation.
GeneratedStructure decode_structure(const GanModel& gan, const Vector& root, const DecodeCaps& caps = {});
// Decodes f_l(z).
GeneratedStructure generate_structure(const GanModel& gan, const Vector& z, const DecodeCaps& caps = {});
Vector sample_latent(int n, Rng& rng);

// Root codes of both shapes come from their inferred hierarchies; the
// structures decode (1 - t) a + t b on a uniform grid from 0 to 1.
std::vector<GeneratedStructure> interpolate_structures(const GanModel& gan, const PartGraph& a, const PartGraph& b,
                                                       int steps);

void save_gan(const std::filesystem::path& path, const GanModel& gan, bool include_optimizer_state = false);
GanModel load_gan(const std::filesystem::path& path);

}  // namespace grass
