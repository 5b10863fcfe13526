// Command-line front end: rollout, shape, train, export-disk.

#include <hyptree/commands.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic-latent tree search: rollouts, reward shaping, "
               "value-head training and latent exports over synthetic environments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string scheme = "poincare";
  std::string tree_path;
  std::string trees_glob;
  std::optional<std::uint64_t> seed;

  CLI::App* rollout = app.add_subcommand("rollout", "Run searches and write tree files");
  rollout->add_option("--config", config_path, "Run configuration file")->required();
  rollout->add_option("--out", out_path, "Output tree file (suffixed per prompt)")->required();
  rollout->add_option("--seed", seed, "Override the configured seed");

  CLI::App* shape = app.add_subcommand("shape", "Annotate a tree with potentials and step rewards");
  shape->add_option("tree", tree_path, "Input tree file")->required();
  shape->add_option("--scheme", scheme, "poincare | euclidean | sparse01")
      ->capture_default_str();
  shape->add_option("--out", out_path, "Output tree file")->required();

  CLI::App* train = app.add_subcommand("train", "Filter trees, build groups, train the value head");
  train->add_option("--config", config_path, "Run configuration file")->required();
  train->add_option("trees", trees_glob, "Tree file or glob, e.g. 'out/*.tree'")->required();
  train->add_option("--out", out_path, "Output value-head checkpoint")->required();

  CLI::App* export_disk = app.add_subcommand(
      "export-disk", "Export latents, root distances and the geodesic distance matrix");
  export_disk->add_option("tree", tree_path, "Input tree file")->required();
  export_disk->add_option("--out", out_path, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  if (rollout->parsed()) return hyptree::io::cmd_rollout(config_path, out_path, seed);
  if (shape->parsed()) return hyptree::io::cmd_shape(tree_path, scheme, out_path);
  if (train->parsed()) return hyptree::io::cmd_train(config_path, trees_glob, out_path);
  if (export_disk->parsed()) return hyptree::io::cmd_export_disk(tree_path, out_path);
  return 2;
}
