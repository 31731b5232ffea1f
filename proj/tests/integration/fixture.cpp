#include "fixture.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace itest {

namespace fs = std::filesystem;

std::string scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lapace_it_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(LAPACE_CLI) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) throw std::runtime_error("could not run: " + cmd);
  return WEXITSTATUS(status);
}

namespace {

Pipeline build() {
  using namespace lapace;
  Pipeline p;
  p.dir = scratch_dir("reference");
  if (run_cli("make-blobs --seed 0 --out-dir " + p.dir) != 0) {
    throw std::runtime_error("make-blobs failed");
  }
  p.config = io::RunConfig::load(p.dir + "/config.json");
  p.run = io::load_run_data(p.config);
  p.classifier = classifiers::train_classifier(p.run.train.X, p.run.train.y_star,
                                               p.run.schema.num_classes(), p.config.classifier);
  p.train = classifiers::relabel_with_classifier(p.run.train, *p.classifier);
  p.test = classifiers::relabel_with_classifier(p.run.test, *p.classifier);
  p.trained = lgmvae::train(p.train, p.config.lgmvae);
  lgmvae::validate_centroids(p.trained.model, *p.classifier);
  return p;
}

}  // namespace

const Pipeline& pipeline() {
  static const Pipeline p = build();
  return p;
}

}  // namespace itest
