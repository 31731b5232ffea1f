#pragma once

// One trained reference pipeline (blobs seed 0, random forest, L-GMVAE)
// shared by every integration test in the process.

#include <memory>
#include <string>

#include "lapace/classifiers/retrain_pool.hpp"
#include "lapace/io/config.hpp"
#include "lapace/lgmvae/train.hpp"

namespace itest {

struct Pipeline {
  std::string dir;  // make-blobs output
  lapace::io::RunConfig config;
  lapace::io::RunData run;
  std::shared_ptr<lapace::classifiers::Classifier> classifier;
  lapace::data::Dataset train;  // relabelled
  lapace::data::Dataset test;   // relabelled
  lapace::lgmvae::TrainResult trained;

  const lapace::lgmvae::LgmvaeModel& model() const { return trained.model; }
};

const Pipeline& pipeline();

// Runs the command line tool with `args`; stdout and stderr go to `log`.
int run_cli(const std::string& args, const std::string& log = "/dev/null");

std::string scratch_dir(const std::string& name);
std::string slurp(const std::string& path);

}  // namespace itest
