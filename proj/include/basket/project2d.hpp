#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "basket/embedding_store.hpp"

namespace basket {

struct TsneConfig {
  double perplexity = 30.0;
  std::uint32_t n_iter = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;       // P scaled by this for the first phase
  std::uint32_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;            // after momentum_switch_iter
  std::uint32_t momentum_switch_iter = 250;
  std::uint64_t seed = 42;

  // n >= 5, perplexity < (n-1)/3, n_iter >= 1; throws std::invalid_argument.
  void validate(std::size_t n_points) const;
};

struct Projection {
  std::vector<std::uint64_t> ids;
  std::vector<double> coords;  // n x 2, row-major
  // (iteration, KL against the unexaggerated P), every 50 iterations and at
  // the final iteration.
  std::vector<std::pair<std::uint32_t, double>> kl_trace;
};

struct CalibrationResult {
  double beta = 1.0;      // Gaussian precision for this point
  bool converged = true;  // false -> bracketing bound returned, warning logged
  std::vector<double> p;  // conditional distribution over the neighbors, sums to 1
};

// Binary search on beta (<= max_steps halvings/doublings) until the
// conditional distribution over the squared distances has Shannon entropy
// within tol of log(target_perplexity).
CalibrationResult perplexity_calibration(std::span<const double> sq_distances,
                                         double target_perplexity,
                                         std::uint32_t max_steps = 200, double tol = 1e-5);

// Symmetrized joint P over the rows of x (n x dim, row-major): calibrated
// conditionals, then P = (P_cond + P_cond^T) / 2n. Zero diagonal, sums to 1.
std::vector<double> joint_probabilities(const std::vector<double>& x, std::size_t n,
                                        std::size_t dim, double perplexity);

// Student-t joint Q for a 2-D layout y (n x 2). Zero diagonal, sums to 1.
std::vector<double> student_t_q(const std::vector<double>& y, std::size_t n);

// KL(P || Q(y)) and its exact gradient with respect to y; both used by the
// optimizer and exposed for finite-difference verification.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& y, std::size_t n);
std::vector<double> kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                std::size_t n);

// Exact O(n^2) t-SNE to 2-D: jittered duplicates, calibrated P, gradient
// descent with gains, momentum schedule and early exaggeration.
Projection tsne(const EmbeddingTable& vectors, const TsneConfig& config);

// `id,x,y,label` CSV; owners missing from `labels` get an empty label.
std::string export_plot_data(const Projection& projection,
                             const std::unordered_map<std::uint64_t, std::string>& labels = {});
void save_plot_csv(const Projection& projection, const std::string& path,
                   const std::unordered_map<std::uint64_t, std::string>& labels = {});

// Reads id,x,y back into a 2-column table (labels ignored).
EmbeddingTable load_plot_csv(const std::string& path);

}  // namespace basket
