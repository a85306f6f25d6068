#include "basket/project2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "basket/rng.hpp"
#include "basket/simd/kernels.hpp"

namespace basket {

namespace {

constexpr double kTinyQ = 1e-12;

// Entropy (nats) of the conditional distribution at precision beta, with the
// row shifted by its minimum so the largest weight is exactly 1.
double conditional_entropy(std::span<const double> d2, double dmin, double beta,
                           std::vector<double>& p) {
  double sum = 0.0;
  double wsum = 0.0;
  for (std::size_t j = 0; j < d2.size(); ++j) {
    const double shifted = d2[j] - dmin;
    const double e = std::exp(-beta * shifted);
    p[j] = e;
    sum += e;
    wsum += shifted * e;
  }
  for (double& v : p) v /= sum;  // sum >= 1: the minimum-distance entry contributes 1
  return std::log(sum) + beta * (wsum / sum);
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void TsneConfig::validate(std::size_t n_points) const {
  if (n_iter == 0) throw std::invalid_argument("tsne: n_iter must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("tsne: learning_rate must be > 0");
  if (perplexity <= 0.0) throw std::invalid_argument("tsne: perplexity must be > 0");
  if (n_points < 5) throw std::invalid_argument("tsne: need at least 5 points");
  if (!(perplexity < (double(n_points) - 1.0) / 3.0)) {
    throw std::invalid_argument("tsne: perplexity must be < (n_points - 1) / 3 = " +
                                std::to_string((double(n_points) - 1.0) / 3.0));
  }
}

CalibrationResult perplexity_calibration(std::span<const double> sq_distances,
                                         double target_perplexity, std::uint32_t max_steps,
                                         double tol) {
  if (sq_distances.size() < 2) {
    throw std::invalid_argument("perplexity_calibration: need at least 2 distances");
  }
  double dmin = std::numeric_limits<double>::infinity();
  for (double d : sq_distances) {
    if (!std::isfinite(d) || d < 0.0) {
      throw std::invalid_argument("perplexity_calibration: distances must be finite and >= 0");
    }
    dmin = std::min(dmin, d);
  }
  if (target_perplexity <= 0.0) {
    throw std::invalid_argument("perplexity_calibration: perplexity must be > 0");
  }

  const double log_target = std::log(target_perplexity);
  CalibrationResult result;
  result.p.resize(sq_distances.size());
  result.converged = false;

  double beta = 1.0;
  double beta_lo = 0.0;
  double beta_hi = std::numeric_limits<double>::infinity();
  for (std::uint32_t step = 0; step < max_steps; ++step) {
    const double entropy = conditional_entropy(sq_distances, dmin, beta, result.p);
    const double diff = entropy - log_target;
    if (std::fabs(diff) <= tol) {
      result.converged = true;
      break;
    }
    if (diff > 0.0) {  // too flat: sharpen
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
    } else {  // too peaked: flatten
      beta_hi = beta;
      beta = (beta + beta_lo) / 2.0;
    }
  }
  if (!result.converged) {
    // Keep the bracketing bound; p must match the returned beta.
    conditional_entropy(sq_distances, dmin, beta, result.p);
    std::fprintf(stderr,
                 "warning: perplexity calibration did not converge (target %.6g, beta %.6g)\n",
                 target_perplexity, beta);
  }
  result.beta = beta;
  return result;
}

std::vector<double> joint_probabilities(const std::vector<double>& x, std::size_t n,
                                        std::size_t dim, double perplexity) {
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = simd::sqdist(x.data() + i * dim, x.data() + j * dim, dim);
      d2[i * n + j] = d;
      d2[j * n + i] = d;
    }
  }

  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row[w++] = d2[i * n + j];
    }
    const CalibrationResult cal = perplexity_calibration(row, perplexity);
    w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cond[i * n + j] = cal.p[w++];
    }
  }

  std::vector<double> joint(n * n, 0.0);
  const double inv = 1.0 / (2.0 * double(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      joint[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * inv;
    }
  }
  return joint;
}

std::vector<double> student_t_q(const std::vector<double>& y, std::size_t n) {
  std::vector<double> q(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double t = 1.0 / (1.0 + dx * dx + dy * dy);
      q[i * n + j] = t;
      q[j * n + i] = t;
      z += 2.0 * t;
    }
  }
  for (double& v : q) v /= z;
  return q;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
  const std::vector<double> q = student_t_q(y, n);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p[i * n + j];
      if (pij <= 0.0) continue;
      kl += pij * std::log(pij / std::max(q[i * n + j], kTinyQ));
    }
  }
  return kl;
}

std::vector<double> kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                std::size_t n) {
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double t = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = t;
      num[j * n + i] = t;
      z += 2.0 * t;
    }
  }
  std::vector<double> grad(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double t = num[i * n + j];
      const double pq = (p[i * n + j] - t / z) * t;
      gx += pq * (y[2 * i] - y[2 * j]);
      gy += pq * (y[2 * i + 1] - y[2 * j + 1]);
    }
    grad[2 * i] = 4.0 * gx;
    grad[2 * i + 1] = 4.0 * gy;
  }
  return grad;
}

Projection tsne(const EmbeddingTable& vectors, const TsneConfig& config) {
  const std::size_t n = vectors.size();
  const std::size_t dim = vectors.dim;
  config.validate(n);

  std::vector<double> x(n * dim);
  for (std::size_t i = 0; i < n * dim; ++i) x[i] = vectors.data[i];

  // Exact duplicates would give a degenerate conditional; jitter every copy
  // after the first with tiny seeded noise.
  {
    std::unordered_set<std::string_view> seen;
    std::vector<std::size_t> dups;
    const std::size_t bytes = dim * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [it, inserted] =
          seen.emplace(reinterpret_cast<const char*>(vectors.row(std::uint32_t(i)).data()), bytes);
      if (!inserted) dups.push_back(i);
    }
    if (!dups.empty()) {
      double ssq = 0.0;
      for (double v : x) ssq += v * v;
      const double rms = std::sqrt(ssq / double(n * dim));
      const double scale = (rms > 0.0 ? rms : 1.0) * 1e-8;
      Rng rng(derive_seed(config.seed, "tsne-jitter"));
      for (std::size_t i : dups) {
        for (std::size_t d = 0; d < dim; ++d) x[i * dim + d] += gaussian(rng) * scale;
      }
    }
  }

  const std::vector<double> p = joint_probabilities(x, n, dim, config.perplexity);

  Rng rng(derive_seed(config.seed, "tsne-init"));
  std::vector<double> y(n * 2);
  for (double& v : y) v = gaussian(rng) * 1e-4;

  std::vector<double> inc(n * 2, 0.0);
  std::vector<double> gains(n * 2, 1.0);
  std::vector<double> num(n * n, 0.0);
  std::vector<double> grad(n * 2, 0.0);

  Projection projection;
  projection.ids = vectors.ids;

  for (std::uint32_t iter = 1; iter <= config.n_iter; ++iter) {
    const double exaggeration =
        iter <= config.exaggeration_iters ? config.early_exaggeration : 1.0;
    const double momentum =
        iter <= config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j];
        const double dy = y[2 * i + 1] - y[2 * j + 1];
        const double t = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = t;
        num[j * n + i] = t;
        z += 2.0 * t;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0;
      double gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double t = num[i * n + j];
        const double pq = (exaggeration * p[i * n + j] - t / z) * t;
        gx += pq * (y[2 * i] - y[2 * j]);
        gy += pq * (y[2 * i + 1] - y[2 * j + 1]);
      }
      grad[2 * i] = 4.0 * gx;
      grad[2 * i + 1] = 4.0 * gy;
    }

    for (std::size_t w = 0; w < n * 2; ++w) {
      const bool same_direction = (grad[w] > 0.0) == (inc[w] > 0.0);
      gains[w] = same_direction ? gains[w] * 0.8 : gains[w] + 0.2;
      gains[w] = std::max(gains[w], 0.01);
      inc[w] = momentum * inc[w] - config.learning_rate * gains[w] * grad[w];
      y[w] += inc[w];
    }
    // Recenter so the layout does not drift.
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= double(n);
    my /= double(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }

    if (iter % 50 == 0 || iter == config.n_iter) {
      projection.kl_trace.emplace_back(iter, kl_divergence(p, y, n));
    }
  }

  for (double v : y) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("tsne: diverged to non-finite coordinates; lower learning_rate");
    }
  }
  projection.coords = std::move(y);
  return projection;
}

std::string export_plot_data(const Projection& projection,
                             const std::unordered_map<std::uint64_t, std::string>& labels) {
  std::string out = "id,x,y,label\n";
  for (std::size_t i = 0; i < projection.ids.size(); ++i) {
    const auto it = labels.find(projection.ids[i]);
    out += std::to_string(projection.ids[i]) + ',' + format_g(projection.coords[2 * i]) + ',' +
           format_g(projection.coords[2 * i + 1]) + ',' +
           (it == labels.end() ? std::string() : csv_field(it->second)) + '\n';
  }
  return out;
}

void save_plot_csv(const Projection& projection, const std::string& path,
                   const std::unordered_map<std::uint64_t, std::string>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << export_plot_data(projection, labels);
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingTable load_plot_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty plot csv: " + path);
  if (line.rfind("id,x,y", 0) != 0) {
    throw std::runtime_error("plot csv missing id,x,y header: " + path);
  }
  EmbeddingTable table;
  table.dim = 2;
  std::uint64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    const auto c3 = c2 == std::string::npos ? std::string::npos : line.find(',', c2 + 1);
    if (c2 == std::string::npos) {
      throw std::runtime_error("plot csv line " + std::to_string(line_no) + ": expected id,x,y");
    }
    try {
      const std::uint64_t id = std::stoull(line.substr(0, c1));
      const double vx = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      const double vy = std::stod(
          line.substr(c2 + 1, (c3 == std::string::npos ? line.size() : c3) - c2 - 1));
      const std::uint32_t row = table.add(id);
      table.row_mut(row)[0] = float(vx);
      table.row_mut(row)[1] = float(vy);
    } catch (const std::logic_error&) {
      throw std::runtime_error("plot csv line " + std::to_string(line_no) + ": bad number");
    }
  }
  if (table.size() == 0) throw std::runtime_error("plot csv has no data rows: " + path);
  return table;
}

}  // namespace basket
