#include "basket/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "basket/rng.hpp"

namespace basket {

namespace {

const std::string kUnknownDept = "UNKNOWN";

std::uint64_t parse_u64(std::string_view s, const std::string& what, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what +
                             " '" + std::string(s) + "'");
  }
  return v;
}

bool starts_with_digit(std::string_view s) {
  return !s.empty() && s.front() >= '0' && s.front() <= '9';
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

bool Trip::contains(std::uint64_t product_id) const {
  return std::binary_search(items.begin(), items.end(), product_id);
}

std::vector<std::uint64_t> Corpus::vocabulary() const {
  std::vector<std::uint64_t> vocab;
  for (const Trip& trip : trips) {
    vocab.insert(vocab.end(), trip.items.begin(), trip.items.end());
  }
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  return vocab;
}

const std::string& Corpus::department_of(std::uint64_t product_id) const {
  auto it = catalog.find(product_id);
  return it == catalog.end() ? kUnknownDept : it->second.department;
}

const std::string& Corpus::name_of(std::uint64_t product_id) const {
  static const std::string empty;
  auto it = catalog.find(product_id);
  return it == catalog.end() ? empty : it->second.name;
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty catalog file: " + path);
  strip_cr(line);
  if (line != "product_id,name,department") {
    throw std::runtime_error("catalog " + path +
                             ": expected header 'product_id,name,department'");
  }
  Catalog catalog;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto first = line.find(',');
    const auto last = line.rfind(',');
    if (first == std::string::npos || last == first) {
      throw std::runtime_error("catalog " + path + " line " + std::to_string(line_no) +
                               ": expected 'product_id,name,department'");
    }
    Product p;
    p.product_id = parse_u64(std::string_view(line).substr(0, first), "product_id", line_no);
    p.name = line.substr(first + 1, last - first - 1);  // commas in names tolerated
    p.department = line.substr(last + 1);
    if (p.name.empty()) {
      throw std::runtime_error("catalog " + path + " line " + std::to_string(line_no) +
                               ": empty product name");
    }
    if (p.department.empty()) p.department = kUnknownDept;
    if (!catalog.emplace(p.product_id, p).second) {
      throw std::runtime_error("catalog " + path + ": duplicate product_id " +
                               std::to_string(p.product_id));
    }
  }
  return catalog;
}

Corpus load_trips(const std::string& path, Catalog catalog, std::uint32_t min_basket,
                  LoadCounts* counts) {
  if (min_basket < 2) {
    throw std::invalid_argument("min_basket must be >= 2 (a context needs at least one other item)");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trips: " + path);

  Corpus corpus;
  corpus.catalog = std::move(catalog);
  corpus.min_basket = min_basket;
  LoadCounts local;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1 && !starts_with_digit(line)) continue;  // header

    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error("trips " + path + " line " + std::to_string(line_no) +
                               ": expected 'trip_id,customer_id,items'");
    }
    Trip trip;
    std::string_view sv(line);
    trip.trip_id = parse_u64(sv.substr(0, c1), "trip_id", line_no);
    trip.customer_id = parse_u64(sv.substr(c1 + 1, c2 - c1 - 1), "customer_id", line_no);

    std::string_view items = sv.substr(c2 + 1);
    while (!items.empty()) {
      const auto sep = items.find(';');
      const auto tok = items.substr(0, sep);
      if (!tok.empty()) {
        const std::uint64_t id = parse_u64(tok, "item id", line_no);
        if (corpus.catalog.count(id) == 0) {
          throw std::runtime_error("trips " + path + " line " + std::to_string(line_no) +
                                   ": item " + std::to_string(id) + " not in catalog");
        }
        trip.items.push_back(id);
      }
      if (sep == std::string_view::npos) break;
      items.remove_prefix(sep + 1);
    }
    std::sort(trip.items.begin(), trip.items.end());
    trip.items.erase(std::unique(trip.items.begin(), trip.items.end()), trip.items.end());

    if (trip.items.size() >= min_basket) {
      corpus.trips.push_back(std::move(trip));
      ++local.kept;
    } else {
      ++local.dropped;
    }
  }
  if (counts != nullptr) *counts = local;
  return corpus;
}

void save_catalog(const Catalog& catalog, const std::string& path) {
  std::vector<const Product*> rows;
  rows.reserve(catalog.size());
  for (const auto& [id, p] : catalog) rows.push_back(&p);
  std::sort(rows.begin(), rows.end(),
            [](const Product* a, const Product* b) { return a->product_id < b->product_id; });

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "product_id,name,department\n";
  for (const Product* p : rows) {
    out << p->product_id << ',' << p->name << ',' << p->department << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_trips(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "trip_id,customer_id,items\n";
  for (const Trip& trip : corpus.trips) {
    out << trip.trip_id << ',' << trip.customer_id << ',';
    for (std::size_t i = 0; i < trip.items.size(); ++i) {
      if (i != 0) out << ';';
      out << trip.items[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (n_categories == 0) fail("n_categories must be positive");
  if (products_per_category == 0) fail("products_per_category must be positive");
  if (n_trips == 0) fail("n_trips must be positive");
  if (n_customers == 0) fail("n_customers must be positive");
  if (basket_min < 2) fail("basket_min must be >= 2");
  if (basket_max < basket_min) fail("basket_max must be >= basket_min");
  if (!(in_category_prob > 0.0) || in_category_prob > 1.0) {
    fail("in_category_prob must be in (0, 1]");
  }
  if (paired_category_prob < 0.0 || in_category_prob + paired_category_prob > 1.0) {
    fail("in_category_prob + paired_category_prob must not exceed 1");
  }
  if (paired_category_prob > 0.0 && n_categories % 2 != 0) {
    fail("paired_category_prob requires an even n_categories");
  }
  if (customer_affinity < 0.0 || customer_affinity > 1.0) {
    fail("customer_affinity must be in [0, 1]");
  }
  const std::uint64_t total = std::uint64_t(n_categories) * products_per_category;
  if (total < basket_max) fail("catalog smaller than basket_max");
  if (in_category_prob + paired_category_prob >= 1.0) {
    // all draws stay inside the home (or home+partner) categories
    const std::uint64_t reachable =
        products_per_category * (paired_category_prob > 0.0 ? 2u : 1u);
    if (reachable < basket_max) {
      fail("basket_max exceeds the category pool reachable at in_category_prob=1");
    }
  }
}

SynthResult generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthResult result;
  const std::uint32_t cats = spec.n_categories;
  const std::uint32_t per_cat = spec.products_per_category;
  const std::uint64_t n_products = std::uint64_t(cats) * per_cat;

  // Product ids are 1..n_products, category-major.
  for (std::uint32_t c = 0; c < cats; ++c) {
    for (std::uint32_t i = 0; i < per_cat; ++i) {
      Product p;
      p.product_id = std::uint64_t(c) * per_cat + i + 1;
      p.name = "cat" + std::to_string(c) + "_prod" + std::to_string(i);
      p.department = "DEPT_" + std::to_string(c);
      result.category_of.emplace(p.product_id, c);
      result.corpus.catalog.emplace(p.product_id, std::move(p));
    }
  }

  Rng rng(derive_seed(spec.seed, "synth"));

  result.customer_home_category.resize(spec.n_customers);
  for (auto& home : result.customer_home_category) {
    home = static_cast<std::uint32_t>(uniform_u64(rng, cats));
  }

  result.corpus.min_basket = spec.basket_min;
  result.corpus.trips.reserve(spec.n_trips);
  result.trip_home_category.reserve(spec.n_trips);

  std::vector<std::uint64_t> basket;
  for (std::uint64_t t = 0; t < spec.n_trips; ++t) {
    const std::uint64_t customer = uniform_u64(rng, spec.n_customers);
    const std::uint32_t home = bernoulli(rng, spec.customer_affinity)
                                   ? result.customer_home_category[customer]
                                   : static_cast<std::uint32_t>(uniform_u64(rng, cats));
    const auto size = static_cast<std::size_t>(
        uniform_range(rng, spec.basket_min, spec.basket_max));

    basket.clear();
    while (basket.size() < size) {
      std::uint64_t id;
      const double r = uniform_real01(rng);
      if (r < spec.in_category_prob) {
        id = std::uint64_t(home) * per_cat + uniform_u64(rng, per_cat) + 1;
      } else if (r < spec.in_category_prob + spec.paired_category_prob) {
        id = std::uint64_t(home ^ 1u) * per_cat + uniform_u64(rng, per_cat) + 1;
      } else {
        id = uniform_u64(rng, n_products) + 1;
      }
      if (std::find(basket.begin(), basket.end(), id) == basket.end()) {
        basket.push_back(id);
      }
    }

    Trip trip;
    trip.trip_id = t + 1;
    trip.customer_id = customer + 1;
    trip.items = basket;
    std::sort(trip.items.begin(), trip.items.end());
    result.corpus.trips.push_back(std::move(trip));
    result.trip_home_category.push_back(home);
  }
  return result;
}

SynthResult generate_synthetic_files(const SynthSpec& spec, const std::string& out_dir) {
  SynthResult result = generate_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  save_catalog(result.corpus.catalog, (dir / "catalog.csv").string());
  save_trips(result.corpus, (dir / "trips.csv").string());

  std::ofstream truth(dir / "ground_truth.csv", std::ios::trunc);
  if (!truth) throw std::runtime_error("cannot open for write: " + (dir / "ground_truth.csv").string());
  truth << "product_id,category\n";
  std::vector<std::pair<std::uint64_t, std::uint32_t>> rows(result.category_of.begin(),
                                                            result.category_of.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, cat] : rows) truth << id << ',' << cat << '\n';
  if (!truth) throw std::runtime_error("write failed: ground_truth.csv");
  return result;
}

}  // namespace basket
