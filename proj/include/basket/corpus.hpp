#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace basket {

struct Product {
  std::uint64_t product_id = 0;
  std::string name;
  std::string department;  // "UNKNOWN" when the source column is empty
};

// One transaction. Items are kept as a sorted, deduplicated set of product
// ids: the model only cares about presence or absence.
struct Trip {
  std::uint64_t trip_id = 0;
  std::uint64_t customer_id = 0;
  std::vector<std::uint64_t> items;  // sorted, unique

  bool contains(std::uint64_t product_id) const;
};

using Catalog = std::unordered_map<std::uint64_t, Product>;

struct Corpus {
  Catalog catalog;
  std::vector<Trip> trips;       // only trips with >= min_basket distinct items
  std::uint32_t min_basket = 5;

  // Distinct product ids appearing in at least one retained trip, sorted.
  std::vector<std::uint64_t> vocabulary() const;

  const std::string& department_of(std::uint64_t product_id) const;
  const std::string& name_of(std::uint64_t product_id) const;
};

struct LoadCounts {
  std::uint64_t kept = 0;
  std::uint64_t dropped = 0;  // trips below the min_basket threshold
};

// catalog.csv: header `product_id,name,department`. Extra commas are treated
// as part of the name; an empty department maps to "UNKNOWN".
Catalog load_catalog(const std::string& path);

// trips.csv: `trip_id,customer_id,item;item;...` per line, optional header.
// Duplicate items collapse before the size filter. Unknown items are a hard
// error; min_basket must be >= 2.
Corpus load_trips(const std::string& path, Catalog catalog,
                  std::uint32_t min_basket, LoadCounts* counts = nullptr);

void save_catalog(const Catalog& catalog, const std::string& path);
void save_trips(const Corpus& corpus, const std::string& path);

// Synthetic corpus with planted category structure, the evaluation stand-in
// for a production transaction log.
struct SynthSpec {
  std::uint32_t n_categories = 10;
  std::uint32_t products_per_category = 50;
  std::uint64_t n_trips = 50000;
  std::uint32_t basket_min = 5;
  std::uint32_t basket_max = 12;
  double in_category_prob = 0.9;     // item drawn from the trip's home category
  double paired_category_prob = 0.0; // item drawn from the partner category (c^1)
  std::uint32_t n_customers = 1000;
  double customer_affinity = 0.8;    // trip uses the customer's home category
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

struct SynthResult {
  Corpus corpus;  // unfiltered generator output (baskets are >= basket_min by construction)
  std::unordered_map<std::uint64_t, std::uint32_t> category_of;  // product -> category
  std::vector<std::uint32_t> trip_home_category;      // parallel to corpus.trips
  std::vector<std::uint32_t> customer_home_category;  // index = customer_id - 1
};

SynthResult generate_synthetic(const SynthSpec& spec);

// Generates and writes catalog.csv, trips.csv and ground_truth.csv
// (`product_id,category`) under out_dir.
SynthResult generate_synthetic_files(const SynthSpec& spec, const std::string& out_dir);

}  // namespace basket
