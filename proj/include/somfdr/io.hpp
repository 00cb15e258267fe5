#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"

// Delimiter-separated text formats. Lines starting with '#' are comments;
// a few carry metadata as "# key=value".
namespace somfdr::io {

inline constexpr char kDelim = ',';

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char delim = kDelim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(errc::parse, "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(errc::parse, "cannot parse integer " + std::string(what) + " from '" + std::string(s) + "'");
  return v;
}

/// Non-empty, non-comment lines with line numbers; comment lines go to `comments`.
struct Lines {
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::vector<std::string> comments;
};

inline Lines read_lines(std::istream& in) {
  Lines out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      out.comments.emplace_back(trim(t.substr(1)));
      continue;
    }
    out.rows.emplace_back(no, std::string(t));
  }
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::input, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::input, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string at_line(std::size_t no) { return " (line " + std::to_string(no) + ")"; }

// ---------------------------------------------------------------------------
// Rates: `label,gamma1,gamma2`, optional header row.

inline MutationTypeTable read_rates(std::istream& in) {
  auto lines = read_lines(in);
  std::vector<MutationType> types;
  for (std::size_t i = 0; i < lines.rows.size(); ++i) {
    const auto& [no, text] = lines.rows[i];
    auto f = split(text);
    if (i == 0 && f.size() == 3 && trim(f[0]) == "label") continue;
    if (f.size() != 3) fail(errc::parse, "rates row must have 3 fields" + at_line(no));
    types.push_back({std::string(trim(f[0])), parse_double(f[1], "gamma1"), parse_double(f[2], "gamma2")});
  }
  return MutationTypeTable(std::move(types));
}

inline MutationTypeTable load_rates(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_rates(in);
}

inline void write_rates(std::ostream& out, const MutationTypeTable& rates) {
  out << "label,gamma1,gamma2\n";
  for (const auto& t : rates.types())
    out << t.label << kDelim << format_double(t.gamma1) << kDelim << format_double(t.gamma2) << '\n';
}

inline void save_rates(const std::filesystem::path& path, const MutationTypeTable& rates) {
  auto out = open_out(path);
  write_rates(out, rates);
}

// ---------------------------------------------------------------------------
// Dataset: header `gene_id,<label>.cov1,<label>.cov2,<label>.x1,<label>.x2,...`
// then one row per gene. Metadata lives in `# key=value` comments.

inline constexpr std::array<std::string_view, 4> kDatasetFields = {"cov1", "cov2", "x1", "x2"};

inline Dataset read_dataset(const MutationTypeTable& rates, std::istream& in) {
  auto lines = read_lines(in);
  Dataset ds;
  ds.rates = rates;
  for (const auto& c : lines.comments) {
    auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    auto key = trim(std::string_view(c).substr(0, eq));
    auto value = trim(std::string_view(c).substr(eq + 1));
    if (key == "n_tumors_stage1") ds.meta.n_tumors_stage1 = parse_int(value, key);
    else if (key == "n_tumors_stage2") ds.meta.n_tumors_stage2 = parse_int(value, key);
    else if (key == "description") ds.meta.description = std::string(value);
  }
  if (lines.rows.empty()) fail(errc::parse, "dataset file has no header row");

  const std::size_t n_types = rates.size();
  // column index -> (type, field)
  const auto& [header_no, header] = lines.rows.front();
  auto cols = split(header);
  if (trim(cols[0]) != "gene_id") fail(errc::parse, "dataset header must start with gene_id" + at_line(header_no));
  if (cols.size() != 1 + 4 * n_types)
    fail(errc::length_mismatch, "dataset header has " + std::to_string(cols.size() - 1) + " count columns, expected " +
                                    std::to_string(4 * n_types) + at_line(header_no));
  std::vector<std::pair<std::size_t, std::size_t>> layout(cols.size());
  std::vector<bool> filled(4 * n_types, false);
  for (std::size_t c = 1; c < cols.size(); ++c) {
    auto name = trim(cols[c]);
    auto dot = name.rfind('.');
    if (dot == std::string_view::npos) fail(errc::parse, "column '" + std::string(name) + "' is not <label>.<field>");
    auto type = rates.find(name.substr(0, dot));
    if (!type) fail(errc::unknown_label, "unknown mutation type '" + std::string(name.substr(0, dot)) + "'");
    auto field_name = name.substr(dot + 1);
    std::size_t field = 4;
    for (std::size_t k = 0; k < 4; ++k)
      if (kDatasetFields[k] == field_name) field = k;
    if (field == 4) fail(errc::parse, "unknown dataset field '" + std::string(field_name) + "'");
    if (filled[*type * 4 + field]) fail(errc::duplicate, "duplicate column '" + std::string(name) + "'");
    filled[*type * 4 + field] = true;
    layout[c] = {*type, field};
  }

  ds.genes.reserve(lines.rows.size() - 1);
  for (std::size_t r = 1; r < lines.rows.size(); ++r) {
    const auto& [no, text] = lines.rows[r];
    auto f = split(text);
    if (f.size() != cols.size()) fail(errc::parse, "dataset row has wrong number of fields" + at_line(no));
    GeneRecord g;
    g.gene_id = std::string(trim(f[0]));
    g.cov1.assign(n_types, 0);
    g.cov2.assign(n_types, 0);
    g.x1.assign(n_types, 0);
    g.x2.assign(n_types, 0);
    for (std::size_t c = 1; c < f.size(); ++c) {
      auto v = parse_int(f[c], cols[c]);
      auto [m, field] = layout[c];
      Counts* dst[4] = {&g.cov1, &g.cov2, &g.x1, &g.x2};
      (*dst[field])[m] = v;
    }
    ds.genes.push_back(std::move(g));
  }
  ds.validate();
  return ds;
}

inline Dataset load_dataset(const MutationTypeTable& rates, const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(rates, in);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "# n_tumors_stage1=" << ds.meta.n_tumors_stage1 << '\n';
  out << "# n_tumors_stage2=" << ds.meta.n_tumors_stage2 << '\n';
  if (!ds.meta.description.empty()) out << "# description=" << ds.meta.description << '\n';
  out << "gene_id";
  for (const auto& t : ds.rates.types())
    for (auto field : kDatasetFields) out << kDelim << t.label << '.' << field;
  out << '\n';
  for (const auto& g : ds.genes) {
    out << g.gene_id;
    for (std::size_t m = 0; m < ds.n_types(); ++m)
      out << kDelim << g.cov1[m] << kDelim << g.cov2[m] << kDelim << g.x1[m] << kDelim << g.x2[m];
    out << '\n';
  }
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  auto out = open_out(path);
  write_dataset(out, ds);
}

// ---------------------------------------------------------------------------
// Scenario: `# origin mcmc_iteration=<i> seed=<s>` then `gene_id,theta` rows.

inline Scenario read_scenario(std::istream& in) {
  auto lines = read_lines(in);
  Scenario s;
  for (const auto& c : lines.comments) {
    std::istringstream words(c);
    std::string word;
    words >> word;
    if (word != "origin") continue;
    while (words >> word) {
      auto eq = word.find('=');
      if (eq == std::string::npos) continue;
      auto key = word.substr(0, eq);
      auto value = std::string_view(word).substr(eq + 1);
      if (key == "mcmc_iteration") s.origin.mcmc_iteration = parse_int(value, key);
      else if (key == "seed") {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || ptr != value.data() + value.size()) fail(errc::parse, "bad scenario seed");
        s.origin.seed = v;
      }
    }
  }
  for (std::size_t i = 0; i < lines.rows.size(); ++i) {
    const auto& [no, text] = lines.rows[i];
    auto f = split(text);
    if (f.size() != 2) fail(errc::parse, "scenario row must have 2 fields" + at_line(no));
    if (i == 0 && trim(f[0]) == "gene_id") continue;
    s.gene_ids.emplace_back(trim(f[0]));
    s.theta.push_back(parse_double(f[1], "theta"));
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_scenario(in);
}

/// `ds` supplies gene ids when the scenario carries none.
inline void write_scenario(std::ostream& out, const Scenario& s, const Dataset* ds = nullptr) {
  out << "# origin mcmc_iteration=" << s.origin.mcmc_iteration << " seed=" << s.origin.seed << '\n';
  out << "gene_id,theta\n";
  for (std::size_t g = 0; g < s.theta.size(); ++g) {
    const std::string& id = !s.gene_ids.empty() ? s.gene_ids[g] : ds->genes.at(g).gene_id;
    out << id << kDelim << format_double(s.theta[g]) << '\n';
  }
}

inline void save_scenario(const std::filesystem::path& path, const Scenario& s, const Dataset* ds = nullptr) {
  auto out = open_out(path);
  write_scenario(out, s, ds);
}

/// Reorders a scenario to the dataset's gene order (matching by id when present).
inline Scenario align_scenario(Scenario s, const Dataset& ds) {
  if (s.theta.size() != ds.n_genes())
    fail(errc::length_mismatch, "scenario has " + std::to_string(s.theta.size()) + " genes, dataset has " +
                                    std::to_string(ds.n_genes()));
  if (s.gene_ids.empty()) return s;
  std::map<std::string_view, std::size_t> index;
  for (std::size_t g = 0; g < s.gene_ids.size(); ++g) index[s.gene_ids[g]] = g;
  Scenario out;
  out.origin = s.origin;
  out.theta.resize(ds.n_genes());
  out.gene_ids.resize(ds.n_genes());
  for (std::size_t g = 0; g < ds.n_genes(); ++g) {
    auto it = index.find(ds.genes[g].gene_id);
    if (it == index.end()) fail(errc::length_mismatch, "scenario lacks gene '" + ds.genes[g].gene_id + "'");
    out.theta[g] = s.theta[it->second];
    out.gene_ids[g] = ds.genes[g].gene_id;
  }
  return out;
}

}  // namespace somfdr::io
