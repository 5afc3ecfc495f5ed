#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "density.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "simulation.hpp"
#include "weights.hpp"

namespace phasedecon {

using nlohmann::json;

inline constexpr int kCsvPrecision = 12;

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines; //!< 1-based source line of each row

  std::optional<std::size_t> find(const std::string& name) const
  {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name)
        return c;
    return std::nullopt;
  }

  std::size_t column(const std::string& name) const
  {
    if (auto c = find(name))
      return *c;
    throw ParseError(1, "missing column '" + name + "'");
  }
};

namespace detail {

inline std::string trim(std::string s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_row(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

} // namespace detail

//! Plain comma-separated reader: header row, no quoting, blank lines skipped.
inline CsvTable read_csv(std::istream& in)
{
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
      line.erase(0, 3);
    if (detail::trim(line).empty())
      continue;
    auto cells = detail::split_row(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError(line_no,
                       "expected " + std::to_string(table.header.size()) + " fields, found " +
                         std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
    table.lines.push_back(line_no);
  }
  if (!have_header)
    throw ParseError(1, "empty input, no header row");
  return table;
}

inline CsvTable read_csv_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw InvalidArgument("cannot open '" + path + "'");
  return read_csv(in);
}

inline double parse_number(const std::string& cell, std::size_t line)
{
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError(line, "not a finite number: '" + cell + "'");
  return v;
}

//! Long-format replicate data, optionally with one known error SD per subject.
struct LongData
{
  ReplicateDataset data;
  std::optional<std::vector<double>> sigma;
};

//! Groups rows by id (first-appearance order). The rep column, when
//! present, only has to parse; rows keep file order within a subject.
inline LongData read_long_format(const CsvTable& table,
                                 const std::string& value_column = "value",
                                 const std::string& rep_column = "rep")
{
  const std::size_t id_col = table.column("id");
  const std::size_t val_col = table.column(value_column);
  const auto rep_col = table.find(rep_column);
  const auto sigma_col = table.find("sigma");

  LongData out;
  std::map<std::string, std::size_t> index;
  std::vector<double> sigma;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    if (row[id_col].empty())
      throw ParseError(line, "empty id");
    const double value = parse_number(row[val_col], line);
    if (rep_col)
      parse_number(row[*rep_col], line);
    auto [it, inserted] = index.emplace(row[id_col], out.data.rows.size());
    if (inserted) {
      out.data.rows.emplace_back();
      out.data.ids.push_back(row[id_col]);
      if (sigma_col) {
        const double s = parse_number(row[*sigma_col], line);
        if (s < 0.0)
          throw ParseError(line, "negative sigma");
        sigma.push_back(s);
      }
    }
    out.data.rows[it->second].push_back(value);
  }
  if (out.data.rows.empty())
    throw ParseError(1, "no data rows");
  if (sigma_col)
    out.sigma = std::move(sigma);
  return out;
}

inline std::string format_number(double v)
{
  if (std::isnan(v))
    return "NA";
  std::ostringstream s;
  s << std::setprecision(kCsvPrecision) << v;
  return s.str();
}

inline json number_or_null(double v)
{
  if (std::isnan(v))
    return nullptr;
  return v;
}

//! x plus one column per estimate; all estimates must share the grid.
inline void write_density_csv(std::ostream& out, const std::vector<DensityEstimate>& estimates)
{
  if (estimates.empty())
    throw InvalidArgument("write_density_csv: nothing to write");
  const auto& xs = estimates.front().xs;
  for (const auto& e : estimates)
    if (e.xs != xs)
      throw InvalidArgument("write_density_csv: estimates use different grids");
  out << "x";
  for (const auto& e : estimates)
    out << ',' << to_string(e.method);
  out << '\n';
  for (std::size_t k = 0; k < xs.size(); ++k) {
    out << format_number(xs[k]);
    for (const auto& e : estimates)
      out << ',' << format_number(e.fs[k]);
    out << '\n';
  }
}

inline json density_to_json(const DensityEstimate& e)
{
  json j;
  j["method"] = std::string(to_string(e.method));
  j["bandwidth"] = e.bandwidth;
  j["t_star"] = e.tStar ? json(*e.tStar) : json(nullptr);
  j["grid"] = e.xs;
  j["values"] = e.fs;
  j["clamped"] = e.clampCount;
  return j;
}

inline void write_replicates_csv(std::ostream& out, const std::vector<ReplicateRecord>& records)
{
  out << "replicate,ok,sigma_x_sq,t_star_eq,t_star_opt,t_star_common,phase_ise_eq,phase_ise_opt,"
         "ise_epf,ise_wepf,ise_known,ise_kde,h_epf,h_wepf,h_known,h_kde,error\n";
  for (const auto& r : records) {
    out << r.index << ',' << (r.ok ? 1 : 0);
    for (double v : {r.sigmaXSq, r.tStarEq, r.tStarOpt, r.tStarCommon, r.phaseIseEq, r.phaseIseOpt, r.iseEpf,
                     r.iseWepf, r.iseKnown, r.iseKde, r.hEpf, r.hWepf, r.hKnown, r.hKde})
      out << ',' << format_number(v);
    std::string msg = r.error;
    for (char& c : msg)
      if (c == ',' || c == '\n')
        c = ';';
    out << ',' << msg << '\n';
  }
}

inline std::string_view to_string(Weighting w)
{
  switch (w) {
    case Weighting::Epf: return "epf";
    case Weighting::Wepf: return "wepf";
    case Weighting::Both: return "both";
  }
  return "?";
}

inline std::string_view to_string(Estimator e)
{
  switch (e) {
    case Estimator::Phase: return "phase";
    case Estimator::KnownError: return "known-error";
    case Estimator::Kde: return "kde";
  }
  return "?";
}

namespace detail {

inline json ratio_json(const std::pair<std::vector<double>, std::vector<double>>& pairs)
{
  json j;
  if (pairs.first.empty()) {
    j["mise_ratio"] = nullptr;
    j["se_jack"] = nullptr;
    return j;
  }
  const auto r = mise_ratio_with_jackknife(pairs.first, pairs.second);
  j["mise_ratio"] = r.ratio;
  j["se_jack"] = r.se ? json(*r.se) : json(nullptr);
  return j;
}

inline json ise_block(const std::vector<double>& ise)
{
  json j;
  j["count"] = ise.size();
  if (ise.empty()) {
    j["mise"] = nullptr;
    j["quartiles_x10"] = nullptr;
    return j;
  }
  std::vector<double> scaled(ise);
  for (double& v : scaled)
    v *= 10.0;
  const auto q = quartile_summary(scaled);
  j["mise"] = mean(ise);
  j["quartiles_x10"] = {{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
  return j;
}

} // namespace detail

//! One table cell: configuration, phase MISE ratio and per-estimator
//! density ISE summaries. Keys are sorted, so output is deterministic.
inline json summarize(const StudyResult& study)
{
  const auto& c = study.config;
  json j;
  json cfg;
  cfg["distribution"] = std::string(to_string(c.dist));
  cfg["error"] = std::string(to_string(c.law));
  cfg["case"] = std::string(to_string(c.varianceCase));
  cfg["n"] = c.n;
  cfg["J"] = c.replicates;
  cfg["replications"] = c.reps;
  cfg["seed"] = c.seed;
  cfg["weights"] = std::string(to_string(c.weighting));
  cfg["phase_only"] = c.phaseOnly;
  cfg["tgrid"] = c.tgridCount;
  cfg["bandwidth"] = c.bandwidth ? json(*c.bandwidth) : json("auto");
  json est = json::array();
  for (auto e : c.estimators)
    est.push_back(std::string(to_string(e)));
  cfg["estimators"] = est;
  j["config"] = cfg;

  const std::size_t failed = study.failures();
  j["failed"] = failed;
  j["succeeded"] = study.records.size() - failed;

  auto phase = detail::ratio_json(collect_pairs(study, &ReplicateRecord::phaseIseEq, &ReplicateRecord::phaseIseOpt));
  const auto eq = collect(study, &ReplicateRecord::phaseIseEq);
  const auto opt = collect(study, &ReplicateRecord::phaseIseOpt);
  phase["mise_eq"] = eq.empty() ? json(nullptr) : json(mean(eq));
  phase["mise_opt"] = opt.empty() ? json(nullptr) : json(mean(opt));
  j["phase"] = phase;
  j["mise_ratio"] = phase["mise_ratio"];
  j["se_jack"] = phase["se_jack"];

  if (!c.phaseOnly) {
    json dens;
    if (c.uses(Estimator::Phase)) {
      if (c.wants_epf())
        dens["phase_epf"] = detail::ise_block(collect(study, &ReplicateRecord::iseEpf));
      if (c.wants_wepf())
        dens["phase_wepf"] = detail::ise_block(collect(study, &ReplicateRecord::iseWepf));
      if (c.weighting == Weighting::Both)
        dens["ratio"] = detail::ratio_json(collect_pairs(study, &ReplicateRecord::iseEpf, &ReplicateRecord::iseWepf));
    }
    if (c.uses(Estimator::KnownError))
      dens["known_error"] = detail::ise_block(collect(study, &ReplicateRecord::iseKnown));
    if (c.uses(Estimator::Kde))
      dens["kde"] = detail::ise_block(collect(study, &ReplicateRecord::iseKde));
    j["density"] = dens;
  }
  return j;
}

inline void write_text(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out)
    throw InvalidArgument("write failed for '" + path + "'");
}

} // namespace phasedecon
