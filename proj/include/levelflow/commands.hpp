#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "levelflow/ensemble.hpp"
#include "levelflow/error.hpp"
#include "levelflow/random.hpp"
#include "levelflow/simulation.hpp"
#include "levelflow/statistics.hpp"
#include "levelflow/table.hpp"

namespace levelflow {

inline std::string extension(OutputFormat f) { return f == OutputFormat::json ? ".json" : ".csv"; }

inline std::string join_numbers(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
  return s;
}

/// Every resolved parameter of a run; jobs is left out since it never
/// changes the output.
inline Metadata config_metadata(const RunConfig& c, std::string_view command) {
  Metadata m{
      {"command", std::string(command)},
      {"n", std::int64_t{c.n}},
      {"m", std::int64_t{c.m}},
      {"alpha", c.alpha},
      {"epsilon", join_numbers(c.epsilons)},
      {"realizations", std::int64_t{c.realizations}},
      {"t_samples", std::int64_t{c.t_samples}},
      {"seed", std::to_string(c.seed)},
      {"window", c.window_fraction},
      {"bins", std::int64_t(c.bins.count)},
      {"bins_lo", c.bins.lo ? Cell{*c.bins.lo} : Cell{std::string("auto")}},
      {"bins_hi", c.bins.hi ? Cell{*c.bins.hi} : Cell{std::string("auto")}},
      {"degeneracy_scale", c.degeneracy_scale},
      {"edge_margin", c.edge_margin},
      {"gaussian", std::string(RandomStream::gaussian_algorithm)},
  };
  return m;
}

inline Table samples_table(const CurvatureRun& run) {
  Table t{{"realization", "level", "t", "E", "Edot", "Eddot", "xdot", "xddot", "K", "k"}, {}};
  t.rows.reserve(run.samples.size());
  for (const auto& s : run.samples)
    t.add_row({static_cast<std::int64_t>(s.realization), std::int64_t{s.level}, s.t, s.energy, s.raw_velocity,
               s.raw_curvature, s.unfolded_velocity, s.unfolded_curvature, s.rescaled.value_or(NAN),
               s.normalized.value_or(NAN)});
  return t;
}

inline Table summary_table(const std::vector<CurvatureSummary>& summaries) {
  Table t{{"epsilon", "lambda", "per_block", "samples", "masked", "edge_dropped", "mean_xdot_sq",
           "mean_xdot_xddot", "mean_abs_K", "ks_universal", "tail_exponent", "tail_exponent_error",
           "fraction_abs_k_gt_3"},
          {}};
  for (const auto& s : summaries)
    t.add_row({s.epsilon, s.lambda, std::int64_t{s.per_block}, static_cast<std::int64_t>(s.samples),
               static_cast<std::int64_t>(s.masked), static_cast<std::int64_t>(s.edge_dropped), s.mean_velocity_sq,
               s.mean_velocity_curvature, s.mean_abs_rescaled, s.ks_universal, s.tail_exponent,
               s.tail_exponent_error, s.fraction_above_3});
  return t;
}

/// Histogram of normalized curvatures with P(k) bin averages alongside.
inline Table curvature_histogram_table(const Histogram& h) {
  const auto density = h.density();
  const auto model = universal_bin_density(h.edges);
  Table t{{"bin_lo", "bin_hi", "count", "density", "model_density"}, {}};
  for (std::size_t i = 0; i < h.bins(); ++i)
    t.add_row({h.edges[i], h.edges[i + 1], static_cast<std::int64_t>(h.counts[i]), density[i], model[i]});
  return t;
}

struct CommandOutput {
  std::vector<std::filesystem::path> files;
};

/// simulate: curvature samples and a summary for a single epsilon.
inline CommandOutput cmd_simulate(const RunConfig& config) {
  config.validate();
  if (config.epsilons.size() != 1)
    throw Error(Errc::invalid_argument, "simulate takes exactly one epsilon; use sweep for several");
  const auto run = simulate_curvatures(config, config.epsilons.front(), config.seed);
  const auto meta = config_metadata(config, "simulate");
  const bool json = config.format == OutputFormat::json;
  const std::filesystem::path dir(config.out);
  CommandOutput out{{dir / ("samples" + extension(config.format)), dir / ("summary" + extension(config.format))}};
  write_table_file(out.files[0], json, meta, samples_table(run));
  write_table_file(out.files[1], json, meta, summary_table({run.summary}));
  return out;
}

/// density: pooled eigenvalue histogram against the semicircle.
inline CommandOutput cmd_density(const RunConfig& config) {
  config.validate();
  if (config.epsilons.size() != 1) throw Error(Errc::invalid_argument, "density takes exactly one epsilon");
  const auto run = simulate_density(config, config.epsilons.front(), config.seed);
  const auto meta = config_metadata(config, "density");
  const bool json = config.format == OutputFormat::json;
  const std::filesystem::path dir(config.out);

  const auto& h = run.histogram;
  const auto density = h.density();
  Table hist{{"bin_lo", "bin_hi", "count", "density", "model_density"}, {}};
  for (std::size_t i = 0; i < h.bins(); ++i)
    hist.add_row({h.edges[i], h.edges[i + 1], static_cast<std::int64_t>(h.counts[i]), density[i],
                  run.model_density[i]});

  Table curve{{"E", "semicircle_density"}, {}};
  for (std::size_t i = 0; i < h.bins(); ++i)
    curve.add_row({h.center(i), run.model.density(h.center(i)) / run.model.n()});

  Table summary{{"epsilon", "lambda", "radius", "eigenvalues", "underflow", "overflow", "outside_fraction",
                 "chi_square_per_bin", "max_abs_z", "symmetry_max_z"},
                {}};
  summary.add_row({config.epsilons.front(), run.model.lambda(), run.model.radius(),
                   static_cast<std::int64_t>(run.eigenvalues.size()), static_cast<std::int64_t>(h.underflow),
                   static_cast<std::int64_t>(h.overflow), run.outside_fraction, run.chi_square_per_bin, run.max_abs_z,
                   run.symmetry_max_z});

  CommandOutput out{{dir / ("density" + extension(config.format)), dir / ("semicircle" + extension(config.format)),
                     dir / ("density_summary" + extension(config.format))}};
  write_table_file(out.files[0], json, meta, hist);
  write_table_file(out.files[1], json, meta, curve);
  write_table_file(out.files[2], json, meta, summary);
  return out;
}

/// sweep: one normalized-curvature histogram per epsilon, an overlay table
/// with P(k), and a per-epsilon summary.
inline CommandOutput cmd_sweep(const RunConfig& config) {
  config.validate();
  if (config.epsilons.size() < 2)
    throw Error(Errc::invalid_argument, "sweep needs at least two epsilon values; use simulate for one");
  const auto meta = config_metadata(config, "sweep");
  const bool json = config.format == OutputFormat::json;
  const std::filesystem::path dir(config.out);
  const auto edges = curvature_edges(config.bins);

  CommandOutput out;
  std::vector<CurvatureSummary> summaries;
  std::vector<std::vector<double>> densities;
  for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
    const auto run = simulate_curvatures(config, config.epsilons[i], sweep_seed(config.seed, i));
    const auto k = run.normalized();
    const auto h = build_histogram(k, edges, Normalization::full);
    densities.push_back(h.density());
    summaries.push_back(run.summary);
    auto path = dir / ("hist_eps" + std::to_string(i) + extension(config.format));
    auto hist_meta = meta;
    hist_meta.emplace_back("sweep_index", static_cast<std::int64_t>(i));
    hist_meta.emplace_back("sweep_epsilon", config.epsilons[i]);
    write_table_file(path, json, hist_meta, curvature_histogram_table(h));
    out.files.push_back(std::move(path));
  }

  Table overlay{{"bin_lo", "bin_hi", "model_density"}, {}};
  for (std::size_t i = 0; i < config.epsilons.size(); ++i) overlay.columns.push_back("density_eps" + std::to_string(i));
  const auto model = universal_bin_density(edges);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    std::vector<Cell> row{edges[b], edges[b + 1], model[b]};
    for (const auto& d : densities) row.emplace_back(d[b]);
    overlay.add_row(std::move(row));
  }
  out.files.push_back(dir / ("overlay" + extension(config.format)));
  write_table_file(out.files.back(), json, meta, overlay);
  out.files.push_back(dir / ("summary" + extension(config.format)));
  write_table_file(out.files.back(), json, meta, summary_table(summaries));
  return out;
}

// ---------------------------------------------------------------------------
// External data for the gamma fit
// ---------------------------------------------------------------------------

enum class InputKind { samples, binned };

struct FitInput {
  std::vector<double> k;
  std::vector<double> density;  // binned input only
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_fields(std::string_view line, std::size_t line_no) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == ',')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != ',') ++end;
    const auto field = line.substr(pos, end - pos);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value))
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) +
                                         "' as a number");
    out.push_back(value);
    pos = end;
  }
  return out;
}

}  // namespace detail

/// Parses one value per line (samples) or "K density" pairs (binned),
/// separated by whitespace or commas. Blank lines and '#' comments are skipped.
inline FitInput parse_fit_input(std::istream& is, InputKind kind) {
  FitInput in;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = detail::parse_fields(body, line_no);
    const std::size_t want = kind == InputKind::samples ? 1 : 2;
    if (fields.size() != want)
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected " + std::to_string(want) +
                                         " value(s), found " + std::to_string(fields.size()));
    in.k.push_back(fields[0]);
    if (kind == InputKind::binned) in.density.push_back(fields[1]);
  }
  if (in.k.empty()) throw Error(Errc::empty_input, "fit input holds no data");
  return in;
}

inline FitInput read_fit_input(const std::filesystem::path& path, InputKind kind) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io_error, "cannot open " + path.string());
  return parse_fit_input(is, kind);
}

struct FitCommand {
  std::filesystem::path input;
  InputKind kind = InputKind::samples;
  BinSpec bins;
  FitOptions options;
  std::optional<std::filesystem::path> out;  // directory for the curve table
  OutputFormat format = OutputFormat::csv;
};

struct FitReport {
  DistributionFit fit;
  std::size_t points = 0;
  CommandOutput output;
};

/// fit: least-squares gamma of P(K; gamma) for external data.
inline FitReport cmd_fit(const FitCommand& cmd) {
  const auto in = read_fit_input(cmd.input, cmd.kind);
  FitReport report;
  report.points = in.k.size();
  std::vector<double> xs, data;
  if (cmd.kind == InputKind::samples) {
    const auto h = build_histogram(in.k, curvature_edges(cmd.bins));
    report.fit = fit_gamma(h, cmd.options);
    data = h.density();
    for (std::size_t i = 0; i < h.bins(); ++i) xs.push_back(h.center(i));
  } else {
    report.fit = fit_gamma_points(in.k, in.density, cmd.options);
    xs = in.k;
    data = in.density;
  }
  if (cmd.out) {
    const bool json = cmd.format == OutputFormat::json;
    Metadata meta{{"command", std::string("fit")},
                  {"input", cmd.input.string()},
                  {"input_kind", std::string(cmd.kind == InputKind::samples ? "samples" : "binned")},
                  {"points", static_cast<std::int64_t>(report.points)},
                  {"gamma", report.fit.gamma},
                  {"gamma_uncertainty", report.fit.gamma_uncertainty},
                  {"objective", report.fit.objective},
                  {"reduced_chi_square", report.fit.reduced_chi_square},
                  {"bins_used", static_cast<std::int64_t>(report.fit.bins_used)}};
    Table curve{{"K", "data_density", "fit_density", "universal_density"}, {}};
    for (std::size_t i = 0; i < xs.size(); ++i)
      curve.add_row({xs[i], data[i], gamma_pdf(xs[i], report.fit.gamma), universal_pdf(xs[i])});
    report.output.files.push_back(*cmd.out / ("fit_curve" + extension(cmd.format)));
    write_table_file(report.output.files.back(), json, meta, curve);
  }
  return report;
}

}  // namespace levelflow
