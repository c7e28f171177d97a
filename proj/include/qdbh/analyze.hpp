#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "qdbh/scaling.hpp"
#include "qdbh/svg.hpp"
#include "qdbh/sweep.hpp"

namespace qdbh {

inline ScalingDataset dataset_from_records(const std::vector<PointRecord>& recs, bool include_unconverged = false) {
  ScalingDataset ds;
  ds.include_unconverged = include_unconverged;
  std::set<int> dims;
  for (const auto& r : recs) {
    if (!r.ok()) continue;
    dims.insert(r.dimensionality);
    ds.records.push_back({r.size, r.length, r.n_sites, r.g, r.parity, r.entropy, r.converged});
  }
  if (dims.size() > 1) throw Error("analyze: store mixes 1D and 2D records; filter by config hash");
  ds.dimensionality = dims.empty() ? 1 : *dims.begin();
  ds.exponents = Exponents::for_lattice(ds.dimensionality);
  return ds;
}

struct AnalysisReport {
  json collapse;
  json entropy_fit;
  std::vector<std::string> files;
  std::vector<std::string> problems;
};

/// Crossing, collapse and entropy-peak analysis of the store contents plus the
/// three figure panels as SVG.
inline AnalysisReport analyze(const SweepStore& store, const std::filesystem::path& out_dir, const std::string& hash = "",
                              std::optional<Exponents> exponents = std::nullopt) {
  const auto recs = store.records(hash);
  AnalysisReport rep;
  if (recs.empty()) throw Error("analyze: the store at " + store.dir().string() + " has no records (run 'sweep' first)");
  ScalingDataset ds = dataset_from_records(recs);
  if (exponents) ds.exponents = *exponents;
  const auto curves = ds.curves();
  if (curves.size() < 2)
    throw Error("analyze: need at least 2 lattice sizes with converged records, have " + std::to_string(curves.size()));
  std::filesystem::create_directories(out_dir);

  std::optional<double> gc;
  rep.collapse = {{"exponents", {{"beta", ds.exponents.beta}, {"nu", ds.exponents.nu}, {"name", ds.exponents.name}}}};
  try {
    auto cr = find_crossing(ds);
    gc = cr.gc;
    json pairs = json::array();
    for (const auto& c : cr.crossings) pairs.push_back({{"a", c.size_a}, {"b", c.size_b}, {"G_c", c.g}});
    rep.collapse["G_c"] = cr.gc;
    rep.collapse["uncertainty"] = cr.uncertainty;
    rep.collapse["crossings"] = pairs;
    rep.collapse["warnings"] = cr.warnings;
    try {
      auto fit = collapse_fit(ds, cr.gc);
      rep.collapse["residual"] = fit.residual;
      rep.collapse["trivial"] = fit.trivial;
      json master = json::array();
      for (auto [x, y] : fit.samples) master.push_back({x, y});
      rep.collapse["master_curve"] = master;
    } catch (const std::exception& e) {
      rep.problems.push_back(e.what());
    }
  } catch (const std::exception& e) {
    rep.problems.push_back(e.what());
    rep.collapse["error"] = e.what();
  }
  try {
    auto ef = fit_entropy_peak(ds);
    json peaks = json::array();
    for (const auto& p : ef.peaks)
      peaks.push_back({{"size", p.size_label}, {"n_sites", p.n_sites}, {"G_peak", p.g_peak}, {"S_max", p.s_max}});
    rep.entropy_fit = {{"kappa", ef.kappa}, {"prefactor", ef.prefactor}, {"r2", ef.r2},
                       {"underdetermined", ef.underdetermined}, {"peaks", peaks}};
  } catch (const std::exception& e) {
    rep.problems.push_back(e.what());
    rep.entropy_fit = {{"error", e.what()}};
  }

  auto write_json = [&](const std::string& name, const json& j) {
    std::ofstream(out_dir / name) << j.dump(2) << "\n";
    rep.files.push_back((out_dir / name).string());
  };
  write_json("collapse.json", rep.collapse);
  write_json("entropy_fit.json", rep.entropy_fit);

  {
    std::ofstream csv(out_dir / "rescaled.csv");
    csv << "x,y,size\n";
    for (const auto& p : rescale(ds, gc.value_or(0.0))) csv << p.x << "," << p.y << "," << p.size_label << "\n";
    rep.files.push_back((out_dir / "rescaled.csv").string());
  }

  svg::Plot ent{"Entropy", "G/gamma", "S", false, false};
  svg::Plot par{"Parity", "G/gamma", "Pi", false, false};
  svg::Plot col{"Rescaled parity", "(G - G_c)/gamma L^(1/nu)", "Pi L^(beta/nu)", false, false};
  svg::Plot cross{"Rescaled parity vs G", "G/gamma", "Pi L^(beta/nu)", false, false};
  for (const auto& [label, c] : curves) {
    svg::Series se{label, {}}, sp{label, {}}, sc{label, {}}, sx{label, {}};
    for (const auto& r : c) {
      se.points.emplace_back(r.g, r.entropy);
      sp.points.emplace_back(r.g, r.parity);
      const auto rp = rescale_point(r, gc.value_or(0.0), ds.exponents);
      sc.points.emplace_back(rp.x, rp.y);
      sx.points.emplace_back(r.g, rp.y);
    }
    ent.series.push_back(se);
    par.series.push_back(sp);
    col.series.push_back(sc);
    cross.series.push_back(sx);
  }
  if (gc) {
    cross.vline = *gc;
    cross.vline_label = "G_c = " + format_g(*gc);
    col.vline = 0.0;
  }
  for (auto& [plot, name] : std::vector<std::pair<svg::Plot*, std::string>>{
           {&ent, "entropy.svg"}, {&par, "parity.svg"}, {&col, "collapse.svg"}, {&cross, "crossing.svg"}}) {
    plot->write((out_dir / name).string());
    rep.files.push_back((out_dir / name).string());
  }
  return rep;
}

}  // namespace qdbh
