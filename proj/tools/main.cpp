// Command-line driver: tuning, partitions, distortion measurements and
// the batch experiments, with CSV/JSON/SVG outputs.

#include "circlelab/circlelab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace circlelab;
using nlohmann::ordered_json;

namespace {

struct SingleMapArgs {
  std::string spec_path;
  std::string target = "golden";
  int depth = 12;
  long bits = 256;
  long resolution = 0;  // 0: bits - 96
  std::string outdir = "out";
};

void add_single_map_options(CLI::App* cmd, SingleMapArgs& args) {
  cmd->add_option("--spec", args.spec_path, "map spec TOML file")->required();
  cmd->add_option("--target", args.target, "golden | silver | cf:[a0,a1,...]");
  cmd->add_option("--depth", args.depth, "combinatorial depth to certify");
  cmd->add_option("--bits", args.bits, "working precision in bits");
  cmd->add_option("--resolution", args.resolution, "bracket resolution in bits");
  cmd->add_option("--out", args.outdir, "output directory");
}

ordered_json tune_json(const TuneResult& r) {
  return ordered_json{{"a_star", r.a_star.str()},
                      {"verified_depth", r.verified_depth},
                      {"bracket_lo", r.bracket_lo.str()},
                      {"bracket_hi", r.bracket_hi.str()},
                      {"bracket_width", r.bracket_width().str_plain(12)},
                      {"compare_calls", r.compare_calls},
                      {"converged", r.converged},
                      {"note", r.note}};
}

// Loads the spec and produces a map with certified combinatorics: a
// stored offset is verified, otherwise the family is tuned.
struct PreparedMap {
  std::shared_ptr<TrigProductMap> map;
  ConvergentTable table;
  ordered_json tuning;
};

PreparedMap prepare_map(const SingleMapArgs& args) {
  MapSpec spec = load_map_spec(args.spec_path, args.bits);
  ConvergentTable table = convergents(target_cf(args.target, args.depth + 4));
  const long resolution = args.resolution > 0 ? args.resolution : args.bits - 96;
  TrigProductMap family(spec);
  PreparedMap out{nullptr, table, {}};
  if (!spec.offset.is_zero()) {
    CompareVerdict v = compare(family, table, args.depth);
    if (!v.consistent())
      throw std::runtime_error("stored offset is not consistent with the target to depth " +
                               std::to_string(args.depth) + " (first violation at n=" +
                               std::to_string(v.level) + ")");
    out.map = std::make_shared<TrigProductMap>(family);
    out.tuning = ordered_json{{"a_star", spec.offset.str()}, {"verified_depth", args.depth},
                              {"converged", true}, {"note", "offset taken from spec"}};
  } else {
    TuneResult r = tune(family, table, args.depth, resolution);
    if (!r.converged) throw std::runtime_error("tuning failed: " + r.note);
    out.map = std::make_shared<TrigProductMap>(family.with_offset(r.a_star));
    out.tuning = tune_json(r);
  }
  return out;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << body;
}

int run_tune(const SingleMapArgs& args, const std::string& json_out) {
  MapSpec spec = load_map_spec(args.spec_path, args.bits);
  ConvergentTable table = convergents(target_cf(args.target, args.depth + 4));
  const long resolution = args.resolution > 0 ? args.resolution : args.bits - 96;
  TuneResult r = tune(TrigProductMap(spec), table, args.depth, resolution);
  ordered_json j = tune_json(r);
  if (json_out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(json_out, j.dump(2) + "\n");
  }
  return r.converged ? 0 : 1;
}

int run_partition(const SingleMapArgs& args, int level) {
  PreparedMap pm = prepare_map(args);
  PartitionSet ps(pm.map, default_base(pm.map->spec()), pm.table);
  auto p = ps.level(level);
  PartitionReport rep = validate_partition(*p);

  namespace fs = std::filesystem;
  fs::create_directories(args.outdir);
  {
    std::ofstream os(args.outdir + "/partition.csv");
    os << "index,generation,left,length\n";
    for (std::size_t i = 0; i < p->atoms.size(); ++i)
      os << i << ',' << p->atoms[i].generation << ',' << p->atoms[i].left.value.str_plain(30)
         << ',' << p->atoms[i].length.str_plain(30) << '\n';
  }
  {
    std::vector<std::pair<double, double>> cells;
    std::vector<int> gen;
    for (const auto& a : p->atoms) {
      cells.emplace_back(a.left.value.to_double(), a.length.to_double());
      gen.push_back(a.generation);
    }
    std::ofstream os(args.outdir + "/partition.svg");
    svg::write_strip_chart(os, "dynamical partition, level " + std::to_string(level), cells, gen);
  }
  ordered_json j{{"level", level},
                 {"atoms", p->atoms.size()},
                 {"count_ok", rep.count_ok},
                 {"structure_ok", rep.structure_ok},
                 {"disjoint_ok", rep.disjoint_ok},
                 {"measure_ok", rep.measure_ok},
                 {"sum_defect", rep.sum_defect.str_plain(6)},
                 {"tuning", pm.tuning}};
  std::cout << j.dump(2) << '\n';
  return rep.ok() ? 0 : 1;
}

int run_crd(const SingleMapArgs& args, int level_lo, int level_hi, long budget) {
  PreparedMap pm = prepare_map(args);
  PartitionSet ps(pm.map, default_base(pm.map->spec()), pm.table);
  namespace fs = std::filesystem;
  fs::create_directories(args.outdir);
  std::ofstream os(args.outdir + "/crd_atoms.csv");
  os << "level,position,generation,orbit_index,k_max,max_crd\n";
  ordered_json summary = ordered_json::array();
  Real ceiling = crd_ceiling(*pm.map);
  bool all_below = true;
  for (int n = level_lo; n <= level_hi; ++n) {
    std::vector<AtomCrdRow> rows;
    CrdScanResult scan = crd_return_map_max(ps, n, budget, &rows);
    for (const auto& r : rows)
      os << n << ',' << r.position << ',' << r.generation << ',' << r.orbit_index << ','
         << r.k_max << ',' << r.max_crd << '\n';
    if (scan.max_crd > ceiling) all_below = false;
    summary.push_back({{"level", n},
                       {"max_crd", scan.max_crd.str_plain(16)},
                       {"ceiling", ceiling.str_plain(16)},
                       {"admissible_pairs", scan.admissible_pairs},
                       {"evaluated_pairs", scan.evaluated_pairs},
                       {"strided", scan.strided}});
  }
  ordered_json j{{"levels", summary}, {"all_below_ceiling", all_below}};
  write_text(args.outdir + "/crd_summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return all_below ? 0 : 1;
}

int run_schwarz(const SingleMapArgs& args, int level_lo, int level_hi, int grid) {
  PreparedMap pm = prepare_map(args);
  PartitionSet ps(pm.map, default_base(pm.map->spec()), pm.table);
  namespace fs = std::filesystem;
  fs::create_directories(args.outdir);
  std::ofstream os(args.outdir + "/schwarz_grid.csv");
  os << "level,point_index,worst_Sf\n";
  ordered_json summary = ordered_json::array();
  int empirical_n1 = -1;
  for (int n = level_lo; n <= level_hi; ++n) {
    NegativeSchwarzianReport rep = verify_negative_schwarzian(ps, n, grid);
    for (std::size_t i = 0; i < rep.worst_In_per_point.size(); ++i)
      os << n << ',' << i << ',' << rep.worst_In_per_point[i].str_plain(12) << '\n';
    const bool neg = rep.all_negative_In && rep.all_negative_In1;
    if (neg && empirical_n1 < 0) empirical_n1 = n;
    if (!neg) empirical_n1 = -1;
    summary.push_back({{"level", n},
                       {"zero_family", rep.zero_family},
                       {"all_negative_In", rep.all_negative_In},
                       {"all_negative_In1", rep.all_negative_In1},
                       {"worst", rep.worst.str_plain(12)},
                       {"samples", rep.samples}});
  }
  ordered_json j{{"levels", summary}, {"empirical_n1", empirical_n1}};
  write_text(args.outdir + "/schwarz_summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_c1(const SingleMapArgs& args, int level_lo, int level_hi, int grid) {
  PreparedMap pm = prepare_map(args);
  PartitionSet ps(pm.map, default_base(pm.map->spec()), pm.table);
  namespace fs = std::filesystem;
  fs::create_directories(args.outdir);
  std::ofstream os(args.outdir + "/c1.csv");
  os << "level,K_n,c1_norm\n";
  double worst = 0;
  for (int n = level_lo; n <= level_hi; ++n) {
    C1Report rep = c1_bound_constant(ps, n, grid);
    os << n << ',' << rep.K_n.str_plain(16) << ',' << rep.c1_norm.str_plain(16) << '\n';
    worst = std::max(worst, rep.K_n.to_double());
  }
  ordered_json j{{"max_K_n", worst}};
  write_text(args.outdir + "/c1_summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_decompose(const SingleMapArgs& args, int level, long atom, int n1, double epsilon) {
  PreparedMap pm = prepare_map(args);
  PartitionSet ps(pm.map, default_base(pm.map->spec()), pm.table);
  auto pn = ps.level(level);
  long pos = atom >= 0 ? atom
                       : pn->position_of_left_index[level % 2 == 0 ? 0
                                                                   : ps.table().q_long(level)];
  long k = ps.table().q_long(level + 1) - 1;
  int ambient = n1 > 0 ? n1 : std::max(1, level - 6);
  DecompositionTrace trace =
      decompose(ps, level, pos, k, Real::of(epsilon, pm.map->bits()), ambient, 16);

  namespace fs = std::filesystem;
  fs::create_directories(args.outdir);
  std::ofstream os(args.outdir + "/decompose.csv");
  os << "block,kind,start,length,distortion,critical_index,worst_schwarzian\n";
  for (std::size_t i = 0; i < trace.blocks.size(); ++i) {
    const auto& blk = trace.blocks[i];
    const char* kind = blk.kind == DecompositionBlock::Kind::Diffeo        ? "diffeo"
                       : blk.kind == DecompositionBlock::Kind::CriticalStep ? "critical"
                                                                            : "neg_schwarz";
    os << i << ',' << kind << ',' << blk.start << ',' << blk.length << ',';
    if (blk.distortion) os << blk.distortion->str_plain(12);
    os << ',';
    if (blk.critical_index) os << *blk.critical_index;
    os << ',';
    if (blk.worst_schwarzian) os << blk.worst_schwarzian->str_plain(12);
    os << '\n';
  }
  ordered_json j{{"level", level},
                 {"atom_position", pos},
                 {"iterates", k},
                 {"diffeo_blocks", trace.diffeo_count},
                 {"critical_steps", trace.critical_count},
                 {"neg_schwarz_blocks", trace.neg_schwarz_count},
                 {"counts_within_bounds", trace.counts_within_bounds},
                 {"distortion_within_epsilon", trace.distortion_within_epsilon}};
  write_text(args.outdir + "/decompose_summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return 0;
}

ExperimentConfig load_config_or_default(const std::string& path, const std::string& outdir) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  if (cfg.maps.empty()) cfg.maps = default_map_suite();
  if (!outdir.empty()) cfg.outdir = outdir;
  return cfg;
}

int run_experiment(const std::string& which, const std::string& config_path,
                   const std::string& outdir, int qs_level) {
  ExperimentConfig cfg = load_config_or_default(config_path, outdir);
  std::vector<TunedMap> suite = tune_suite(cfg);
  BoundsReport rep;
  if (which == "beau") {
    rep = run_beau(cfg, suite);
  } else if (which == "crduni") {
    rep = run_crd_universal(cfg, suite);
  } else if (which == "scaling") {
    rep = run_scaling(cfg, suite);
  } else if (which == "qs") {
    const int level = qs_level > 0 ? qs_level : cfg.level_hi - 1;
    for (std::size_t i = 0; i < suite.size(); ++i)
      for (std::size_t j = i + 1; j < suite.size(); ++j) {
        if (!suite[i].ok || !suite[j].ok) continue;
        if (suite[i].map->num_critical() != suite[j].map->num_critical()) continue;
        ConjugacyEstimate est = run_qs(suite[i], suite[j], level);
        rep.qs_rows.push_back({est.pair_id, est.level, est.sigma_max});
      }
  } else {
    rep = run_full_report(cfg, suite);
  }
  emit_report(rep, cfg.outdir);
  int failed = 0;
  for (const auto& a : rep.assertions)
    if (!a.pass) ++failed;
  std::cout << "report written to " << cfg.outdir << " (" << rep.assertions.size()
            << " assertions, " << failed << " failed)\n";
  return rep.hard_failure || failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for multicritical circle maps"};
  app.require_subcommand(1);

  SingleMapArgs margs;
  std::string json_out;
  int level = 6, level_lo = 4, level_hi = 8, grid = 64, n1 = 0, qs_level = 0;
  long atom = -1, budget = 4000000;
  double epsilon = 0.5;
  std::string config_path, outdir;

  auto* tune_cmd = app.add_subcommand("tune", "tune the rotation parameter to a target");
  add_single_map_options(tune_cmd, margs);
  tune_cmd->add_option("-o,--output", json_out, "write the result JSON here");

  auto* part_cmd = app.add_subcommand("partition", "build and validate a dynamical partition");
  add_single_map_options(part_cmd, margs);
  part_cmd->add_option("--level", level, "partition level n")->required();

  auto* crd_cmd = app.add_subcommand("crd", "return-map cross-ratio distortion scan");
  add_single_map_options(crd_cmd, margs);
  crd_cmd->add_option("--level-lo", level_lo, "first level");
  crd_cmd->add_option("--level-hi", level_hi, "last level");
  crd_cmd->add_option("--budget", budget, "cross-ratio evaluation budget per level");

  auto* sch_cmd = app.add_subcommand("schwarz", "negative Schwarzian verification");
  add_single_map_options(sch_cmd, margs);
  sch_cmd->add_option("--level-lo", level_lo, "first level");
  sch_cmd->add_option("--level-hi", level_hi, "last level");
  sch_cmd->add_option("--grid", grid, "grid points per interval");

  auto* c1_cmd = app.add_subcommand("c1", "C1 bounds of return maps");
  add_single_map_options(c1_cmd, margs);
  c1_cmd->add_option("--level-lo", level_lo, "first level");
  c1_cmd->add_option("--level-hi", level_hi, "last level");
  c1_cmd->add_option("--grid", grid, "grid points per interval");

  auto* dec_cmd = app.add_subcommand("decompose", "diffeo/critical/neg-Schwarzian decomposition");
  add_single_map_options(dec_cmd, margs);
  dec_cmd->add_option("--level", level, "partition level n")->required();
  dec_cmd->add_option("--atom", atom, "atom position (default: the atom of I_n)");
  dec_cmd->add_option("--n1", n1, "ambient partition level (default: n - 6)");
  dec_cmd->add_option("--epsilon", epsilon, "diffeo distortion budget");

  const auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config TOML");
    cmd->add_option("--out", outdir, "output directory (overrides config)");
  };
  add_config(app.add_subcommand("beau", "real/beau bounds experiment"));
  add_config(app.add_subcommand("crduni", "universal CrD ceiling experiment"));
  add_config(app.add_subcommand("scaling", "scaling ratio experiment"));
  auto* qs_cmd = app.add_subcommand("qs", "quasi-symmetric conjugacy distortion");
  add_config(qs_cmd);
  qs_cmd->add_option("--level", qs_level, "partition level for the conjugacy");
  add_config(app.add_subcommand("report", "full report: all experiments"));

  CLI11_PARSE(app, argc, argv);

  try {
    if (tune_cmd->parsed()) return run_tune(margs, json_out);
    if (part_cmd->parsed()) return run_partition(margs, level);
    if (crd_cmd->parsed()) return run_crd(margs, level_lo, level_hi, budget);
    if (sch_cmd->parsed()) return run_schwarz(margs, level_lo, level_hi, grid);
    if (c1_cmd->parsed()) return run_c1(margs, level_lo, level_hi, grid);
    if (dec_cmd->parsed()) return run_decompose(margs, level, atom, n1, epsilon);
    for (const char* name : {"beau", "crduni", "scaling", "qs", "report"})
      if (app.get_subcommand(name)->parsed())
        return run_experiment(name, config_path, outdir, qs_level);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
