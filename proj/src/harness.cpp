#include "hybridmc/harness.hpp"

#include "hybridmc/csv.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace hmc {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "+inf") return kInf;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: '" + s + "'");
  }
}

std::uint64_t to_count(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    std::size_t pos = 0;
    // accept 1e6 style counts
    if (s.find_first_of(".eE") != std::string::npos) {
      const double v = std::stod(s, &pos);
      if (pos != s.size() || v < 0 || v != std::floor(v) || v > 1.8e19) throw std::invalid_argument(s);
      return static_cast<std::uint64_t>(v);
    }
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a nonnegative integer: '" + s + "'");
  }
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scene",
       {"profile", "h", "mfp", "albedo_variant", "albedo_value", "source_variant", "detector_center",
        "detector_half_width"}},
      {"chain",
       {"chain", "q_s", "q_v", "N", "master_seed", "batches", "threads", "weight_cutoff",
        "max_path_length"}},
      {"sweep", {"h", "mfp", "q_s", "q_v", "m", "chains"}},
      {"output", {"dir", "trace_cap"}},
      {"fom", {"C", "rel_eps", "calibrate_h"}},
      {"adjoint", {"tol", "max_iter"}},
  };
  return keys;
}

template <class F>
void with(const pt::ptree& tree, const std::string& section, const std::string& key, F&& f) {
  const auto sec = tree.get_child_optional(section);
  if (!sec) return;
  const auto v = sec->get_optional<std::string>(key);
  if (v) f(section + "." + key, *v);
}

bool sigma_positive(double mfp) { return !std::isinf(mfp); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

void write_tally(const fs::path& p, const Tally& t) {
  auto out = open_out(p);
  out << "n,hits,cutoff,capped,dead,sum_w,sum_w2,mean,m2,lost_weight\n";
  out << t.n << ',' << t.hits << ',' << t.cutoff << ',' << t.capped << ',' << t.dead << ',' << fmt(t.sum_w)
      << ',' << fmt(t.sum_w2) << ',' << fmt(t.mean) << ',' << fmt(t.m2) << ',' << fmt(t.lost_weight) << '\n';
}

}  // namespace

std::string format_value(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(to_number("list", item));
  }
  return out;
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError("unknown key '" + section + "." + kv.first + "'");
  }

  RunConfig c;
  with(tree, "scene", "profile", [&](const auto& k, const auto& v) {
    try {
      c.scene.profile = parse_profile(trim(v));
    } catch (const std::exception& e) {
      throw ConfigError(k + ": " + e.what());
    }
  });
  with(tree, "scene", "h", [&](const auto& k, const auto& v) { c.scene.h = to_number(k, v); });
  with(tree, "scene", "mfp", [&](const auto& k, const auto& v) { c.scene.mfp_over_diam = to_number(k, v); });
  with(tree, "scene", "albedo_variant", [&](const auto& k, const auto& v) {
    try {
      c.scene.albedo = parse_albedo_variant(trim(v));
    } catch (const std::exception& e) {
      throw ConfigError(k + ": " + e.what());
    }
  });
  with(tree, "scene", "albedo_value", [&](const auto& k, const auto& v) { c.scene.albedo_value = to_number(k, v); });
  with(tree, "scene", "source_variant", [&](const auto& k, const auto& v) {
    try {
      c.scene.source = parse_source_variant(trim(v));
    } catch (const std::exception& e) {
      throw ConfigError(k + ": " + e.what());
    }
  });
  with(tree, "scene", "detector_center", [&](const auto& k, const auto& v) { c.scene.detector.center = to_number(k, v); });
  with(tree, "scene", "detector_half_width",
       [&](const auto& k, const auto& v) { c.scene.detector.half_width = to_number(k, v); });

  with(tree, "chain", "chain", [&](const auto& k, const auto& v) {
    try {
      c.chain.chain = parse_chain(trim(v));
    } catch (const std::exception& e) {
      throw ConfigError(k + ": " + e.what());
    }
  });
  with(tree, "chain", "q_s", [&](const auto& k, const auto& v) { c.chain.q_s = to_number(k, v); });
  with(tree, "chain", "q_v", [&](const auto& k, const auto& v) { c.chain.q_v = to_number(k, v); });
  with(tree, "chain", "N", [&](const auto& k, const auto& v) { c.N = to_count(k, v); });
  with(tree, "chain", "master_seed", [&](const auto& k, const auto& v) { c.master_seed = to_count(k, v); });
  with(tree, "chain", "batches", [&](const auto& k, const auto& v) { c.batches = static_cast<int>(to_count(k, v)); });
  with(tree, "chain", "threads", [&](const auto& k, const auto& v) { c.threads = static_cast<int>(to_count(k, v)); });
  with(tree, "chain", "weight_cutoff", [&](const auto& k, const auto& v) { c.chain.weight_cutoff = to_number(k, v); });
  with(tree, "chain", "max_path_length",
       [&](const auto& k, const auto& v) { c.chain.max_path_length = static_cast<int>(to_count(k, v)); });

  with(tree, "sweep", "h", [&](const auto&, const auto& v) { c.sweep_h = parse_list(v); });
  with(tree, "sweep", "mfp", [&](const auto&, const auto& v) { c.sweep_mfp = parse_list(v); });
  with(tree, "sweep", "q_s", [&](const auto&, const auto& v) { c.sweep_q_s = parse_list(v); });
  with(tree, "sweep", "q_v", [&](const auto&, const auto& v) { c.sweep_q_v = parse_list(v); });
  with(tree, "sweep", "m", [&](const auto&, const auto& v) { c.sweep_m = parse_list(v); });
  with(tree, "sweep", "chains", [&](const auto& k, const auto& v) {
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      try {
        c.sweep_chains.push_back(parse_chain(trim(item)));
      } catch (const std::exception& e) {
        throw ConfigError(k + ": " + e.what());
      }
    }
  });

  with(tree, "output", "dir", [&](const auto&, const auto& v) { c.out_dir = trim(v); });
  with(tree, "output", "trace_cap", [&](const auto& k, const auto& v) { c.trace_cap = to_count(k, v); });

  with(tree, "fom", "C", [&](const auto& k, const auto& v) { c.fom_C = to_number(k, v); });
  with(tree, "fom", "rel_eps", [&](const auto& k, const auto& v) { c.fom_rel_eps = to_number(k, v); });
  with(tree, "fom", "calibrate_h", [&](const auto&, const auto& v) { c.calibrate_h = parse_list(v); });

  with(tree, "adjoint", "tol", [&](const auto& k, const auto& v) { c.adjoint.tol = to_number(k, v); });
  with(tree, "adjoint", "max_iter",
       [&](const auto& k, const auto& v) { c.adjoint.max_iter = static_cast<int>(to_count(k, v)); });
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void RunConfig::validate() const {
  auto check_h = [](double h) {
    if (!(h > 0.0 && h <= 0.5)) throw ConfigError("h must lie in (0, 0.5], got " + format_value(h));
  };
  auto check_mfp = [](double m) {
    if (!(m > 0.0)) throw ConfigError("mfp must be positive or inf, got " + format_value(m));
  };
  auto check_q = [](const char* name, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1], got " + format_value(q));
  };
  check_h(scene.h);
  check_mfp(scene.mfp_over_diam);
  if (!(scene.albedo_value >= 0.0 && scene.albedo_value <= 1.0))
    throw ConfigError("albedo_value must lie in [0, 1]");
  const double lo = scene.detector.center - scene.detector.half_width;
  const double hi = scene.detector.center + scene.detector.half_width;
  if (!(scene.detector.half_width > 0.0) || !(lo > scene.box.y_floor) || !(hi < scene.box.y_top))
    throw ConfigError("detector must lie strictly inside the right wall (" + format_value(scene.box.y_floor) +
                      ", " + format_value(scene.box.y_top) + ")");
  check_q("q_s", chain.q_s);
  check_q("q_v", chain.q_v);
  if (!(chain.weight_cutoff > 0.0)) throw ConfigError("weight_cutoff must be positive");
  if (chain.max_path_length < 2) throw ConfigError("max_path_length must be at least 2");
  if (N < 2) throw ConfigError("N must be at least 2");
  if (batches < 1) throw ConfigError("batches must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  for (double h : sweep_h) check_h(h);
  for (double m : sweep_mfp) check_mfp(m);
  for (double q : sweep_q_s) check_q("sweep q_s", q);
  for (double q : sweep_q_v) check_q("sweep q_v", q);
  for (double m : sweep_m)
    if (!(m > 0.0)) throw ConfigError("sweep m must be positive or inf");
  if (fom_C && !(*fom_C >= 0.0)) throw ConfigError("fom C must be nonnegative");
  if (!(fom_rel_eps > 0.0)) throw ConfigError("fom rel_eps must be positive");
  if (calibrate_h.empty()) throw ConfigError("calibrate_h needs at least one value");
  for (double h : calibrate_h) check_h(h);
  if (!(adjoint.tol > 0.0) || adjoint.max_iter < 1) throw ConfigError("adjoint tol/max_iter out of range");

  // regularized SAI with q_s = 0 is pure SAI and biased inside an atmosphere
  const std::vector<double> mfps = sweep_mfp.empty() ? std::vector<double>{scene.mfp_over_diam} : sweep_mfp;
  const std::vector<double> qss = sweep_q_s.empty() ? std::vector<double>{chain.q_s} : sweep_q_s;
  const std::vector<ChainKind> chains = sweep_chains.empty() ? std::vector<ChainKind>{chain.chain} : sweep_chains;
  for (ChainKind ck : chains) {
    if (ck != ChainKind::Regularized) continue;
    for (double m : mfps)
      for (double q : qss)
        if (q == 0.0 && sigma_positive(m))
          throw ConfigError("regularized chain with q_s = 0 is biased when the atmosphere is present");
  }
}

Scene make_scene(const RunConfig& cfg) { return build_scene(cfg.scene); }

RunOptions run_options(const RunConfig& cfg) {
  RunOptions o;
  o.N = cfg.N;
  o.master_seed = cfg.master_seed;
  o.threads = cfg.threads;
  o.batches = cfg.batches;
  o.trace_cap = cfg.trace_cap;
  return o;
}

FomReport make_report(const RunConfig& cfg, const Tally& tally, double tau, double t0, double m) {
  const Estimate e = estimate(tally);
  FomReport r;
  r.chain = to_string(cfg.chain.chain);
  r.h = cfg.scene.h;
  r.mfp_over_diam = cfg.scene.mfp_over_diam;
  r.q_s = cfg.chain.q_s;
  r.q_v = cfg.chain.q_v;
  r.N = tally.n;
  r.mean = e.mean;
  r.variance = e.variance;
  r.rms = e.rms;
  r.tau_sec = tau;
  r.T0_sec = t0;
  r.m = m;
  return r;
}

int cmd_solve_adjoint(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const Scene scene = make_scene(cfg);
  const AdjointTable table = build_adjoint(scene, cfg.adjoint);
  {
    auto out = open_out(cfg.out_dir / "adjoint.csv");
    table.write_csv(out);
  }
  {
    auto out = open_out(cfg.out_dir / "mesh.csv");
    scene.mesh->write_csv(out);
  }
  {
    auto out = open_out(cfg.out_dir / "adjoint_timing.csv");
    out << "h,segments,iterations,residual,assemble_sec,solve_sec,T0_sec,ballistic_signal\n";
    out << fmt(table.h()) << ',' << table.size() << ',' << table.iterations() << ',' << fmt(table.residual())
        << ',' << fmt(table.assemble_sec) << ',' << fmt(table.solve_sec) << ',' << fmt(table.t0()) << ','
        << fmt(table.ballistic_signal()) << '\n';
  }
  std::cout << "segments " << table.size() << ", iterations " << table.iterations() << ", T0 "
            << table.t0() << " s, ballistic signal " << table.ballistic_signal() << '\n';
  return kOk;
}

namespace {

void run_point(const RunConfig& cfg, const fs::path& csv_name) {
  const Scene scene = make_scene(cfg);
  std::optional<AdjointTable> table;
  if (needs_adjoint(cfg.chain.chain)) table.emplace(build_adjoint(scene, cfg.adjoint));
  const RunResult res = run_chain(scene, table ? &*table : nullptr, cfg.chain, run_options(cfg));
  const double m = cfg.sweep_m.empty() ? kInf : cfg.sweep_m.front();
  const FomReport rep = make_report(cfg, res.tally, res.tau, table ? table->t0() : 0.0, m);
  {
    auto out = open_out(cfg.out_dir / csv_name);
    write_fom_header(out);
    write_fom_row(out, rep);
  }
  write_tally(cfg.out_dir / "tally.csv", res.tally);
  if (cfg.trace_cap > 0) {
    auto out = open_out(cfg.out_dir / "trace.csv");
    write_trace_header(out);
    for (std::size_t i = 0; i < res.traces.size(); ++i) write_trace(out, i, res.traces[i]);
  }
  std::cout << rep.chain << ": mean " << rep.mean << " +- " << rep.rms << ", variance " << rep.variance
            << ", hits " << res.tally.hits << "/" << res.tally.n << '\n';
}

double calibrate_C(const RunConfig& cfg, std::vector<double>* t0s = nullptr) {
  std::vector<double> t0;
  for (double h : cfg.calibrate_h) {
    RunConfig c = cfg;
    c.scene.h = h;
    const Scene scene = make_scene(c);
    t0.push_back(build_adjoint(scene, cfg.adjoint).t0());
  }
  if (t0s) *t0s = t0;
  return fit_cost_constant(cfg.calibrate_h.data(), t0.data(), static_cast<int>(t0.size()));
}

}  // namespace

int cmd_run(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  run_point(cfg, "run.csv");
  return kOk;
}

int cmd_calibrate(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  std::vector<double> t0;
  const double C = calibrate_C(cfg, &t0);
  auto out = open_out(cfg.out_dir / "calibration.csv");
  out << "h,T0_sec,C\n";
  for (std::size_t i = 0; i < t0.size(); ++i)
    out << fmt(cfg.calibrate_h[i]) << ',' << fmt(t0[i]) << ',' << fmt(C) << '\n';
  std::cout << "C = " << C << " s\n";
  return kOk;
}

int cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  if (cfg.sweep_empty()) {
    run_point(cfg, "sweep.csv");
    return kOk;
  }
  const auto or_single = [](const std::vector<double>& v, double d) { return v.empty() ? std::vector<double>{d} : v; };
  const auto hs = or_single(cfg.sweep_h, cfg.scene.h);
  const auto mfps = or_single(cfg.sweep_mfp, cfg.scene.mfp_over_diam);
  const auto qss = or_single(cfg.sweep_q_s, cfg.chain.q_s);
  const auto qvs = or_single(cfg.sweep_q_v, cfg.chain.q_v);
  const auto ms = or_single(cfg.sweep_m, kInf);
  const auto chains = cfg.sweep_chains.empty() ? std::vector<ChainKind>{cfg.chain.chain} : cfg.sweep_chains;

  double C = 0.0;
  if (std::any_of(ms.begin(), ms.end(), [](double m) { return !std::isinf(m); }))
    C = cfg.fom_C ? *cfg.fom_C : calibrate_C(cfg);

  auto csv = open_out(cfg.out_dir / "sweep.csv");
  write_fom_header(csv);
  std::ofstream failures;
  int failed = 0;
  auto fail = [&](const std::string& where, const std::string& why) {
    if (!failures.is_open()) {
      failures = open_out(cfg.out_dir / "failures.csv");
      failures << "point,error\n";
    }
    failures << where << ",\"" << why << "\"\n";
    ++failed;
  };

  // plot data, keyed by file name
  std::map<std::string, std::vector<std::pair<double, double>>> plots;

  for (double h : hs) {
    for (double mfp : mfps) {
      RunConfig point = cfg;
      point.scene.h = h;
      point.scene.mfp_over_diam = mfp;
      const std::string where = "h=" + format_value(h) + " mfp=" + format_value(mfp);

      std::optional<Scene> scene;
      std::optional<AdjointTable> table;
      std::string setup_error;
      try {
        scene.emplace(make_scene(point));
        table.emplace(build_adjoint(*scene, cfg.adjoint));
      } catch (const std::exception& e) {
        setup_error = e.what();
      }

      struct Result {
        Tally tally;
        double tau = 0.0;
        std::string error;
      };
      std::map<std::tuple<int, double, double>, Result> cache;
      auto run_cached = [&](ChainKind ck, double q_s, double q_v) -> const Result& {
        double ks = -1.0, kv = -1.0;
        if (ck == ChainKind::Heuristic) kv = q_v;
        if (ck == ChainKind::Regularized) ks = q_s, kv = q_v;
        const auto key = std::make_tuple(static_cast<int>(ck), ks, kv);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        Result r;
        if (!setup_error.empty()) {
          r.error = setup_error;
        } else {
          try {
            ChainParams params = cfg.chain;
            params.chain = ck;
            params.q_s = q_s;
            params.q_v = q_v;
            RunOptions opt = run_options(point);
            opt.trace_cap = 0;
            const RunResult rr = run_chain(*scene, &*table, params, opt);
            r.tally = rr.tally;
            r.tau = rr.tau;
          } catch (const std::exception& e) {
            r.error = e.what();
          }
        }
        return cache.emplace(key, std::move(r)).first->second;
      };

      const Result& bench = run_cached(ChainKind::SurvivalBiased, 1.0, 1.0);
      FomReport sb_rep;
      if (bench.error.empty()) {
        RunConfig c = point;
        c.chain.chain = ChainKind::SurvivalBiased;
        sb_rep = make_report(c, bench.tally, bench.tau, 0.0, kInf);
      }
      const bool sigma_zero = std::isinf(mfp);
      double best_rms = kInf, best_mean = 0.0;

      for (double q_s : qss) {
        for (double q_v : qvs) {
          for (ChainKind ck : chains) {
            RunConfig c = point;
            c.chain.chain = ck;
            c.chain.q_s = q_s;
            c.chain.q_v = q_v;
            const Result& res = run_cached(ck, q_s, q_v);
            const std::string tag = std::string(to_string(ck)) + " q_s=" + format_value(q_s) +
                                    " q_v=" + format_value(q_v);
            std::optional<FomReport> base;
            std::string error = res.error;
            if (error.empty()) {
              try {
                base = make_report(c, res.tally, res.tau, needs_adjoint(ck) ? table->t0() : 0.0, kInf);
              } catch (const std::exception& e) {
                error = e.what();
              }
            }
            if (!error.empty()) {
              fail(where + " " + tag, error);
              for (double m : ms) {
                FomReport r;
                r.chain = to_string(ck);
                r.h = h;
                r.mfp_over_diam = mfp;
                r.q_s = q_s;
                r.q_v = q_v;
                r.N = 0;
                r.mean = r.variance = r.rms = r.tau_sec = r.T0_sec = std::numeric_limits<double>::quiet_NaN();
                r.m = m;
                write_fom_row(csv, r);
              }
              continue;
            }
            const bool unbiased = ck != ChainKind::PureSai || sigma_zero;
            if (unbiased && base->rms < best_rms && base->mean > 0.0) {
              best_rms = base->rms;
              best_mean = base->mean;
            }
            std::string vkey = "variance_vs_h_" + std::string(to_string(ck)) + "_mfp" + format_value(mfp);
            if (ck == ChainKind::Regularized) vkey += "_qs" + format_value(q_s);
            if (ck == ChainKind::Regularized || ck == ChainKind::Heuristic) vkey += "_qv" + format_value(q_v);
            auto& vplot = plots[vkey + ".dat"];
            if (vplot.empty() || vplot.back().first != h) vplot.emplace_back(h, base->variance);

            for (double m : ms) {
              FomReport r = *base;
              r.m = m;
              if (bench.error.empty()) {
                const double eps = cfg.fom_rel_eps * sb_rep.mean;
                r.speedup = speedup(sb_rep, r, eps, m, needs_adjoint(ck) ? C : 0.0);
              }
              write_fom_row(csv, r);
              if (ck == ChainKind::Regularized)
                plots["speedup_mfp" + format_value(mfp) + "_m" + format_value(m) + "_qv" + format_value(q_v) +
                      (hs.size() > 1 ? "_h" + format_value(h) : std::string()) + ".dat"]
                    .emplace_back(q_s, r.speedup);
            }
          }
        }
      }
      if (table && std::isfinite(best_rms))
        plots["deterministic_error_vs_h_mfp" + format_value(mfp) + ".dat"].emplace_back(
            h, deterministic_error(best_mean, table->ballistic_signal()));
      csv.flush();
    }
  }

  for (const auto& [name, data] : plots) {
    auto out = open_out(cfg.out_dir / name);
    for (const auto& [x, y] : data) out << fmt(x) << ' ' << fmt(y) << '\n';
  }
  return failed > 0 ? kPartialSweep : kOk;
}

}  // namespace hmc
