#include "pdl/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pdl/alm.hpp"
#include "pdl/common.hpp"
#include "pdl/config.hpp"
#include "pdl/eval.hpp"
#include "pdl/kernels.hpp"
#include "pdl/parallel.hpp"
#include "pdl/problems.hpp"
#include "pdl/rng.hpp"
#include "pdl/schemes.hpp"

namespace pdl::cli {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned jobs = 0;
};

cfg::KvConfig resolve_config(const CommonFlags& flags) {
  cfg::KvConfig c;
  if (!flags.config_path.empty()) {
    c = cfg::KvConfig::parse_file(flags.config_path);
  }
  if (!flags.preset_name.empty()) {
    c.merge_under(cfg::preset(flags.preset_name));
  }
  if (flags.jobs > 0) c.set("run.jobs", std::to_string(flags.jobs));
  return c;
}

unsigned jobs_of(const cfg::KvConfig& c) {
  const auto j = c.u64_or("run.jobs", 0);
  return j == 0 ? default_jobs() : static_cast<unsigned>(j);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
}

void write_snapshot(const cfg::KvConfig& c, const fs::path& dir) {
  write_text(dir / "config.snapshot", c.serialize());
}

problems::ProblemFamily family_of(const cfg::KvConfig& c) {
  problems::Dims dims;
  dims.n = c.u64("family.n");
  dims.n_eq = c.u64_or("family.n_eq", 0);
  dims.n_ineq = c.u64_or("family.n_ineq", 0);
  dims.n_aff = c.u64_or("family.n_aff", 0);
  return problems::family_generate(
      problems::kind_from_name(c.str("family.kind")), dims,
      c.u64_or("family.seed", 7));
}

alm::AlmConfig alm_config_of(const cfg::KvConfig& c) {
  alm::AlmConfig a;
  a.rho0 = c.num_or("alm.rho", 1.0);
  a.alpha = c.num_or("alm.alpha", 10.0);
  a.tau = c.num_or("alm.tau", 0.5);
  a.rho_max = c.num_or("alm.rho_max", 1e8);
  a.max_outer = static_cast<int>(c.u64_or("alm.outer", 20));
  a.eps = c.num_or("alm.eps", 1e-4);
  a.inner_tol = c.num_or("alm.inner_tol", 1e-4);
  a.validate();
  return a;
}

std::vector<std::size_t> hidden_of(const cfg::KvConfig& c) {
  std::vector<std::size_t> hidden;
  for (const auto& tok : c.list_or("scheme.hidden")) {
    hidden.push_back(std::stoull(tok));
  }
  if (hidden.empty()) hidden = {500, 500};
  return hidden;
}

schemes::PdlConfig pdl_config_of(const cfg::KvConfig& c) {
  schemes::PdlConfig p;
  p.rho0 = c.num_or("scheme.rho", 0.5);
  p.alpha = c.num_or("scheme.alpha", 10.0);
  p.tau = c.num_or("scheme.tau", 0.8);
  p.rho_max = c.num_or("scheme.rho_max", 5000.0);
  p.outer = static_cast<int>(c.u64_or("scheme.outer", 10));
  p.inner = static_cast<int>(c.u64_or("scheme.inner", 500));
  p.batch = c.u64_or("scheme.batch", 200);
  p.lr = c.num_or("scheme.lr", 1e-4);
  p.hidden = hidden_of(c);
  p.on_the_fly = c.flag_or("scheme.on_the_fly", false);
  p.valid_every = static_cast<int>(c.u64_or("scheme.valid_every", 0));
  const std::string norm = c.str_or("scheme.dual_norm", "l1");
  if (norm == "l1") {
    p.dual_norm = schemes::Norm::l1;
  } else if (norm == "l2sq") {
    p.dual_norm = schemes::Norm::l2sq;
  } else {
    throw config_error("scheme.dual_norm must be l1 or l2sq");
  }
  return p;
}

schemes::BaselineConfig baseline_config_of(const cfg::KvConfig& c,
                                           const problems::ProblemFamily& fam) {
  schemes::BaselineConfig b;
  b.epochs = static_cast<int>(c.u64_or("scheme.epochs", 10000));
  b.batch = c.u64_or("scheme.batch", 200);
  b.lr = c.num_or("scheme.lr", 1e-4);
  b.hidden = hidden_of(c);
  b.on_the_fly = c.flag_or("scheme.on_the_fly", false);
  b.weights = schemes::PenaltyWeights::uniform(fam, 0.0);
  const double wg = c.num_or("scheme.rho_g", 5.0);
  const double wh = c.num_or("scheme.rho_h", 5.0);
  b.weights.rho_g = Tensor::full({fam.ineq_count()}, wg);
  b.weights.rho_h = Tensor::full({fam.eq_count()}, wh);
  b.weights.ld_step = c.num_or("scheme.ld_step", 1e-3);
  b.weights.ld_period = static_cast<int>(c.u64_or("scheme.ld_period", 50));
  const std::string viol = c.str_or("scheme.violation", "abs");
  if (viol == "abs") {
    b.weights.kind = schemes::ViolationKind::abs_hinge;
  } else if (viol == "square") {
    b.weights.kind = schemes::ViolationKind::square;
  } else {
    throw config_error("scheme.violation must be abs or square");
  }
  return b;
}

void parse_ratio(const std::string& ratio, std::size_t& a, std::size_t& b,
                 std::size_t& c) {
  std::istringstream in(ratio);
  char c1 = 0, c2 = 0;
  if (!(in >> a >> c1 >> b >> c2 >> c) || c1 != ':' || c2 != ':') {
    throw config_error("dataset.ratio must look like 10:1:1, got '" + ratio +
                       "'");
  }
}

problems::Sidecar solve_sidecar(const problems::ProblemFamily& fam,
                                const problems::Dataset& ds,
                                const cfg::KvConfig& c, const std::string& how,
                                unsigned jobs, std::ostream& log) {
  problems::Sidecar sc;
  sc.Y = Tensor::zeros({ds.count(), fam.dims.n});
  sc.f.resize(ds.count());
  const std::uint64_t seed = c.u64_or("alm.seed", 101);
  if (how == "bruteforce") {
    if (fam.kind != problems::Kind::qcqp) {
      throw config_error("sidecar=bruteforce needs a qcqp family");
    }
    parallel_for(ds.count(), jobs, [&](std::size_t i) {
      const auto r = problems::qcqp_bruteforce(fam, ds.row(i));
      std::copy(r.y.data(), r.y.data() + fam.dims.n,
                sc.Y.data() + i * fam.dims.n);
      sc.f[i] = r.f;
    });
    log << "sidecar bruteforce instances " << ds.count() << "\n";
    return sc;
  }
  if (how != "alm") throw config_error("dataset.sidecar must be none|alm|bruteforce");
  const alm::AlmConfig acfg = alm_config_of(c);
  const std::size_t starts = c.u64_or("alm.multistart", 1);
  std::vector<double> viols(ds.count());
  parallel_for(ds.count(), jobs, [&](std::size_t i) {
    const auto r = alm::alm_multistart(fam, ds.row(i), acfg, starts,
                                       Rng(seed).fork(i).root_seed());
    std::copy(r.y.data(), r.y.data() + fam.dims.n, sc.Y.data() + i * fam.dims.n);
    sc.f[i] = r.f;
    viols[i] = r.violation;
  });
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (double v : viols) {
    worst = std::max(worst, v);
    if (v > acfg.eps) ++unconverged;
  }
  log << "sidecar alm instances " << ds.count() << " multistart " << starts
      << " worst_violation " << worst << " above_eps " << unconverged << "\n";
  return sc;
}

int cmd_generate(const cfg::KvConfig& c) {
  const fs::path dir = c.str("dataset.dir");
  fs::create_directories(dir);
  const problems::ProblemFamily fam = family_of(c);
  problems::family_descriptor_save(dir / "family.txt", fam);

  std::size_t ra = 10, rb = 1, rc = 1;
  parse_ratio(c.str_or("dataset.ratio", "10:1:1"), ra, rb, rc);
  const auto all = problems::sample_instances(fam, c.u64("dataset.count"),
                                              c.u64_or("dataset.seed", 13));
  const auto parts = problems::split_dataset(all, ra, rb, rc);

  std::ostringstream log;
  log << "family " << problems::kind_name(fam.kind) << " seed " << fam.seed
      << "\n";
  log << "dataset seed " << all.seed << " count " << all.count() << " split "
      << parts[0].count() << "/" << parts[1].count() << "/" << parts[2].count()
      << "\n";

  // generation-time feasibility audit for qp families
  if (fam.kind != problems::Kind::qcqp && fam.ineq_count() > 0) {
    double worst = -1e300;
    for (std::size_t i = 0; i < all.count(); ++i) {
      const Tensor g =
          problems::ineq_one(fam, problems::feasible_witness(fam, all.row(i)));
      for (std::size_t j = 0; j < g.numel(); ++j) worst = std::max(worst, g[j]);
    }
    if (worst > 1e-9) {
      throw data_error("feasibility witness violated during generation");
    }
    log << "witness_max_slack " << worst << "\n";
  }

  const char* names[3] = {"train", "valid", "test"};
  for (int i = 0; i < 3; ++i) {
    problems::dataset_save(dir / (std::string(names[i]) + ".ds"), fam, parts[i]);
  }

  const std::string sidecar = c.str_or("dataset.sidecar", "none");
  if (sidecar != "none") {
    const unsigned jobs = jobs_of(c);
    auto splits = c.list_or("dataset.sidecar_splits");
    if (splits.empty()) splits = {"train", "valid", "test"};
    for (const auto& split : splits) {
      int idx = -1;
      for (int i = 0; i < 3; ++i) {
        if (split == names[i]) idx = i;
      }
      if (idx < 0) throw config_error("unknown sidecar split '" + split + "'");
      const auto sc = solve_sidecar(fam, parts[idx], c, sidecar, jobs, log);
      problems::sidecar_save(dir / (split + ".gt"), sc);
    }
  }

  write_text(dir / "generate.log", log.str());
  write_snapshot(c, dir);
  std::cout << "generated " << all.count() << " instances under " << dir.string()
            << "\n";
  return 0;
}

int cmd_train(const cfg::KvConfig& c) {
  const fs::path dir = c.str("dataset.dir");
  const fs::path out = c.str("train.out");
  fs::create_directories(out);

  const auto train_ld = problems::dataset_load(dir / "train.ds");
  const auto valid_ld = problems::dataset_load(dir / "valid.ds");
  const problems::ProblemFamily& fam = train_ld.family;

  const auto tag = schemes::scheme_from_name(c.str_or("scheme.name", "pdl"));
  const std::uint64_t seed = c.u64_or("train.seed", 1);

  std::vector<schemes::TraceRow> live;
  auto flush_trace = [&] {
    std::ofstream tf(out / "trace.csv");
    schemes::trace_write_csv(tf, live);
  };

  try {
    schemes::TrainedModel model =
        [&]() -> schemes::TrainedModel {
      if (tag == schemes::SchemeTag::pdl) {
        return schemes::pdl_train(fam, train_ld.dataset, valid_ld.dataset,
                                  pdl_config_of(c), seed, &live);
      }
      problems::Sidecar train_gt, valid_gt;
      const bool supervised = schemes::scheme_is_supervised(tag);
      if (supervised) {
        const fs::path gt_path = dir / "train.gt";
        if (!fs::exists(gt_path)) {
          throw data_error("scheme '" + std::string(schemes::scheme_name(tag)) +
                           "' needs " + gt_path.string() +
                           "; run `pdl generate` with dataset.sidecar=alm or "
                           "bruteforce first");
        }
        train_gt = problems::sidecar_load(gt_path);
        if (fs::exists(dir / "valid.gt")) {
          valid_gt = problems::sidecar_load(dir / "valid.gt");
        }
      }
      return schemes::baseline_train(
          fam, train_ld.dataset, valid_ld.dataset,
          supervised ? &train_gt : nullptr,
          supervised && valid_gt.f.size() == valid_ld.dataset.count()
              ? &valid_gt
              : nullptr,
          tag, baseline_config_of(c, fam), seed, &live);
    }();

    nn::save_checkpoint(model.primal, out / "primal.ckpt");
    if (model.dual) nn::save_checkpoint(*model.dual, out / "dual.ckpt");
    flush_trace();
    write_snapshot(c, out);
    std::cout << "trained scheme " << schemes::scheme_name(tag) << " -> "
              << out.string() << "\n";
    return 0;
  } catch (const numeric_error&) {
    flush_trace();  // abort on NaN loss still leaves the trace behind
    throw;
  }
}

int cmd_eval(const cfg::KvConfig& c) {
  const fs::path dir = c.str("dataset.dir");
  const fs::path out = c.str_or("eval.out", (fs::path(c.str("dataset.dir")) /
                                             "eval")
                                                .string());
  fs::create_directories(out);

  const auto test_ld = problems::dataset_load(dir / "test.ds");
  const problems::ProblemFamily& fam = test_ld.family;

  const std::string ref_path = c.str_or("eval.reference",
                                        (dir / "test.gt").string());
  if (!fs::exists(ref_path)) {
    throw data_error("reference sidecar not found: " + ref_path +
                     "; run `pdl generate` with a sidecar or `pdl alm-solve`");
  }
  const problems::Sidecar reference = problems::sidecar_load(ref_path);

  auto ckpts = c.list_or("eval.checkpoints");
  if (ckpts.empty()) ckpts = {(fs::path(c.str("train.out")) / "primal.ckpt").string()};
  std::vector<nn::Mlp> nets;
  nets.reserve(ckpts.size());
  for (const auto& p : ckpts) nets.push_back(nn::load_checkpoint(p));
  std::vector<eval::Predictor> predictors;
  predictors.reserve(nets.size());
  for (const auto& n : nets) predictors.push_back(eval::predictor_of(n));

  const std::string label = c.str_or("eval.scheme", c.str_or("scheme.name", "pdl"));
  const eval::EvalReport report =
      eval::evaluate(fam, test_ld.dataset, predictors, reference, label);

  {
    std::ofstream f(out / "report.csv");
    eval::report_write_csv(f, {report});
  }
  {
    std::ofstream f(out / "per_instance.csv");
    eval::report_write_per_instance_csv(f, report);
  }
  {
    std::ofstream f(out / "summary.txt");
    eval::report_write_summary(f, report);
  }
  write_snapshot(c, out);
  std::cout << "scheme " << label << ": mean gap " << report.mean_gap
            << "% mean max eq " << report.mean_max_eq << " mean max ineq "
            << report.mean_max_ineq << "\n";
  return 0;
}

int cmd_alm_solve(const cfg::KvConfig& c) {
  const fs::path ds_path = c.str("alm.dataset");
  const fs::path out = c.str("alm.out");
  fs::create_directories(out);
  const auto loaded = problems::dataset_load(ds_path);
  const problems::ProblemFamily& fam = loaded.family;
  const alm::AlmConfig acfg = alm_config_of(c);
  const std::size_t starts = c.u64_or("alm.multistart", 1);
  const std::uint64_t seed = c.u64_or("alm.seed", 101);
  const unsigned jobs = jobs_of(c);

  const std::size_t count = loaded.dataset.count();
  problems::Sidecar sc;
  sc.Y = Tensor::zeros({count, fam.dims.n});
  sc.f.resize(count);
  std::vector<alm::MultistartResult> results(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    results[i] = alm::alm_multistart(fam, loaded.dataset.row(i), acfg, starts,
                                     Rng(seed).fork(i).root_seed());
    std::copy(results[i].y.data(), results[i].y.data() + fam.dims.n,
              sc.Y.data() + i * fam.dims.n);
    sc.f[i] = results[i].f;
  });
  problems::sidecar_save(out / "solutions.gt", sc);

  std::ofstream traces(out / "traces.csv");
  traces << "instance,k,f,v_k,rho,inner_iters\n";
  std::size_t unconverged = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& row : results[i].best_trace) {
      traces << i << ',' << row.k << ',' << row.f << ',' << row.v << ','
             << row.rho << ',' << row.inner_iters << '\n';
    }
    if (!results[i].converged) ++unconverged;
  }
  write_snapshot(c, out);
  std::cout << "solved " << count << " instances (" << unconverged
            << " above tolerance) -> " << out.string() << "\n";
  return 0;
}

int cmd_report(const cfg::KvConfig& c, const std::vector<std::string>& inputs) {
  std::vector<std::string> files = inputs;
  if (files.empty()) files = c.list_or("report.inputs");
  if (files.empty()) throw config_error("report: no input report.csv files given");
  std::ostringstream merged;
  merged << "Method,Type,Obj.,Opt. Gap(%),Max eq.,Max ineq.,Mean eq.,Mean ineq.\n";
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open report: " + path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {  // header
        first = false;
        continue;
      }
      if (!line.empty()) merged << line << '\n';
    }
  }
  std::cout << merged.str();
  if (c.has("report.out")) {
    const fs::path out = c.str("report.out");
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
    write_text(out, merged.str());
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"primal-dual learning experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags flags;
  app.add_option("--config", flags.config_path, "config file (key = value sections)");
  app.add_option("--preset", flags.preset_name, "named preset to underlay");
  app.add_option("--out", flags.out_dir, "output directory override");
  auto* seed_opt = app.add_option("--seed", flags.seed, "seed override");
  app.add_option("--jobs", flags.jobs, "worker thread cap");

  auto* c_gen = app.add_subcommand("generate", "generate datasets and sidecars");
  auto* c_train = app.add_subcommand("train", "train a scheme");
  auto* c_eval = app.add_subcommand("eval", "evaluate checkpoints");
  auto* c_alm = app.add_subcommand("alm-solve", "solve instances with the ALM");
  auto* c_rep = app.add_subcommand("report", "merge report tables");
  std::vector<std::string> report_inputs;
  c_rep->add_option("inputs", report_inputs, "report.csv files");

  std::vector<const char*> argv;
  argv.push_back("pdl");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    flags.seed_given = seed_opt->count() > 0;
    cfg::KvConfig c = resolve_config(flags);
    if (c_gen->parsed()) {
      if (!flags.out_dir.empty()) c.set("dataset.dir", flags.out_dir);
      if (flags.seed_given) c.set("dataset.seed", std::to_string(flags.seed));
      return cmd_generate(c);
    }
    if (c_train->parsed()) {
      if (!flags.out_dir.empty()) c.set("train.out", flags.out_dir);
      if (flags.seed_given) c.set("train.seed", std::to_string(flags.seed));
      return cmd_train(c);
    }
    if (c_eval->parsed()) {
      if (!flags.out_dir.empty()) c.set("eval.out", flags.out_dir);
      return cmd_eval(c);
    }
    if (c_alm->parsed()) {
      if (!flags.out_dir.empty()) c.set("alm.out", flags.out_dir);
      if (flags.seed_given) c.set("alm.seed", std::to_string(flags.seed));
      return cmd_alm_solve(c);
    }
    if (c_rep->parsed()) {
      if (!flags.out_dir.empty()) c.set("report.out", flags.out_dir);
      return cmd_report(c, report_inputs);
    }
    throw config_error("no subcommand");
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const budget_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const parse_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const version_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const io_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace pdl::cli
