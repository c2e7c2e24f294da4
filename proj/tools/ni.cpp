#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ni/analysis.hpp"
#include "ni/coeffmatrix.hpp"
#include "ni/engine.hpp"
#include "ni/errors.hpp"
#include "ni/guidance.hpp"
#include "ni/oracles.hpp"
#include "ni/presets.hpp"
#include "ni/samplers.hpp"
#include "ni/schedule.hpp"
#include "ni/search.hpp"

namespace {

using namespace ni;

std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v + 0.0;
  return os.str();
}

std::vector<double> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::replace(tok.begin(), tok.end(), ',', ' ');
    std::istringstream ss(tok);
    double v;
    while (ss >> v) out.push_back(v);
  }
  return out;
}

std::vector<double> split_numbers(const std::string& list) {
  std::vector<double> out;
  std::string s = list;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ParameterError("not a number: " + tok);
    }
  }
  return out;
}

// Family shorthand to schedule; fractions of the horizon map to family time.
Schedule family_schedule(const std::string& f) {
  if (f == "vp") return Schedule::vp_linear(1e-4, 0.02, 1000);
  if (f == "flow") return Schedule::flow();
  return Schedule::parse(f);
}

double family_time(const Schedule& s, double u) {
  if (u < 0 || u > 1) throw ParameterError("time fraction must lie in [0, 1]");
  switch (s.family()) {
    case Family::VpDiscrete:
      return std::min<double>(s.steps() - 1, std::round(u * s.steps()));
    case Family::VpContinuous:
      return std::max(s.t_min(), u);
    case Family::Flow:
      return u;
  }
  return u;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw IoError("cannot write " + path);
  return file;
}

void write_marginals(const MarginalReport& rep, std::ostream& os) {
  os << "row,time,signal,ideal_signal,signal_dev,noise,ideal_noise,noise_dev\n";
  for (std::size_t r = 0; r < rep.size(); ++r) {
    const auto& m = rep[r];
    os << r << ',' << num(m.time) << ',' << num(m.signal) << ',' << num(m.ideal_signal) << ',' << num(m.signal_dev)
       << ',' << num(m.noise) << ',' << num(m.ideal_noise) << ',' << num(m.noise_dev) << '\n';
  }
}

struct PredictorChoice {
  Predictor f;
  std::size_t dim = 0;
  std::optional<GaussianMixture> gmm;
  std::optional<Dataset> data;
};

// dataset:FILE, gmm:FILE, or ring[:K]
PredictorChoice make_choice(const std::string& spec, const Schedule& s, std::optional<std::uint32_t> label) {
  PredictorChoice c;
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon), arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "dataset") {
    c.data = load_dataset(arg);
    c.f = make_predictor(*c.data, s, label);
    c.dim = c.data->d;
  } else if (kind == "gmm") {
    c.gmm = load_gmm(arg);
    c.f = make_predictor(*c.gmm, s, label);
    c.dim = c.gmm->dim();
  } else if (kind == "ring") {
    c.gmm = ring_mixture(arg.empty() ? 8 : std::stoi(arg));
    c.f = make_predictor(*c.gmm, s, label);
    c.dim = 2;
  } else {
    throw ParameterError("predictor must be dataset:FILE, gmm:FILE or ring[:K]");
  }
  return c;
}

void write_samples(const std::vector<Vec>& xs, std::ostream& os) {
  if (xs.empty()) return;
  for (std::size_t k = 0; k < xs.front().size(); ++k) os << (k ? "," : "") << 'x' << k;
  os << '\n';
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << num(x[k]);
    os << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coefficient-matrix toolkit for diffusion and flow samplers"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // trace
  std::string t_sampler, t_schedule, t_grid = "trailing", t_out;
  int t_steps = 18;
  double t_r1 = 0, t_r2 = 0;
  int t_sign = 1;
  auto* trace = app.add_subcommand("trace", "Trace a sampler into a coefficient matrix");
  trace->add_option("--sampler", t_sampler, "Sampler name")->required();
  trace->add_option("--steps", t_steps, "Model evaluations")->check(CLI::PositiveNumber);
  trace->add_option("--schedule", t_schedule, "vp-linear[:b0:b1:T] | vp-continuous[:b0:b1[:tmin]] | flow");
  trace->add_option("--grid", t_grid, "trailing | quadratic | explicit:FILE");
  trace->add_option("--r1", t_r1, "First intermediate ratio for singlestep solvers");
  trace->add_option("--r2", t_r2, "Second intermediate ratio for order 3");
  trace->add_option("--correction-sign", t_sign, "Sign of the order-3 data-prediction correction")
      ->check(CLI::IsMember({-1, 1}));
  trace->add_option("--out", t_out, "Matrix file; stdout when omitted");

  // check
  std::string c_matrix, c_against;
  auto* check = app.add_subcommand("check", "Equivalent marginal report");
  check->add_option("matrix", c_matrix, "Matrix file or preset name")->required();
  check->add_option("--against", c_against, "Compare entries against another matrix or preset");

  // sample
  std::string s_matrix, s_pred, s_out, s_mode;
  std::optional<std::uint32_t> s_label;
  std::size_t s_n = 16;
  std::uint64_t s_seed = 0;
  unsigned s_threads = 0;
  bool s_raw = false;
  auto* sample = app.add_subcommand("sample", "Run a coefficient matrix with an oracle predictor");
  sample->add_option("--matrix", s_matrix, "Matrix file or preset name")->required();
  sample->add_option("--predictor", s_pred, "dataset:FILE | gmm:FILE | ring[:K]")->required();
  sample->add_option("--label", s_label, "Restrict the oracle to one class");
  sample->add_option("--n", s_n, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--seed", s_seed, "Noise seed");
  sample->add_option("--noise-mode", s_mode, "traced | single-terminal | fresh-per-step");
  sample->add_option("--threads", s_threads, "Worker threads, 0 = all");
  sample->add_flag("--raw", s_raw, "Skip row normalization of matrices with explicit targets");
  sample->add_option("--out", s_out, "NIDS1 file, or CSV for *.csv; CSV on stdout when omitted");

  // degrade
  std::string d_data, d_synth, d_times = "0.1,0.3,0.5,0.7,0.9";
  std::vector<std::string> d_family{"vp", "flow"};
  std::size_t d_trials = 1000;
  double d_threshold = 0.9;
  std::uint64_t d_seed = 0;
  auto* degrade = app.add_subcommand("degrade", "Weighted-sum degradation rates");
  auto* d_data_opt = degrade->add_option("--data", d_data, "Dataset file (NIDS1 or CSV)");
  degrade->add_option("--synthetic", d_synth, "Standard-normal atoms N:D[:SEED]")->excludes(d_data_opt);
  degrade->add_option("--family", d_family, "vp | flow | schedule string")->delimiter(',');
  degrade->add_option("--times", d_times, "Comma list of time fractions in [0, 1]");
  degrade->add_option("--trials", d_trials, "Trials per point")->check(CLI::PositiveNumber);
  degrade->add_option("--threshold", d_threshold, "Posterior concentration threshold");
  degrade->add_option("--seed", d_seed, "Seed");

  // guidance
  std::string g_matrix, g_fold = "oldest";
  auto* guidance = app.add_subcommand("guidance", "Per-row self-guidance classification");
  guidance->add_option("matrix", g_matrix, "Matrix file or preset name")->required();
  guidance->add_option("--fold", g_fold, "oldest | newest")->check(CLI::IsMember({"oldest", "newest"}));

  // search
  std::string q_pred = "ring:8", q_init = "ddim", q_out, q_trace;
  int q_steps = 5, q_band = 3;
  std::size_t q_budget = 2000, q_samples = 512, q_ref = 1000;
  std::uint64_t q_seed = 0;
  auto* search = app.add_subcommand("search", "Coordinate search over matrix entries");
  search->add_option("--steps", q_steps, "Model evaluations")->check(CLI::PositiveNumber);
  search->add_option("--predictor", q_pred, "gmm:FILE | ring[:K] | dataset:FILE");
  search->add_option("--budget", q_budget, "Objective evaluations");
  search->add_option("--init", q_init, "ddim, or a matrix file or preset name");
  search->add_option("--band", q_band, "Free entries left of each diagonal")->check(CLI::NonNegativeNumber);
  search->add_option("--samples", q_samples, "Samples per evaluation")->check(CLI::PositiveNumber);
  search->add_option("--reference", q_ref, "Reference sample size")->check(CLI::PositiveNumber);
  search->add_option("--seed", q_seed, "Seed");
  search->add_option("--out", q_out, "Best matrix file");
  search->add_option("--trace", q_trace, "Objective trace CSV; stdout when omitted");

  // spectrum
  std::string p_image, p_synth = "64:1", p_family = "vp";
  double p_t = 0.5, p_threshold = 1.0;
  std::uint64_t p_seed = 0;
  auto* spectrum = app.add_subcommand("spectrum", "Radial SNR profile of an image");
  auto* p_image_opt = spectrum->add_option("--image", p_image, "Square image (CSV grid or NIDS1)");
  spectrum->add_option("--synthetic", p_synth, "Power-law image SIDE:EXPONENT")->excludes(p_image_opt);
  spectrum->add_option("--family", p_family, "vp | flow | schedule string");
  spectrum->add_option("--t", p_t, "Time fraction in [0, 1]");
  spectrum->add_option("--threshold", p_threshold, "Submerged when SNR falls below");
  spectrum->add_option("--seed", p_seed, "Seed for the synthetic image");

  // presets
  std::string r_action = "list", r_name;
  bool r_csv = false;
  auto* presets = app.add_subcommand("presets", "List or export shipped matrices");
  presets->add_option("action", r_action, "list | export")->check(CLI::IsMember({"list", "export"}));
  presets->add_option("name", r_name, "Preset to export");
  presets->add_flag("--csv", r_csv, "Export the signal block as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*trace) {
      SamplerSpec spec = parse_sampler(t_sampler);
      spec.opt.r1 = t_r1;
      spec.opt.r2 = t_r2;
      spec.opt.correction_sign = t_sign;
      if (t_schedule.empty()) t_schedule = spec.kind == Kind::FlowEuler ? "flow" : "vp-linear";
      Schedule s = Schedule::parse(t_schedule);
      TimeGrid grid;
      if (t_grid.rfind("explicit:", 0) == 0) {
        auto ts = read_numbers(t_grid.substr(9));
        if (ts.size() < 2) throw ParameterError("explicit grid needs evaluation times and a terminal");
        double term = ts.back();
        ts.pop_back();
        grid = make_explicit_grid(s, ts, term);
      } else {
        grid = grid_for(spec, s, t_steps, parse_grid_rule(t_grid));
      }
      if (!supports(spec, s)) throw ParameterError(spec.name() + " does not support " + s.str());
      CoefficientMatrix m = trace_sampler(spec, s, grid);
      auto rep = equivalent_marginals(m);
      std::cerr << m.name << ": " << m.size() << " evaluations, max marginal deviation " << num(max_deviation(rep))
                << '\n';
      if (t_out.empty()) {
        save(m, std::cout);
      } else {
        save(m, t_out);
        write_marginals(rep, std::cout);
      }
    } else if (*check) {
      CoefficientMatrix m = load_matrix_or_preset(c_matrix);
      m.validate();
      auto rep = equivalent_marginals(m);
      write_marginals(rep, std::cout);
      std::cerr << "max marginal deviation " << num(max_deviation(rep)) << '\n';
      if (!c_against.empty()) {
        auto cmp = compare(m, load_matrix_or_preset(c_against));
        std::cerr << "max signal error " << num(cmp.max_signal_err) << " at (" << cmp.worst_row << ','
                  << cmp.worst_col << "), max noise error " << num(cmp.max_noise_err) << ", sign mismatches "
                  << cmp.sign_mismatches << '\n';
      }
    } else if (*sample) {
      CoefficientMatrix m = load_matrix_or_preset(s_matrix);
      m.validate();
      if (!m.targets.empty() && !s_raw) m = normalize_rows(m).matrix;
      auto choice = make_choice(s_pred, m.schedule, s_label);
      RunConfig cfg;
      cfg.matrix = m;
      cfg.predictor = choice.f;
      cfg.dim = choice.dim;
      if (!s_mode.empty()) cfg.noise_mode = parse_noise_mode(s_mode);
      cfg.seed = s_seed;
      cfg.n = s_n;
      cfg.threads = s_threads;
      auto res = run_matrix(cfg);
      if (s_out.empty() || s_out == "-" || s_out.ends_with(".csv")) {
        std::ofstream f;
        write_samples(res.samples, open_out(s_out, f));
      } else {
        save_dataset(dataset_from_rows(res.samples), s_out);
      }
      std::cerr << res.samples.size() << " samples, nfe " << res.nfe << '\n';
    } else if (*degrade) {
      Dataset ds;
      if (!d_data.empty()) {
        ds = load_dataset(d_data);
      } else {
        std::replace(d_synth.begin(), d_synth.end(), ':', ',');
        auto v = split_numbers(d_synth.empty() ? "10000,64" : d_synth);
        if (v.size() < 2) throw ParameterError("--synthetic expects N:D[:SEED]");
        ds = standard_normal_dataset(static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
                                     v.size() > 2 ? static_cast<std::uint64_t>(v[2]) : 0);
      }
      auto fracs = split_numbers(d_times);
      std::cout << "family,t,rate,rate_to_source,trials,ci,ci_to_source\n";
      for (std::size_t fi = 0; fi < d_family.size(); ++fi) {
        Schedule s = family_schedule(d_family[fi]);
        std::vector<double> ts;
        for (double u : fracs) ts.push_back(family_time(s, u));
        auto rep = degradation_table(ds, {s}, ts, d_trials, d_seed + fi, d_threshold);
        for (const auto& r : rep)
          std::cout << r.family << ',' << num(r.t) << ',' << num(r.rate) << ',' << num(r.rate_to_source) << ','
                    << r.trials << ',' << num(r.ci) << ',' << num(r.ci_to_source) << '\n';
      }
    } else if (*guidance) {
      CoefficientMatrix m = load_matrix_or_preset(g_matrix);
      m.validate();
      FoldOrder order = g_fold == "newest" ? FoldOrder::NewestFirst : FoldOrder::OldestFirst;
      std::cout << "row,time,summary,fore,mid,back,stages,max_recon_err\n";
      for (std::size_t r = 0; r < m.size(); ++r) {
        const auto& row = m.signal[r];
        std::cout << r << ',' << num(m.row_times[r]) << ',' << to_string(classify_row(row)) << ',';
        int counts[4] = {0, 0, 0, 0};
        std::string stages;
        double err = 0;
        std::size_t nz = std::count_if(row.begin(), row.end(), [](double v) { return v != 0; });
        if (nz >= 2) {
          try {
            auto dec = decompose_row(row, order);
            for (const auto& st : dec.stages) {
              ++counts[static_cast<int>(st.stage.cls)];
              stages += (stages.empty() ? "" : ";") + to_string(st.stage.cls) + ':' + num(st.stage.lambda);
            }
            auto back = dec.unfold();
            for (std::size_t c = 0; c < row.size(); ++c) err = std::max(err, std::abs(back[c] - row[c]));
          } catch (const NumericError& e) {
            stages = "singular";
            std::cerr << "row " << r << ": " << e.what() << '\n';
          }
        }
        std::cout << counts[0] << ',' << counts[1] << ',' << counts[2] << ',' << stages << ',' << num(err) << '\n';
      }
    } else if (*search) {
      Schedule s = Schedule::vp_continuous();
      CoefficientMatrix init;
      if (q_init == "ddim") {
        SamplerSpec spec = parse_sampler("ddim");
        init = trace_sampler(spec, s, grid_for(spec, s, q_steps, GridRule::Quadratic));
      } else {
        init = load_matrix_or_preset(q_init);
        init.validate();
        if (!init.targets.empty()) init = normalize_rows(init).matrix;
        s = init.schedule;
      }
      auto choice = make_choice(q_pred, init.schedule, std::nullopt);
      std::vector<Vec> ref;
      for (std::size_t i = 0; i < q_ref; ++i) {
        if (choice.gmm) {
          ref.push_back(choice.gmm->sample(q_seed + 1, i));
        } else {
          ref.push_back(choice.data->row(i % choice.data->n));
        }
      }
      SearchConfig cfg;
      cfg.budget = q_budget;
      cfg.seed = q_seed;
      cfg.samples = q_samples;
      auto res = optimize_matrix(SearchSpace::banded(init, q_band), choice.f, choice.dim, ref, cfg);
      std::ofstream f;
      std::ostream& os = open_out(q_trace, f);
      os << "evaluation,objective\n0," << num(res.initial_objective) << '\n';
      for (std::size_t i = 0; i < res.trace.size(); ++i) os << i + 1 << ',' << num(res.trace[i]) << '\n';
      double best = res.trace.empty() ? res.initial_objective : res.trace.back();
      std::cerr << "initial " << num(res.initial_objective) << ", best " << num(best) << ", evaluations "
                << res.evaluations << ", failures " << res.failures << '\n';
      res.best.name = "search-" + std::to_string(q_steps);
      if (!q_out.empty()) save(res.best, q_out);
    } else if (*spectrum) {
      Image img;
      if (!p_image.empty()) {
        img = load_image(p_image);
      } else {
        std::replace(p_synth.begin(), p_synth.end(), ':', ',');
        auto v = split_numbers(p_synth);
        if (v.size() != 2) throw ParameterError("--synthetic expects SIDE:EXPONENT");
        img = power_law_image(static_cast<std::size_t>(v[0]), v[1], p_seed);
      }
      Schedule s = family_schedule(p_family);
      auto prof = snr_profile(img, s, family_time(s, p_t));
      std::cout << "band,amplitude,snr,submerged\n";
      for (const auto& b : prof)
        std::cout << b.band << ',' << num(b.amplitude) << ',' << num(b.snr) << ',' << (b.snr < p_threshold) << '\n';
      std::cerr << "submerged fraction " << num(submerged_fraction(prof, p_threshold)) << ", lowest submerged band "
                << lowest_submerged_band(prof, p_threshold) << '\n';
    } else if (*presets) {
      if (r_action == "list") {
        std::cout << "name,evaluations,family,note\n";
        for (const auto& n : preset_names()) {
          auto m = preset(n);
          std::cout << n << ',' << m.size() << ',' << m.schedule.str() << ",\"" << m.note << "\"\n";
        }
      } else {
        if (r_name.empty()) throw ParameterError("export needs a preset name");
        if (!has_preset(r_name)) throw ParameterError("unknown preset " + r_name);
        if (r_csv)
          write_csv(preset(r_name), std::cout);
        else
          std::cout << preset_text(r_name);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}
