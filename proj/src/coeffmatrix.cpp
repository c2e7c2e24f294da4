#include "ni/coeffmatrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ni/errors.hpp"

namespace ni {

using nlohmann::json;

std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::Traced:
      return "traced";
    case NoiseMode::SingleTerminal:
      return "single-terminal";
    case NoiseMode::FreshPerStep:
      return "fresh-per-step";
  }
  return "?";
}

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "traced") return NoiseMode::Traced;
  if (s == "single-terminal" || s == "custom") return NoiseMode::SingleTerminal;
  if (s == "fresh-per-step") return NoiseMode::FreshPerStep;
  throw ParameterError("unknown noise mode: " + s);
}

double CoefficientMatrix::target(std::size_t row) const {
  if (!targets.empty()) return targets.at(row);
  return schedule.c0(row_times.at(row));
}

void CoefficientMatrix::validate() const {
  const std::size_t m = col_times.size();
  if (m == 0) throw ValidationError("matrix has no columns");
  if (row_times.size() != m) throw ValidationError("row and column counts differ");
  if (signal.size() != m) throw ValidationError("signal has wrong row count");
  for (std::size_t r = 0; r < m; ++r) {
    if (signal[r].size() != m) throw ValidationError("signal row " + std::to_string(r) + " has wrong length");
    for (std::size_t c = 0; c < m; ++c) {
      if (!std::isfinite(signal[r][c])) throw ValidationError("non-finite signal entry");
      if (c > r && signal[r][c] != 0)
        throw ValidationError("signal is not lower-triangular at row " + std::to_string(r) + ", column " +
                              std::to_string(c));
    }
  }
  if (!targets.empty() && targets.size() != m) throw ValidationError("targets length differs from row count");
  if (has_noise()) {
    const std::size_t k = noise_ids.size();
    if (noise.size() != m || first_noise.size() != k || noise_times.size() != k)
      throw ValidationError("noise block has inconsistent shape");
    for (const auto& row : noise) {
      if (row.size() != k) throw ValidationError("noise row has wrong length");
      for (double v : row)
        if (!std::isfinite(v)) throw ValidationError("non-finite noise entry");
    }
    std::set<NoiseId> ids(noise_ids.begin(), noise_ids.end());
    if (ids.size() != k) throw ValidationError("duplicate noise id");
  }
}

CoefficientMatrix trace_sampler(const SamplerSpec& spec, const Schedule& s, const TimeGrid& grid) {
  TraceContext ctx;
  Trajectory tr = run_native(spec, s, grid, ctx);
  const auto& inputs = ctx.inputs();
  const std::size_t m = inputs.size();

  CoefficientMatrix out;
  out.name = spec.name() + "-" + std::to_string(m);
  out.schedule = s;
  out.col_times = ctx.times();
  out.row_times.assign(out.col_times.begin() + 1, out.col_times.end());
  out.row_times.push_back(grid.terminal);
  out.noise_mode = NoiseMode::Traced;

  std::vector<const AffineState*> rows;
  for (std::size_t r = 1; r < m; ++r) rows.push_back(&inputs[r]);
  rows.push_back(&std::get<AffineState>(tr.output));

  std::set<NoiseId> ids(ctx.noise_order().begin(), ctx.noise_order().end());
  out.noise_ids.assign(ids.begin(), ids.end());
  for (auto id : out.noise_ids) {
    int u = ctx.first_use(id);
    out.noise_times.push_back(u == 0 ? out.col_times[0] : out.row_times[u - 1]);
  }
  auto noise_row = [&](const AffineState& a) {
    std::vector<double> v;
    for (auto id : out.noise_ids) {
      auto it = a.noise.find(id);
      v.push_back(it == a.noise.end() ? 0.0 : it->second);
    }
    return v;
  };
  out.first_noise = noise_row(inputs[0]);
  for (const auto* a : rows) {
    std::vector<double> sig(m, 0.0);
    for (const auto& [k, v] : a->signal) sig.at(k) = v;
    out.signal.push_back(std::move(sig));
    out.noise.push_back(noise_row(*a));
  }
  out.validate();
  return out;
}

CoefficientMatrix materialize_noise(const CoefficientMatrix& m) {
  CoefficientMatrix out = m;
  const std::size_t n = m.size();
  if (m.noise_mode == NoiseMode::SingleTerminal) {
    out.noise_ids = {NoiseId{0, 0}};
    out.noise_times = {m.col_times[0]};
    out.first_noise = {m.schedule.c1(m.col_times[0])};
    out.noise.assign(n, {0.0});
    for (std::size_t r = 0; r < n; ++r) out.noise[r][0] = m.schedule.c1(m.row_times[r]);
  } else if (m.noise_mode == NoiseMode::FreshPerStep) {
    auto norm = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    };
    out.noise_ids.clear();
    out.noise_times.clear();
    for (std::size_t j = 0; j <= n; ++j) {
      out.noise_ids.push_back({static_cast<int>(j), 0});
      out.noise_times.push_back(j == 0 ? m.col_times[0] : m.row_times[j - 1]);
    }
    out.first_noise.assign(n + 1, 0.0);
    out.first_noise[0] = m.has_noise() ? norm(m.first_noise) : m.schedule.c1(m.col_times[0]);
    out.noise.assign(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t r = 0; r < n; ++r)
      out.noise[r][r + 1] = m.has_noise() ? norm(m.noise[r]) : m.schedule.c1(m.row_times[r]);
  } else if (!m.has_noise()) {
    throw ValidationError("traced noise mode without a noise block");
  }
  return out;
}

MarginalReport equivalent_marginals(const CoefficientMatrix& m) {
  const CoefficientMatrix full = m.has_noise() && m.noise_mode == NoiseMode::Traced ? m : materialize_noise(m);
  MarginalReport rep;
  for (std::size_t r = 0; r < m.size(); ++r) {
    MarginalRow row{};
    row.time = m.row_times[r];
    long double s = 0, q = 0;
    for (double v : m.signal[r]) s += v;
    for (double v : full.noise[r]) q += static_cast<long double>(v) * v;
    row.signal = static_cast<double>(s);
    row.noise = static_cast<double>(std::sqrt(q));
    row.ideal_signal = m.target(r);
    row.ideal_noise = m.schedule.c1(m.row_times[r]);
    row.signal_dev = std::abs(row.signal - row.ideal_signal);
    row.noise_dev = std::abs(row.noise - row.ideal_noise);
    rep.push_back(row);
  }
  return rep;
}

double max_deviation(const MarginalReport& r) {
  double d = 0;
  for (const auto& row : r) d = std::max({d, row.signal_dev, row.noise_dev});
  return d;
}

std::vector<double> deviation_trend(const SamplerSpec& spec, const Schedule& s, const std::vector<int>& steps,
                                    GridRule rule) {
  if (steps.size() < 2) throw ParameterError("deviation trend needs at least two step counts");
  std::vector<double> out;
  for (int n : steps) {
    SamplerSpec sp = spec;
    TimeGrid g = grid_for(sp, s, n, rule);
    out.push_back(max_deviation(equivalent_marginals(trace_sampler(sp, s, g))));
  }
  return out;
}

Normalized normalize_rows(const CoefficientMatrix& m) {
  Normalized out{m, {}};
  for (std::size_t r = 0; r < m.size(); ++r) {
    long double s = 0, mass = 0;
    for (double v : m.signal[r]) {
      s += v;
      mass += std::abs(v);
    }
    double sum = static_cast<double>(s);
    double target = m.target(r);
    if (sum == 0) throw NumericError("cannot normalize row " + std::to_string(r) + " with zero sum");
    double k = target / sum;
    if (std::abs(sum - target) <= 8 * std::numeric_limits<double>::epsilon() * static_cast<double>(mass)) k = 1.0;
    for (double& v : out.matrix.signal[r]) v *= k;
    out.scales.push_back(k);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << fmt(row[i]);
  os << '\n';
}

json schedule_json(const Schedule& s) {
  json j;
  switch (s.family()) {
    case Family::Flow:
      j["family"] = "flow";
      break;
    case Family::VpDiscrete:
      j["family"] = "vp-discrete";
      j["beta_min"] = s.beta_min();
      j["beta_max"] = s.beta_max();
      j["T"] = s.steps();
      break;
    case Family::VpContinuous:
      j["family"] = "vp-continuous";
      j["beta_min"] = s.beta_min();
      j["beta_max"] = s.beta_max();
      j["t_min"] = s.t_min();
      break;
  }
  return j;
}

Schedule schedule_from(const json& h) {
  std::string fam = h.at("family").get<std::string>();
  if (fam == "flow") return Schedule::flow();
  if (fam == "vp-discrete")
    return Schedule::vp_linear(h.at("beta_min").get<double>(), h.at("beta_max").get<double>(), h.at("T").get<int>());
  if (fam == "vp-continuous")
    return Schedule::vp_continuous(h.at("beta_min").get<double>(), h.at("beta_max").get<double>(),
                                   h.value("t_min", 1e-3));
  throw ParseError("unknown schedule family: " + fam);
}

std::vector<double> parse_numbers(const std::string& line, int lineno) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (true) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    double v = 0;
    auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc{})
      throw ParseError("line " + std::to_string(lineno) + ", column " + std::to_string(p - line.data() + 1) +
                       ": expected a number");
    out.push_back(v);
    p = res.ptr;
  }
  return out;
}

}  // namespace

void save(const CoefficientMatrix& m, std::ostream& os) {
  m.validate();
  json h = {{"format", "nimatrix/1"}, {"name", m.name}, {"note", m.note}};
  h.update(schedule_json(m.schedule));
  h["row_times"] = m.row_times;
  h["col_times"] = m.col_times;
  h["noise_mode"] = to_string(m.noise_mode);
  if (m.has_noise()) {
    json ids = json::array();
    for (auto id : m.noise_ids) ids.push_back({id.step, id.draw});
    h["noise_ids"] = ids;
    h["noise_times"] = m.noise_times;
  }
  if (!m.targets.empty()) h["targets"] = m.targets;
  if (!m.ref_sums.empty()) h["ref_sums"] = m.ref_sums;
  if (!m.ref_norms.empty()) h["ref_norms"] = m.ref_norms;
  os << h.dump() << "\nsignal\n";
  for (const auto& row : m.signal) write_row(os, row);
  if (m.has_noise()) {
    os << "noise\n";
    write_row(os, m.first_noise);
    for (const auto& row : m.noise) write_row(os, row);
  }
}

void save(const CoefficientMatrix& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  save(m, f);
  if (!f) throw IoError("write failed: " + path);
}

CoefficientMatrix load(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!std::getline(is, line)) throw ParseError("empty matrix file");
  ++lineno;
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("line 1: bad header: ") + e.what());
  }
  CoefficientMatrix m;
  try {
    if (h.value("format", "") != "nimatrix/1") throw ParseError("line 1: unsupported format");
    m.name = h.value("name", "");
    m.note = h.value("note", "");
    m.schedule = schedule_from(h);
    m.row_times = h.at("row_times").get<std::vector<double>>();
    m.col_times = h.at("col_times").get<std::vector<double>>();
    m.noise_mode = parse_noise_mode(h.value("noise_mode", "single-terminal"));
    if (h.contains("noise_ids"))
      for (const auto& id : h["noise_ids"]) m.noise_ids.push_back({id.at(0).get<int>(), id.at(1).get<int>()});
    if (h.contains("noise_times")) m.noise_times = h["noise_times"].get<std::vector<double>>();
    if (h.contains("targets")) m.targets = h["targets"].get<std::vector<double>>();
    if (h.contains("ref_sums")) m.ref_sums = h["ref_sums"].get<std::vector<double>>();
    if (h.contains("ref_norms")) m.ref_norms = h["ref_norms"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("line 1: bad header field: ") + e.what());
  } catch (const Error& e) {
    throw ParseError(std::string("line 1: ") + e.what());
  }

  Rows* cur = nullptr;
  Rows noise_block;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line == "signal") {
      cur = &m.signal;
      continue;
    }
    if (line == "noise") {
      cur = &noise_block;
      continue;
    }
    if (!cur) throw ParseError("line " + std::to_string(lineno) + ": data before a section marker");
    cur->push_back(parse_numbers(line, lineno));
  }
  if (!noise_block.empty()) {
    m.first_noise = noise_block.front();
    m.noise.assign(noise_block.begin() + 1, noise_block.end());
  }
  const std::size_t cols = m.col_times.size();
  if (m.signal.size() != cols)
    throw ParseError("signal block has " + std::to_string(m.signal.size()) + " rows, expected " +
                     std::to_string(cols));
  for (std::size_t r = 0; r < cols; ++r)
    if (m.signal[r].size() != cols)
      throw ParseError("signal row " + std::to_string(r) + " has " + std::to_string(m.signal[r].size()) +
                       " entries, expected " + std::to_string(cols));
  if (!noise_block.empty() && m.noise.size() != cols)
    throw ParseError("noise block has " + std::to_string(noise_block.size()) + " rows, expected " +
                     std::to_string(cols + 1));
  m.validate();
  return m;
}

CoefficientMatrix load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load(f);
}

CoefficientMatrix parse_matrix(const std::string& text) {
  std::istringstream is(text);
  return load(is);
}

void write_csv(const CoefficientMatrix& m, std::ostream& os, bool noise) {
  if (!noise) {
    os << "time";
    for (double t : m.col_times) os << ',' << fmt(t);
    os << '\n';
    for (std::size_t r = 0; r < m.size(); ++r) {
      os << fmt(m.row_times[r]);
      for (double v : m.signal[r]) os << ',' << fmt(v);
      os << '\n';
    }
    return;
  }
  const CoefficientMatrix full = m.has_noise() && m.noise_mode == NoiseMode::Traced ? m : materialize_noise(m);
  os << "time";
  for (double t : full.noise_times) os << ',' << fmt(t);
  os << '\n' << fmt(full.col_times[0]);
  for (double v : full.first_noise) os << ',' << fmt(v);
  os << '\n';
  for (std::size_t r = 0; r < full.size(); ++r) {
    os << fmt(full.row_times[r]);
    for (double v : full.noise[r]) os << ',' << fmt(v);
    os << '\n';
  }
}

Comparison compare(const CoefficientMatrix& computed, const CoefficientMatrix& reference, double zero_tol) {
  if (computed.size() != reference.size()) throw ValidationError("matrices differ in size");
  Comparison c;
  const std::size_t m = computed.size();
  for (std::size_t r = 0; r < m; ++r) {
    double sum = 0, ref_sum = 0;
    for (std::size_t k = 0; k < m; ++k) {
      double a = computed.signal[r][k], b = reference.signal[r][k];
      sum += a;
      ref_sum += b;
      double err = std::abs(a - b);
      if (err > c.max_signal_err) {
        c.max_signal_err = err;
        c.worst_row = r;
        c.worst_col = k;
      }
      if (b != 0 ? (a == 0 || std::signbit(a) != std::signbit(b)) : std::abs(a) >= zero_tol) ++c.sign_mismatches;
    }
    double want = reference.ref_sums.empty() ? ref_sum : reference.ref_sums[r];
    c.max_sum_err = std::max(c.max_sum_err, std::abs(sum - want));
  }
  if (reference.has_noise() && computed.has_noise()) {
    for (std::size_t r = 0; r < m; ++r) {
      double q = 0;
      for (std::size_t j = 0; j < computed.noise_ids.size(); ++j) {
        double a = computed.noise[r][j];
        q += a * a;
        auto it = std::find(reference.noise_ids.begin(), reference.noise_ids.end(), computed.noise_ids[j]);
        double b = it == reference.noise_ids.end() ? 0.0 : reference.noise[r][it - reference.noise_ids.begin()];
        c.max_noise_err = std::max(c.max_noise_err, std::abs(a - b));
      }
      for (std::size_t j = 0; j < reference.noise_ids.size(); ++j) {
        auto id = reference.noise_ids[j];
        if (std::find(computed.noise_ids.begin(), computed.noise_ids.end(), id) == computed.noise_ids.end())
          c.max_noise_err = std::max(c.max_noise_err, std::abs(reference.noise[r][j]));
      }
      if (!reference.ref_norms.empty())
        c.max_norm_err = std::max(c.max_norm_err, std::abs(std::sqrt(q) - reference.ref_norms[r]));
    }
  }
  return c;
}

}  // namespace ni
