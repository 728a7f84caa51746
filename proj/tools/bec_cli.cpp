// bec: command-line frontend for bulk and edge indices.

#include "bec/bundle.hpp"
#include "bec/halfline.hpp"
#include "bec/index.hpp"
#include "bec/io.hpp"
#include "bec/model.hpp"
#include "bec/scatter.hpp"
#include "bec/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace bec;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string model = "haldane";
  std::string model_file;
  ParamMap params;
  std::optional<double> mu;
  int n_k = 401;         // ribbon k grid
  int bulk_n_k = 101;    // bundle k grid
  int n_kappa = 128;
  int n_contour = 256;
  int L = 60;
  int W = 10;
  double threshold = 0.5;
  double slope_tol = 1e-4;
  double eta = 1e-8;
  double min_sv = 0.1;
  std::uint64_t seed = 0x5eed;
  std::string window;
  std::string type = "auto";
  std::string out;
  std::string csv;
  std::string cache_dir;
  double boundary_shift = 0.0;
  bool allow_gapless = false;

  // command-specific
  std::vector<int> bands;
  std::string route = "both";
  std::string k_range;
  std::optional<double> delta;
  std::optional<double> fermi;
  std::string z = "0,0.1";
  double k = 0.0;
};

std::pair<double, double> parse_pair(const std::string& s, const std::string& what) {
  std::stringstream ss(s);
  double a = 0, b = 0;
  char c = 0;
  if (!(ss >> a >> c >> b) || c != ',' || !(ss >> std::ws).eof())
    throw ConfigError(what + ": expected two comma-separated numbers, got '" + s + "'");
  return {a, b};
}

void validate(const RunConfig& c) {
  if (c.n_k < 11) throw ConfigError("--n-k must be at least 11");
  if (c.bulk_n_k < 11) throw ConfigError("--bulk-n-k must be at least 11");
  if (c.n_kappa < 16) throw ConfigError("--n-kappa must be at least 16");
  if (c.n_contour < 32) throw ConfigError("--n-contour must be at least 32");
  if (c.L < 10) throw ConfigError("--L must be at least 10");
  if (c.W < 1 || c.W > c.L) throw ConfigError("--W must lie in [1, L]");
  if (!(c.threshold > 0 && c.threshold < 1)) throw ConfigError("--threshold must lie in (0, 1)");
  if (!(c.slope_tol > 0) || !(c.eta > 0) || !(c.min_sv > 0)) throw ConfigError("tolerances must be positive");
}

// Shared flags; every subcommand owns its copy of the option objects.
void add_common(CLI::App* app, RunConfig& c) {
  app->add_option("--model", c.model, "built-in model name");
  app->add_option("--model-file", c.model_file, "model JSON file (overrides --model)");
  for (const char* p : {"t", "tp", "lv", "e0"}) {
    const std::string name = p;
    app->add_option_function<double>("--" + name, [&c, name](double v) { c.params[name] = v; },
                                      "model parameter " + name);
  }
  app->add_option_function<double>("--mu", [&c](double v) { c.mu = v; }, "Fermi level");
  app->add_option("--n-k", c.n_k, "ribbon k points");
  app->add_option("--bulk-n-k", c.bulk_n_k, "bundle k points (odd)");
  app->add_option("--n-kappa", c.n_kappa, "Bloch bundle kappa points");
  app->add_option("--n-contour", c.n_contour, "contour points");
  app->add_option("--L", c.L, "ribbon cells");
  app->add_option("--W", c.W, "localization window cells");
  app->add_option("--threshold", c.threshold, "edge weight threshold");
  app->add_option("--slope-tol", c.slope_tol, "tangential crossing tolerance");
  app->add_option("--eta", c.eta, "spectrum distance for decaying frames");
  app->add_option("--min-sv", c.min_sv, "overlap singular value that triggers refinement");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--boundary-shift", c.boundary_shift, "add s P to V_1 at the edge");
  app->add_option("--out", c.out, "JSON output path (default stdout)");
  app->add_option("--cache-dir", c.cache_dir, "ribbon spectrum cache (default $BEC_CACHE_DIR)");
}

struct Context {
  ModelSpec model;
  EdgeModelSpec edge;
  double mu = 0.0;
};

Context load(const RunConfig& c) {
  validate(c);
  Context x;
  std::optional<EdgeModelSpec> file_edge;
  if (!c.model_file.empty()) {
    ModelFile f = load_model_file(c.model_file);
    x.model = f.model;
    file_edge = f.edge;
  } else {
    ParamMap p = c.params;
    if (c.mu) p["mu"] = *c.mu;
    x.model = build_model(c.model, p);
  }
  validate_model(x.model);
  x.mu = c.mu.value_or(x.model.mu);
  if (file_edge && c.boundary_shift != 0.0) throw ConfigError("--boundary-shift conflicts with the file's edge");
  if (file_edge)
    x.edge = *file_edge;
  else if (c.boundary_shift != 0.0)
    x.edge = shifted_edge(x.model, c.boundary_shift);
  else
    x.edge = edge_model(x.model);
  const std::string cache = !c.cache_dir.empty() ? c.cache_dir
                            : std::getenv("BEC_CACHE_DIR") ? std::getenv("BEC_CACHE_DIR")
                                                           : "";
  set_spectrum_cache_dir(cache);
  return x;
}

EdgeOptions edge_options(const RunConfig& c) {
  EdgeOptions o;
  o.L = c.L;
  o.W = c.W;
  o.threshold = c.threshold;
  o.allow_gapless = c.allow_gapless;
  return o;
}

BulkOptions bulk_options(const RunConfig& c) {
  BulkOptions o;
  o.n_contour = c.n_contour;
  o.n_k = c.bulk_n_k;
  o.n_kappa = c.n_kappa;
  o.min_sv = c.min_sv;
  return o;
}

// Energy window inside the gap around mu: half of each adjacent gap.
std::pair<double, double> window_for(const RunConfig& c, const Context& x) {
  if (!c.window.empty()) {
    auto w = parse_pair(c.window, "--window");
    if (!(w.first < w.second)) throw ConfigError("--window: empty window");
    return w;
  }
  const BandSummary s = band_summary(x.model, x.mu);
  if (!s.gapped) throw AssumptionError("mu = " + format_double(x.mu) + " is not in a bulk gap; pass --window");
  return {x.mu - 0.5 * std::min(s.gap_below, 1.0), x.mu + 0.5 * std::min(s.gap_above, 1.0)};
}

bool use_ti(const RunConfig& c, const ModelSpec& m) {
  if (c.type == "ti") {
    if (!m.theta) throw ConfigError("--type ti needs a model with time reversal");
    return true;
  }
  if (c.type == "qh") return false;
  if (c.type != "auto") throw ConfigError("--type must be auto, ti or qh");
  return m.theta.has_value();
}

std::vector<int> band_selection(const RunConfig& c, const Context& x) {
  std::vector<int> b;
  if (!c.bands.empty()) {
    const int D = x.model.M * x.model.N;
    for (int v : c.bands) {
      if (v < 1 || v > D) throw ConfigError("--band values are 1-based and at most " + std::to_string(D));
      b.push_back(v - 1);
    }
    return b;
  }
  const BandSummary s = band_summary(x.model, x.mu);
  if (!s.gapped) throw AssumptionError("mu is not in a bulk gap; pass --band");
  for (int i = 0; i < s.filled; ++i) b.push_back(i);
  if (b.empty()) throw AssumptionError("no band lies below mu");
  return b;
}

json bulk_json(const BulkResult& r, const std::string& bundle) {
  return {{"method", r.method}, {"bundle", bundle}, {"value", r.value}, {"grid", {r.n1, r.n2}},
          {"min_overlap_sv", r.min_sv}, {"refinement_level", r.refinement_level}};
}

json crossings_json(const std::vector<Crossing>& cs) {
  json a = json::array();
  for (const auto& c : cs) a.push_back({{"k", c.k}, {"branch", c.branch}, {"slope", c.slope}, {"weight", c.weight}});
  return a;
}

struct EdgeCount {
  EdgeSpectrum spectrum;
  std::vector<Crossing> crossings;
};

// An explicit --window may meet the bulk (gapless models such as graphene); the automatic
// window requires a gap.
EdgeOptions listing_options(const RunConfig& c) {
  EdgeOptions o = edge_options(c);
  o.allow_gapless = c.allow_gapless || !c.window.empty();
  return o;
}

EdgeCount edge_count(const RunConfig& c, const Context& x, bool gated) {
  const auto [lo, hi] = window_for(c, x);
  EdgeCount r{edge_spectrum(x.edge, periodic_grid(c.n_k), lo, hi, gated ? edge_options(c) : listing_options(c)), {}};
  r.crossings = find_crossings(r.spectrum, x.mu, c.slope_tol);
  return r;
}

std::string csv_line(std::initializer_list<double> xs) {
  std::string s;
  for (double v : xs) s += (s.empty() ? "" : ",") + format_double(v);
  return s + "\n";
}

// --- commands ----------------------------------------------------------------

json cmd_bands(const RunConfig& c, const Context& x) {
  const BandSummary s = band_summary(x.model, x.mu, c.bulk_n_k, c.n_kappa);
  json v = {{"band_min", std::vector<double>(s.band_min.data(), s.band_min.data() + s.band_min.size())},
            {"band_max", std::vector<double>(s.band_max.data(), s.band_max.data() + s.band_max.size())},
            {"filled", s.filled},
            {"gapped", s.gapped}};
  if (s.gap_below < 1e299) v["gap_below"] = s.gap_below;
  if (s.gap_above < 1e299) v["gap_above"] = s.gap_above;
  if (!c.csv.empty()) {
    std::string out = "k,band,energy_min,energy_max\n";
    for (double k : periodic_grid(c.bulk_n_k)) {
      const int D = x.model.M * x.model.N;
      rvec lo = rvec::Constant(D, 1e300), hi = rvec::Constant(D, -1e300);
      for (int j = 0; j < c.n_kappa; ++j) {
        const rvec e = bloch_bands(x.model, kTwoPi * j / c.n_kappa, k);
        lo = lo.cwiseMin(e);
        hi = hi.cwiseMax(e);
      }
      for (int b = 0; b < D; ++b) out += csv_line({k, double(b + 1), lo(b), hi(b)});
    }
    write_file_atomic(c.csv, out);
  }
  return {{"values", v}};
}

json cmd_edge_spectrum(const RunConfig& c, const Context& x) {
  const auto [lo, hi] = window_for(c, x);
  const EdgeSpectrum s = edge_spectrum(x.edge, periodic_grid(c.n_k), lo, hi, listing_options(c));
  int localized = 0;
  for (const auto& b : s.branches) localized += b.localized;
  if (!c.csv.empty()) {
    std::string out = "k,branch_id,energy,localization\n";
    for (const auto& b : s.branches)
      for (std::size_t i = 0; i < b.idx.size(); ++i)
        out += csv_line({s.k[b.idx[i]], double(b.id), b.energy[i], b.weight[i]});
    write_file_atomic(c.csv, out);
  }
  return {{"values", {{"method", "ribbon"}, {"branches", s.branches.size()}, {"localized_branches", localized}}},
          {"diagnostics", {{"window", {lo, hi}}, {"window_gapped", s.window_gapped}}}};
}

json cmd_edge_index(const RunConfig& c, const Context& x) {
  const EdgeCount r = edge_count(c, x, false);
  json v = {{"method", "ribbon"}, {"crossings", crossings_json(r.crossings)}};
  // With time reversal n counts crossings over [0, pi]; without it, n counts localized
  // crossings over the whole circle and value is their signed sum.
  if (use_ti(c, x.model)) {
    const TiCount t = ti_count_from_crossings(r.crossings, c.threshold);
    v["n"] = t.n;
    v["twice_n"] = t.twice_n;
    v["index"] = t.index;
  } else {
    const int n = static_cast<int>(std::count_if(r.crossings.begin(), r.crossings.end(),
                                                 [&](const Crossing& x) { return x.weight >= c.threshold; }));
    v["n"] = n;
    v["index"] = n % 2 == 0 ? 1 : -1;
    v["value"] = qh_count_from_crossings(r.crossings, c.threshold);
  }
  return {{"values", v},
          {"diagnostics",
           {{"window", {r.spectrum.lo, r.spectrum.hi}}, {"window_gapped", r.spectrum.window_gapped}}}};
}

json cmd_bulk_index(const RunConfig& c, const Context& x) {
  const BulkResult r =
      use_ti(c, x.model) ? bulk_index_ti(x.model, x.mu, bulk_options(c)) : bulk_index_qh(x.model, x.mu, bulk_options(c));
  return {{"values", bulk_json(r, "solution")}};
}

json cmd_chern(const RunConfig& c, const Context& x) {
  std::vector<int> b = band_selection(c, x);
  json v = bulk_json(band_chern(x.model, b, bulk_options(c)), "bloch");
  for (int& i : b) ++i;
  v["bands"] = b;
  return {{"values", v}};
}

json cmd_z2(const RunConfig& c, const Context& x) {
  if (!x.model.theta) throw ConfigError("z2: model has no time reversal");
  std::vector<int> b = band_selection(c, x);
  if (c.route != "both" && c.route != "eigenphase" && c.route != "pfaffian")
    throw ConfigError("--route must be eigenphase, pfaffian or both");
  json v;
  std::optional<int> e, p;
  if (c.route != "pfaffian") {
    const BulkResult r = band_z2(x.model, b, bulk_options(c));
    v["eigenphase"] = bulk_json(r, "bloch");
    e = r.value;
  }
  if (c.route != "eigenphase") {
    const BulkResult r = band_fu_kane(x.model, b, bulk_options(c));
    v["pfaffian"] = bulk_json(r, "bloch");
    p = r.value;
  }
  v["value"] = e ? *e : *p;
  if (e && p) v["agree"] = *e == *p;
  for (int& i : b) ++i;
  v["bands"] = b;
  return {{"values", v}};
}

json cmd_verify_duality(const RunConfig& c, const Context& x) {
  const bool ti = use_ti(c, x.model);
  const EdgeCount r = edge_count(c, x, true);
  const BulkResult b = ti ? bulk_index_ti(x.model, x.mu, bulk_options(c)) : bulk_index_qh(x.model, x.mu, bulk_options(c));
  const int edge = ti ? ti_count_from_crossings(r.crossings, c.threshold).index
                      : qh_count_from_crossings(r.crossings, c.threshold);
  return {{"values",
           {{"type", ti ? "ti" : "qh"},
            {"bulk", b.value},
            {"edge", edge},
            {"equal", b.value == edge},
            {"bulk_detail", bulk_json(b, "solution")},
            {"edge_detail", {{"method", "ribbon"}, {"crossings", crossings_json(r.crossings)}}}}},
          {"diagnostics", {{"window", {r.spectrum.lo, r.spectrum.hi}}}}};
}

json cmd_scatter(const RunConfig& c, const Context& x) {
  if (c.k_range.empty()) throw ConfigError("scatter: --k-range is required");
  const auto [k1, k2] = parse_pair(c.k_range, "--k-range");
  if (!(k1 < k2)) throw ConfigError("--k-range: need k1 < k2");
  int ell;
  if (!c.bands.empty()) {
    if (c.bands.size() != 1) throw ConfigError("scatter takes a single --band");
    ell = c.bands[0] - 1;
    if (ell < 0 || ell >= x.model.N * x.model.M) throw ConfigError("--band out of range");
  } else {
    ell = band_selection(c, x).back();
  }
  const EdgeOptions eo = edge_options(c);
  const LevinsonReport lr = levinson_delta(x.edge, ell, k1, k2, {1e-2, 5e-3, 2.5e-3}, 201, eo);
  std::vector<double> grid(41);
  for (int i = 0; i < 41; ++i) grid[i] = k1 + (k2 - k1) * i / 40;
  json v = {{"band", ell + 1},
            {"levinson",
             {{"k_range", {lr.k1, lr.k2}},
              {"deltas", lr.deltas},
              {"phase_changes", lr.phase_changes},
              {"phase_change", lr.phase_change},
              {"N_plus", lr.N_plus},
              {"consistent", lr.consistent}}},
            {"semi_bound_k", semi_bound_scan(x.edge, ell, grid)}};
  if (c.fermi) {
    json tr = json::array();
    for (double kc : edge_zeros(x.edge, *c.fermi)) {
      if (kc < k1 || kc > k2) continue;
      tr.push_back({{"k", kc}, {"det_T_phase_change", transition_phase_change(x.edge, *c.fermi, kc, 0.02, 0.005)}});
    }
    v["transitions"] = tr;
  }
  const double delta = c.delta.value_or(lr.deltas.back());
  const ScatterTrace t = scatter_trace(x.edge, ell, k1, k2, delta);
  json d = {{"delta", delta}, {"trace_points", t.k.size()}};
  double flux = 0.0;
  for (std::size_t i = 0; i < t.k.size(); ++i) flux = std::max(flux, std::abs(std::abs(t.S[i]) - 1.0));
  d["max_abs_S_minus_1"] = flux;
  if (!c.csv.empty()) {
    std::string out = "k,re_S,im_S,arg_S\n";
    for (std::size_t i = 0; i < t.k.size(); ++i) out += csv_line({t.k[i], t.S[i].real(), t.S[i].imag(), t.arg[i]});
    write_file_atomic(c.csv, out);
  }
  return {{"values", v}, {"diagnostics", d}};
}

json cmd_model_dump(const RunConfig&, const Context& x) {
  return {{"values", {{"model", model_to_json(x.model, &x.edge)}}}};
}

const char* class_name(RootClass c) {
  switch (c) {
    case RootClass::inside: return "inside";
    case RootClass::outside: return "outside";
    case RootClass::unimodular: return "unimodular";
    case RootClass::zero: return "zero";
    case RootClass::infinite: return "infinite";
  }
  return "?";
}

json cmd_transfer_probe(const RunConfig& c, const Context& x) {
  const auto [zr, zi] = parse_pair(c.z, "--z");
  const cplx z(zr, zi);
  const auto roots = transfer_roots(x.model, z, c.k, c.eta);
  json rs = json::array();
  for (const auto& r : roots)
    rs.push_back({{"re", r.xi.real()}, {"im", r.xi.imag()}, {"abs", std::abs(r.xi)}, {"class", class_name(r.cls)},
                  {"mult", r.mult}});
  const RootCount n = count_roots(roots);
  json v = {{"roots", rs},
            {"counts",
             {{"inside", n.inside}, {"outside", n.outside}, {"unimodular", n.unimodular}, {"zero", n.zero},
              {"infinite", n.infinite}}}};
  json d;
  if (n.unimodular == 0) {
    FrameOptions fo;
    fo.eta = c.eta;
    const Frame f = decaying_frame(x.model, z, c.k, fo);
    d["frame_residual"] = frame_residual(x.model, f, 30);
    d["edge_smin"] = edge_smin(x.edge, z, c.k);
  }
  return {{"values", v}, {"diagnostics", d}};
}

// --- selfcheck ----------------------------------------------------------------

json cmd_selfcheck(const RunConfig& c, const Context&, bool& failed) {
  json checks = json::array();
  auto run = [&](const std::string& name, const std::function<std::string()>& f) {
    json r = {{"name", name}};
    try {
      const std::string err = f();
      r["pass"] = err.empty();
      if (!err.empty()) r["detail"] = err;
    } catch (const std::exception& e) {
      r["pass"] = false;
      r["detail"] = e.what();
    }
    failed = failed || !r["pass"].get<bool>();
    checks.push_back(r);
  };

  run("models validate", [] {
    for (const auto& n : builtin_names()) validate_model(build_model(n));
    return std::string();
  });
  run("time reversal", [] {
    for (const auto& n : builtin_names()) {
      const ModelSpec m = build_model(n);
      if (m.theta && !check_time_reversal(m, closed_grid(17)).pass) return n + " violates TRS";
    }
    return std::string();
  });
  run("decaying frames", [] {
    for (const auto& n : builtin_names()) {
      const ModelSpec m = build_model(n);
      const Frame f = decaying_frame(m, cplx(m.mu, 0.3), 0.7);
      if (f.boundary.cols() != m.N * m.M) return n + ": frame rank " + std::to_string(f.boundary.cols());
      if (frame_residual(m, f) > 1e-8) return n + ": frame residual too large";
    }
    return std::string();
  });
  run("kramers pairing", [&] {
    for (int s = 0; s < 20; ++s)
      if (!kramers_check(random_kramers(4, c.seed + s), 1e-9).pass) return "seed " + std::to_string(s);
    return std::string();
  });
  run("pfaffian squared is det", [&] {
    for (int s = 0; s < 20; ++s) {
      const cmat a = random_complex(6, 6, c.seed + s);
      const cmat w = a - a.transpose();
      const cplx p = pfaffian(w);
      if (std::abs(p * p - w.determinant()) > 1e-9 * std::max(1.0, std::abs(w.determinant())))
        return "seed " + std::to_string(s);
    }
    return std::string();
  });
  run("endpoint-degenerate index", [&] {
    for (int s = 0; s < 10; ++s) {
      const KramersFamily f = kramers_family(4, c.seed + s);
      if (family_index(f.at) != f.expected_index) return "seed " + std::to_string(s);
    }
    return std::string();
  });
  run("haldane band chern is +-1", [] {
    BulkOptions o;
    o.n_kappa = 32;
    o.n_k = 33;
    const int v = band_chern(build_model("haldane"), {0}, o).value;
    return std::abs(v) == 1 ? std::string() : "value " + std::to_string(v);
  });
  run("kane_mele ribbon kramers degeneracy", [] {
    const EdgeModelSpec e = edge_model(build_model("kane_mele"));
    for (double k : {0.0, kPi}) {
      const rvec ev = Eigen::SelfAdjointEigenSolver<cmat>(truncate(e, 20, k)).eigenvalues();
      for (int i = 0; i + 1 < ev.size(); i += 2)
        if (std::abs(ev(i) - ev(i + 1)) > 1e-9) return "split at k = " + format_double(k);
    }
    return std::string();
  });
  run("reflection map involution", [] {
    const BandChart ch = band_chart(build_model("haldane"), 0, 2.0);
    for (double d : {0.1, 0.5, 1.0}) {
      const double kap = ch.kappa_plus + d;
      const double back = reflection_map(ch, reflection_map(ch, kap));
      if (std::abs(wrap_angle(back - kap)) > 1e-8) return std::string("r(r(kappa)) != kappa");
    }
    return std::string();
  });
  return {{"values", {{"checks", checks}, {"failures", std::count_if(checks.begin(), checks.end(), [](const json& j) {
                                              return !j["pass"].get<bool>();
                                            })}}}};
}

// --- output ----------------------------------------------------------------------

void round_floats(json& j) {
  if (j.is_number_float()) {
    j = std::stod(format_double(j.get<double>()));
  } else if (j.is_structured()) {
    for (auto& v : j) round_floats(v);
  }
}

json config_echo(const RunConfig& c, const Context& x) {
  json p = json::object();
  for (const auto& [k, v] : c.params) p[k] = v;
  json j = {{"model", c.model_file.empty() ? c.model : c.model_file},
            {"params", p},
            {"mu", x.mu},
            {"grids", {{"n_k", c.n_k}, {"bulk_n_k", c.bulk_n_k}, {"n_kappa", c.n_kappa}, {"n_contour", c.n_contour},
                       {"L", c.L}, {"W", c.W}}},
            {"tolerances", {{"eta", c.eta}, {"threshold", c.threshold}, {"slope_tol", c.slope_tol},
                            {"min_sv", c.min_sv}}},
            {"seed", c.seed}};
  if (c.boundary_shift != 0.0) j["boundary_shift"] = c.boundary_shift;
  if (!c.window.empty()) j["window"] = c.window;
  return j;
}

int exit_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 4;
  if (dynamic_cast<const AssumptionError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 4;
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bulk and edge topological indices of one-edge-periodic lattice Hamiltonians"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  RunConfig cfg;

  using Handler = std::function<json(const RunConfig&, const Context&, bool&)>;
  std::vector<std::pair<CLI::App*, Handler>> commands;
  auto plain = [](json (*f)(const RunConfig&, const Context&)) {
    return Handler([f](const RunConfig& c, const Context& x, bool&) { return f(c, x); });
  };
  auto add = [&](const std::string& name, const std::string& help, Handler h) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, cfg);
    commands.emplace_back(s, std::move(h));
    return s;
  };

  auto* bands = add("bands", "bulk band extrema", plain(cmd_bands));
  bands->add_option("--csv", cfg.csv, "CSV k,band,energy_min,energy_max");

  auto* es = add("edge-spectrum", "ribbon spectrum with tracked branches", plain(cmd_edge_spectrum));
  es->add_option("--window", cfg.window, "energy window lo,hi");
  es->add_option("--csv", cfg.csv, "CSV k,branch_id,energy,localization");
  es->add_flag("--allow-gapless", cfg.allow_gapless, "accept windows that meet the bulk");

  auto* ei = add("edge-index", "edge index from Fermi-level crossings", plain(cmd_edge_index));
  ei->add_option("--window", cfg.window, "energy window lo,hi");
  ei->add_option("--type", cfg.type, "auto | ti | qh");

  auto* bi = add("bulk-index", "bulk index of the decaying-solution bundle", plain(cmd_bulk_index));
  bi->add_option("--type", cfg.type, "auto | ti | qh");

  auto* ch = add("chern", "Chern number of Bloch bands", plain(cmd_chern));
  ch->add_option("--band", cfg.bands, "1-based band numbers (default: bands below mu)")->delimiter(',');

  auto* z2 = add("z2", "Z2 index of Bloch bands", plain(cmd_z2));
  z2->add_option("--band", cfg.bands, "1-based band numbers (default: bands below mu)")->delimiter(',');
  z2->add_option("--route", cfg.route, "eigenphase | pfaffian | both");

  auto* vd = add("verify-duality", "bulk index against edge index", plain(cmd_verify_duality));
  vd->add_option("--window", cfg.window, "energy window lo,hi");
  vd->add_option("--type", cfg.type, "auto | ti | qh");

  auto* sc = add("scatter", "edge scattering phase and Levinson count", plain(cmd_scatter));
  sc->add_option("--band", cfg.bands, "1-based band (default: top band below mu)");
  sc->add_option("--k-range", cfg.k_range, "k1,k2")->required();
  sc->add_option_function<double>("--delta", [&](double v) { cfg.delta = v; }, "kappa offset of the CSV trace");
  sc->add_option_function<double>("--fermi", [&](double v) { cfg.fermi = v; }, "det T phase change at crossings of this level");
  sc->add_option("--csv", cfg.csv, "CSV k,re_S,im_S,arg_S");

  add("selfcheck", "invariant suite on the built-in models", cmd_selfcheck);
  add("model-dump", "model as JSON", plain(cmd_model_dump));

  auto* tp = add("transfer-probe", "roots of the transfer pencil at (z, k)", plain(cmd_transfer_probe));
  tp->add_option("--z", cfg.z, "re,im");
  tp->add_option("--k", cfg.k, "momentum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  for (auto& [sub, handler] : commands) {
    if (!sub->parsed()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Context x = load(cfg);
      bool failed = false;
      json r = handler(cfg, x, failed);
      json doc = {{"command", sub->get_name()}, {"version", kVersion}, {"config", config_echo(cfg, x)}};
      doc["values"] = r["values"];
      doc["diagnostics"] = r.contains("diagnostics") && !r["diagnostics"].is_null() ? r["diagnostics"] : json::object();
      doc["timings"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
      round_floats(doc);
      const std::string text = doc.dump(2) + "\n";
      if (cfg.out.empty())
        std::cout << text;
      else
        write_file_atomic(cfg.out, text);
      return failed ? 1 : 0;
    } catch (const std::exception& e) {
      std::cerr << "bec " << sub->get_name() << ": " << e.what() << "\n";
      return exit_for(e);
    }
  }
  return 4;
}
