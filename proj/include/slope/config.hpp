#pragma once

// JSON form of ExperimentConfig and serialization of ExperimentReport.
//
// {
//   "design":  {"kind": "gaussian_iid", "n": 500, "p": 500, "seed": 1, "rho": 0.5},
//   "signal":  {"kind": "fixed_amplitude", "k": 50, "amplitude": 17.6}
//              amplitude may instead be given as "amplitude_sqrt2logp": 5.0;
//              "kind": "class" takes "class_id", "kind": "gaussian" takes an sd
//              in "amplitude",
//   "method":  {"kind": "slope", "lambda_kind": "bh", "q": 0.1},
//              lasso takes an optional "lambda"; bhc_weighted takes "weight_table" (CSV path),
//   "debias": false, "replications": 200, "noise_sd": 1.0, "master_seed": 7, "threads": 0,
//   "solver":  {"gap_tol": 1e-6, "infeas_tol": 1e-6, "max_iters": 20000}
// }
//
// Unknown keys are rejected. to_json() emits the resolved configuration with
// every default filled in; its compact dump is what the config hash covers.

#include <cstdint>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "slope/errors.hpp"
#include "slope/experiment.hpp"
#include "slope/format.hpp"
#include "slope/version.hpp"

namespace slope {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T get_required(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return get_or<T>(obj, key, T{}, where);
}

inline DesignKind design_kind_from(const std::string& s) {
  if (s == "orthogonal") return DesignKind::orthogonal;
  if (s == "gaussian_iid") return DesignKind::gaussian_iid;
  if (s == "dct_restricted") return DesignKind::dct_restricted;
  if (s == "equicorrelated_whitened") return DesignKind::equicorrelated_whitened;
  throw ConfigError("design.kind: unknown value '" + s + "'");
}

inline MethodKind method_kind_from(const std::string& s) {
  if (s == "slope") return MethodKind::slope;
  if (s == "lasso") return MethodKind::lasso;
  if (s == "bh_marginal") return MethodKind::bh_marginal;
  if (s == "fdr_threshold") return MethodKind::fdr_threshold;
  throw ConfigError("method.kind: unknown value '" + s + "'");
}

inline const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::bh: return "bh";
    case SequenceKind::bhc_gaussian: return "bhc_gaussian";
    case SequenceKind::bhc_weighted: return "bhc_weighted";
  }
  return "unknown";
}

inline SequenceKind sequence_kind_from(const std::string& s) {
  if (s == "bh") return SequenceKind::bh;
  if (s == "bhc_gaussian" || s == "bhc-gaussian") return SequenceKind::bhc_gaussian;
  if (s == "bhc_weighted" || s == "bhc-weighted") return SequenceKind::bhc_weighted;
  throw ConfigError("lambda kind: unknown value '" + s + "'");
}

inline const char* signal_kind_name(SignalKind k) {
  switch (k) {
    case SignalKind::signal_class: return "class";
    case SignalKind::fixed_amplitude: return "fixed_amplitude";
    case SignalKind::gaussian: return "gaussian";
  }
  return "unknown";
}

}  // namespace detail

/// Parsed configuration plus the weight-table path, kept for the echo.
struct LoadedConfig {
  ExperimentConfig config;
  std::string weight_table_path;
};

inline LoadedConfig config_from_json(const Json& j) {
  using detail::get_or;
  using detail::get_required;
  detail::reject_unknown_keys(j, {"design", "signal", "method", "debias", "replications", "noise_sd", "master_seed",
                                  "threads", "solver"},
                              "config");
  LoadedConfig out;
  ExperimentConfig& c = out.config;

  const Json d = j.contains("design") ? j.at("design") : throw ConfigError("config: missing key 'design'");
  detail::reject_unknown_keys(d, {"kind", "n", "p", "seed", "rho"}, "design");
  c.design.kind = detail::design_kind_from(get_required<std::string>(d, "kind", "design"));
  c.design.n = get_required<Index>(d, "n", "design");
  c.design.p = get_required<Index>(d, "p", "design");
  c.design.seed = get_or<std::uint64_t>(d, "seed", 1, "design");
  c.design.rho = get_or<double>(d, "rho", 0.5, "design");

  const Json s = j.contains("signal") ? j.at("signal") : Json::object();
  detail::reject_unknown_keys(s, {"kind", "class_id", "k", "amplitude", "amplitude_sqrt2logp"}, "signal");
  const std::string skind = get_or<std::string>(s, "kind", "fixed_amplitude", "signal");
  if (skind == "class") {
    c.signal.kind = SignalKind::signal_class;
  } else if (skind == "fixed_amplitude") {
    c.signal.kind = SignalKind::fixed_amplitude;
  } else if (skind == "gaussian") {
    c.signal.kind = SignalKind::gaussian;
  } else {
    throw ConfigError("signal.kind: unknown value '" + skind + "'");
  }
  c.signal.class_id = get_or<int>(s, "class_id", 3, "signal");
  c.signal.k = get_or<Index>(s, "k", 0, "signal");
  c.signal.p = c.design.p;
  if (s.contains("amplitude") && s.contains("amplitude_sqrt2logp")) {
    throw ConfigError("signal: give either amplitude or amplitude_sqrt2logp, not both");
  }
  c.signal.amplitude = s.contains("amplitude_sqrt2logp")
                           ? get_or<double>(s, "amplitude_sqrt2logp", 0.0, "signal") * universal_threshold(c.design.p)
                           : get_or<double>(s, "amplitude", 1.0, "signal");

  const Json m = j.contains("method") ? j.at("method") : Json::object();
  detail::reject_unknown_keys(m, {"kind", "lambda_kind", "q", "lambda", "weight_table"}, "method");
  c.method.kind = detail::method_kind_from(get_or<std::string>(m, "kind", "slope", "method"));
  c.method.lambda_kind = detail::sequence_kind_from(get_or<std::string>(m, "lambda_kind", "bh", "method"));
  c.method.q = get_or<double>(m, "q", 0.1, "method");
  if (m.contains("lambda")) c.method.lambda = get_or<double>(m, "lambda", 0.0, "method");
  out.weight_table_path = get_or<std::string>(m, "weight_table", "", "method");
  if (c.method.lambda_kind == SequenceKind::bhc_weighted) {
    if (out.weight_table_path.empty()) throw ConfigError("method: bhc_weighted needs weight_table");
    std::ifstream in(out.weight_table_path);
    if (!in) throw ConfigError("method.weight_table: cannot open " + out.weight_table_path);
    c.method.weight_table = std::make_shared<const WeightTable>(WeightTable::read_csv(in));
  }

  c.debias = get_or<bool>(j, "debias", false, "config");
  c.replications = get_or<std::size_t>(j, "replications", 100, "config");
  c.noise_sd = get_or<double>(j, "noise_sd", 1.0, "config");
  c.master_seed = get_or<std::uint64_t>(j, "master_seed", 1, "config");
  c.threads = get_or<unsigned>(j, "threads", 0, "config");

  const Json so = j.contains("solver") ? j.at("solver") : Json::object();
  detail::reject_unknown_keys(so, {"gap_tol", "infeas_tol", "max_iters"}, "solver");
  if (so.contains("gap_tol")) c.solver.gap_tol = get_or<double>(so, "gap_tol", 0.0, "solver");
  if (so.contains("infeas_tol")) c.solver.infeas_tol = get_or<double>(so, "infeas_tol", 0.0, "solver");
  c.solver.max_iters = get_or<std::size_t>(so, "max_iters", 20000, "solver");
  return out;
}

inline LoadedConfig config_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

inline LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_string(buf.str());
}

/// Resolved configuration, every default filled in. Threads are left out:
/// they never affect results.
inline Json to_json(const LoadedConfig& loaded) {
  const ExperimentConfig& c = loaded.config;
  Json j;
  j["design"] = {{"kind", to_string(c.design.kind)}, {"n", c.design.n}, {"p", c.design.p},
                 {"seed", c.design.seed}, {"rho", c.design.rho}};
  j["signal"] = {{"kind", detail::signal_kind_name(c.signal.kind)}, {"class_id", c.signal.class_id},
                 {"k", c.signal.k}, {"amplitude", c.signal.amplitude}};
  Json m = {{"kind", to_string(c.method.kind)}, {"lambda_kind", detail::to_string(c.method.lambda_kind)},
            {"q", c.method.q}};
  if (c.method.lambda) m["lambda"] = *c.method.lambda;
  if (!loaded.weight_table_path.empty()) m["weight_table"] = loaded.weight_table_path;
  j["method"] = m;
  j["debias"] = c.debias;
  j["replications"] = c.replications;
  j["noise_sd"] = c.noise_sd;
  j["master_seed"] = c.master_seed;
  Json so = {{"max_iters", c.solver.max_iters}};
  if (c.solver.gap_tol) so["gap_tol"] = *c.solver.gap_tol;
  if (c.solver.infeas_tol) so["infeas_tol"] = *c.solver.infeas_tol;
  j["solver"] = so;
  return j;
}

inline Json to_json(const ExperimentConfig& c) { return to_json(LoadedConfig{c, {}}); }

/// 64-bit FNV-1a of the text, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const LoadedConfig& loaded) { return fnv1a_hex(to_json(loaded).dump()); }

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "rep,V,R,FDP,TPP,MSE\n";
  for (const auto& r : report.records) {
    out << r.rep << ',' << r.metrics.V << ',' << r.metrics.R << ',' << format_real(r.metrics.FDP) << ','
        << format_real(r.metrics.TPP) << ',' << format_real(r.metrics.MSE) << '\n';
  }
}

inline Json report_summary(const LoadedConfig& loaded, const ExperimentReport& report) {
  const auto agg = [](const Aggregate& a) { return Json{{"mean", a.mean}, {"std_error", a.std_error}}; };
  Json j;
  j["version"] = version;
  j["config_hash"] = config_hash(loaded);
  j["master_seed"] = loaded.config.master_seed;
  j["replications"] = report.records.size();
  j["used"] = report.used;
  j["failures"] = report.failures;
  Json failed = Json::array();
  for (const auto& r : report.records) {
    if (!r.converged) failed.push_back(r.rep);
  }
  j["failed_replications"] = failed;
  j["fdr"] = agg(report.fdr);
  j["tpp"] = agg(report.tpp);
  j["mse"] = agg(report.mse);
  j["rejections"] = agg(report.rejections);
  if (report.k_star) j["k_star"] = *report.k_star;
  if (report.lambda_1) j["lambda_1"] = *report.lambda_1;
  j["config"] = to_json(loaded);
  return j;
}

}  // namespace slope
