#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kplab/core.hpp"
#include "kplab/hash.hpp"
#include "kplab/ids.hpp"
#include "kplab/lyapunov.hpp"
#include "kplab/sampling.hpp"
#include "kplab/thouless.hpp"
#include "kplab/transfer.hpp"
#include "kplab/zariski.hpp"

namespace kplab {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> splitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline double parseDouble(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + where + ": cannot parse number '" + s + "'");
  }
}

inline long long parseInt(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + where + ": cannot parse integer '" + s + "'");
  }
}

inline bool parseBool(const std::string& s, const std::string& where) {
  const std::string v = lower(s);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError("config: " + where + ": cannot parse boolean '" + s + "'");
}

inline std::string fmtG(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Flat section/key-value config text: [section] headers, key = value lines,
// '#' or ';' comments, later duplicates win.
using IniDoc = std::map<std::string, std::map<std::string, std::string>>;

inline IniDoc parseIni(const std::string& text) {
  IniDoc doc;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: line " + std::to_string(lineNo) + ": unterminated section");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config: line " + std::to_string(lineNo) + ": empty section name");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineNo) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(lineNo) + ": empty key");
    doc[section][key] = val;
  }
  return doc;
}

namespace detail {

inline const std::map<std::string, std::string>& requireSection(const IniDoc& doc,
                                                                const std::string& name) {
  const auto it = doc.find(name);
  if (it == doc.end()) throw ConfigError("config: missing [" + name + "] section");
  return it->second;
}

inline std::string requireKey(const std::map<std::string, std::string>& sec,
                              const std::string& section, const std::string& key) {
  const auto it = sec.find(key);
  if (it == sec.end())
    throw ConfigError("config: [" + section + "] missing key '" + key + "'");
  return it->second;
}

inline std::string optKey(const std::map<std::string, std::string>& sec, const std::string& key,
                          const std::string& fallback) {
  const auto it = sec.find(key);
  return it == sec.end() ? fallback : it->second;
}

}  // namespace detail

// Grid syntax: either "lo:hi:step" (inclusive arithmetic grid) or a comma
// list of energies.
inline std::vector<double> parseGrid(const std::string& s, const std::string& where) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = detail::splitList(s, ':');
    if (parts.size() != 3) throw ConfigError("config: " + where + ": grid wants lo:hi:step");
    const double lo = detail::parseDouble(parts[0], where);
    const double hi = detail::parseDouble(parts[1], where);
    const double step = detail::parseDouble(parts[2], where);
    if (!(step > 0)) throw ConfigError("config: " + where + ": grid step must be positive");
    if (hi < lo) return out;
    const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    for (long long k = 0; k <= count; ++k) out.push_back(lo + static_cast<double>(k) * step);
    return out;
  }
  for (const auto& tok : detail::splitList(s, ','))
    if (!tok.empty()) out.push_back(detail::parseDouble(tok, where));
  if (out.empty()) throw ConfigError("config: " + where + ": empty grid");
  return out;
}

struct LyapBlock {
  bool present = false;
  long long n = 100000;
  int blockSize = 10;
  std::vector<double> grid;
  LyapunovScheme scheme = LyapunovScheme::FrameQR;
};

struct ZariskiBlock {
  bool present = false;
  double lo = 0.0, hi = 0.0, step = 0.01;
};

struct IdsBlock {
  bool present = false;
  int halfLength = 10;
  std::vector<double> grid;
  int meshPoints = 400;
  bool crossCheck = false;
};

struct ThoulessBlock {
  bool present = false;
  int halfLength = 40;
  long long n = 1000000;
  std::vector<double> grid;
  bool synthetic = false;
  double windowTop = 30.0;
  double binStep = 0.01;
  double tailCut = 1e8;
  int tailBins = 600;
};

struct RunConfig {
  ModelConfig model;
  DistributionSpec distribution;
  std::uint64_t seed = 20260822;
  LyapBlock lyap;
  ZariskiBlock zariski;
  IdsBlock ids;
  ThoulessBlock thouless;
};

namespace detail {

inline Vec parseVec(const std::string& s, int n, const std::string& where) {
  const auto toks = splitList(s, ',');
  if (static_cast<int>(toks.size()) != n)
    throw ConfigError("config: " + where + ": expected " + std::to_string(n) + " values");
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = parseDouble(toks[static_cast<std::size_t>(i)], where);
  return v;
}

inline DistributionSpec parseDistribution(const IniDoc& doc, int n) {
  const auto& sec = requireSection(doc, "distribution");
  const std::string kind = lower(requireKey(sec, "distribution", "kind"));
  DistributionSpec spec;
  if (kind == "bernoulli") {
    const std::string aStr = optKey(sec, "a", "0");
    const std::string bStr = optKey(sec, "b", "1");
    const double p = parseDouble(optKey(sec, "p", "0.5"), "[distribution] p");
    Vec a = aStr.find(',') == std::string::npos
                ? Vec::Constant(n, parseDouble(aStr, "[distribution] a"))
                : parseVec(aStr, n, "[distribution] a");
    Vec b = bStr.find(',') == std::string::npos
                ? Vec::Constant(n, parseDouble(bStr, "[distribution] b"))
                : parseVec(bStr, n, "[distribution] b");
    spec = DistributionSpec::bernoulli(n, 0.0, 1.0, p);
    spec.bernoulliA = std::move(a);
    spec.bernoulliB = std::move(b);
  } else if (kind == "box") {
    spec = DistributionSpec::uniformBox(
        n, parseVec(requireKey(sec, "distribution", "lo"), n, "[distribution] lo"),
        parseVec(requireKey(sec, "distribution", "hi"), n, "[distribution] hi"));
  } else if (kind == "discrete") {
    std::vector<Vec> atoms;
    for (const auto& tok : splitList(requireKey(sec, "distribution", "atoms"), ';'))
      atoms.push_back(parseVec(tok, n, "[distribution] atoms"));
    std::vector<double> weights;
    const std::string wStr = optKey(sec, "weights", "");
    if (wStr.empty()) {
      weights.assign(atoms.size(), 1.0);
    } else {
      for (const auto& tok : splitList(wStr, ','))
        weights.push_back(parseDouble(tok, "[distribution] weights"));
    }
    spec = DistributionSpec::discreteSet(n, std::move(atoms), std::move(weights));
  } else {
    throw ConfigError("config: [distribution] unknown kind '" + kind + "'");
  }
  // freeze = channel:value pairs, channels numbered from 1.
  const std::string fz = optKey(sec, "freeze", "");
  if (!fz.empty()) {
    for (const auto& tok : splitList(fz, ',')) {
      const auto parts = splitList(tok, ':');
      if (parts.size() != 2)
        throw ConfigError("config: [distribution] freeze wants channel:value pairs");
      const long long ch = parseInt(parts[0], "[distribution] freeze");
      if (ch < 1 || ch > n)
        throw ConfigError("config: [distribution] freeze channel out of range");
      spec.freeze(static_cast<int>(ch - 1), parseDouble(parts[1], "[distribution] freeze"));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace detail

inline RunConfig parseRunConfig(const std::string& text) {
  const IniDoc doc = parseIni(text);
  RunConfig rc;

  const auto& model = detail::requireSection(doc, "model");
  const long long layers = detail::parseInt(
      detail::requireKey(model, "model", "layers"), "[model] layers");
  if (layers < 1 || layers > 64) throw ConfigError("config: [model] layers out of range");
  const Vec couplings = detail::parseVec(detail::requireKey(model, "model", "couplings"),
                                         static_cast<int>(layers), "[model] couplings");
  rc.model = ModelConfig::standard(static_cast<int>(layers), couplings);

  rc.distribution = detail::parseDistribution(doc, static_cast<int>(layers));

  if (const auto it = doc.find("run"); it != doc.end()) {
    const std::string s = detail::optKey(it->second, "seed", "");
    if (!s.empty()) {
      const long long v = detail::parseInt(s, "[run] seed");
      if (v < 0) throw ConfigError("config: [run] seed must be nonnegative");
      rc.seed = static_cast<std::uint64_t>(v);
    }
  }

  if (const auto it = doc.find("lyap"); it != doc.end()) {
    const auto& sec = it->second;
    rc.lyap.present = true;
    rc.lyap.n = detail::parseInt(detail::optKey(sec, "n", "100000"), "[lyap] n");
    if (rc.lyap.n < 20) throw ConfigError("config: [lyap] n too small");
    rc.lyap.blockSize = static_cast<int>(
        detail::parseInt(detail::optKey(sec, "block", "10"), "[lyap] block"));
    if (rc.lyap.blockSize < 1) throw ConfigError("config: [lyap] block must be positive");
    rc.lyap.grid = parseGrid(detail::requireKey(sec, "lyap", "grid"), "[lyap] grid");
    const std::string scheme = detail::lower(detail::optKey(sec, "scheme", "frame"));
    if (scheme == "frame")
      rc.lyap.scheme = LyapunovScheme::FrameQR;
    else if (scheme == "exterior")
      rc.lyap.scheme = LyapunovScheme::ExteriorPower;
    else
      throw ConfigError("config: [lyap] scheme must be frame or exterior");
  }

  if (const auto it = doc.find("zariski"); it != doc.end()) {
    const auto& sec = it->second;
    rc.zariski.present = true;
    rc.zariski.lo = detail::parseDouble(detail::requireKey(sec, "zariski", "lo"), "[zariski] lo");
    rc.zariski.hi = detail::parseDouble(detail::requireKey(sec, "zariski", "hi"), "[zariski] hi");
    rc.zariski.step =
        detail::parseDouble(detail::optKey(sec, "step", "0.01"), "[zariski] step");
    if (!(rc.zariski.step > 0)) throw ConfigError("config: [zariski] step must be positive");
  }

  if (const auto it = doc.find("ids"); it != doc.end()) {
    const auto& sec = it->second;
    rc.ids.present = true;
    rc.ids.halfLength =
        static_cast<int>(detail::parseInt(detail::requireKey(sec, "ids", "L"), "[ids] L"));
    if (rc.ids.halfLength < 1) throw ConfigError("config: [ids] L must be positive");
    rc.ids.grid = parseGrid(detail::requireKey(sec, "ids", "grid"), "[ids] grid");
    rc.ids.meshPoints = static_cast<int>(
        detail::parseInt(detail::optKey(sec, "mesh", "400"), "[ids] mesh"));
    rc.ids.crossCheck = detail::parseBool(detail::optKey(sec, "cross_check", "false"),
                                          "[ids] cross_check");
  }

  if (const auto it = doc.find("thouless"); it != doc.end()) {
    const auto& sec = it->second;
    rc.thouless.present = true;
    rc.thouless.halfLength =
        static_cast<int>(detail::parseInt(detail::optKey(sec, "L", "40"), "[thouless] L"));
    if (rc.thouless.halfLength < 1) throw ConfigError("config: [thouless] L must be positive");
    rc.thouless.n = detail::parseInt(detail::optKey(sec, "n", "1000000"), "[thouless] n");
    if (rc.thouless.n < 20) throw ConfigError("config: [thouless] n too small");
    rc.thouless.grid = parseGrid(detail::requireKey(sec, "thouless", "grid"), "[thouless] grid");
    rc.thouless.synthetic = detail::parseBool(
        detail::optKey(sec, "synthetic", "false"), "[thouless] synthetic");
    rc.thouless.windowTop = detail::parseDouble(
        detail::optKey(sec, "window_top", "30"), "[thouless] window_top");
    rc.thouless.binStep = detail::parseDouble(
        detail::optKey(sec, "bin_step", "0.01"), "[thouless] bin_step");
    if (!(rc.thouless.binStep > 0))
      throw ConfigError("config: [thouless] bin_step must be positive");
    rc.thouless.tailCut = detail::parseDouble(
        detail::optKey(sec, "tail_cut", "1e8"), "[thouless] tail_cut");
    rc.thouless.tailBins = static_cast<int>(
        detail::parseInt(detail::optKey(sec, "tail_bins", "600"), "[thouless] tail_bins"));
  }

  return rc;
}

// Fixed-order parallel map: slot i always receives fn(i), so results are
// independent of worker count and completion order.
template <class Fn>
inline void parallelFor(std::size_t count, int workers, Fn&& fn) {
  if (workers < 1) throw PreconditionError("parallelFor: workers must be >= 1");
  const auto nThreads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (nThreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nThreads);
  for (std::size_t t = 0; t < nThreads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1)) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RunOptions {
  std::string outDir = ".";
  int workers = 1;
  bool writeCsv = true;
  bool writeJson = true;
  std::string configSha;  // sha256 of the raw config text
};

namespace detail {

inline void writeFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file " + path.string(), 3);
  out << content;
  if (!out) throw Error("failed writing output file " + path.string(), 3);
}

inline std::string metaComment(const char* command, const RunOptions& opts,
                               std::uint64_t seed) {
  std::string s;
  s += std::string("# kplab ") + command + "\n";
  s += std::string("# version=") + kVersion + "\n";
  s += "# config_sha256=" + opts.configSha + "\n";
  s += "# seed=" + std::to_string(seed) + "\n";
  return s;
}

inline Json metaJson(const char* command, const RunOptions& opts, std::uint64_t seed) {
  Json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_sha256"] = opts.configSha;
  j["seed"] = seed;
  return j;
}

inline void emit(const char* command, const RunOptions& opts, const std::string& csv,
                 const Json& json) {
  std::filesystem::create_directories(opts.outDir);
  const std::filesystem::path base = std::filesystem::path(opts.outDir) / command;
  if (opts.writeCsv) writeFile(base.string() + ".csv", csv);
  if (opts.writeJson) writeFile(base.string() + ".json", json.dump(2) + "\n");
}

}  // namespace detail

inline int runLyap(const RunConfig& rc, const RunOptions& opts) {
  if (!rc.lyap.present) throw ConfigError("config: [lyap] section required for this command");
  if (rc.lyap.grid.empty()) throw ConfigError("config: [lyap] grid is empty");
  LyapunovOptions lo;
  lo.steps = rc.lyap.n;
  lo.renormEvery = rc.lyap.blockSize;
  lo.scheme = rc.lyap.scheme;
  const SpectrumScan scan =
      scanSpectrum(rc.model, rc.lyap.grid, rc.distribution, rc.seed, lo, opts.workers);

  const int dim = 2 * rc.model.n;
  std::string csv = detail::metaComment("lyap", opts, rc.seed);
  csv += "energy,steps";
  for (int i = 1; i <= dim; ++i) csv += ",gamma_" + std::to_string(i);
  for (int i = 1; i <= dim; ++i) csv += ",stderr_" + std::to_string(i);
  csv += "\n";
  for (const auto& sp : scan.results) {
    csv += detail::fmtG(sp.energy) + "," + std::to_string(sp.steps);
    for (double g : sp.exponents) csv += "," + detail::fmtG(g);
    for (double s : sp.stderrs) csv += "," + detail::fmtG(s);
    csv += "\n";
  }

  Json j = detail::metaJson("lyap", opts, rc.seed);
  j["steps"] = rc.lyap.n;
  j["block"] = rc.lyap.blockSize;
  j["scheme"] = rc.lyap.scheme == LyapunovScheme::FrameQR ? "frame" : "exterior";
  j["spectra"] = Json::array();
  for (const auto& sp : scan.results) {
    Json e;
    e["energy"] = sp.energy;
    e["steps"] = sp.steps;
    e["exponents"] = sp.exponents;
    e["stderrs"] = sp.stderrs;
    j["spectra"].push_back(std::move(e));
  }
  detail::emit("lyap", opts, csv, j);
  return 0;
}

inline int runZariski(const RunConfig& rc, const RunOptions& opts) {
  if (!rc.zariski.present)
    throw ConfigError("config: [zariski] section required for this command");
  if (rc.model.n != 3)
    throw ConfigError("config: the density certificate is defined for three layers");
  std::vector<double> grid;
  if (rc.zariski.hi >= rc.zariski.lo) {
    const auto count = static_cast<long long>(
        std::floor((rc.zariski.hi - rc.zariski.lo) / rc.zariski.step + 1e-9));
    for (long long k = 0; k <= count; ++k)
      grid.push_back(rc.zariski.lo + static_cast<double>(k) * rc.zariski.step);
  }

  struct Row {
    double energy = 0;
    bool boundary = false;
    Certificate cert;
  };
  std::vector<Row> rows(grid.size());
  parallelFor(grid.size(), opts.workers, [&](std::size_t i) {
    rows[i].energy = grid[i];
    if (classifyRegime(grid[i]).regime == Regime::Boundary) {
      rows[i].boundary = true;
      return;
    }
    rows[i].cert = certifyZariskiDense(grid[i]);
  });

  CriticalSet zeros88, zeros1313;
  if (!grid.empty() && rc.zariski.lo < rc.zariski.hi) {
    zeros88 = scanCriticalSet(rc.zariski.lo, rc.zariski.hi, rc.zariski.step, DetKind::Det88);
    zeros1313 =
        scanCriticalSet(rc.zariski.lo, rc.zariski.hi, rc.zariski.step, DetKind::Det1313);
  }

  std::string csv = detail::metaComment("zariski", opts, rc.seed);
  csv += "energy,det88,det1313,closure_dim,verdict\n";
  for (const auto& r : rows) {
    if (r.boundary) {
      csv += detail::fmtG(r.energy) + ",nan,nan,0,BOUNDARY\n";
      continue;
    }
    csv += detail::fmtG(r.energy) + "," + detail::fmtG(r.cert.det88Value) + "," +
           detail::fmtG(r.cert.det1313Value) + "," + std::to_string(r.cert.closureDim) + "," +
           (r.cert.verdict == Verdict::Pass ? "PASS" : "UNDECIDED") + "\n";
  }

  Json j = detail::metaJson("zariski", opts, rc.seed);
  j["interval"] = {rc.zariski.lo, rc.zariski.hi};
  j["step"] = rc.zariski.step;
  j["certificates"] = Json::array();
  for (const auto& r : rows) {
    Json e;
    e["energy"] = r.energy;
    if (r.boundary) {
      e["verdict"] = "BOUNDARY";
      e["note"] = "channel frequency degenerates; certificate undefined at this energy";
    } else {
      e["det88"] = r.cert.det88Value;
      e["det1313"] = r.cert.det1313Value;
      e["closure_dim"] = r.cert.closureDim;
      e["verdict"] = r.cert.verdict == Verdict::Pass ? "PASS" : "UNDECIDED";
      e["witness_sha256"] = r.cert.witnessSha;
    }
    j["certificates"].push_back(std::move(e));
  }
  j["critical_candidates"] = Json::object();
  j["critical_candidates"]["det88"] = zeros88.zeros;
  j["critical_candidates"]["det1313"] = zeros1313.zeros;
  detail::emit("zariski", opts, csv, j);
  return 0;
}

inline int runIds(const RunConfig& rc, const RunOptions& opts) {
  if (!rc.ids.present) throw ConfigError("config: [ids] section required for this command");
  if (rc.ids.grid.empty()) throw ConfigError("config: [ids] grid is empty");
  std::vector<double> grid = rc.ids.grid;
  std::sort(grid.begin(), grid.end());
  const IDSCurve curve = idsCurve(rc.model, rc.distribution, rc.seed, rc.ids.halfLength, grid);

  std::vector<long long> inertia;
  if (rc.ids.crossCheck) {
    const DirichletDomain dom =
        makeDomain(rc.model, rc.distribution, rc.seed, rc.ids.halfLength);
    inertia.resize(grid.size());
    parallelFor(grid.size(), opts.workers, [&](std::size_t i) {
      inertia[i] = inertiaCount(dom, rc.model, grid[i], rc.ids.meshPoints);
    });
  }

  std::string csv = detail::metaComment("ids", opts, rc.seed);
  csv += "E,count,value,L,seed\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i)
    csv += detail::fmtG(curve.grid[i]) + "," + std::to_string(curve.counts[i]) + "," +
           detail::fmtG(curve.values[i]) + "," + std::to_string(curve.halfLength) + "," +
           std::to_string(curve.seed) + "\n";

  Json j = detail::metaJson("ids", opts, rc.seed);
  j["L"] = curve.halfLength;
  j["grid"] = curve.grid;
  j["counts"] = curve.counts;
  j["values"] = curve.values;
  if (rc.ids.crossCheck) {
    j["inertia_mesh"] = rc.ids.meshPoints;
    j["inertia_counts"] = inertia;
  }
  detail::emit("ids", opts, csv, j);
  return 0;
}

namespace detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string("thouless[") + name + "]: " + e.what(), e.exitCode);
  }
}

inline std::string spectraDigest(const std::vector<LyapunovSpectrum>& spectra) {
  std::string s;
  for (const auto& sp : spectra) {
    s += fmtG(sp.energy) + ";";
    for (double g : sp.exponents) s += fmtG(g) + ",";
    for (double e : sp.stderrs) s += fmtG(e) + ",";
  }
  return sha256Hex(s);
}

inline std::string curveDigest(const IDSCurve& curve) {
  std::string s;
  for (std::size_t i = 0; i < curve.grid.size(); ++i)
    s += fmtG(curve.grid[i]) + ":" + fmtG(curve.values[i]) + ",";
  return sha256Hex(s);
}

}  // namespace detail

inline int runThouless(const RunConfig& rc, const RunOptions& opts) {
  if (!rc.thouless.present)
    throw ConfigError("config: [thouless] section required for this command");
  if (rc.thouless.grid.size() < 3)
    throw ConfigError("config: [thouless] grid needs at least 3 energies");

  std::vector<LyapunovSpectrum> spectra;
  DOSMeasure measured, extended;
  IDSCurve curve;
  bool synthetic = rc.thouless.synthetic;
  double alpha0 = 0.7;

  if (synthetic) {
    // Documented self-test mode: a fixed smooth measure and exponent sums
    // built to satisfy the identity with offset 0.7 exactly.
    measured.binEdges.clear();
    for (int k = 0; k <= 40; ++k) measured.binEdges.push_back(-1.0 + 0.05 * k);
    for (int k = 0; k < 40; ++k) {
      const double mid = 0.5 * (measured.binEdges[k] + measured.binEdges[k + 1]);
      measured.masses.push_back(0.05 * (1.0 - mid * mid));  // hat profile, positive on (-1,1)
    }
    extended = measured;
    for (double e : rc.thouless.grid) {
      LyapunovSpectrum sp;
      sp.energy = e;
      const double s = -alpha0 + logKernelIntegral(extended, e);
      sp.exponents = {s, 0.0, 0.0, 0.0, 0.0, -s};
      sp.stderrs.assign(6, 0.0);
      spectra.push_back(std::move(sp));
    }
  } else {
    spectra = detail::stage("lyap", [&] {
      LyapunovOptions lo;
      lo.steps = rc.thouless.n;
      const SpectrumScan scan = scanSpectrum(rc.model, rc.thouless.grid, rc.distribution,
                                             rc.seed, lo, opts.workers);
      return scan.results;
    });
    curve = detail::stage("ids", [&] {
      const DirichletDomain dom =
          makeDomain(rc.model, rc.distribution, rc.seed, rc.thouless.halfLength);
      const double floor = spectrumFloor(dom, rc.model);
      const double lo = std::floor((floor - 0.5) / rc.thouless.binStep) * rc.thouless.binStep;
      const auto count = static_cast<long long>(
          std::floor((rc.thouless.windowTop - lo) / rc.thouless.binStep + 1e-9));
      std::vector<double> grid;
      for (long long k = 0; k <= count; ++k)
        grid.push_back(lo + static_cast<double>(k) * rc.thouless.binStep);
      return idsCurve(rc.model, rc.distribution, rc.seed, rc.thouless.halfLength, grid);
    });
    measured = detail::stage("measure", [&] { return measureFromCurve(curve); });
    extended = detail::stage("tail", [&] {
      return extendMeasureTail(measured, rc.model, rc.distribution, rc.thouless.tailCut,
                               rc.thouless.tailBins);
    });
  }

  const ThoulessFit fit =
      detail::stage("fit", [&] { return fitThouless(spectra, extended); });
  std::vector<double> budgets;
  for (std::size_t i = 0; i < spectra.size(); ++i)
    budgets.push_back(synthetic ? 1e-10
                                : thoulessBudget(spectra[i], measured, spectra[i].energy,
                                                 rc.thouless.halfLength));

  std::string csv = detail::metaComment("thouless", opts, rc.seed);
  csv += "energy,sum_positive,integral,residual,budget\n";
  for (std::size_t i = 0; i < fit.gridUsed.size(); ++i)
    csv += detail::fmtG(fit.gridUsed[i]) + "," + detail::fmtG(fit.sums[i]) + "," +
           detail::fmtG(fit.integrals[i]) + "," + detail::fmtG(fit.residuals[i]) + "," +
           detail::fmtG(budgets[i]) + "\n";

  Json j = detail::metaJson("thouless", opts, rc.seed);
  j["synthetic"] = synthetic;
  j["alphaHat"] = fit.alphaHat;
  j["gridUsed"] = fit.gridUsed;
  j["sums"] = fit.sums;
  j["integrals"] = fit.integrals;
  j["residuals"] = fit.residuals;
  j["budgets"] = budgets;
  j["inputs"] = Json::object();
  j["inputs"]["spectra_sha256"] = detail::spectraDigest(spectra);
  if (!synthetic) {
    j["inputs"]["curve_sha256"] = detail::curveDigest(curve);
    j["L"] = rc.thouless.halfLength;
    j["n"] = rc.thouless.n;
  }
  detail::emit("thouless", opts, csv, j);
  return 0;
}

}  // namespace kplab
