#include "bec/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bec {

using nlohmann::json;

namespace {

cmat read_matrix(const json& j, int n, const std::string& where) {
  if (!j.contains("re")) throw ConfigError(where + ": missing 're'");
  const json& re = j.at("re");
  const json* im = j.contains("im") ? &j.at("im") : nullptr;
  if (!re.is_array() || static_cast<int>(re.size()) != n)
    throw ConfigError(where + ": expected " + std::to_string(n) + " rows");
  cmat out(n, n);
  for (int r = 0; r < n; ++r) {
    if (!re[r].is_array() || static_cast<int>(re[r].size()) != n)
      throw ConfigError(where + ": row " + std::to_string(r) + " has wrong length");
    for (int c = 0; c < n; ++c) {
      const double x = re[r][c].get<double>();
      const double y = im ? (*im).at(r).at(c).get<double>() : 0.0;
      out(r, c) = cplx(x, y);
    }
  }
  return out;
}

Harmonics read_harmonics(const json& list, int n, const std::string& where) {
  if (!list.is_array()) throw ConfigError(where + ": expected a list of harmonics");
  Harmonics h;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& e = list[i];
    const int m = e.value("m", 0);
    const cmat x = read_matrix(e, n, where + "[" + std::to_string(i) + "]");
    auto it = h.find(m);
    if (it == h.end())
      h[m] = x;
    else
      it->second += x;
  }
  return h;
}

json write_matrix(const cmat& x) {
  json re = json::array(), im = json::array();
  for (int r = 0; r < x.rows(); ++r) {
    json rr = json::array(), ri = json::array();
    for (int c = 0; c < x.cols(); ++c) {
      rr.push_back(x(r, c).real());
      ri.push_back(x(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  return json{{"re", re}, {"im", im}};
}

json write_harmonics(const Harmonics& h) {
  json out = json::array();
  for (const auto& [m, x] : h) {
    json e = write_matrix(x);
    e["m"] = m;
    out.push_back(e);
  }
  return out;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ModelFile parse_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("model file parse error at " + line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  try {
    ModelFile f;
    ModelSpec& m = f.model;
    m.name = doc.value("name", std::string("custom"));
    m.N = doc.at("n").get<int>();
    m.M = doc.value("m", 1);
    m.mu = doc.value("mu", 0.0);
    if (m.N <= 0 || m.M <= 0) throw ConfigError("model file: n and m must be positive");
    m.A = read_harmonics(doc.at("a_harmonics"), m.N, "a_harmonics");
    const json& v = doc.at("v");
    if (!v.is_array() || static_cast<int>(v.size()) != m.M)
      throw ConfigError("model file: 'v' needs one harmonic list per site (m entries)");
    for (int j = 0; j < m.M; ++j) m.V.push_back(read_harmonics(v[j], m.N, "v[" + std::to_string(j) + "]"));
    if (doc.contains("theta") && !doc.at("theta").is_null()) {
      const json& th = doc.at("theta");
      if (!th.value("conjugate", true)) throw ConfigError("model file: theta must be antilinear (conjugate: true)");
      m.theta = read_matrix(th, m.N, "theta");
    }
    m.singular_hopping = doc.value("singular_hopping", false);
    validate_model(m);
    if (doc.contains("edge") && !doc.at("edge").is_null()) {
      const json& e = doc.at("edge");
      std::vector<Harmonics> repl;
      if (e.contains("vsharp"))
        for (std::size_t i = 0; i < e.at("vsharp").size(); ++i)
          repl.push_back(read_harmonics(e.at("vsharp")[i], m.N, "edge.vsharp[" + std::to_string(i) + "]"));
      const int n0 = e.value("n0", static_cast<int>(repl.size()));
      f.edge = edge_model(m, n0, repl);
    }
    return f;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

json model_to_json(const ModelSpec& m, const EdgeModelSpec* edge) {
  json doc;
  doc["name"] = m.name;
  doc["n"] = m.N;
  doc["m"] = m.M;
  doc["mu"] = m.mu;
  doc["singular_hopping"] = m.singular_hopping;
  doc["a_harmonics"] = write_harmonics(m.A);
  json v = json::array();
  for (const auto& site : m.V) v.push_back(write_harmonics(site));
  doc["v"] = v;
  if (m.theta) {
    json th = write_matrix(*m.theta);
    th["conjugate"] = true;
    doc["theta"] = th;
  } else {
    doc["theta"] = nullptr;
  }
  if (edge) {
    json vs = json::array();
    for (const auto& h : edge->Vsharp) vs.push_back(write_harmonics(h));
    doc["edge"] = json{{"n0", edge->n0}, {"vsharp", vs}};
  }
  return doc;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace bec
