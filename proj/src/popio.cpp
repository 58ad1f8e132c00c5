#include "popio.hpp"

#include <cmath>
#include <set>

#include "errors.hpp"

namespace scerm {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

const json& need(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required key");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long>();
}

Vec vector_of(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

LossModel parse_loss(const json& j, const std::string& path) {
  only_keys(j, path, {"kind", "base_measure"});
  const json& k = need(j, path, "kind");
  if (!k.is_string()) fail(path + ".kind", "expected a string");
  LossKind kind;
  try {
    kind = loss_kind_from_name(k.get<std::string>());
  } catch (const std::exception& e) {
    fail(path + ".kind", e.what());
  }
  Vec mu;
  if (j.contains("base_measure")) {
    if (kind != LossKind::SoftmaxGLM) fail(path + ".base_measure", "only valid for softmax_glm");
    mu = vector_of(j["base_measure"], path + ".base_measure");
  } else if (kind == LossKind::SoftmaxGLM) {
    fail(path + ".base_measure", "missing required key");
  }
  try {
    return LossModel::make(kind, mu);
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

Mat parse_features(const json& f, const std::string& path, bool glm) {
  if (!f.is_array() || f.empty()) fail(path, "expected a nonempty array");
  if (!glm) {
    Vec v = vector_of(f, path);
    return Mat(v);
  }
  // one d-vector per label, stored as columns
  Vec first = vector_of(f[0], path + "[0]");
  Mat out(first.size(), static_cast<Eigen::Index>(f.size()));
  for (size_t c = 0; c < f.size(); ++c) {
    Vec col = vector_of(f[c], path + "[" + std::to_string(c) + "]");
    if (col.size() != first.size()) fail(path + "[" + std::to_string(c) + "]", "label feature vectors differ in length");
    out.col(static_cast<Eigen::Index>(c)) = col;
  }
  return out;
}

LoadedPopulation parse_generator(const json& g, const std::string& path) {
  const json& k = need(g, path, "kind");
  if (!k.is_string()) fail(path + ".kind", "expected a string");
  std::string kind = k.get<std::string>();
  if (kind == "source") {
    only_keys(g, path, {"kind", "d", "r", "alpha", "seed"});
    long d = integer(need(g, path, "d"), path + ".d");
    double r = number(need(g, path, "r"), path + ".r");
    double alpha = number(need(g, path, "alpha"), path + ".alpha");
    long seed = g.contains("seed") ? integer(g["seed"], path + ".seed") : 0;
    if (d < 1) fail(path + ".d", "must be >= 1");
    if (!(r > 0 && r <= 0.5)) fail(path + ".r", "source exponent r must lie in (0, 0.5]");
    if (!(alpha >= 1)) fail(path + ".alpha", "capacity exponent alpha must be >= 1");
    if (seed < 0) fail(path + ".seed", "must be >= 0");
    auto sp = make_source_population(static_cast<int>(d), r, alpha, static_cast<unsigned long long>(seed));
    return {std::move(sp.pop), SourceMeta{sp.r, sp.alpha, sp.L, sp.Q}};
  }
  if (kind == "diagonal_logistic") {
    only_keys(g, path, {"kind", "d", "weight_decay", "coef_decay", "scale"});
    long d = integer(need(g, path, "d"), path + ".d");
    if (d < 1) fail(path + ".d", "must be >= 1");
    double wd = g.contains("weight_decay") ? number(g["weight_decay"], path + ".weight_decay") : 1.0;
    double cd = g.contains("coef_decay") ? number(g["coef_decay"], path + ".coef_decay") : 1.0;
    double sc = g.contains("scale") ? number(g["scale"], path + ".scale") : 1.0;
    return {make_diagonal_logistic_population(static_cast<int>(d), wd, cd, sc), std::nullopt};
  }
  fail(path + ".kind", "unknown generator '" + kind + "' (expected source or diagonal_logistic)");
}

}  // namespace

LoadedPopulation population_from_json(const json& doc, const std::string& path) {
  if (!doc.is_object()) fail(path, "expected an object");
  if (doc.contains("generator")) {
    only_keys(doc, path, {"generator"});
    return parse_generator(doc["generator"], path + ".generator");
  }
  only_keys(doc, path, {"loss", "atoms"});
  LossModel loss = parse_loss(need(doc, path, "loss"), path + ".loss");
  const json& atoms = need(doc, path, "atoms");
  if (!atoms.is_array() || atoms.empty()) fail(path + ".atoms", "expected a nonempty array");
  std::vector<Sample> samples;
  Vec w(static_cast<Eigen::Index>(atoms.size()));
  for (size_t i = 0; i < atoms.size(); ++i) {
    std::string ap = path + ".atoms[" + std::to_string(i) + "]";
    const json& a = atoms[i];
    only_keys(a, ap, {"features", "label", "weight"});
    Sample s;
    s.features = parse_features(need(a, ap, "features"), ap + ".features", loss.is_glm());
    s.label = number(need(a, ap, "label"), ap + ".label");
    w[static_cast<Eigen::Index>(i)] = number(need(a, ap, "weight"), ap + ".weight");
    samples.push_back(std::move(s));
  }
  try {
    return {FinitePopulation(std::move(samples), w, loss), std::nullopt};
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

json population_to_json(const FinitePopulation& pop) {
  json loss = {{"kind", loss_kind_name(pop.loss().kind)}};
  if (pop.loss().is_glm())
    loss["base_measure"] = std::vector<double>(pop.loss().base_measure.data(),
                                               pop.loss().base_measure.data() + pop.loss().base_measure.size());
  json atoms = json::array();
  for (Eigen::Index i = 0; i < pop.size(); ++i) {
    const Sample& s = pop.atoms()[static_cast<size_t>(i)];
    json f;
    if (pop.loss().is_glm()) {
      f = json::array();
      for (Eigen::Index c = 0; c < s.features.cols(); ++c) {
        Vec col = s.features.col(c);
        f.push_back(std::vector<double>(col.data(), col.data() + col.size()));
      }
    } else {
      Vec col = s.features.col(0);
      f = std::vector<double>(col.data(), col.data() + col.size());
    }
    atoms.push_back({{"features", f}, {"label", s.label}, {"weight", pop.weights()[i]}});
  }
  return {{"loss", loss}, {"atoms", atoms}};
}

}  // namespace scerm
