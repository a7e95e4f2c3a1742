#include "abpower/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "abpower/errors.hpp"
#include "json.hpp"

namespace abpower {
namespace {

using FieldMap = std::map<std::string, std::string>;

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trimmed(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& text, const std::string& field) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(field + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& text, const std::string& field) {
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(field + ": expected a nonnegative integer, got '" +
                      text + "'");
  }
  return v;
}

FieldMap parse_key_values(std::string_view text) {
  FieldMap fields;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trimmed(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    fields[trimmed(body.substr(0, eq))] = trimmed(body.substr(eq + 1));
  }
  return fields;
}

std::string json_scalar(const nlohmann::json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw ConfigError(field + ": expected a string or number");
}

// Flattens the JSON form onto the key=value vocabulary.
FieldMap parse_json_fields(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config JSON must be an object");
  FieldMap fields;
  for (const auto& [key, value] : doc.items()) {
    if (key == "covariates" && value.is_array()) {
      std::string joined;
      for (std::size_t k = 0; k < value.size(); ++k) {
        const auto& c = value[k];
        const std::string field = "covariates[" + std::to_string(k) + "]";
        if (!c.is_object()) throw ConfigError(field + ": expected an object");
        for (const auto& [ck, cv] : c.items()) {
          if (ck != "rho_y" && ck != "rho_w") {
            throw ConfigError(field + ": unknown field '" + ck + "'");
          }
        }
        if (!joined.empty()) joined += ",";
        joined += json_scalar(c.value("rho_y", nlohmann::json(0.0)),
                              field + ".rho_y") +
                  ":" +
                  json_scalar(c.value("rho_w", nlohmann::json(0.0)),
                              field + ".rho_w");
      }
      fields[key] = joined;
    } else if ((key == "cluster_size" || key == "y_law") &&
               value.is_object()) {
      const std::string kind = value.value("kind", std::string());
      std::string params;
      for (const char* name : {"k", "lambda", "mu", "sigma"}) {
        if (value.contains(name)) {
          if (!params.empty()) params += ",";
          params += json_scalar(value[name], key + "." + name);
        }
      }
      fields[key] = kind + ":" + params;
    } else {
      fields[key] = json_scalar(value, key);
    }
  }
  return fields;
}

sim::ClusterSizeLaw parse_cluster_law(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) {
    throw ConfigError("cluster_size: expected fixed:k or poisson:lambda, got '" +
                      text + "'");
  }
  sim::ClusterSizeLaw law;
  if (parts[0] == "fixed") {
    law.kind = sim::ClusterSizeLaw::Kind::kFixed;
  } else if (parts[0] == "poisson") {
    law.kind = sim::ClusterSizeLaw::Kind::kPoissonPlusOne;
  } else {
    throw ConfigError("cluster_size: unknown law '" + parts[0] + "'");
  }
  law.param = to_double(parts[1], "cluster_size");
  return law;
}

sim::EventLaw parse_event_law(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) {
    throw ConfigError("y_law: expected normal:mu,sigma or lognormal:mu,sigma");
  }
  sim::EventLaw law;
  if (parts[0] == "normal") {
    law.kind = sim::EventLaw::Kind::kNormal;
  } else if (parts[0] == "lognormal") {
    law.kind = sim::EventLaw::Kind::kLognormal;
  } else {
    throw ConfigError("y_law: unknown law '" + parts[0] + "'");
  }
  const auto params = split(parts[1], ',');
  if (params.size() != 2) throw ConfigError("y_law: expected mu,sigma");
  law.mu = to_double(params[0], "y_law.mu");
  law.sigma = to_double(params[1], "y_law.sigma");
  return law;
}

std::vector<sim::CovariateSpec> parse_covariates(const std::string& text) {
  std::vector<sim::CovariateSpec> out;
  if (text.empty()) return out;
  const auto items = split(text, ',');
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string field = "covariates[" + std::to_string(k) + "]";
    const auto pair = split(items[k], ':');
    if (pair.size() != 2) {
      throw ConfigError(field + ": expected rho_y:rho_w, got '" + items[k] +
                        "'");
    }
    out.push_back({to_double(pair[0], field + ".rho_y"),
                   to_double(pair[1], field + ".rho_w")});
  }
  return out;
}

SimulationFile build_simulation(const FieldMap& fields) {
  SimulationFile file;
  sim::GeneratorConfig& g = file.generator;
  for (const auto& [key, value] : fields) {
    if (key == "n_units") {
      g.n_units = to_u64(value, key);
    } else if (key == "cluster_size") {
      g.cluster_size = parse_cluster_law(value);
    } else if (key == "y_law") {
      g.y_law = parse_event_law(value);
    } else if (key == "w_role") {
      if (value == "count") {
        g.w_role = sim::WeightRole::kCount;
      } else if (value == "event_value") {
        g.w_role = sim::WeightRole::kEventValue;
      } else {
        throw ConfigError("w_role: expected count or event_value, got '" +
                          value + "'");
      }
    } else if (key == "covariates") {
      g.covariates = parse_covariates(value);
    } else if (key == "effect") {
      g.effect = to_double(value, key);
    } else if (key == "seed") {
      g.seed = to_u64(value, key);
    } else if (key == "psi") {
      g.psi = to_double(value, key);
    } else if (key == "icc") {
      g.icc = to_double(value, key);
    } else if (key == "latent_yw_correlation") {
      g.latent_yw_correlation = to_double(value, key);
    } else if (key == "w_sigma") {
      g.w_sigma = to_double(value, key);
    } else if (key == "size_slope") {
      g.size_slope = to_double(value, key);
    } else if (key == "scenario") {
      file.scenario = parse_scenario(value);
    } else if (key == "estimator") {
      file.estimator = parse_metric_kind(value);
    } else if (key == "replications") {
      file.replications = to_u64(value, key);
    } else if (key == "alpha") {
      file.alpha = to_double(value, key);
    } else if (key == "tail") {
      file.tail = parse_tail(value);
    } else if (key == "target_power") {
      file.target_power = to_double(value, key);
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  sim::validate(g);
  return file;
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kPlan:
      return "plan";
    case Command::kAnalyze:
      return "analyze";
    case Command::kSimulate:
      return "simulate";
  }
  return "?";
}

OutputFormat parse_output_format(std::string_view text) {
  if (text == "text") return OutputFormat::kText;
  if (text == "json") return OutputFormat::kJson;
  throw ConfigError("format must be 'text' or 'json'");
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kCalibrate:
      return "calibrate";
    case Scenario::kPower:
      return "power";
    case Scenario::kPitfall:
      return "pitfall";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "calibrate") return Scenario::kCalibrate;
  if (text == "power") return Scenario::kPower;
  if (text == "pitfall") return Scenario::kPitfall;
  throw ConfigError("scenario must be calibrate, power or pitfall, got '" +
                    std::string(text) + "'");
}

MetricKind RunConfig::effective_metric() const {
  const bool adjusted = !covariate_columns.empty();
  if (metric == MetricKind::kMean || metric == MetricKind::kAdjustedMean) {
    return adjusted ? MetricKind::kAdjustedMean : MetricKind::kMean;
  }
  return adjusted ? MetricKind::kAdjustedRatio : MetricKind::kRatio;
}

WeightMode RunConfig::effective_w_mode() const {
  if (w_mode) {
    if (*w_mode == WeightMode::kSum && !w_column) {
      throw SchemaError("--w-mode sum needs a --w column");
    }
    return *w_mode;
  }
  return w_column ? WeightMode::kSum : WeightMode::kCount;
}

CsvSchema RunConfig::csv_schema() const {
  CsvSchema schema;
  schema.unit = unit_column;
  schema.y = y_column;
  if (effective_w_mode() == WeightMode::kSum) schema.w = w_column;
  schema.arm = arm_column;
  schema.covariates = covariate_columns;
  return schema;
}

SolveTarget RunConfig::solve_target() const {
  const int missing = !power.has_value() + !mde.has_value() + !n.has_value();
  if (missing == 0) {
    throw SpecError("give exactly two of --power, --mde, --n (all three set)");
  }
  if (missing > 1) {
    throw SpecError("give exactly two of --power, --mde, --n");
  }
  if (!power) return SolveTarget::kPower;
  if (!mde) return SolveTarget::kMde;
  return SolveTarget::kN;
}

PowerSpec RunConfig::power_spec() const {
  solve_target();
  PowerSpec spec;
  spec.alpha = alpha;
  spec.power = power;
  spec.mde = mde;
  spec.n = n;
  spec.psi = psi;
  spec.tail = tail;
  return spec;
}

SimulationFile parse_simulation_file(std::string_view text) {
  const std::string body = trimmed(text);
  const FieldMap fields = !body.empty() && body.front() == '{'
                              ? parse_json_fields(body)
                              : parse_key_values(text);
  return build_simulation(fields);
}

SimulationFile load_simulation_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open generator config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_simulation_file(buf.str());
}

std::optional<std::uint64_t> resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("ABPOWER_SEED"); env && *env) {
    return to_u64(trimmed(env), "ABPOWER_SEED");
  }
  return std::nullopt;
}

}  // namespace abpower
