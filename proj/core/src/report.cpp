#include "crossres/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace crossres {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

std::string json_type_name(const json& j) {
  if (j.is_object()) return "object";
  if (j.is_array()) return "array";
  if (j.is_string()) return "string";
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer() || j.is_number_unsigned()) return "integer";
  if (j.is_number()) return "number";
  return "null";
}

bool type_matches(const json& j, const std::string& t) {
  if (t == "number") return j.is_number();
  if (t == "integer") return j.is_number_integer() || j.is_number_unsigned();
  return json_type_name(j) == t;
}

}  // namespace

std::vector<std::string> validate_schema(const json& doc, const json& schema,
                                         const std::string& path) {
  std::vector<std::string> errors;

  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    if (!type_matches(doc, t)) {
      errors.push_back(path + ": expected " + t + ", got " + json_type_name(doc));
      return errors;  // deeper checks are meaningless on the wrong type
    }
  }

  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& v : schema["enum"])
      if (v == doc) ok = true;
    if (!ok) errors.push_back(path + ": value not in enum");
  }

  if (schema.contains("minimum") && doc.is_number() &&
      doc.get<double>() < schema["minimum"].get<double>())
    errors.push_back(path + ": below minimum " + schema["minimum"].dump());

  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!doc.contains(key.get<std::string>()))
          errors.push_back(path + ": missing required key '" + key.get<std::string>() + "'");
    if (schema.contains("properties")) {
      for (const auto& [key, sub] : schema["properties"].items()) {
        if (!doc.contains(key)) continue;
        const auto child = validate_schema(doc[key], sub, path + "." + key);
        errors.insert(errors.end(), child.begin(), child.end());
      }
    }
    if (schema.contains("additionalProperties")) {
      const json& ap = schema["additionalProperties"];
      if (ap.is_object()) {
        for (const auto& [key, value] : doc.items()) {
          if (schema.contains("properties") && schema["properties"].contains(key)) continue;
          const auto child = validate_schema(value, ap, path + "." + key);
          errors.insert(errors.end(), child.begin(), child.end());
        }
      }
    }
  }

  if (doc.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto child =
          validate_schema(doc[i], schema["items"], path + "[" + std::to_string(i) + "]");
      errors.insert(errors.end(), child.begin(), child.end());
    }
  }

  return errors;
}

std::string render_report(const std::filesystem::path& run_dir) {
  std::map<std::string, json> bundles;  // model name -> summary.json
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const json summary = read_json(dir / "summary.json");
    bundles[summary.value("model", dir.filename().string())] = summary;
  }
  if (bundles.empty()) throw std::runtime_error("no summary.json found under " + run_dir.string());

  // The canonical model ordering for the comparison tables.
  std::vector<std::string> models;
  for (const auto& name : {"teacher-only", "nT-nC", "T-C"})
    if (bundles.count(name)) models.push_back(name);
  for (const auto& [name, s] : bundles)
    if (std::find(models.begin(), models.end(), name) == models.end()) models.push_back(name);

  const json& first = bundles.begin()->second;
  std::vector<std::string> res;
  for (const auto& r : first["resolutions"]) res.push_back(r.get<std::string>());
  const double far_target = first.value("far_target", 0.0);

  std::ostringstream md;
  md << "# Cross-resolution evaluation report\n\n";
  md << "Verification TAR at FAR = " << far_target
     << ", probe and gallery degraded to the same resolution.\n\n";

  md << "| model |";
  for (const auto& r : res) md << " " << r << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < res.size(); ++i) md << "---|";
  md << "\n";
  for (const auto& m : models) {
    md << "| " << m << " |";
    for (const auto& r : res) {
      const json& v = bundles[m]["verification"][r];
      md << " " << fmt(v["tar"].get<double>());
      if (v.value("far_unreachable", false)) md << "*";
      md << " |";
    }
    md << "\n";
  }
  md << "\n`*` marks operating points where the impostor set is too small for the FAR "
        "target.\n\n";

  md << "## Identification (full-resolution gallery)\n\n";
  md << "| model | resolution | rank-1 | mAP | DET AUC | FNIR@FPIR=1e-2 |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& m : models) {
    for (const auto& r : res) {
      const json& id = bundles[m]["identification"][r];
      md << "| " << m << " | " << r << " | " << fmt(id["rank1"].get<double>()) << " | "
         << fmt(id["map"].get<double>()) << " | " << fmt(id["auc"].get<double>()) << " | "
         << fmt(id["fnir_at_fpir_1e-2"].get<double>()) << " |\n";
    }
  }
  md << "\n";

  for (const auto& m : models) {
    const json& xr = bundles[m]["crossres"];
    std::vector<std::string> xres;
    for (const auto& r : xr["resolutions"]) xres.push_back(r.get<std::string>());
    md << "## Cross-resolution TAR matrix: " << m << "\n\n";
    md << "|  |";
    for (const auto& r : xres) md << " " << r << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < xres.size(); ++i) md << "---|";
    md << "\n";
    const auto& tar = xr["tar"];
    for (std::size_t a = 0; a < xres.size(); ++a) {
      md << "| **" << xres[a] << "** |";
      for (std::size_t b = 0; b < xres.size(); ++b) {
        if (b <= a)
          md << " " << fmt(tar[a][b].get<double>()) << " |";
        else
          md << "  |";
      }
      md << "\n";
    }
    md << "\n";
  }

  return md.str();
}

std::vector<std::string> validate_run(const std::filesystem::path& run_dir,
                                      const std::filesystem::path& schema_dir) {
  std::vector<std::string> errors;
  const json summary_schema = read_json(schema_dir / "summary.schema.json");
  const json verification_schema = read_json(schema_dir / "verification.schema.json");
  const json cmc_schema = read_json(schema_dir / "cmc.schema.json");
  const json det_schema = read_json(schema_dir / "det.schema.json");
  const json crossres_schema = read_json(schema_dir / "crossres.schema.json");
  const json retrieval_schema = read_json(schema_dir / "retrieval.schema.json");

  auto check = [&errors](const std::filesystem::path& file, const json& schema) {
    const json doc = read_json(file);
    for (const auto& e : validate_schema(doc, schema))
      errors.push_back(file.string() + " " + e);
  };

  bool any = false;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    if (!entry.is_directory() || !std::filesystem::exists(entry.path() / "summary.json"))
      continue;
    any = true;
    check(entry.path() / "summary.json", summary_schema);
    check(entry.path() / "crossres.json", crossres_schema);
    check(entry.path() / "retrieval.json", retrieval_schema);
    for (const auto& file : std::filesystem::directory_iterator(entry.path())) {
      const std::string name = file.path().filename().string();
      if (name.rfind("verification_", 0) == 0 && file.path().extension() == ".json")
        check(file.path(), verification_schema);
      else if (name.rfind("cmc_", 0) == 0 && file.path().extension() == ".json")
        check(file.path(), cmc_schema);
      else if (name.rfind("det_", 0) == 0 && file.path().extension() == ".json")
        check(file.path(), det_schema);
    }
  }
  if (!any) errors.push_back("no bundles found under " + run_dir.string());
  return errors;
}

}  // namespace crossres
