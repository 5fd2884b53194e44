#include "motorseg/pipeline.hpp"

#include "motorseg/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace motorseg::pipeline {

using nlohmann::json;
using synthgen::Domain;

namespace {

const std::set<std::string> kToggleKeys{"stn",  "pretrain", "aug1", "aug2", "aug3", "aug4", "sample_region_restriction",
                                        "focused_sampling", "weighting_loss", "patch_attention"};

// Large enough to keep every point of a generated scene.
constexpr double kUnrestrictedHalfExtent = 2.0;

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "ablation" : out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

void AblationMatrix::validate() const {
  if (columns.empty()) throw UsageError("ablation matrix has no toggle columns");
  if (rows.empty()) throw UsageError("ablation matrix has no rows");
  std::set<std::string> keys;
  for (const auto& c : columns) {
    if (!kToggleKeys.count(c.key)) throw UsageError("unknown toggle '" + c.key + "'");
    if (!keys.insert(c.key).second) throw UsageError("toggle '" + c.key + "' listed twice");
  }
  std::set<std::map<std::string, bool>> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].toggles.size() != columns.size())
      throw UsageError("row " + std::to_string(r) + " does not set exactly the matrix columns");
    for (const auto& [k, _] : rows[r].toggles)
      if (!keys.count(k)) throw UsageError("row " + std::to_string(r) + " sets unknown toggle '" + k + "'");
    if (!seen.insert(rows[r].toggles).second)
      throw UsageError("row " + std::to_string(r) + " duplicates an earlier combination");
  }
}

AblationMatrix parse_matrix(const json& j) {
  AblationMatrix m;
  try {
    m.title = j.value("title", std::string("ablation"));
    m.name_header = j.value("name_header", std::string());
    for (const auto& c : j.at("columns")) {
      if (c.is_string()) m.columns.push_back({c.get<std::string>(), c.get<std::string>()});
      else m.columns.push_back({c.at("key").get<std::string>(), c.value("header", c.at("key").get<std::string>())});
    }
    for (const auto& r : j.at("rows")) {
      AblationRow row;
      const json& values = r.is_array() ? r : r.at("values");
      if (r.is_object()) row.name = r.value("name", std::string());
      if (!values.is_array() || values.size() != m.columns.size())
        throw UsageError("every row needs one boolean per column");
      for (std::size_t c = 0; c < m.columns.size(); ++c) row.toggles[m.columns[c].key] = values[c].get<bool>();
      m.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed ablation matrix: ") + e.what());
  }
  m.validate();
  return m;
}

AblationMatrix load_matrix(const fs::path& path) { return parse_matrix(read_json_file(path)); }

bool runs_pretrain(const std::map<std::string, bool>& toggles) {
  const auto it = toggles.find("pretrain");
  return it == toggles.end() || it->second;
}

PipelineConfig apply_toggles(PipelineConfig cfg, const std::map<std::string, bool>& toggles) {
  for (const auto& [key, on] : toggles) {
    if (key == "stn") cfg.model.stn = on;
    else if (key == "pretrain") continue;
    else if (key == "aug1") cfg.aug.aug1 = on;
    else if (key == "aug2") cfg.aug.aug2 = on;
    else if (key == "aug3") cfg.aug.aug3 = on;
    else if (key == "aug4") cfg.aug.aug4 = on;
    else if (key == "sample_region_restriction") {
      if (!on) cfg.cuboid.half_extents = Vec3::Constant(kUnrestrictedHalfExtent);
    } else if (key == "focused_sampling") cfg.model.focused_sampling = on;
    else if (key == "weighting_loss") cfg.model.class_weights = on;
    else if (key == "patch_attention") cfg.model.patch_branch = on;
    else throw UsageError("unknown toggle '" + key + "'");
  }
  return cfg;
}

std::vector<std::string> AblationTable::header() const {
  std::vector<std::string> h;
  const bool named = !matrix.name_header.empty() ||
                     std::any_of(matrix.rows.begin(), matrix.rows.end(), [](const auto& r) { return !r.name.empty(); });
  if (named) h.push_back(matrix.name_header);
  for (const auto& c : matrix.columns) h.push_back(c.header);
  h.insert(h.end(), kMetricHeaders.begin(), kMetricHeaders.end());
  return h;
}

std::vector<std::vector<std::string>> AblationTable::cells() const {
  const bool named = header().size() > matrix.columns.size() + kMetricHeaders.size();
  std::vector<std::vector<std::string>> out;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    std::vector<std::string> row;
    if (named) row.push_back(matrix.rows[r].name);
    for (const auto& c : matrix.columns) row.push_back(matrix.rows[r].toggles.at(c.key) ? "x" : "-");
    if (r < metrics.size()) {
      const auto& m = metrics[r];
      row.push_back(m.sim_miou ? fmt4(*m.sim_miou) : "-");
      row.push_back(m.sim_screw_iou ? fmt4(*m.sim_screw_iou) : "-");
      row.push_back(fmt4(m.real_miou));
      row.push_back(fmt4(m.real_screw_iou));
    } else {
      row.insert(row.end(), kMetricHeaders.size(), "");
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string AblationTable::markdown() const {
  std::ostringstream os;
  os << "### " << matrix.title << "\n\n|";
  const auto h = header();
  for (const auto& s : h) os << ' ' << s << " |";
  os << "\n|";
  for (std::size_t i = 0; i < h.size(); ++i) os << " --- |";
  os << '\n';
  for (const auto& row : cells()) {
    os << '|';
    for (const auto& s : row) os << ' ' << s << " |";
    os << '\n';
  }
  return os.str();
}

std::string AblationTable::csv() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << csv_field(v[i]);
    os << '\n';
  };
  line(header());
  for (const auto& row : cells()) line(row);
  return os.str();
}

json AblationTable::to_json() const {
  json rows = json::array();
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    json row = {{"name", matrix.rows[r].name}, {"toggles", matrix.rows[r].toggles}};
    if (r < metrics.size()) {
      const auto& m = metrics[r];
      auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
      row["sim_miou"] = opt(m.sim_miou);
      row["sim_screw_iou"] = opt(m.sim_screw_iou);
      row["real_miou"] = m.real_miou;
      row["real_screw_iou"] = m.real_screw_iou;
    }
    rows.push_back(std::move(row));
  }
  return {{"title", matrix.title}, {"header", header()}, {"cells", cells()}, {"rows", rows}};
}

AblationTable cmd_ablate(const PipelineConfig& cfg, const AblationMatrix& matrix, int jobs,
                         const std::function<void(std::size_t, const RowMetrics&)>& on_row) {
  cfg.validate();
  matrix.validate();
  AblationTable table{matrix, {}};
  const fs::path root = cfg.paths.run_dir / "ablate" / slug(matrix.title);

  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    const auto& toggles = matrix.rows[r].toggles;
    PipelineConfig rc = apply_toggles(cfg, toggles);
    char row_dir[32];
    std::snprintf(row_dir, sizeof row_dir, "row_%02zu", r);
    rc.paths.run_dir = root / row_dir;
    // Rows that generate identical data share it.
    const json data_key = {{"sim", rc.profile(Domain::sim)},
                           {"pseudo_real", rc.profile(Domain::pseudo_real)},
                           {"scenes", rc.scenes},
                           {"seed", rc.seed}};
    char key_dir[32];
    std::snprintf(key_dir, sizeof key_dir, "data_%016llx",
                  static_cast<unsigned long long>(std::hash<std::string>{}(data_key.dump()) & 0xffffffffffffULL));
    rc.paths.data_dir = cfg.paths.run_dir / "ablate" / key_dir;

    RowMetrics m;
    std::optional<fs::path> init;
    if (runs_pretrain(toggles)) {
      cmd_gen(rc, Domain::sim, jobs, true);
      cmd_preprocess(rc, Domain::sim, jobs);
      const auto pre = cmd_train(rc, TrainRequest{});
      const auto ev = cmd_eval(rc, pre.checkpoint, Domain::sim, jobs);
      m.sim_miou = ev.iou.miou;
      m.sim_screw_iou = ev.iou.screw_iou;
      init = pre.checkpoint;
    }
    cmd_gen(rc, Domain::pseudo_real, jobs, true);
    cmd_preprocess(rc, Domain::pseudo_real, jobs);
    TrainRequest fr;
    fr.stage = model::Stage::finetune;
    fr.init = init;
    fr.scratch = !init;
    const auto fin = cmd_train(rc, fr);
    const auto ev = cmd_eval(rc, fin.checkpoint, Domain::pseudo_real, jobs);
    m.real_miou = ev.iou.miou;
    m.real_screw_iou = ev.iou.screw_iou;
    table.metrics.push_back(m);
    if (on_row) on_row(r, m);
  }

  const auto reports = cfg.paths.reports();
  std::error_code ec;
  fs::create_directories(reports, ec);
  if (ec) throw IoError("cannot create directory " + reports.string());
  const std::string stem = "ablation_" + slug(matrix.title);
  json doc = table.to_json();
  doc["config"] = cfg;
  write_json_file(doc, reports / (stem + ".json"));
  write_text(table.csv(), reports / (stem + ".csv"));
  write_text(table.markdown(), reports / (stem + ".md"));
  RunManifest manifest(cfg.paths.run_dir);
  for (const char* ext : {".json", ".csv", ".md"}) manifest.record(reports / (stem + ext), "ablate");
  manifest.save();
  return table;
}

}  // namespace motorseg::pipeline
