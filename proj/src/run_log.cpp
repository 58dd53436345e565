#include "cablebot/run_log.hpp"

#include "cablebot/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cablebot {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Event text must not break the CSV: commas and newlines become spaces.
std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r' || c == '"'; }, ' ');
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

const char* const kJointNames[6] = {"l_roll", "l_pitch", "l_knee", "r_roll", "r_pitch", "r_knee"};
const char* const kTwistNames[6] = {"vx", "vy", "vz", "wx", "wy", "wz"};
const char* const kContactNames[4] = {"lw", "rw", "lk", "rk"};

}  // namespace

std::size_t RunLog::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw MissingColumn("run log has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

bool RunLog::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> RunLog::series(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::string RunLog::to_csv() const {
  std::ostringstream out;
  out << "# " << kRunLogSchema << " config=" << config_hash << " scenario=" << scenario << '\n';
  for (const auto& c : columns) out << c << ',';
  out << "event\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double v : rows[i]) out << format_number(v) << ',';
    out << sanitize(i < events.size() ? events[i] : std::string{}) << '\n';
  }
  return out.str();
}

void RunLog::write(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write run log " + path.string());
  f << to_csv();
}

RunLog RunLog::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind(std::string("# ") + kRunLogSchema, 0) != 0) {
    throw ConfigError(std::string("run log does not start with '# ") + kRunLogSchema + "'");
  }
  RunLog log;
  std::istringstream header(line.substr(2 + std::string(kRunLogSchema).size()));
  std::string field;
  while (header >> field) {
    if (field.rfind("config=", 0) == 0) log.config_hash = field.substr(7);
    if (field.rfind("scenario=", 0) == 0) log.scenario = field.substr(9);
  }
  if (!std::getline(in, line)) throw ConfigError("run log has no column header");
  auto cols = split(line, ',');
  if (cols.empty() || cols.back() != "event") throw ConfigError("run log header must end with 'event'");
  cols.pop_back();
  log.columns = cols;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != cols.size() + 1) {
      throw ConfigError("run log line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(cols.size() + 1));
    }
    std::vector<double> row;
    row.reserve(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      try {
        row.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw ConfigError("run log line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    log.rows.push_back(std::move(row));
    log.events.push_back(cells.back());
  }
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    if (!(log.rows[i][0] > log.rows[i - 1][0])) throw ConfigError("run log time is not increasing");
  }
  return log;
}

RunLog RunLog::read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read run log " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> runlog_columns() {
  std::vector<std::string> c{"t", "x", "y", "z", "qw", "qx", "qy", "qz"};
  for (const char* n : kTwistNames) c.emplace_back(n);
  for (int i = 1; i <= kAnchorWires; ++i) {
    const std::string k = std::to_string(i);
    for (const char* n : {"att", "l", "ldot", "ldot_ref", "f", "f_ref", "i"}) c.push_back(n + k);
  }
  for (const char* n : kTwistNames) c.push_back(std::string("qref_") + n);
  for (const char* n : {"wheel_l", "wheel_r", "wheel_ref_l", "wheel_ref_r"}) c.emplace_back(n);
  for (const char* n : kJointNames) c.push_back(std::string("q_") + n);
  for (const char* n : kJointNames) c.push_back(std::string("qcmd_") + n);
  c.emplace_back("wire_mode");
  c.emplace_back("leg_mode");
  for (const char* n : kContactNames) c.push_back(std::string("fn_") + n);
  for (const char* n : kContactNames) c.push_back(std::string("patch_") + n);
  c.emplace_back("body_force");
  c.emplace_back("qp_ok");
  for (const char* n : {"pl_x", "pl_y", "pl_z", "pl_held"}) c.emplace_back(n);
  return c;
}

std::vector<double> log_row(const Runtime& rt) {
  const SimState& s = rt.state();
  const TickRecord& rec = rt.record();
  std::vector<double> r{s.time, s.body.position.x(), s.body.position.y(), s.body.position.z(),
                        s.body.orientation.w(), s.body.orientation.x(), s.body.orientation.y(),
                        s.body.orientation.z()};
  const Vec6 tw = s.body.twist();
  for (int i = 0; i < 6; ++i) r.push_back(tw(i));
  for (int i = 0; i < kAnchorWires; ++i) {
    const WireState& w = s.wires[static_cast<std::size_t>(i)];
    r.push_back(w.attached ? 1.0 : 0.0);
    r.push_back(w.length);
    r.push_back(w.rate);
    r.push_back(rec.wire_rate_ref(i));
    r.push_back(w.tension);
    r.push_back(rec.tension_ref(i));
    r.push_back(w.current);
  }
  for (int i = 0; i < 6; ++i) r.push_back(rec.cog_velocity_ref(i));
  r.push_back(s.legs.wheel_speed[0]);
  r.push_back(s.legs.wheel_speed[1]);
  r.push_back(rec.wheel_ref[0]);
  r.push_back(rec.wheel_ref[1]);
  const JointVector q = s.legs.joints();
  for (int i = 0; i < 6; ++i) r.push_back(q(i));
  for (int i = 0; i < 6; ++i) r.push_back(rec.joint_ref(i));
  r.push_back(static_cast<double>(rt.mode().wire));
  r.push_back(static_cast<double>(rt.mode().leg));
  for (double f : s.contacts.normal_force) r.push_back(f);
  for (int p : s.contacts.patch) r.push_back(p);
  r.push_back(s.contacts.body_force);
  r.push_back(rec.qp_converged ? 1.0 : 0.0);
  // First payload only; zeros when none is spawned.
  if (s.payloads.empty()) {
    r.insert(r.end(), {0.0, 0.0, 0.0, 0.0});
  } else {
    const PayloadState& p = s.payloads.front();
    const Vec3 at = p.grasped ? Vec3(s.body.position + s.body.orientation * p.body_offset) : p.position;
    r.insert(r.end(), {at.x(), at.y(), at.z(), p.grasped ? 1.0 : 0.0});
  }
  return r;
}

namespace {

struct Panel {
  const char* file;
  std::vector<std::string> columns;
};

std::vector<Panel> panels() {
  std::vector<Panel> p;
  Panel rates{"wire_rates.csv", {"t"}};
  Panel lengths{"wire_lengths.csv", {"t"}};
  Panel tensions{"wire_tensions.csv", {"t"}};
  for (int i = 1; i <= kAnchorWires; ++i) {
    rates.columns.push_back("ldot" + std::to_string(i));
    rates.columns.push_back("ldot_ref" + std::to_string(i));
    lengths.columns.push_back("l" + std::to_string(i));
    tensions.columns.push_back("f" + std::to_string(i));
    tensions.columns.push_back("f_ref" + std::to_string(i));
  }
  p.push_back(rates);
  p.push_back(lengths);
  p.push_back(tensions);
  p.push_back({"wheel_speeds.csv", {"t", "wheel_l", "wheel_r", "wheel_ref_l", "wheel_ref_r"}});
  Panel cog{"cog_velocity.csv", {"t"}};
  for (const char* n : kTwistNames) {
    cog.columns.push_back(std::string("qref_") + n);
    cog.columns.emplace_back(n);
  }
  p.push_back(cog);
  p.push_back({"trajectory.csv", {"t", "x", "y", "z"}});
  Panel joints{"joints.csv", {"t"}};
  for (const char* n : kJointNames) {
    joints.columns.push_back(std::string("q_") + n);
    joints.columns.push_back(std::string("qcmd_") + n);
  }
  p.push_back(joints);
  return p;
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const RunLog& log, const std::filesystem::path& out_dir) {
  const auto all = panels();
  // Resolve every column first so a missing one leaves no partial output.
  std::vector<std::vector<std::size_t>> idx;
  for (const auto& panel : all) {
    std::vector<std::size_t> cols;
    for (const auto& c : panel.columns) cols.push_back(log.column(c));
    idx.push_back(std::move(cols));
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto path = out_dir / all[k].file;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    for (std::size_t j = 0; j < all[k].columns.size(); ++j) {
      f << (j ? "," : "") << all[k].columns[j];
    }
    f << '\n';
    for (const auto& row : log.rows) {
      for (std::size_t j = 0; j < idx[k].size(); ++j) {
        f << (j ? "," : "") << format_number(row[idx[k][j]]);
      }
      f << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace cablebot
