#include "porflow/harness/export.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace porflow::harness {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kTrajMagic = {'P', 'F', 'T', 'R', 'A', 'J', '\0', '\0'};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_bytes(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) raise(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) raise(ErrorKind::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(ErrorKind::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

template <class T>
void append(std::string& s, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  s.append(p, sizeof(T));
}

}  // namespace

std::string fmt_num(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_bytes(path, text);
}

RunManifest::RunManifest(std::string command, std::uint64_t config_hash, std::uint64_t seed)
    : command_(std::move(command)), config_hash_(config_hash), seed_(seed) {}

void RunManifest::add_file(const std::string& relative_path) { files_.push_back(relative_path); }

void RunManifest::add_image(const std::string& relative_path, double lo, double hi) {
  images_.push_back({{"file", relative_path}, {"colormap", "viridis"}, {"min", lo}, {"max", hi}});
}

void RunManifest::write(const fs::path& dir) const {
  json m;
  m["tool"] = "porflow";
  m["version"] = "0.1.0";
  m["command"] = command_;
  m["config_hash"] = hex64(config_hash_);
  m["seed"] = seed_;
  std::vector<std::string> files = files_;
  std::sort(files.begin(), files.end());
  m["files"] = files;
  m["images"] = images_;
  for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void write_fields_csv(const fs::path& path, const sim::Trajectory& traj, const GridSpec& grid, double dt) {
  std::string s = "step,time,i,j,pressure,sw\n";
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const State& st = traj.states[k];
    const std::string prefix = std::to_string(k) + "," + fmt_num(static_cast<double>(k) * dt) + ",";
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const auto c = static_cast<std::size_t>(grid.index(i, j));
        s += prefix + std::to_string(i) + "," + std::to_string(j) + "," + fmt_num(st.pressure[c]) + "," +
             fmt_num(st.sw[c]) + "\n";
      }
  }
  write_text(path, s);
}

void write_steps_csv(const fs::path& path, const sim::Trajectory& traj, double dt) {
  std::string s = "step,time,newton_iterations,step_cuts,final_residual\n";
  for (std::size_t k = 0; k < traj.diagnostics.size(); ++k) {
    const sim::StepDiagnostics& d = traj.diagnostics[k];
    s += std::to_string(k + 1) + "," + fmt_num(static_cast<double>(k + 1) * dt) + "," +
         std::to_string(d.iterations) + "," + std::to_string(d.step_cuts) + "," +
         fmt_num(d.residual_norms.empty() ? 0.0 : d.residual_norms.back()) + "\n";
  }
  write_text(path, s);
}

void write_mape_csv(const fs::path& path, std::span<const metrics::StepErrors> errors, double dt) {
  std::string s = "step,time,mape_pressure,mape_saturation\n";
  for (const metrics::StepErrors& e : errors)
    s += std::to_string(e.step) + "," + fmt_num(e.step * dt) + "," + fmt_num(e.mape_pressure) + "," +
         fmt_num(e.mape_saturation) + "\n";
  write_text(path, s);
}

void write_wells_csv(const fs::path& path, std::span<const WellRow> rows, double dt) {
  std::string s =
      "step,time,well,wbp_pred,wbp_ref,oil_rate_pred,oil_rate_ref,water_rate_pred,water_rate_ref\n";
  for (const WellRow& r : rows)
    s += std::to_string(r.step) + "," + fmt_num(r.step * dt) + "," + r.predicted.well + "," +
         fmt_num(r.predicted.wbp) + "," + fmt_num(r.reference.wbp) + "," + fmt_num(r.predicted.oil_rate) + "," +
         fmt_num(r.reference.oil_rate) + "," + fmt_num(r.predicted.water_rate) + "," +
         fmt_num(r.reference.water_rate) + "\n";
  write_text(path, s);
}

void write_training_csv(const fs::path& path, std::span<const picnn::StepReport> reports) {
  std::string s = "step,epochs_used,final_loss,physics_loss,data_loss,reached_sigma\n";
  for (const picnn::StepReport& r : reports)
    s += std::to_string(r.step) + "," + std::to_string(r.epochs_used) + "," + fmt_num(r.final_loss) + "," +
         fmt_num(r.physics_loss) + "," + fmt_num(r.data_loss) + "," + (r.reached_sigma ? "1" : "0") + "\n";
  write_text(path, s);
}

void write_bench_csv(const fs::path& path, std::span<const metrics::SpeedupRow> rows) {
  std::string s =
      "case,nx,ny,dofs,parameters,sim_seconds_per_step,infer_seconds_per_step,train_seconds,speedup\n";
  for (const metrics::SpeedupRow& r : rows)
    s += r.case_name + "," + std::to_string(r.nx) + "," + std::to_string(r.ny) + "," + std::to_string(r.dofs) +
         "," + std::to_string(r.parameters) + "," + fmt_num(r.simulation_seconds) + "," +
         fmt_num(r.inference_seconds) + "," + fmt_num(r.training_seconds) + "," + fmt_num(r.speedup) + "\n";
  write_text(path, s);
}

void write_error_map_csv(const fs::path& path, std::span<const double> map, const GridSpec& grid) {
  std::string s = "i,j,relative_error\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      s += std::to_string(i) + "," + std::to_string(j) + "," +
           fmt_num(map[static_cast<std::size_t>(grid.index(i, j))]) + "\n";
  write_text(path, s);
}

void write_trajectory_binary(const fs::path& path, const sim::Trajectory& traj, const GridSpec& grid,
                             double dt) {
  std::string s(kTrajMagic.data(), kTrajMagic.size());
  append<std::uint32_t>(s, 1);
  append<std::uint32_t>(s, static_cast<std::uint32_t>(grid.nx));
  append<std::uint32_t>(s, static_cast<std::uint32_t>(grid.ny));
  append<std::uint32_t>(s, static_cast<std::uint32_t>(traj.states.size()));
  append<double>(s, dt);
  for (const State& st : traj.states) {
    if (st.size() != grid.cell_count()) raise(ErrorKind::DimensionMismatch, "state does not match the grid");
    s.append(reinterpret_cast<const char*>(st.pressure.data()), st.size() * sizeof(double));
    s.append(reinterpret_cast<const char*>(st.sw.data()), st.size() * sizeof(double));
  }
  write_text(path, s);
}

sim::Trajectory read_trajectory_binary(const fs::path& path, GridSpec* grid, double* dt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::IoError, "cannot open " + path.string());
  const std::string s{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > s.size()) raise(ErrorKind::IoError, path.string() + ": truncated trajectory file");
    std::memcpy(dst, s.data() + pos, n);
    pos += n;
  };
  std::array<char, 8> magic{};
  take(magic.data(), magic.size());
  if (magic != kTrajMagic) raise(ErrorKind::IoError, path.string() + ": not a trajectory file");
  std::uint32_t version = 0, nx = 0, ny = 0, count = 0;
  double step = 0.0;
  take(&version, 4);
  if (version != 1) raise(ErrorKind::VersionMismatch, path.string() + ": unsupported trajectory version");
  take(&nx, 4);
  take(&ny, 4);
  take(&count, 4);
  take(&step, 8);
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  sim::Trajectory traj;
  for (std::uint32_t k = 0; k < count; ++k) {
    State st;
    st.pressure.resize(n);
    st.sw.resize(n);
    take(st.pressure.data(), n * sizeof(double));
    take(st.sw.data(), n * sizeof(double));
    traj.states.push_back(std::move(st));
  }
  if (grid != nullptr) {
    grid->nx = static_cast<int>(nx);
    grid->ny = static_cast<int>(ny);
  }
  if (dt != nullptr) *dt = step;
  return traj;
}

Rgb viridis(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  // Degree-6 polynomial fit of matplotlib's viridis.
  constexpr double c0[3] = {0.2777273272234177, 0.005407344544966578, 0.3340998053353061};
  constexpr double c1[3] = {0.1050930431085774, 1.404613529898575, 1.384590162594685};
  constexpr double c2[3] = {-0.3308618287255563, 0.214847559468213, 0.09509516302823659};
  constexpr double c3[3] = {-4.634230498983486, -5.799100973351585, -19.33244095627987};
  constexpr double c4[3] = {6.228269936347081, 14.17993336680509, 56.69055260068105};
  constexpr double c5[3] = {4.776384997670288, -13.74514537774601, -65.35303263337234};
  constexpr double c6[3] = {-5.435455855934631, 4.645852612178535, 26.3124352495832};
  unsigned char out[3];
  for (int ch = 0; ch < 3; ++ch) {
    const double v = c0[ch] + t * (c1[ch] + t * (c2[ch] + t * (c3[ch] + t * (c4[ch] + t * (c5[ch] + t * c6[ch])))));
    out[ch] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  return {out[0], out[1], out[2]};
}

std::pair<double, double> write_field_image(const fs::path& path, std::span<const double> field,
                                            const GridSpec& grid) {
  if (field.size() != grid.cell_count()) raise(ErrorKind::DimensionMismatch, "image field does not match the grid");
  const auto [mn, mx] = std::minmax_element(field.begin(), field.end());
  const double lo = field.empty() ? 0.0 : *mn;
  const double hi = field.empty() ? 0.0 : *mx;
  std::string s = "P6\n" + std::to_string(grid.nx) + " " + std::to_string(grid.ny) + "\n255\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double v = field[static_cast<std::size_t>(grid.index(i, j))];
      const Rgb c = viridis(hi > lo ? (v - lo) / (hi - lo) : 0.5);
      s.push_back(static_cast<char>(c.r));
      s.push_back(static_cast<char>(c.g));
      s.push_back(static_cast<char>(c.b));
    }
  write_text(path, s);
  return {lo, hi};
}

}  // namespace porflow::harness
