#include "porflow/picnn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace porflow::picnn {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& bytes, const std::string& name) : bytes_(bytes), name_(name) {}
  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) raise(ErrorKind::CorruptCheckpoint, name_ + ": truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void write_atomic(const fs::path& target, const std::string_view data) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) raise(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) raise(ErrorKind::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) raise(ErrorKind::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::MissingCheckpoint, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json spec_json(const nn::NetworkSpec& s) {
  return {{"input_channels", s.input_channels}, {"depth", s.depth}, {"base_channels", s.base_channels}};
}

}  // namespace

std::string checkpoint_file_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%04d.bin", step);
  return buf;
}

void save_checkpoints(const CheckpointSet& set, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const std::uint64_t hash = set.spec.hash();

  for (std::size_t k = 0; k < set.weights.size(); ++k) {
    const auto& weights = set.weights[k];
    Writer w;
    w.put_bytes(kMagic.data(), kMagic.size());
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k + 1));
    w.put<std::uint64_t>(hash);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(set.layout.size()));
    for (const nn::TensorInfo& t : set.layout) {
      if (t.offset + t.size > weights.size())
        raise(ErrorKind::ShapeMismatch, "tensor '" + t.name + "' exceeds the weight buffer");
      w.put<std::uint64_t>(t.size);
      w.put_bytes(weights.data() + t.offset, t.size * sizeof(float));
    }
    w.put<std::uint64_t>(nn::fnv1a64(w.bytes().data(), w.bytes().size()));
    write_atomic(dir / checkpoint_file_name(static_cast<int>(k + 1)),
                 std::string_view(w.bytes().data(), w.bytes().size()));
  }

  json m;
  m["format"] = "porflow-checkpoints";
  m["version"] = kCheckpointVersion;
  m["network"] = spec_json(set.spec);
  m["spec_hash"] = hex64(hash);
  m["scaling"] = {{"s_wc", set.scaling.s_wc}, {"s_or", set.scaling.s_or},
                  {"p_min", set.scaling.p_min}, {"p_max", set.scaling.p_max}};
  m["control_bounds"] = {{"bhp_lo", set.bounds.bhp_lo}, {"bhp_hi", set.bounds.bhp_hi},
                         {"rate_hi", set.bounds.rate_hi}};
  json tensors = json::array();
  for (const nn::TensorInfo& t : set.layout) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  m["tensors"] = tensors;
  json steps = json::array();
  for (std::size_t k = 0; k < set.weights.size(); ++k) {
    json s = {{"step", k + 1}, {"file", checkpoint_file_name(static_cast<int>(k + 1))}};
    if (k < set.reports.size()) {
      const StepReport& r = set.reports[k];
      s["epochs_used"] = r.epochs_used;
      s["final_loss"] = r.final_loss;
      s["physics_loss"] = r.physics_loss;
      s["data_loss"] = r.data_loss;
      s["reached_sigma"] = r.reached_sigma;
    }
    steps.push_back(s);
  }
  m["steps"] = steps;
  write_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

CheckpointSet load_checkpoints(const fs::path& dir, const nn::NetworkSpec* expected) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) raise(ErrorKind::MissingCheckpoint, "no manifest.json in " + dir.string());
  json m;
  try {
    const auto bytes = read_all(manifest_path);
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    raise(ErrorKind::CorruptCheckpoint, "manifest.json: " + std::string(e.what()));
  }

  CheckpointSet set;
  try {
    if (m.at("version").get<std::uint32_t>() != kCheckpointVersion)
      raise(ErrorKind::VersionMismatch, "manifest version " + m.at("version").dump() + " is not supported");
    const json& n = m.at("network");
    set.spec.input_channels = n.at("input_channels").get<int>();
    set.spec.depth = n.at("depth").get<int>();
    set.spec.base_channels = n.at("base_channels").get<int>();
    if (m.at("spec_hash").get<std::string>() != hex64(set.spec.hash()))
      raise(ErrorKind::CorruptCheckpoint, "manifest spec hash does not match its network description");
    const json& s = m.at("scaling");
    set.scaling = {s.at("s_wc").get<double>(), s.at("s_or").get<double>(), s.at("p_min").get<double>(),
                   s.at("p_max").get<double>()};
    const json& b = m.at("control_bounds");
    set.bounds = {b.at("bhp_lo").get<double>(), b.at("bhp_hi").get<double>(), b.at("rate_hi").get<double>()};
    for (const json& st : m.at("steps")) {
      StepReport r;
      r.step = st.at("step").get<int>();
      r.epochs_used = st.value("epochs_used", 0);
      r.final_loss = st.value("final_loss", 0.0);
      r.physics_loss = st.value("physics_loss", 0.0);
      r.data_loss = st.value("data_loss", 0.0);
      r.reached_sigma = st.value("reached_sigma", false);
      set.reports.push_back(r);
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::CorruptCheckpoint, "manifest.json: " + std::string(e.what()));
  }
  if (expected != nullptr && expected->hash() != set.spec.hash())
    raise(ErrorKind::SpecHashMismatch, "checkpoints were written for network '" + set.spec.canonical() +
                                           "', expected '" + expected->canonical() + "'");

  nn::ParallelUNet<float> probe(set.spec);
  set.layout = probe.layout();
  const std::uint64_t hash = set.spec.hash();
  for (std::size_t k = 0; k < set.reports.size(); ++k) {
    const int step = static_cast<int>(k + 1);
    if (set.reports[k].step != step) raise(ErrorKind::MissingCheckpoint, "manifest steps are not contiguous");
    const std::string name = checkpoint_file_name(step);
    const std::vector<char> bytes = read_all(dir / name);
    if (bytes.size() < kMagic.size() + 8)
      raise(ErrorKind::CorruptCheckpoint, name + ": truncated");
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
      raise(ErrorKind::CorruptCheckpoint, name + ": bad magic");
    Reader r(bytes, name);
    std::array<char, 8> magic{};
    r.get_bytes(magic.data(), magic.size());
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
      raise(ErrorKind::VersionMismatch, name + ": version " + std::to_string(v) + " is not supported");
    if (bytes.size() < 8 + 8) raise(ErrorKind::CorruptCheckpoint, name + ": truncated");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 8);
    if (stored != nn::fnv1a64(bytes.data(), body)) raise(ErrorKind::CorruptCheckpoint, name + ": checksum mismatch");
    if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(step))
      raise(ErrorKind::CorruptCheckpoint, name + ": step index mismatch");
    if (r.get<std::uint64_t>() != hash) raise(ErrorKind::SpecHashMismatch, name + ": network spec hash mismatch");
    const auto count = r.get<std::uint32_t>();
    if (count != set.layout.size()) raise(ErrorKind::SpecHashMismatch, name + ": tensor count mismatch");
    std::vector<float> weights(probe.parameter_count());
    for (const nn::TensorInfo& t : set.layout) {
      if (r.get<std::uint64_t>() != t.size)
        raise(ErrorKind::SpecHashMismatch, name + ": tensor '" + t.name + "' has the wrong length");
      r.get_bytes(weights.data() + t.offset, t.size * sizeof(float));
    }
    if (r.position() != body) raise(ErrorKind::CorruptCheckpoint, name + ": trailing bytes");
    set.weights.push_back(std::move(weights));
  }
  return set;
}

}  // namespace porflow::picnn
