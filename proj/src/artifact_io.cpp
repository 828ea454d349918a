#include "dynemu/artifact_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "dynemu/hash.hpp"
#include "dynemu/version.hpp"

namespace dynemu {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'E', 'M', 'U', 'A', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t len) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + len);
  }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void vector(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void cmatrix(const Eigen::MatrixXcd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        f64(m(r, c).real());
        f64(m(r, c).imag());
      }
    }
  }
  void cvector(const Eigen::VectorXcd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      f64(v[i].real());
      f64(v[i].imag());
    }
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, const std::string& path) : buf_(std::move(data)), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void raw(void* p, std::size_t len) {
    need(len);
    std::memcpy(p, buf_.data() + pos_, len);
    pos_ += len;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index size) {
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = f64();
    return v;
  }
  Eigen::MatrixXcd cmatrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double re = f64();
        const double im = f64();
        m(r, c) = std::complex<double>(re, im);
      }
    }
    return m;
  }
  Eigen::VectorXcd cvector(Eigen::Index size) {
    Eigen::VectorXcd v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      const double re = f64();
      const double im = f64();
      v[i] = std::complex<double>(re, im);
    }
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  const std::string& data() const { return buf_; }

 private:
  void need(std::size_t len) {
    if (pos_ + len > buf_.size()) {
      throw IoError("artifact truncated: " + path_);
    }
  }
  std::string buf_;
  std::size_t pos_ = 0;
  std::string path_;
};

const char* flavor_name(MetricFlavor f) {
  return f == MetricFlavor::kSquaredEuclidean ? "squared_euclidean" : "euclidean";
}

MetricFlavor flavor_from_name(const std::string& name) {
  if (name == "squared_euclidean") return MetricFlavor::kSquaredEuclidean;
  if (name == "euclidean") return MetricFlavor::kEuclidean;
  throw ConfigError("unknown metric flavor: " + name);
}

}  // namespace

void save_artifact(const ConditionedEmulator& ce, const std::string& path,
                   const std::map<std::string, std::string>& provenance) {
  const int m = ce.state_dim();
  const int obs_dim = ce.obs_dim();
  const int n = ce.n();
  const int intervals = ce.num_intervals();
  const int param_dim = n > 0 ? static_cast<int>(ce.design.inputs[0].params.size()) : 0;
  const int forcing_dim = n > 0 ? static_cast<int>(ce.design.inputs[0].forcing.cols()) : 0;

  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(static_cast<std::uint32_t>(obs_dim));
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(intervals));
  w.u32(static_cast<std::uint32_t>(param_dim));
  w.u32(static_cast<std::uint32_t>(forcing_dim));
  w.u32(static_cast<std::uint32_t>(ce.cond_times.size()));
  for (int t : ce.cond_times) w.u32(static_cast<std::uint32_t>(t));

  w.vector(ce.grid.times());
  w.vector(ce.xi0);
  w.matrix(ce.cct);
  for (const auto& input : ce.design.inputs) w.vector(input.params);
  for (const auto& input : ce.design.inputs) w.matrix(input.forcing);
  for (const auto& per_replica : ce.design_obs) {
    for (const auto& h_obs : per_replica) w.matrix(h_obs);
  }
  w.f64(ce.factor.applied_jitter);
  w.f64(ce.factor.applied_jitter_rel);
  w.f64(ce.cond_threshold);
  // Lower triangle of the factor, row-major.
  for (Eigen::Index r = 0; r < ce.factor.lower.rows(); ++r) {
    for (Eigen::Index c = 0; c <= r; ++c) w.f64(ce.factor.lower(r, c));
  }
  w.vector(ce.residual);
  for (const auto& zp : ce.zprime) w.vector(zp);
  for (const auto& mean : ce.design_means) {
    for (const auto& zt : mean.z_tilde) w.vector(zt);
  }
  w.vector(ce.observed.packed);
  for (const auto& ed : ce.design_ed) {
    w.cvector(ed.lambda);
    w.cmatrix(ed.m);
    w.cmatrix(ed.m_inv);
    w.f64(ed.cond_estimate);
  }
  const std::uint64_t checksum = fnv1a64(w.str().data(), w.str().size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open artifact for writing: " + path);
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  Writer tail;
  tail.u64(checksum);
  out.write(tail.str().data(), static_cast<std::streamsize>(tail.str().size()));
  if (!out) throw IoError("failed writing artifact: " + path);
  out.close();

  nlohmann::json sidecar;
  sidecar["format"] = "dynemu-artifact";
  sidecar["format_version"] = kFormatVersion;
  sidecar["tool_version"] = kToolVersion;
  sidecar["model"] = ce.model.id;
  sidecar["dims"] = {{"state_dim", m},
                     {"obs_dim", obs_dim},
                     {"n", n},
                     {"intervals", intervals},
                     {"conditioned_times", ce.cond_times.size()}};
  sidecar["metric"] = {{"flavor", flavor_name(ce.metric.flavor)},
                       {"coords", ce.metric.coords},
                       {"scales", std::vector<double>(ce.metric.scales.data(),
                                                      ce.metric.scales.data() +
                                                          ce.metric.scales.size())}};
  sidecar["jitter"] = {{"applied", ce.factor.applied_jitter},
                       {"applied_rel", ce.factor.applied_jitter_rel}};
  for (const auto& [key, value] : provenance) sidecar["provenance"][key] = value;

  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw IoError("cannot open sidecar for writing: " + path + ".json");
  side << sidecar.dump(2) << "\n";
  if (!side) throw IoError("failed writing sidecar: " + path + ".json");
}

ConditionedEmulator load_artifact(const SimulationModel& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open artifact: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) + 8) throw IoError("artifact too short: " + path);

  const std::uint64_t stored_checksum =
      Reader(data.substr(data.size() - 8), path).u64();
  const std::string payload = data.substr(0, data.size() - 8);
  if (fnv1a64(payload.data(), payload.size()) != stored_checksum) {
    throw IoError("artifact checksum mismatch: " + path);
  }

  Reader r(payload, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a dynemu artifact: " + path);
  }
  if (r.u32() != kFormatVersion) throw IoError("unsupported artifact version: " + path);
  const int m = static_cast<int>(r.u32());
  const int obs_dim = static_cast<int>(r.u32());
  const int n = static_cast<int>(r.u32());
  const int intervals = static_cast<int>(r.u32());
  const int param_dim = static_cast<int>(r.u32());
  const int forcing_dim = static_cast<int>(r.u32());
  const int c = static_cast<int>(r.u32());

  ConditionedEmulator ce;
  ce.model = model;
  ce.cond_times.resize(static_cast<std::size_t>(c));
  for (int v = 0; v < c; ++v) ce.cond_times[static_cast<std::size_t>(v)] = static_cast<int>(r.u32());

  ce.grid = TimeGrid(r.vector(intervals + 1));
  ce.xi0 = r.vector(m);
  ce.cct = r.matrix(m, m);
  ce.design.inputs.resize(static_cast<std::size_t>(n));
  for (auto& input : ce.design.inputs) input.params = r.vector(param_dim);
  for (auto& input : ce.design.inputs) {
    input.forcing = r.matrix(intervals, forcing_dim);
    input.grid_ref = ce.grid.id();
  }
  ce.design_obs.resize(static_cast<std::size_t>(n));
  for (auto& per_replica : ce.design_obs) {
    per_replica.resize(static_cast<std::size_t>(intervals) + 1);
    for (auto& h_obs : per_replica) h_obs = r.matrix(obs_dim, m);
  }
  ce.factor.applied_jitter = r.f64();
  ce.factor.applied_jitter_rel = r.f64();
  ce.cond_threshold = r.f64();
  const Eigen::Index dim = static_cast<Eigen::Index>(c) * n * obs_dim;
  ce.factor.lower = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index row = 0; row < dim; ++row) {
    for (Eigen::Index col = 0; col <= row; ++col) ce.factor.lower(row, col) = r.f64();
  }
  ce.residual = r.vector(dim);
  ce.zprime.resize(static_cast<std::size_t>(intervals) * static_cast<std::size_t>(n));
  for (auto& zp : ce.zprime) zp = r.vector(m);
  ce.design_means.resize(static_cast<std::size_t>(n));
  for (auto& mean : ce.design_means) {
    mean.z_tilde.resize(static_cast<std::size_t>(intervals) + 1);
    for (auto& zt : mean.z_tilde) zt = r.vector(m);
  }
  ce.observed.num_times = intervals;
  ce.observed.n = n;
  ce.observed.obs_dim = obs_dim;
  ce.observed.packed = r.vector(static_cast<Eigen::Index>(intervals) * n * obs_dim);
  ce.design_ed.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(intervals));
  for (auto& ed : ce.design_ed) {
    ed.lambda = r.cvector(m);
    ed.m = r.cmatrix(m, m);
    ed.m_inv = r.cmatrix(m, m);
    ed.cond_estimate = r.f64();
  }
  if (r.pos() != r.size()) throw IoError("artifact has trailing bytes: " + path);

  // Projected design means are not stored; rebuild from the state-space ones.
  for (int a = 0; a < n; ++a) {
    auto& mean = ce.design_means[static_cast<std::size_t>(a)];
    mean.z.resize(mean.z_tilde.size());
    for (std::size_t i = 0; i < mean.z_tilde.size(); ++i) {
      mean.z[i] = ce.design_obs[static_cast<std::size_t>(a)][i] * mean.z_tilde[i];
    }
  }

  std::ifstream side(path + ".json");
  if (!side) throw IoError("cannot open artifact sidecar: " + path + ".json");
  nlohmann::json sidecar;
  try {
    side >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid artifact sidecar: " + std::string(e.what()));
  }
  if (sidecar.at("model").get<std::string>() != model.id) {
    throw ConfigError("artifact was conditioned for model '" +
                      sidecar.at("model").get<std::string>() + "', not '" + model.id + "'");
  }
  ce.metric.flavor = flavor_from_name(sidecar.at("metric").at("flavor").get<std::string>());
  ce.metric.coords = sidecar.at("metric").at("coords").get<std::vector<int>>();
  const auto scales = sidecar.at("metric").at("scales").get<std::vector<double>>();
  ce.metric.scales = Eigen::Map<const Eigen::VectorXd>(scales.data(),
                                                       static_cast<Eigen::Index>(scales.size()));
  return ce;
}

}  // namespace dynemu
