#include "jointnerf/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace jointnerf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'N', 'E', 'R', 'F', 'M', 'M', '0', '1'};

struct Record {
  std::vector<uint64_t> extents;
  std::vector<double> payload;
};

using Records = std::map<std::string, Record>;

Record FromMatrix(const Matrix& m) {
  Record r;
  r.extents = {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())};
  r.payload.assign(m.data(), m.data() + m.size());
  return r;
}

Record FromScalar(double v) { return Record{{}, {v}}; }

void AddAdam(Records& out, const std::string& group, const AdamState& adam,
             const std::vector<std::string>& names) {
  out["adam_state/" + group + "/step"] = FromScalar(static_cast<double>(adam.step));
  for (size_t i = 0; i < names.size(); ++i) {
    out["adam_state/" + group + "/m/" + names[i]] = FromMatrix(adam.first_moment[i]);
    out["adam_state/" + group + "/v/" + names[i]] = FromMatrix(adam.second_moment[i]);
  }
}

std::vector<std::string> FieldNames(const RadianceField& field) {
  std::vector<std::string> names;
  for (const Parameter& p : field.parameters()) names.push_back(p.name);
  return names;
}

void WriteU64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t ReadU64(std::istream& is, const std::string& path) {
  uint64_t v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw CheckpointError("truncated checkpoint: " + path);
  }
  return v;
}

class Reader {
 public:
  Reader(Records records, std::string path)
      : records_(std::move(records)), path_(std::move(path)) {}

  const Record& Get(const std::string& name) const {
    auto it = records_.find(name);
    if (it == records_.end()) {
      throw CheckpointError("checkpoint " + path_ + " lacks record '" + name + "'");
    }
    return it->second;
  }
  double Scalar(const std::string& name) const {
    const Record& r = Get(name);
    if (!r.extents.empty() || r.payload.size() != 1) {
      throw CheckpointError("checkpoint record '" + name + "' is not a scalar");
    }
    return r.payload[0];
  }
  int Int(const std::string& name) const { return static_cast<int>(Scalar(name)); }
  Matrix Mat(const std::string& name) const {
    const Record& r = Get(name);
    if (r.extents.size() != 2) {
      throw CheckpointError("checkpoint record '" + name + "' is not a matrix");
    }
    Matrix m(static_cast<Eigen::Index>(r.extents[0]),
             static_cast<Eigen::Index>(r.extents[1]));
    std::memcpy(m.data(), r.payload.data(), r.payload.size() * sizeof(double));
    return m;
  }
  Matrix Mat(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    Matrix m = Mat(name);
    if (m.rows() != rows || m.cols() != cols) {
      throw CheckpointError("checkpoint record '" + name + "' is " +
                            Shape{m.rows(), m.cols()}.ToString() + ", expected " +
                            Shape{rows, cols}.ToString());
    }
    return m;
  }
  AdamState Adam(const std::string& group,
                 const std::vector<const Parameter*>& params) const {
    AdamState s;
    s.step = static_cast<int64_t>(Scalar("adam_state/" + group + "/step"));
    for (const Parameter* p : params) {
      const auto r = p->value.rows(), c = p->value.cols();
      s.first_moment.push_back(Mat("adam_state/" + group + "/m/" + p->name, r, c));
      s.second_moment.push_back(Mat("adam_state/" + group + "/v/" + p->name, r, c));
    }
    return s;
  }

 private:
  Records records_;
  std::string path_;
};

}  // namespace

void SaveCheckpoint(const TrainState& s, const std::string& path) {
  Records rec;
  const TrainConfig& c = s.config;
  auto meta = [&](const char* key, double v) { rec[std::string("meta/") + key] = FromScalar(v); };
  meta("width", s.width);
  meta("height", s.height);
  meta("near", s.near);
  meta("far", s.far);
  meta("epoch", static_cast<double>(s.epoch));
  meta("phase", s.phase);
  meta("epochs", static_cast<double>(c.epochs));
  meta("pixels_per_image", c.pixels_per_image);
  meta("samples_per_ray", c.samples_per_ray);
  meta("lr_nerf", c.lr_nerf);
  meta("lr_pose", c.lr_pose);
  meta("lr_focal", c.lr_focal);
  meta("nerf_decay", c.nerf_decay);
  meta("nerf_decay_every", static_cast<double>(c.nerf_decay_every));
  meta("camera_decay", c.camera_decay);
  meta("camera_decay_every", static_cast<double>(c.camera_decay_every));
  // Seeds are 64-bit; split so both halves are exact in a double.
  meta("seed_hi", static_cast<double>(c.seed >> 32));
  meta("seed_lo", static_cast<double>(c.seed & 0xffffffffULL));
  meta("deterministic", c.deterministic ? 1 : 0);
  meta("threads", c.threads);
  meta("chunk_rays", c.chunk_rays);
  meta("jitter", c.jitter ? 1 : 0);
  meta("whole_batch", c.update_mode == UpdateMode::kWholeBatch ? 1 : 0);
  meta("field_depth", c.field.depth);
  meta("field_width", c.field.width);
  meta("field_skip_after", c.field.skip_after);
  meta("field_dir_width", c.field.dir_width);
  meta("pos_frequencies", c.field.encoding.pos_frequencies);
  meta("dir_frequencies", c.field.encoding.dir_frequencies);
  meta("include_input", c.field.encoding.include_input ? 1 : 0);
  meta("adam_beta1", c.adam.beta1);
  meta("adam_beta2", c.adam.beta2);
  meta("adam_epsilon", c.adam.epsilon);
  rec["meta/background"] = FromMatrix(c.background.transpose());

  for (const Parameter& p : s.field.parameters()) rec["theta/" + p.name] = FromMatrix(p.value);
  rec["phi"] = FromMatrix(s.phi.value);
  rec["t"] = FromMatrix(s.t.value);
  rec["focal"] = FromMatrix(s.focal.value);
  AddAdam(rec, "nerf", s.nerf_adam, FieldNames(s.field));
  AddAdam(rec, "pose", s.pose_adam, {"phi", "t"});
  AddAdam(rec, "focal", s.focal_adam, {"focal"});
  Matrix history(1, static_cast<Eigen::Index>(s.loss_history.size()));
  for (size_t i = 0; i < s.loss_history.size(); ++i) {
    history(0, static_cast<Eigen::Index>(i)) = s.loss_history[i];
  }
  rec["loss_history"] = FromMatrix(history);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof(kMagic));
    WriteU64(os, rec.size());
    for (const auto& [name, r] : rec) {
      WriteU64(os, name.size());
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      WriteU64(os, r.extents.size());
      for (uint64_t e : r.extents) WriteU64(os, e);
      os.write(reinterpret_cast<const char*>(r.payload.data()),
               static_cast<std::streamsize>(r.payload.size() * sizeof(double)));
    }
    if (!os) throw CheckpointError("failed writing checkpoint: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError("cannot move checkpoint into place: " + path);
  }
}

TrainState LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw CheckpointError("not a checkpoint (bad magic): " + path);
  }
  const uint64_t count = ReadU64(is, path);
  Records rec;
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t len = ReadU64(is, path);
    if (len > 4096) throw CheckpointError("corrupt record name in " + path);
    std::string name(len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(len))) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
    Record r;
    const uint64_t rank = ReadU64(is, path);
    if (rank > 8) throw CheckpointError("corrupt record rank in " + path);
    uint64_t size = 1;
    for (uint64_t k = 0; k < rank; ++k) {
      r.extents.push_back(ReadU64(is, path));
      size *= r.extents.back();
    }
    if (size > (uint64_t{1} << 32)) throw CheckpointError("corrupt record size in " + path);
    r.payload.resize(size);
    if (!is.read(reinterpret_cast<char*>(r.payload.data()),
                 static_cast<std::streamsize>(size * sizeof(double)))) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
    rec[name] = std::move(r);
  }
  const Reader rd(std::move(rec), path);

  TrainConfig c;
  c.epochs = static_cast<int64_t>(rd.Scalar("meta/epochs"));
  c.pixels_per_image = rd.Int("meta/pixels_per_image");
  c.samples_per_ray = rd.Int("meta/samples_per_ray");
  c.lr_nerf = rd.Scalar("meta/lr_nerf");
  c.lr_pose = rd.Scalar("meta/lr_pose");
  c.lr_focal = rd.Scalar("meta/lr_focal");
  c.nerf_decay = rd.Scalar("meta/nerf_decay");
  c.nerf_decay_every = static_cast<int64_t>(rd.Scalar("meta/nerf_decay_every"));
  c.camera_decay = rd.Scalar("meta/camera_decay");
  c.camera_decay_every = static_cast<int64_t>(rd.Scalar("meta/camera_decay_every"));
  c.seed = (static_cast<uint64_t>(rd.Scalar("meta/seed_hi")) << 32) |
           static_cast<uint64_t>(rd.Scalar("meta/seed_lo"));
  c.deterministic = rd.Scalar("meta/deterministic") != 0;
  c.threads = rd.Int("meta/threads");
  c.chunk_rays = rd.Int("meta/chunk_rays");
  c.jitter = rd.Scalar("meta/jitter") != 0;
  c.update_mode = rd.Scalar("meta/whole_batch") != 0 ? UpdateMode::kWholeBatch
                                                     : UpdateMode::kPerImage;
  c.field.depth = rd.Int("meta/field_depth");
  c.field.width = rd.Int("meta/field_width");
  c.field.skip_after = rd.Int("meta/field_skip_after");
  c.field.dir_width = rd.Int("meta/field_dir_width");
  c.field.encoding.pos_frequencies = rd.Int("meta/pos_frequencies");
  c.field.encoding.dir_frequencies = rd.Int("meta/dir_frequencies");
  c.field.encoding.include_input = rd.Scalar("meta/include_input") != 0;
  c.adam.beta1 = rd.Scalar("meta/adam_beta1");
  c.adam.beta2 = rd.Scalar("meta/adam_beta2");
  c.adam.epsilon = rd.Scalar("meta/adam_epsilon");
  c.background = rd.Mat("meta/background", 1, 3).row(0).transpose();
  try {
    c.Validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint ") + path + ": " + e.what());
  }

  TrainState s;
  s.config = c;
  s.width = rd.Int("meta/width");
  s.height = rd.Int("meta/height");
  s.near = rd.Scalar("meta/near");
  s.far = rd.Scalar("meta/far");
  s.epoch = static_cast<int64_t>(rd.Scalar("meta/epoch"));
  s.phase = rd.Int("meta/phase");
  s.field = RadianceField(c.field, 0);
  for (Parameter& p : s.field.parameters()) {
    p.value = rd.Mat("theta/" + p.name, p.value.rows(), p.value.cols());
  }
  s.phi.value = rd.Mat("phi");
  if (s.phi.value.cols() != 3 || s.phi.value.rows() < 1) {
    throw CheckpointError("checkpoint record 'phi' has a bad shape");
  }
  s.t.value = rd.Mat("t", s.phi.value.rows(), 3);
  s.focal.value = rd.Mat("focal", 1, 2);
  std::vector<const Parameter*> nerf;
  for (const Parameter& p : s.field.parameters()) nerf.push_back(&p);
  s.nerf_adam = rd.Adam("nerf", nerf);
  s.pose_adam = rd.Adam("pose", {&s.phi, &s.t});
  s.focal_adam = rd.Adam("focal", {&s.focal});
  const Matrix history = rd.Mat("loss_history");
  s.loss_history.assign(history.data(), history.data() + history.size());
  return s;
}

}  // namespace jointnerf
