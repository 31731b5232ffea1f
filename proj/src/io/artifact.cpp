#include "lapace/io/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "lapace/classifiers/mlp_classifier.hpp"
#include "lapace/classifiers/random_forest.hpp"
#include "lapace/error.hpp"
#include "lapace/io/config.hpp"

namespace lapace::io {

static_assert(std::endian::native == std::endian::little, "artifact I/O assumes little endian");

const char* to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::kClassifier:
      return "classifier";
    case ArtifactKind::kLgmvae:
      return "lgmvae";
  }
  return "unknown";
}

namespace {

template <typename T>
void append_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(std::string_view bytes) {
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

std::uint32_t checksum(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void write_mlp(ByteWriter& w, const diffmath::MLP& mlp) {
  w.u64(mlp.layers().size());
  for (const auto& layer : mlp.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.activation));
    w.tensor(layer.weight);
    w.tensor(layer.bias);
  }
}

diffmath::MLP read_mlp(ByteReader& r) {
  const std::uint64_t n = r.u64();
  if (n > 1024) throw ArtifactError("artifact: implausible layer count");
  std::vector<diffmath::DenseLayer> layers;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint32_t act = r.u32();
    if (act > static_cast<std::uint32_t>(diffmath::Activation::kSoftmax)) {
      throw ArtifactError("artifact: unknown activation code");
    }
    diffmath::DenseLayer layer;
    layer.activation = static_cast<diffmath::Activation>(act);
    layer.weight = r.tensor();
    layer.bias = r.tensor();
    layers.push_back(std::move(layer));
  }
  try {
    return diffmath::MLP(std::move(layers));
  } catch (const Error& e) {
    throw ArtifactError(std::string("artifact: inconsistent network: ") + e.what());
  }
}

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("artifact: malformed ") + what + ": " + e.what());
  }
}

}  // namespace

void ByteWriter::u8(std::uint8_t v) { append_raw(bytes_, v); }
void ByteWriter::u32(std::uint32_t v) { append_raw(bytes_, v); }
void ByteWriter::i32(std::int32_t v) { append_raw(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { append_raw(bytes_, v); }
void ByteWriter::f64(double v) { append_raw(bytes_, v); }

void ByteWriter::str(const std::string& s) {
  u64(s.size());
  bytes_.append(s);
}

void ByteWriter::tensor(const Tensor& t) {
  u64(t.rows());
  u64(t.cols());
  for (double v : t.data()) f64(v);
}

std::string_view ByteReader::take(std::size_t n) {
  if (n > bytes_.size() - pos_) throw ArtifactError("artifact: truncated payload");
  const auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return read_raw<std::uint8_t>(take(1)); }
std::uint32_t ByteReader::u32() { return read_raw<std::uint32_t>(take(4)); }
std::int32_t ByteReader::i32() { return read_raw<std::int32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return read_raw<std::uint64_t>(take(8)); }
double ByteReader::f64() { return read_raw<double>(take(8)); }

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  return std::string(take(n));
}

Tensor ByteReader::tensor() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) {
    throw ArtifactError("artifact: tensor larger than the payload");
  }
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = f64();
  return t;
}

void ByteReader::expect_done() const {
  if (!done()) throw ArtifactError("artifact: trailing bytes after payload");
}

std::string pack(ArtifactKind kind, const std::string& payload) {
  std::string out(kArtifactMagic);
  append_raw(out, kArtifactVersion);
  append_raw(out, static_cast<std::uint32_t>(kind));
  append_raw(out, static_cast<std::uint64_t>(payload.size()));
  out += payload;
  append_raw(out, checksum(out));
  return out;
}

std::string unpack(const std::string& container, ArtifactKind expected) {
  constexpr std::size_t header = 8 + 4 + 4 + 8;
  if (container.size() < header + 4 || container.compare(0, 8, kArtifactMagic) != 0) {
    throw ArtifactError("not an artifact file (bad magic)");
  }
  const std::string_view view(container);
  const auto stored = read_raw<std::uint32_t>(view.substr(container.size() - 4));
  if (stored != checksum(view.substr(0, container.size() - 4))) {
    throw ArtifactError("artifact checksum mismatch (file is corrupted)");
  }
  const auto version = read_raw<std::uint32_t>(view.substr(8));
  if (version != kArtifactVersion) {
    throw ArtifactError("unsupported artifact version " + std::to_string(version));
  }
  const auto kind = read_raw<std::uint32_t>(view.substr(12));
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw ArtifactError(std::string("artifact holds a ") +
                        to_string(static_cast<ArtifactKind>(kind)) + ", expected a " +
                        to_string(expected));
  }
  const auto size = read_raw<std::uint64_t>(view.substr(16));
  if (size != container.size() - header - 4) throw ArtifactError("artifact: payload size mismatch");
  return container.substr(header, size);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open artifact '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError("write to '" + path + "' failed");
}

// ---- classifier -------------------------------------------------------------

std::string serialize_classifier(const ClassifierArtifact& a) {
  ByteWriter w;
  w.str(a.schema.to_json().dump());
  w.str(to_json(a.spec).dump());
  if (const auto* mlp = dynamic_cast<const classifiers::MlpClassifier*>(a.classifier.get())) {
    w.u32(static_cast<std::uint32_t>(classifiers::ClassifierKind::kMlp));
    w.u64(mlp->num_classes());
    write_mlp(w, mlp->network());
  } else if (const auto* rf = dynamic_cast<const classifiers::RandomForest*>(a.classifier.get())) {
    w.u32(static_cast<std::uint32_t>(classifiers::ClassifierKind::kRandomForest));
    w.u64(rf->num_classes());
    w.u64(rf->input_width());
    w.u64(rf->trees().size());
    for (const auto& tree : rf->trees()) {
      w.u64(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        w.i32(node.feature);
        w.f64(node.threshold);
        w.i32(node.left);
        w.i32(node.right);
        w.u64(node.class_counts.size());
        for (double c : node.class_counts) w.f64(c);
      }
    }
  } else {
    throw ArtifactError("cannot serialize classifier of kind '" + a.classifier->kind() + "'");
  }
  return pack(ArtifactKind::kClassifier, w.bytes());
}

ClassifierArtifact deserialize_classifier(const std::string& container) {
  const std::string payload = unpack(container, ArtifactKind::kClassifier);
  ByteReader r(payload);
  ClassifierArtifact a;
  try {
    a.schema = data::TabularSchema::from_json(parse_json(r.str(), "schema"));
    a.spec = classifier_spec_from_json(parse_json(r.str(), "classifier config"));
  } catch (const ArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw ArtifactError(std::string("artifact: ") + e.what());
  }
  const std::uint32_t kind = r.u32();
  const std::uint64_t classes = r.u64();
  if (kind == static_cast<std::uint32_t>(classifiers::ClassifierKind::kMlp)) {
    a.classifier = std::make_shared<classifiers::MlpClassifier>(read_mlp(r), classes);
  } else if (kind == static_cast<std::uint32_t>(classifiers::ClassifierKind::kRandomForest)) {
    const std::uint64_t width = r.u64();
    const std::uint64_t n_trees = r.u64();
    std::vector<classifiers::DecisionTree> trees;
    for (std::uint64_t t = 0; t < n_trees; ++t) {
      classifiers::DecisionTree tree;
      const std::uint64_t n_nodes = r.u64();
      for (std::uint64_t i = 0; i < n_nodes; ++i) {
        classifiers::TreeNode node;
        node.feature = r.i32();
        node.threshold = r.f64();
        node.left = r.i32();
        node.right = r.i32();
        const std::uint64_t counts = r.u64();
        if (counts != classes) throw ArtifactError("artifact: leaf class count mismatch");
        for (std::uint64_t c = 0; c < counts; ++c) node.class_counts.push_back(r.f64());
        const auto limit = static_cast<std::int64_t>(n_nodes);
        if (node.feature >= static_cast<std::int64_t>(width) ||
            (node.feature >= 0 && (node.left <= static_cast<std::int64_t>(i) || node.left >= limit ||
                                   node.right <= static_cast<std::int64_t>(i) || node.right >= limit))) {
          throw ArtifactError("artifact: malformed tree node");
        }
        tree.nodes.push_back(std::move(node));
      }
      if (tree.nodes.empty()) throw ArtifactError("artifact: empty tree");
      trees.push_back(std::move(tree));
    }
    a.classifier = std::make_shared<classifiers::RandomForest>(std::move(trees), width, classes);
  } else {
    throw ArtifactError("artifact: unknown classifier kind code " + std::to_string(kind));
  }
  r.expect_done();
  if (a.classifier->input_width() != a.schema.encoded_width()) {
    throw ArtifactError("artifact: classifier width does not match its schema");
  }
  return a;
}

void save_classifier(const std::string& path, const ClassifierArtifact& artifact) {
  write_file(path, serialize_classifier(artifact));
}

ClassifierArtifact load_classifier(const std::string& path) {
  return deserialize_classifier(read_file(path));
}

// ---- lgmvae -------------------------------------------------------------------

std::string serialize_lgmvae(const lgmvae::LgmvaeModel& m) {
  ByteWriter w;
  w.str(m.schema.to_json().dump());
  w.str(to_json(m.config).dump());
  w.u64(m.partition.num_clusters());
  w.u64(m.partition.num_labels());
  for (const auto& clusters : m.partition.assignment()) {
    w.u64(clusters.size());
    for (std::size_t c : clusters) w.u64(c);
  }
  for (const auto* net : {&m.cluster_head, &m.latent_trunk, &m.latent_mean_head,
                          &m.latent_logvar_head, &m.decoder}) {
    write_mlp(w, *net);
  }
  w.tensor(m.prior.mean);
  w.tensor(m.prior.logvar);
  w.u8(m.recourse_ready ? 1 : 0);
  return pack(ArtifactKind::kLgmvae, w.bytes());
}

lgmvae::LgmvaeModel deserialize_lgmvae(const std::string& container) {
  const std::string payload = unpack(container, ArtifactKind::kLgmvae);
  ByteReader r(payload);
  lgmvae::LgmvaeModel m;
  try {
    m.schema = data::TabularSchema::from_json(parse_json(r.str(), "schema"));
    m.config = lgmvae_config_from_json(parse_json(r.str(), "model config"));
    const std::uint64_t k = r.u64();
    const std::uint64_t labels = r.u64();
    if (labels > k || k > (1u << 20)) throw ArtifactError("artifact: implausible partition");
    std::vector<std::vector<std::size_t>> by_label(labels);
    for (auto& clusters : by_label) {
      const std::uint64_t n = r.u64();
      if (n > k) throw ArtifactError("artifact: implausible partition");
      for (std::uint64_t i = 0; i < n; ++i) clusters.push_back(r.u64());
    }
    m.partition = lgmvae::ClusterPartition(std::move(by_label), k);
  } catch (const ArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw ArtifactError(std::string("artifact: ") + e.what());
  }
  m.cluster_head = read_mlp(r);
  m.latent_trunk = read_mlp(r);
  m.latent_mean_head = read_mlp(r);
  m.latent_logvar_head = read_mlp(r);
  m.decoder = read_mlp(r);
  m.prior.mean = r.tensor();
  m.prior.logvar = r.tensor();
  const std::uint8_t ready = r.u8();
  if (ready > 1) throw ArtifactError("artifact: bad recourse-ready flag");
  m.recourse_ready = ready == 1;
  r.expect_done();

  const std::size_t d = m.schema.encoded_width(), L = m.partition.num_labels(),
                    K = m.partition.num_clusters(), h = m.prior.mean.cols();
  const bool consistent =
      L == m.schema.num_classes() && m.cluster_head.input_width() == d + L &&
      m.cluster_head.output_width() == K && m.latent_trunk.input_width() == d + L + K &&
      m.latent_mean_head.input_width() == m.latent_trunk.output_width() &&
      m.latent_logvar_head.input_width() == m.latent_trunk.output_width() &&
      m.latent_mean_head.output_width() == h && m.latent_logvar_head.output_width() == h &&
      m.decoder.input_width() == h && m.decoder.output_width() == d && m.prior.mean.rows() == K &&
      m.prior.logvar.rows() == K && m.prior.logvar.cols() == h;
  if (!consistent) throw ArtifactError("artifact: model tensors do not fit together");
  return m;
}

void save_lgmvae(const std::string& path, const lgmvae::LgmvaeModel& model) {
  write_file(path, serialize_lgmvae(model));
}

lgmvae::LgmvaeModel load_lgmvae(const std::string& path) {
  return deserialize_lgmvae(read_file(path));
}

}  // namespace lapace::io
