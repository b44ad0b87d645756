#include "model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <future>
#include <string>
#include <thread>

#include <json.hpp>

#include "error.hpp"

namespace supwma {

namespace {

using nn::DenseLayer;
using nn::Matrix;

// Rows of the widest encoder activation evaluated at once.
constexpr Eigen::Index kEncoderChunkRows = 4096;
constexpr std::size_t kPredictBatch = 512;

std::vector<DenseLayer> make_stack(std::size_t in, const std::vector<std::size_t>& dims, SeededRng& rng) {
  std::vector<DenseLayer> layers;
  for (std::size_t out : dims) {
    DenseLayer layer(in, out);
    layer.weights = nn::glorot_uniform(in, out, rng);
    layers.push_back(std::move(layer));
    in = out;
  }
  return layers;
}

std::vector<std::size_t> classifier_dims(const ArchDescriptor& arch) {
  auto dims = arch.classifier_hidden;
  dims.push_back(arch.classes);
  return dims;
}

Matrix mlp_forward(const std::vector<DenseLayer>& layers, const Matrix& input, MlpCache* cache) {
  if (cache) cache->activations.clear();
  Matrix x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix y = nn::dense_forward(layers[l], x);
    if (l + 1 < layers.size()) nn::relu_inplace(y);
    if (cache) cache->activations.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

Matrix mlp_backward(const std::vector<DenseLayer>& layers, const MlpCache& cache, const Matrix& grad_out,
                    std::vector<nn::DenseGrads>& grads, bool want_input_grad) {
  grads.assign(layers.size(), {});
  Matrix grad = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      // ReLU output is positive exactly where its input was.
      grad = nn::relu_backward(cache.activations[l + 1], grad);
    }
    const bool need_input = l > 0 || want_input_grad;
    grads[l] = nn::dense_backward(layers[l], cache.activations[l], grad, need_input);
    if (need_input) grad = std::move(grads[l].input);
  }
  return want_input_grad ? grad : Matrix();
}

std::uint64_t stack_macs(std::uint64_t in, const std::vector<std::size_t>& dims) {
  std::uint64_t total = 0;
  for (std::size_t out : dims) {
    total += in * out;
    in = out;
  }
  return total;
}

// Classic point-cloud T-net: shared MLP 64-128-1024, max-pool, FC 512-256,
// then a (dim x dim) transform applied to every point.
std::uint64_t tnet_macs(std::uint64_t points, std::uint64_t dim) {
  const std::uint64_t shared = points * stack_macs(dim, {64, 128, 1024});
  const std::uint64_t fc = stack_macs(1024, {512, 256, static_cast<std::size_t>(dim * dim)});
  const std::uint64_t apply = points * dim * dim;
  return shared + fc + apply;
}

nlohmann::json arch_to_json(const ArchDescriptor& a) {
  return {{"points", a.points},
          {"encoder_dims", a.encoder_dims},
          {"classifier_hidden", a.classifier_hidden},
          {"projector_dims", a.projector_dims},
          {"classes", a.classes}};
}

ArchDescriptor arch_from_json(const nlohmann::json& j) {
  ArchDescriptor a;
  a.points = j.at("points").get<std::size_t>();
  a.encoder_dims = j.at("encoder_dims").get<std::vector<std::size_t>>();
  a.classifier_hidden = j.at("classifier_hidden").get<std::vector<std::size_t>>();
  a.projector_dims = j.at("projector_dims").get<std::vector<std::size_t>>();
  a.classes = j.at("classes").get<std::size_t>();
  return a;
}

constexpr char kCheckpointMagic[8] = {'S', 'W', 'M', 'A', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value;
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorCode::kFormat, "truncated checkpoint");
  return value;
}

struct LayerGroup {
  const char* name;
  std::vector<DenseLayer> ModelBundle::*member;
};

constexpr LayerGroup kGroups[] = {
    {"encoder", &ModelBundle::encoder},
    {"projector", &ModelBundle::projector},
    {"classifier", &ModelBundle::classifier},
};

}  // namespace

void ArchDescriptor::validate() const {
  auto positive = [](const std::vector<std::size_t>& dims) {
    return !dims.empty() && std::all_of(dims.begin(), dims.end(), [](std::size_t d) { return d >= 1; });
  };
  require(points >= 1, ErrorCode::kInvalidArgument, "arch: points must be >= 1");
  require(positive(encoder_dims), ErrorCode::kInvalidArgument, "arch: encoder dims must be >= 1");
  require(std::all_of(classifier_hidden.begin(), classifier_hidden.end(), [](std::size_t d) { return d >= 1; }),
          ErrorCode::kInvalidArgument, "arch: classifier dims must be >= 1");
  require(positive(projector_dims), ErrorCode::kInvalidArgument, "arch: projector dims must be >= 1");
  require(classes >= 2, ErrorCode::kInvalidArgument, "arch: class count must be >= 2");
}

ModelBundle make_model(const ArchDescriptor& arch, std::uint64_t seed) {
  arch.validate();
  ModelBundle model;
  model.arch = arch;
  model.seed = seed;
  SeededRng enc_rng(SeededRng::derive(seed, 0));
  SeededRng proj_rng(SeededRng::derive(seed, 1));
  SeededRng cls_rng(SeededRng::derive(seed, 2));
  model.encoder = make_stack(3, arch.encoder_dims, enc_rng);
  model.projector = make_stack(arch.global_dim(), arch.projector_dims, proj_rng);
  model.classifier = make_stack(arch.global_dim(), classifier_dims(arch), cls_rng);
  return model;
}

FeatureBatch make_feature_batch(const std::vector<Streamline>& streamlines, std::size_t points) {
  FeatureBatch batch;
  batch.count = streamlines.size();
  batch.points = points;
  batch.coords.resize(static_cast<Eigen::Index>(streamlines.size() * points), 3);
  for (std::size_t m = 0; m < streamlines.size(); ++m) {
    Streamline r;
    try {
      r = resample(streamlines[m], points);
    } catch (const Error& e) {
      fail(e.code(), "streamline " + std::to_string(m) + ": " + e.what());
    }
    for (std::size_t i = 0; i < points; ++i) {
      const auto row = static_cast<Eigen::Index>(m * points + i);
      batch.coords(row, 0) = r.points[i].x;
      batch.coords(row, 1) = r.points[i].y;
      batch.coords(row, 2) = r.points[i].z;
    }
  }
  return batch;
}

FeatureBatch make_feature_batch(const StreamlineSet& set, std::size_t points) {
  return make_feature_batch(set.streamlines, points);
}

FeatureBatch gather(const FeatureBatch& batch, const std::vector<std::size_t>& indices) {
  FeatureBatch out;
  out.count = indices.size();
  out.points = batch.points;
  out.coords.resize(static_cast<Eigen::Index>(indices.size() * batch.points), 3);
  const auto n = static_cast<Eigen::Index>(batch.points);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < batch.count, ErrorCode::kInvalidArgument, "gather index out of range");
    out.coords.middleRows(static_cast<Eigen::Index>(i) * n, n) =
        batch.coords.middleRows(static_cast<Eigen::Index>(indices[i]) * n, n);
  }
  return out;
}

Matrix encode(const ModelBundle& model, const FeatureBatch& batch, EncoderCache* cache) {
  require(batch.points == model.arch.points, ErrorCode::kInvalidArgument,
          "encode: batch has " + std::to_string(batch.points) + " points per streamline, model expects " +
              std::to_string(model.arch.points));
  require(batch.coords.cols() == 3 &&
              static_cast<std::size_t>(batch.coords.rows()) == batch.count * batch.points,
          ErrorCode::kInvalidArgument, "encode: malformed feature batch");

  const auto& layers = model.encoder;
  const auto n = static_cast<Eigen::Index>(batch.points);
  const auto count = static_cast<Eigen::Index>(batch.count);
  const auto out_dim = static_cast<Eigen::Index>(layers.back().out_dim());

  std::vector<Matrix> acts;
  acts.push_back(batch.coords);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Matrix y = nn::dense_forward(layers[l], acts.back());
    nn::relu_inplace(y);
    acts.push_back(std::move(y));
  }

  const Matrix& last_in = acts.back();
  Matrix pooled_pre(count, out_dim);
  nn::IndexMatrix argmax(count, out_dim);
  const Eigen::Index chunk = std::max<Eigen::Index>(1, kEncoderChunkRows / n);
  for (Eigen::Index start = 0; start < count; start += chunk) {
    const Eigen::Index len = std::min(chunk, count - start);
    const Matrix h = nn::dense_forward(layers.back(), last_in.middleRows(start * n, len * n));
    nn::MaxPool pooled = nn::maxpool_points(h, batch.points);
    pooled_pre.middleRows(start, len) = pooled.pooled;
    argmax.middleRows(start, len) = pooled.argmax;
  }
  Matrix global = nn::relu_forward(pooled_pre);

  if (cache) {
    cache->activations = std::move(acts);
    cache->pooled_pre = std::move(pooled_pre);
    cache->argmax = std::move(argmax);
  }
  return global;
}

std::vector<nn::DenseGrads> encode_backward(const ModelBundle& model, const EncoderCache& cache,
                                            const Matrix& grad_global) {
  const auto& layers = model.encoder;
  const std::size_t last = layers.size() - 1;
  const Matrix& last_in = cache.activations[last];
  const Eigen::Index count = cache.pooled_pre.rows();
  const Eigen::Index out_dim = cache.pooled_pre.cols();
  const Eigen::Index in_dim = last_in.cols();
  const Eigen::Index n = count > 0 ? last_in.rows() / count : 0;
  require(grad_global.rows() == count && grad_global.cols() == out_dim, ErrorCode::kInvalidArgument,
          "encode backward: gradient shape mismatch");

  std::vector<nn::DenseGrads> grads(layers.size());

  // Only the argmax row of each (streamline, feature) pair receives gradient,
  // so the last layer's backward is a sparse scatter rather than a GEMM.
  const Matrix grad_pre = nn::relu_backward(cache.pooled_pre, grad_global);
  const Matrix weights_t = layers[last].weights.transpose();
  Matrix grad_w_t = Matrix::Zero(out_dim, in_dim);
  Matrix grad_in = Matrix::Zero(last_in.rows(), in_dim);
  for (Eigen::Index m = 0; m < count; ++m) {
    for (Eigen::Index j = 0; j < out_dim; ++j) {
      const double g = grad_pre(m, j);
      if (g == 0.0) continue;
      const Eigen::Index row = m * n + cache.argmax(m, j);
      grad_w_t.row(j).noalias() += g * last_in.row(row);
      grad_in.row(row).noalias() += g * weights_t.row(j);
    }
  }
  grads[last].weights = grad_w_t.transpose();
  grads[last].bias = grad_pre.colwise().sum();

  Matrix grad = std::move(grad_in);
  for (std::size_t l = last; l-- > 0;) {
    grad = nn::relu_backward(cache.activations[l + 1], grad);
    grads[l] = nn::dense_backward(layers[l], cache.activations[l], grad, l > 0);
    if (l > 0) grad = std::move(grads[l].input);
  }
  return grads;
}

Matrix project(const ModelBundle& model, const Matrix& global, ProjectorCache* cache) {
  require(static_cast<std::size_t>(global.cols()) == model.arch.global_dim(), ErrorCode::kInvalidArgument,
          "project: global feature width mismatch");
  Matrix pre = mlp_forward(model.projector, global, cache ? &cache->mlp : nullptr);
  nn::L2Normalized normalized = nn::l2_normalize_forward(pre);
  Matrix z = normalized.output;
  if (cache) cache->normalized = std::move(normalized);
  return z;
}

Matrix project_backward(const ModelBundle& model, const ProjectorCache& cache, const Matrix& grad_z,
                        std::vector<nn::DenseGrads>& grads) {
  const Matrix grad_pre = nn::l2_normalize_backward(cache.normalized, grad_z);
  return mlp_backward(model.projector, cache.mlp, grad_pre, grads, true);
}

Matrix classify(const ModelBundle& model, const Matrix& global, MlpCache* cache) {
  require(static_cast<std::size_t>(global.cols()) == model.arch.global_dim(), ErrorCode::kInvalidArgument,
          "classify: global feature width mismatch");
  return mlp_forward(model.classifier, global, cache);
}

Matrix classify_backward(const ModelBundle& model, const MlpCache& cache, const Matrix& grad_logits,
                         std::vector<nn::DenseGrads>& grads, bool want_input_grad) {
  return mlp_backward(model.classifier, cache, grad_logits, grads, want_input_grad);
}

std::vector<std::int32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::vector<std::int32_t> predict(const ModelBundle& model, const StreamlineSet& set, unsigned threads) {
  const std::size_t total = set.streamlines.size();
  std::vector<std::int32_t> labels(total);
  if (total == 0) return labels;

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t start = begin; start < end; start += kPredictBatch) {
      const std::size_t stop = std::min(end, start + kPredictBatch);
      std::vector<Streamline> chunk(set.streamlines.begin() + static_cast<std::ptrdiff_t>(start),
                                    set.streamlines.begin() + static_cast<std::ptrdiff_t>(stop));
      FeatureBatch batch;
      try {
        batch = make_feature_batch(chunk, model.arch.points);
      } catch (const Error& e) {
        // Re-anchor the chunk-relative index to the input set.
        std::string what = e.what();
        const std::string prefix = "streamline ";
        if (what.rfind(prefix, 0) == 0) {
          const std::size_t colon = what.find(':');
          const std::size_t local = std::stoul(what.substr(prefix.size(), colon - prefix.size()));
          what = prefix + std::to_string(start + local) + what.substr(colon);
        }
        fail(e.code(), what);
      }
      const auto predicted = argmax_rows(classify(model, encode(model, batch)));
      std::copy(predicted.begin(), predicted.end(), labels.begin() + static_cast<std::ptrdiff_t>(start));
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>((total + kPredictBatch - 1) / kPredictBatch)));
  if (threads == 1) {
    run_range(0, total);
    return labels;
  }
  std::vector<std::future<void>> workers;
  const std::size_t per = (total + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(total, t * per);
    const std::size_t end = std::min(total, begin + per);
    workers.push_back(std::async(std::launch::async, run_range, begin, end));
  }
  for (auto& w : workers) w.get();
  return labels;
}

std::uint64_t count_flops(const ArchDescriptor& arch) {
  arch.validate();
  const std::uint64_t n = arch.points;
  std::uint64_t total = n * stack_macs(3, arch.encoder_dims) +
                        stack_macs(arch.global_dim(), classifier_dims(arch));
  if (arch.with_tnets) {
    // Input transform on raw xyz, feature transform after the first shared layer.
    total += tnet_macs(n, 3) + tnet_macs(n, arch.encoder_dims.front());
  }
  return total;
}

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  nlohmann::json layers = nlohmann::json::array();
  std::uint64_t params = 0;
  for (const auto& group : kGroups) {
    const auto& stack = model.*group.member;
    for (std::size_t i = 0; i < stack.size(); ++i) {
      layers.push_back({{"group", group.name}, {"index", i}, {"in", stack[i].in_dim()}, {"out", stack[i].out_dim()}});
      params += stack[i].parameter_count();
    }
  }
  const nlohmann::json header = {{"format", "supwma-checkpoint"},
                                 {"version", kCheckpointVersion},
                                 {"arch", arch_to_json(model.arch)},
                                 {"seed", model.seed},
                                 {"stage", model.stage},
                                 {"layers", layers},
                                 {"parameter_count", params},
                                 {"dtype", "float64-le"}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& group : kGroups) {
    for (const auto& layer : model.*group.member) {
      out.write(reinterpret_cast<const char*>(layer.weights.data()),
                static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic)) fail(ErrorCode::kFormat, "truncated checkpoint");
  require(std::memcmp(magic, kCheckpointMagic, sizeof magic) == 0, ErrorCode::kFormat,
          "not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(in);
  require(version == kCheckpointVersion, ErrorCode::kFormat,
          "checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
              std::to_string(kCheckpointVersion));
  const auto header_len = get<std::uint64_t>(in);
  require(header_len < (1u << 26), ErrorCode::kFormat, "checkpoint header too large");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) fail(ErrorCode::kFormat, "truncated checkpoint");

  nlohmann::json header;
  ModelBundle model;
  try {
    header = nlohmann::json::parse(text);
    model.arch = arch_from_json(header.at("arch"));
    model.seed = header.at("seed").get<std::uint64_t>();
    model.stage = header.at("stage").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed checkpoint header: ") + e.what());
  }
  model.arch.validate();

  // Shapes are re-derived from the architecture and must match the header.
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> expected = {
      {3, model.arch.encoder_dims},
      {model.arch.global_dim(), model.arch.projector_dims},
      {model.arch.global_dim(), classifier_dims(model.arch)}};
  const auto& layers = header.at("layers");
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    auto& stack = model.*kGroups[g].member;
    std::size_t in_dim = expected[g].first;
    for (std::size_t out_dim : expected[g].second) {
      require(cursor < layers.size(), ErrorCode::kFormat, "checkpoint layer table is short");
      const auto& entry = layers[cursor++];
      require(entry.value("group", "") == kGroups[g].name && entry.value("in", 0u) == in_dim &&
                  entry.value("out", 0u) == out_dim,
              ErrorCode::kFormat, "checkpoint shape inconsistency in " + std::string(kGroups[g].name));
      nn::DenseLayer layer(in_dim, out_dim);
      if (!in.read(reinterpret_cast<char*>(layer.weights.data()),
                   static_cast<std::streamsize>(layer.weights.size() * sizeof(double))) ||
          !in.read(reinterpret_cast<char*>(layer.bias.data()),
                   static_cast<std::streamsize>(layer.bias.size() * sizeof(double)))) {
        fail(ErrorCode::kFormat, "truncated checkpoint");
      }
      stack.push_back(std::move(layer));
      in_dim = out_dim;
    }
  }
  require(cursor == layers.size(), ErrorCode::kFormat, "checkpoint layer table has extra entries");
  require(in.peek() == std::char_traits<char>::eof(), ErrorCode::kFormat, "trailing bytes in checkpoint");
  return model;
}

}  // namespace supwma
