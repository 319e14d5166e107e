#include "pointda/ndcore.hpp"

#include <algorithm>
#include <cmath>

#include "pointda/binio.hpp"

namespace pointda::nd {

namespace {

constexpr std::uint32_t kContainerMagic = 0x314b4450;  // "PDK1"
constexpr std::uint32_t kContainerVersion = 1;

// Block skip: the block input is added zero-padded when it is no wider than
// the block output, and omitted entirely when it is wider (a projection there
// would contaminate narrow outputs, e.g. a zeroed final layer).
void add_skip(const Mat& block_input, Mat& block_output) {
  if (block_input.cols() > block_output.cols()) return;
  block_output.leftCols(block_input.cols()) += block_input;
}

void add_skip_adjoint(const Mat& upstream, Mat& g_block_input) {
  if (g_block_input.cols() > upstream.cols()) return;
  g_block_input += upstream.leftCols(g_block_input.cols());
}

}  // namespace

std::int64_t MlpParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw SchemaError("mlp has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lay = layers[l];
    if (lay.b.size() != lay.w.rows())
      throw SchemaError("mlp layer " + std::to_string(l) + ": bias size " +
                        std::to_string(lay.b.size()) + " != rows " +
                        std::to_string(lay.w.rows()));
    if (l > 0 && layers[l - 1].w.rows() != lay.w.cols())
      throw SchemaError("mlp layer " + std::to_string(l) +
                        ": input dim does not chain");
    if (!lay.w.allFinite() || !lay.b.allFinite())
      throw SchemaError("mlp layer " + std::to_string(l) +
                        ": non-finite parameter");
  }
}

MlpParams MlpParams::zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) throw SchemaError("mlp needs at least one layer");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    p.layers.push_back({Mat::Zero(dims[l + 1], dims[l]), Vec::Zero(dims[l + 1])});
  return p;
}

MlpParams MlpParams::xavier(const std::vector<int>& dims, Rng& rng,
                            bool final_layer_zero) {
  MlpParams p = zeros(dims);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& lay = p.layers[l];
    if (final_layer_zero && l + 1 == p.layers.size()) continue;
    const double s =
        std::sqrt(6.0 / static_cast<double>(lay.w.rows() + lay.w.cols()));
    for (Eigen::Index i = 0; i < lay.w.rows(); ++i)
      for (Eigen::Index j = 0; j < lay.w.cols(); ++j)
        lay.w(i, j) = rng.uniform(-s, s);
  }
  return p;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  for (const auto& l : p.layers)
    g.layers.push_back({Mat::Zero(l.w.rows(), l.w.cols()), Vec::Zero(l.b.size())});
  return g;
}

void MlpGrads::accumulate(const MlpGrads& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].w += other.layers[l].w;
    layers[l].b += other.layers[l].b;
  }
}

void MlpGrads::scale(double s) {
  for (auto& l : layers) {
    l.w *= s;
    l.b *= s;
  }
}

Mat mlp_forward(const MlpParams& params, const Mat& inputs, MlpTape* tape) {
  const int depth = params.depth();
  if (inputs.cols() != params.in_dim())
    throw SchemaError("mlp_forward: input dim " + std::to_string(inputs.cols()) +
                      " != expected " + std::to_string(params.in_dim()));
  if (inputs.rows() < 1) throw SchemaError("mlp_forward: empty input batch");

  if (tape) {
    tape->h.assign(depth + 1, Mat());
    tape->z.assign(depth, Mat());
  }
  std::vector<Mat> local_h;
  if (!tape) local_h.resize(depth + 1);
  auto H = [&](int l) -> Mat& { return tape ? tape->h[l] : local_h[l]; };

  H(0) = inputs;
  for (int l = 0; l < depth; ++l) {
    const auto& lay = params.layers[l];
    Mat z = H(l) * lay.w.transpose();
    z.rowwise() += lay.b.transpose();
    if (tape) tape->z[l] = z;
    Mat a;
    if (l == depth - 1) {
      a = std::move(z);
    } else {
      a = z.unaryExpr([](double x) { return silu(x); });
    }
    if (l % 2 == 1) add_skip(H(l - 1), a);  // end of a two-layer block
    H(l + 1) = std::move(a);
  }
  return H(depth);
}

Mat mlp_backward(const MlpParams& params, const MlpTape& tape,
                 const Mat& upstream, MlpGrads& grads) {
  const int depth = params.depth();
  if (upstream.rows() != tape.h[depth].rows() ||
      upstream.cols() != tape.h[depth].cols())
    throw SchemaError("mlp_backward: upstream shape mismatch");

  std::vector<Mat> gh(depth + 1);
  for (int l = 0; l <= depth; ++l)
    gh[l] = Mat::Zero(tape.h[l].rows(), tape.h[l].cols());
  gh[depth] = upstream;

  for (int l = depth - 1; l >= 0; --l) {
    const auto& lay = params.layers[l];
    const Mat& g_after = gh[l + 1];
    if (l % 2 == 1) add_skip_adjoint(g_after, gh[l - 1]);
    Mat g_z;
    if (l == depth - 1) {
      g_z = g_after;
    } else {
      g_z = g_after.cwiseProduct(
          tape.z[l].unaryExpr([](double x) { return silu_grad(x); }));
    }
    grads.layers[l].w += g_z.transpose() * tape.h[l];
    grads.layers[l].b += g_z.colwise().sum().transpose();
    gh[l] += g_z * lay.w;
  }
  return gh[0];
}

std::pair<MlpGrads, Mat> mlp_gradients(const MlpParams& params,
                                       const Mat& inputs,
                                       const Mat& upstream) {
  MlpTape tape;
  mlp_forward(params, inputs, &tape);
  MlpGrads grads = MlpGrads::zeros_like(params);
  Mat gin = mlp_backward(params, tape, upstream, grads);
  return {std::move(grads), std::move(gin)};
}

AdamState AdamState::zeros_like(const MlpParams& p) {
  AdamState s;
  for (const auto& l : p.layers) {
    s.m.push_back({Mat::Zero(l.w.rows(), l.w.cols()), Vec::Zero(l.b.size())});
    s.v.push_back({Mat::Zero(l.w.rows(), l.w.cols()), Vec::Zero(l.b.size())});
  }
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               double lr) {
  if (lr <= 0.0) throw DomainError("adam_step: lr must be positive");
  if (state.m.size() != params.layers.size() ||
      grads.layers.size() != params.layers.size())
    throw SchemaError("adam_step: state/grads do not mirror params");
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    if (!grads.layers[l].w.allFinite() || !grads.layers[l].b.allFinite())
      throw NumericError("adam_step: non-finite gradient in layer " +
                         std::to_string(l) + " (update rejected)");
  }

  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& pl = params.layers[l];
    auto& gl = grads.layers[l];
    auto& ml = state.m[l];
    auto& vl = state.v[l];
    ml.w = b1 * ml.w + (1.0 - b1) * gl.w;
    vl.w = b2 * vl.w + (1.0 - b2) * gl.w.cwiseProduct(gl.w);
    pl.w.array() -= lr * (ml.w.array() / c1) /
                    ((vl.w.array() / c2).sqrt() + state.eps);
    ml.b = b1 * ml.b + (1.0 - b1) * gl.b;
    vl.b = b2 * vl.b + (1.0 - b2) * gl.b.cwiseProduct(gl.b);
    pl.b.array() -= lr * (ml.b.array() / c1) /
                    ((vl.b.array() / c2).sqrt() + state.eps);
  }
}

void LrSchedule::validate() const {
  if (base_lr <= 0.0) throw ConfigError("lr schedule: base_lr must be > 0");
  if (gamma <= 0.0 || gamma > 1.0)
    throw ConfigError("lr schedule: gamma must be in (0, 1]");
  for (std::size_t i = 1; i < milestones.size(); ++i)
    if (milestones[i] <= milestones[i - 1])
      throw ConfigError("lr schedule: milestones must be strictly increasing");
}

double lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw DomainError("lr_at: epoch must be >= 0");
  int hits = 0;
  for (int m : schedule.milestones)
    if (m <= epoch) ++hits;
  return schedule.base_lr * std::pow(schedule.gamma, hits);
}

double masked_mse(const Mat& pred, const Mat& target,
                  const std::vector<std::uint8_t>& ocean_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw SchemaError("masked_mse: pred/target shape mismatch");
  if (static_cast<Eigen::Index>(ocean_mask.size()) != pred.rows())
    throw SchemaError("masked_mse: mask length mismatch");
  double sum = 0.0;
  std::int64_t rows = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (!ocean_mask[i]) continue;
    ++rows;
    sum += (pred.row(i) - target.row(i)).squaredNorm();
  }
  if (rows == 0) throw DomainError("masked_mse: no ocean cells in mask");
  return sum / (static_cast<double>(rows) * static_cast<double>(pred.cols()));
}

double masked_mse_with_grad(const Mat& pred, const Mat& target,
                            const std::vector<std::uint8_t>& ocean_mask,
                            Mat& grad_pred) {
  const double loss = masked_mse(pred, target, ocean_mask);
  std::int64_t rows = 0;
  for (auto m : ocean_mask) rows += m ? 1 : 0;
  const double scale =
      2.0 / (static_cast<double>(rows) * static_cast<double>(pred.cols()));
  grad_pred = Mat::Zero(pred.rows(), pred.cols());
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    if (ocean_mask[i]) grad_pred.row(i) = scale * (pred.row(i) - target.row(i));
  return loss;
}

// --- container ---------------------------------------------------------

void Container::put_tensor(const std::string& name, const Mat& m) {
  std::vector<std::int64_t> dims{m.rows(), m.cols()};
  std::vector<float> data(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      data[k++] = static_cast<float>(m(i, j));
  tensors[name] = {std::move(dims), std::move(data)};
}

void Container::put_vector(const std::string& name, const Vec& v) {
  std::vector<std::int64_t> dims{v.size()};
  std::vector<float> data(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    data[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  tensors[name] = {std::move(dims), std::move(data)};
}

void Container::put_values(const std::string& name,
                           const std::vector<double>& v) {
  std::vector<std::int64_t> dims{static_cast<std::int64_t>(v.size())};
  std::vector<float> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) data[i] = static_cast<float>(v[i]);
  tensors[name] = {std::move(dims), std::move(data)};
}

Mat Container::get_tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw IoError("checkpoint missing tensor: " + name);
  const auto& [dims, data] = it->second;
  if (dims.size() != 2) throw IoError("tensor is not 2-d: " + name);
  Mat m(dims[0], dims[1]);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data[k++];
  return m;
}

Vec Container::get_vector(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw IoError("checkpoint missing tensor: " + name);
  const auto& [dims, data] = it->second;
  if (dims.size() != 1) throw IoError("tensor is not 1-d: " + name);
  Vec v(dims[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = data[static_cast<std::size_t>(i)];
  return v;
}

std::vector<double> Container::get_values(const std::string& name) const {
  Vec v = get_vector(name);
  return std::vector<double>(v.data(), v.data() + v.size());
}

void write_container(const std::string& path, const Container& c) {
  BinWriter w(path);
  w.u32(kContainerMagic);
  w.u32(kContainerVersion);
  w.u64(c.config_hash);
  w.u32(static_cast<std::uint32_t>(c.attrs.size()));
  for (const auto& [k, v] : c.attrs) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    const auto& [dims, data] = t;
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.i64(d);
    w.f32_array(data.data(), data.size());
  }
  w.finish();
}

Container read_container(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kContainerMagic)
    throw IoError("not a checkpoint container: " + path);
  const auto version = r.u32();
  if (version != kContainerVersion)
    throw IoError("unsupported container version " + std::to_string(version) +
                  ": " + path);
  Container c;
  c.config_hash = r.u64();
  const auto n_attrs = r.u32();
  for (std::uint32_t i = 0; i < n_attrs; ++i) {
    std::string k = r.str();
    c.attrs[k] = r.str();
  }
  const auto n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const auto ndim = r.u32();
    std::vector<std::int64_t> dims(ndim);
    std::int64_t count = 1;
    for (auto& d : dims) {
      d = r.i64();
      count *= d;
    }
    std::vector<float> data(static_cast<std::size_t>(count));
    r.f32_array(data.data(), data.size());
    c.tensors[name] = {std::move(dims), std::move(data)};
  }
  r.verify_checksum();
  return c;
}

}  // namespace pointda::nd
