#include "pointda/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "pointda/parallel.hpp"

namespace pointda::model {

using geo::GridField;
using geo::GridSpec;

std::vector<std::string> encoder_channels(const obs::SourceSchema& schema) {
  std::vector<std::string> out;
  for (const auto& ch : schema.channels) {
    if (ch == "wdir") {
      out.push_back("wdir_sin");
      out.push_back("wdir_cos");
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

namespace {

std::vector<int> encoder_dims(int in, const ModelDims& d, int out, int depth) {
  std::vector<int> dims;
  dims.push_back(in);
  for (int l = 0; l < depth - 1; ++l) dims.push_back(d.hidden);
  dims.push_back(out);
  return dims;
}

}  // namespace

AssimModel AssimModel::init(const std::vector<obs::SourceSchema>& schemas,
                            const ModelDims& dims, const NormStats& norm,
                            std::uint64_t seed) {
  if (schemas.empty()) throw SchemaError("model needs at least one source");
  AssimModel m;
  m.schemas = schemas;
  m.dims = dims;
  m.norm = norm;
  Rng rng(Rng::derive(seed, "model-init"));
  m.background_enc = nd::MlpParams::xavier(
      encoder_dims(4 + static_cast<int>(m.n_vars), dims, dims.latent_dim,
                   dims.enc_depth),
      rng);
  for (const auto& sc : schemas) {
    const int c_enc = static_cast<int>(encoder_channels(sc).size());
    m.source_encs.push_back(nd::MlpParams::xavier(
        encoder_dims(4 + c_enc, dims, dims.latent_dim, dims.enc_depth), rng));
  }
  // Zero-initialized final layer: the initial analysis is exactly the
  // interpolated background.
  m.decoder = nd::MlpParams::xavier(
      encoder_dims(4 + m.fused_dim(), dims, static_cast<int>(m.n_vars),
                   dims.dec_depth),
      rng, /*final_layer_zero=*/true);
  return m;
}

std::int64_t AssimModel::param_count() const {
  std::int64_t n = background_enc.param_count() + decoder.param_count();
  for (const auto& e : source_encs) n += e.param_count();
  return n;
}

void AssimModel::validate() const {
  background_enc.validate();
  for (const auto& e : source_encs) e.validate();
  decoder.validate();
  if (static_cast<int>(source_encs.size()) != n_sources())
    throw SchemaError("model: encoder count does not match schema list");
  if (background_enc.depth() != dims.enc_depth ||
      decoder.depth() != dims.dec_depth)
    throw SchemaError("model: depths do not match the configuration");
  if (decoder.in_dim() != 4 + fused_dim())
    throw SchemaError("model: decoder input dim inconsistent with sources");
  norm.validate(static_cast<std::size_t>(n_vars));
}

LatentFeature encode_source(const nd::MlpParams& encoder, const Mat& points,
                            nd::MlpTape* tape) {
  const int d = encoder.out_dim();
  if (points.rows() == 0) return LatentFeature::absent(d);
  if (points.cols() != encoder.in_dim())
    throw SchemaError("encode_source: point feature dim " +
                      std::to_string(points.cols()) + " != encoder input " +
                      std::to_string(encoder.in_dim()));
  const Mat emb = nd::mlp_forward(encoder, points, tape);
  return {emb.colwise().mean().transpose(), 1.0};
}

Mat background_points(const GridField& background, const part::PatchSpec& patch,
                      const NormStats& norm) {
  const GridSpec& s = background.spec;
  const int nv = static_cast<int>(background.n_vars());
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < s.h; ++i) {
    const double lat = s.lat_center(i);
    if (lat < patch.lat0 || lat > patch.lat1) continue;
    for (int j = 0; j < s.w; ++j) {
      if (!background.ocean(i, j)) continue;
      if (part::point_in_patch(lat, s.lon_center(j), patch, s))
        cells.emplace_back(i, j);
    }
  }
  Mat pts(static_cast<Eigen::Index>(cells.size()), 4 + nv);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto [i, j] = cells[r];
    const auto ec = geo::encode_coord(s.lat_center(i), s.lon_center(j));
    pts(r, 0) = ec.lat_sin;
    pts(r, 1) = ec.lat_cos;
    pts(r, 2) = ec.lon_sin;
    pts(r, 3) = ec.lon_cos;
    for (int v = 0; v < nv; ++v)
      pts(r, 4 + v) = norm.norm_bg(v, background.at(v, i, j));
  }
  return pts;
}

LatentFeature encode_background(const nd::MlpParams& encoder,
                                const GridField& background,
                                const part::PatchSpec& patch,
                                const NormStats& norm, nd::MlpTape* tape) {
  return encode_source(encoder, background_points(background, patch, norm),
                       tape);
}

Mat observation_points(const obs::ObservationSet& set,
                       const obs::SourceSchema& schema,
                       const std::vector<std::int64_t>& indices,
                       const NormStats& norm) {
  const auto enc_ch = encoder_channels(schema);
  const auto it_mean = norm.ch_mean.find(schema.id);
  const auto it_std = norm.ch_std.find(schema.id);
  if (it_mean == norm.ch_mean.end() || it_std == norm.ch_std.end())
    throw SchemaError("no normalization stats for source '" + schema.id + "'");
  const auto& mean = it_mean->second;
  const auto& sd = it_std->second;
  if (mean.size() != enc_ch.size())
    throw SchemaError("normalization stats arity mismatch for '" + schema.id +
                      "'");

  Mat pts(static_cast<Eigen::Index>(indices.size()),
          4 + static_cast<Eigen::Index>(enc_ch.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = indices[r];
    const auto [lat, lon] = set.coords[static_cast<std::size_t>(i)];
    const auto ec = geo::encode_coord(lat, lon);
    pts(r, 0) = ec.lat_sin;
    pts(r, 1) = ec.lat_cos;
    pts(r, 2) = ec.lon_sin;
    pts(r, 3) = ec.lon_cos;
    int k = 0;
    for (int c = 0; c < set.n_channels; ++c) {
      const double raw = set.value(i, c);
      if (schema.channels[static_cast<std::size_t>(c)] == "wdir") {
        pts(r, 4 + k) = (std::sin(raw) - mean[k]) / sd[k];
        ++k;
        pts(r, 4 + k) = (std::cos(raw) - mean[k]) / sd[k];
        ++k;
      } else {
        pts(r, 4 + k) = (raw - mean[k]) / sd[k];
        ++k;
      }
    }
  }
  return pts;
}

Vec fuse(const LatentFeature& background,
         const std::vector<LatentFeature>& sources) {
  const Eigen::Index d = background.v.size();
  Vec out((static_cast<Eigen::Index>(sources.size()) + 1) * (d + 1));
  out.segment(0, d) = background.v;
  out(d) = background.flag;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (sources[j].v.size() != d)
      throw SchemaError("fuse: latent dim mismatch at source " +
                        std::to_string(j));
    const Eigen::Index base = (static_cast<Eigen::Index>(j) + 1) * (d + 1);
    out.segment(base, d) = sources[j].v;
    out(base + d) = sources[j].flag;
  }
  return out;
}

Mat decode_generic(const nd::MlpParams& decoder, const Mat& queries,
                   const Vec& fused) {
  Mat input(queries.rows(), 4 + fused.size());
  input.leftCols(4) = queries;
  input.rightCols(fused.size()) = fused.transpose().replicate(queries.rows(), 1);
  return nd::mlp_forward(decoder, input);
}

Mat decode(const nd::MlpParams& decoder, const Mat& queries, const Vec& fused,
           DecoderTape* tape) {
  if (queries.cols() != 4) throw SchemaError("decode: queries must be q x 4");
  if (decoder.in_dim() != 4 + fused.size())
    throw SchemaError("decode: fused dim " + std::to_string(fused.size()) +
                      " inconsistent with decoder input " +
                      std::to_string(decoder.in_dim()));
  const int depth = decoder.depth();
  const bool fast =
      depth >= 2 && decoder.in_dim() > decoder.layers[1].w.rows();
  if (!fast) {
    Mat input(queries.rows(), 4 + fused.size());
    input.leftCols(4) = queries;
    input.rightCols(fused.size()) =
        fused.transpose().replicate(queries.rows(), 1);
    if (!tape) return nd::mlp_forward(decoder, input);
    tape->fast = false;
    tape->input = std::move(input);
    return nd::mlp_forward(decoder, tape->input, &tape->tape);
  }

  // First layer split into query and fused parts; the fused contribution is
  // one matrix-vector product per patch instead of per query. The first block
  // has no skip here because the input is wider than the block output.
  const auto& l0 = decoder.layers[0];
  const Vec c0 = l0.w.rightCols(fused.size()) * fused + l0.b;
  std::vector<Mat> z(depth), h(depth + 1);
  z[0] = queries * l0.w.leftCols(4).transpose();
  z[0].rowwise() += c0.transpose();
  h[1] = z[0].unaryExpr([](double x) { return nd::silu(x); });
  for (int l = 1; l < depth; ++l) {
    const auto& lay = decoder.layers[l];
    z[l] = h[l] * lay.w.transpose();
    z[l].rowwise() += lay.b.transpose();
    Mat a = (l == depth - 1)
                ? z[l]
                : z[l].unaryExpr([](double x) { return nd::silu(x); });
    if (l % 2 == 1 && l > 1 && h[l - 1].cols() <= a.cols())
      a.leftCols(h[l - 1].cols()) += h[l - 1];
    h[l + 1] = std::move(a);
  }
  if (tape) {
    tape->fast = true;
    tape->q = queries;
    tape->fused = fused;
    tape->z = z;
    tape->h = h;
    return tape->h[depth];
  }
  return h[depth];
}

Vec decode_backward(const nd::MlpParams& decoder, const DecoderTape& tape,
                    const Mat& upstream, nd::MlpGrads& grads) {
  if (!tape.fast) {
    Mat g_in = nd::mlp_backward(decoder, tape.tape, upstream, grads);
    return g_in.rightCols(g_in.cols() - 4).colwise().sum().transpose();
  }

  const int depth = decoder.depth();
  std::vector<Mat> gh(depth + 1);
  for (int l = 1; l <= depth; ++l)
    gh[l] = Mat::Zero(tape.h[l].rows(), tape.h[l].cols());
  gh[depth] = upstream;

  for (int l = depth - 1; l >= 1; --l) {
    const auto& lay = decoder.layers[l];
    const Mat& g_after = gh[l + 1];
    if (l % 2 == 1 && l > 1 && tape.h[l - 1].cols() <= g_after.cols())
      gh[l - 1] += g_after.leftCols(tape.h[l - 1].cols());
    Mat g_z;
    if (l == depth - 1) {
      g_z = g_after;
    } else {
      g_z = g_after.cwiseProduct(
          tape.z[l].unaryExpr([](double x) { return nd::silu_grad(x); }));
    }
    grads.layers[l].w += g_z.transpose() * tape.h[l];
    grads.layers[l].b += g_z.colwise().sum().transpose();
    gh[l] += g_z * lay.w;
  }

  const Mat g_z0 = gh[1].cwiseProduct(
      tape.z[0].unaryExpr([](double x) { return nd::silu_grad(x); }));
  const Vec col_sum = g_z0.colwise().sum().transpose();
  auto& g0 = grads.layers[0];
  g0.w.leftCols(4) += g_z0.transpose() * tape.q;
  g0.w.rightCols(tape.fused.size()) += col_sum * tape.fused.transpose();
  g0.b += col_sum;
  return decoder.layers[0].w.rightCols(tape.fused.size()).transpose() * col_sum;
}

ModelGrads ModelGrads::zeros_like(const AssimModel& m) {
  ModelGrads g;
  g.background_enc = nd::MlpGrads::zeros_like(m.background_enc);
  for (const auto& e : m.source_encs)
    g.source_encs.push_back(nd::MlpGrads::zeros_like(e));
  g.decoder = nd::MlpGrads::zeros_like(m.decoder);
  return g;
}

void ModelGrads::accumulate(const ModelGrads& other) {
  background_enc.accumulate(other.background_enc);
  for (std::size_t j = 0; j < source_encs.size(); ++j)
    source_encs[j].accumulate(other.source_encs[j]);
  decoder.accumulate(other.decoder);
}

void ModelGrads::scale(double s) {
  background_enc.scale(s);
  for (auto& g : source_encs) g.scale(s);
  decoder.scale(s);
}

bool ModelGrads::all_finite() const {
  auto ok = [](const nd::MlpGrads& g) {
    for (const auto& l : g.layers)
      if (!l.w.allFinite() || !l.b.allFinite()) return false;
    return true;
  };
  if (!ok(background_enc) || !ok(decoder)) return false;
  for (const auto& g : source_encs)
    if (!ok(g)) return false;
  return true;
}

Mat patch_forward(const AssimModel& m, const PatchInputs& in, PatchTape* tape) {
  if (static_cast<int>(in.src_points.size()) != m.n_sources())
    throw SchemaError("patch_forward: source count mismatch");
  PatchTape local;
  PatchTape& t = tape ? *tape : local;
  t.src_tapes.assign(static_cast<std::size_t>(m.n_sources()), nd::MlpTape{});
  t.src_lats.clear();

  t.bg_lat = encode_source(m.background_enc, in.bg_points,
                           tape ? &t.bg_tape : nullptr);
  for (int j = 0; j < m.n_sources(); ++j)
    t.src_lats.push_back(encode_source(
        m.source_encs[static_cast<std::size_t>(j)],
        in.src_points[static_cast<std::size_t>(j)],
        tape ? &t.src_tapes[static_cast<std::size_t>(j)] : nullptr));
  t.fused = fuse(t.bg_lat, t.src_lats);
  return decode(m.decoder, in.queries, t.fused, tape ? &t.dec_tape : nullptr);
}

void patch_backward(const AssimModel& m, const PatchInputs& in,
                    const PatchTape& tape, const Mat& upstream,
                    ModelGrads& grads) {
  const Vec g_fused = decode_backward(m.decoder, tape.dec_tape, upstream,
                                      grads.decoder);
  const int d = m.dims.latent_dim;
  auto pool_back = [&](const nd::MlpParams& enc, const nd::MlpTape& enc_tape,
                       const Mat& points, const Vec& g_latent,
                       nd::MlpGrads& enc_grads) {
    const Eigen::Index n = points.rows();
    if (n == 0) return;
    Mat up = (g_latent / static_cast<double>(n)).transpose().replicate(n, 1);
    nd::mlp_backward(enc, enc_tape, up, enc_grads);
  };
  pool_back(m.background_enc, tape.bg_tape, in.bg_points,
            g_fused.segment(0, d), grads.background_enc);
  for (int j = 0; j < m.n_sources(); ++j) {
    const Eigen::Index base = (j + 1) * (d + 1);
    pool_back(m.source_encs[static_cast<std::size_t>(j)],
              tape.src_tapes[static_cast<std::size_t>(j)],
              in.src_points[static_cast<std::size_t>(j)],
              g_fused.segment(base, d),
              grads.source_encs[static_cast<std::size_t>(j)]);
  }
}

GridField assimilate(const AssimModel& m, const GridField& background,
                     const std::vector<obs::ObservationSet>& sources,
                     const GridSpec& target,
                     const std::vector<std::uint8_t>& target_mask,
                     const AssimOptions& opt) {
  m.validate();
  if (background.n_vars() != m.n_vars)
    throw SchemaError("assimilate: background variable count mismatch");
  if (static_cast<int>(sources.size()) != m.n_sources())
    throw SchemaError("assimilate: expected " + std::to_string(m.n_sources()) +
                      " observation sets, got " +
                      std::to_string(sources.size()));
  for (const auto& set : sources)
    if (set.size() > 0 && set.day != background.day)
      throw SchemaError("assimilate: observations for day " +
                        std::to_string(set.day) +
                        " paired with background day " +
                        std::to_string(background.day));

  const GridField base =
      geo::interp_to(background, target, target_mask, geo::LandPolicy::NearestOcean);
  const auto layout = part::Layout::make(target, opt.partition);

  std::vector<std::uint8_t> excluded(sources.size(), 0);
  for (const auto& id : opt.exclude_sources) {
    bool found = false;
    for (std::size_t j = 0; j < m.schemas.size(); ++j)
      if (m.schemas[j].id == id) {
        excluded[j] = 1;
        found = true;
      }
    if (!found) throw SchemaError("assimilate: unknown source id '" + id + "'");
  }

  std::vector<std::vector<std::vector<std::int64_t>>> routed(sources.size());
  for (std::size_t j = 0; j < sources.size(); ++j)
    routed[j] = excluded[j]
                    ? std::vector<std::vector<std::int64_t>>(layout.patches.size())
                    : layout.route(sources[j].coords);

  const int nv = static_cast<int>(m.n_vars);
  std::vector<part::PatchOutput> outputs(layout.patches.size());

  parallel_for(static_cast<std::int64_t>(layout.patches.size()), opt.threads,
               [&](std::int64_t pi) {
    const auto& patch = layout.patches[static_cast<std::size_t>(pi)];
    part::PatchOutput po;
    po.patch_id = patch.id;
    po.values.assign(static_cast<std::size_t>(nv) * patch.ni * patch.nj,
                     geo::land_sentinel());

    // Queries: every ocean cell of the target grid inside the full patch.
    std::vector<std::pair<int, int>> cells;
    for (int di = 0; di < patch.ni; ++di) {
      const int i = patch.i0 + di;
      for (int dj = 0; dj < patch.nj; ++dj) {
        int j = patch.j0 + dj;
        if (target.periodic_lon) j %= target.w;
        if (base.ocean(i, j)) cells.emplace_back(di, dj);
      }
    }
    if (cells.empty()) {
      outputs[static_cast<std::size_t>(pi)] = std::move(po);
      return;
    }

    PatchInputs in;
    in.bg_points = background_points(background, patch, m.norm);
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const auto& idx = routed[j][static_cast<std::size_t>(pi)];
      in.src_points.push_back(observation_points(
          sources[j], m.schemas[j], idx, m.norm));
    }
    in.queries.resize(static_cast<Eigen::Index>(cells.size()), 4);
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const int i = patch.i0 + cells[r].first;
      int j = patch.j0 + cells[r].second;
      if (target.periodic_lon) j %= target.w;
      const auto ec = geo::encode_coord(target.lat_center(i),
                                        target.lon_center(j));
      in.queries(r, 0) = ec.lat_sin;
      in.queries(r, 1) = ec.lat_cos;
      in.queries(r, 2) = ec.lon_sin;
      in.queries(r, 3) = ec.lon_cos;
    }

    const Mat inc = patch_forward(m, in, nullptr);
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const auto [di, dj] = cells[r];
      const int i = patch.i0 + di;
      int j = patch.j0 + dj;
      if (target.periodic_lon) j %= target.w;
      for (int v = 0; v < nv; ++v)
        po.values[(static_cast<std::size_t>(v) * patch.ni + di) * patch.nj +
                  dj] = base.at(v, i, j) +
                        m.norm.denorm_inc(v, inc(static_cast<Eigen::Index>(r),
                                                 v));
    }
    outputs[static_cast<std::size_t>(pi)] = std::move(po);
  });

  GridField analysis = part::stitch(layout.patches, outputs, target,
                                    background.vars, target_mask,
                                    background.day);
  return analysis;
}

// --- checkpoint io ---------------------------------------------------------

namespace {

nlohmann::json schema_to_json(const obs::SourceSchema& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["channels"] = s.channels;
  j["noise_std"] = s.noise_std;
  j["coverage"] = obs::coverage_tag(s.coverage);
  j["sample_res"] = s.sample_res;
  j["random_points_per_day"] = s.random_points_per_day;
  j["swath_width"] = s.swath_width;
  j["swath_period"] = s.swath_period;
  j["swath_slope"] = s.swath_slope;
  j["swath_day_shift"] = s.swath_day_shift;
  j["n_tracks"] = s.n_tracks;
  j["track_amp"] = s.track_amp;
  j["track_wavelength"] = s.track_wavelength;
  j["track_day_shift"] = s.track_day_shift;
  j["polar_lat"] = s.polar_lat;
  j["ice_edge"] = s.ice_edge;
  j["ice_edge_seasonal"] = s.ice_edge_seasonal;
  j["ice_width"] = s.ice_width;
  return j;
}

obs::SourceSchema schema_from_json(const nlohmann::json& j) {
  obs::SourceSchema s;
  s.id = j.at("id").get<std::string>();
  s.channels = j.at("channels").get<std::vector<std::string>>();
  s.noise_std = j.at("noise_std").get<std::vector<double>>();
  s.coverage = obs::coverage_from_tag(j.at("coverage").get<std::string>());
  s.sample_res = j.at("sample_res").get<double>();
  s.random_points_per_day = j.at("random_points_per_day").get<int>();
  s.swath_width = j.at("swath_width").get<double>();
  s.swath_period = j.at("swath_period").get<double>();
  s.swath_slope = j.at("swath_slope").get<double>();
  s.swath_day_shift = j.at("swath_day_shift").get<double>();
  s.n_tracks = j.at("n_tracks").get<int>();
  s.track_amp = j.at("track_amp").get<double>();
  s.track_wavelength = j.at("track_wavelength").get<double>();
  s.track_day_shift = j.at("track_day_shift").get<double>();
  s.polar_lat = j.at("polar_lat").get<double>();
  s.ice_edge = j.at("ice_edge").get<double>();
  s.ice_edge_seasonal = j.at("ice_edge_seasonal").get<double>();
  s.ice_width = j.at("ice_width").get<double>();
  return s;
}

void put_mlp(nd::Container& c, const std::string& prefix,
             const nd::MlpParams& p) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    c.put_tensor(prefix + ".l" + std::to_string(l) + ".w", p.layers[l].w);
    c.put_vector(prefix + ".l" + std::to_string(l) + ".b", p.layers[l].b);
  }
}

nd::MlpParams get_mlp(const nd::Container& c, const std::string& prefix,
                      int depth) {
  nd::MlpParams p;
  for (int l = 0; l < depth; ++l) {
    nd::Layer lay;
    lay.w = c.get_tensor(prefix + ".l" + std::to_string(l) + ".w");
    lay.b = c.get_vector(prefix + ".l" + std::to_string(l) + ".b");
    p.layers.push_back(std::move(lay));
  }
  return p;
}

}  // namespace

void save_model(const std::string& path, const AssimModel& m,
                std::uint64_t config_hash,
                const std::map<std::string, std::string>& extra_attrs) {
  nd::Container c;
  c.config_hash = config_hash;
  c.attrs["kind"] = "pointda-model";
  c.attrs["activation"] = nd::kActivationTag;
  c.attrs["latent_dim"] = std::to_string(m.dims.latent_dim);
  c.attrs["hidden"] = std::to_string(m.dims.hidden);
  c.attrs["enc_depth"] = std::to_string(m.dims.enc_depth);
  c.attrs["dec_depth"] = std::to_string(m.dims.dec_depth);
  c.attrs["n_vars"] = std::to_string(m.n_vars);
  c.attrs["world_hash"] = hex64(m.world_hash);
  c.attrs["train_dropout"] = std::to_string(m.train_dropout);
  c.attrs["norm_day_begin"] = std::to_string(m.norm.day_begin);
  c.attrs["norm_day_end"] = std::to_string(m.norm.day_end);
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : m.schemas) js.push_back(schema_to_json(s));
  c.attrs["schemas"] = js.dump();
  for (const auto& [k, v] : extra_attrs) c.attrs[k] = v;

  put_mlp(c, "bg", m.background_enc);
  for (std::size_t j = 0; j < m.source_encs.size(); ++j)
    put_mlp(c, "src" + std::to_string(j), m.source_encs[j]);
  put_mlp(c, "dec", m.decoder);

  c.put_values("norm.bg_mean", m.norm.bg_mean);
  c.put_values("norm.bg_std", m.norm.bg_std);
  c.put_values("norm.inc_mean", m.norm.inc_mean);
  c.put_values("norm.inc_std", m.norm.inc_std);
  c.put_values("norm.field_mean", m.norm.field_mean);
  c.put_values("norm.field_std", m.norm.field_std);
  for (const auto& s : m.schemas) {
    c.put_values("norm.ch_mean." + s.id, m.norm.ch_mean.at(s.id));
    c.put_values("norm.ch_std." + s.id, m.norm.ch_std.at(s.id));
    c.put_values("norm.raw_mean." + s.id, m.norm.raw_mean.at(s.id));
    c.put_values("norm.raw_std." + s.id, m.norm.raw_std.at(s.id));
  }
  nd::write_container(path, c);
}

AssimModel load_model(const std::string& path,
                      std::optional<std::uint64_t> expect_world_hash) {
  const nd::Container c = nd::read_container(path);
  if (c.attrs.count("kind") == 0 || c.attrs.at("kind") != "pointda-model")
    throw IoError("not a model checkpoint: " + path);
  if (c.attrs.at("activation") != nd::kActivationTag)
    throw IoError("checkpoint uses unsupported activation '" +
                  c.attrs.at("activation") + "'");

  AssimModel m;
  m.dims.latent_dim = std::stoi(c.attrs.at("latent_dim"));
  m.dims.hidden = std::stoi(c.attrs.at("hidden"));
  m.dims.enc_depth = std::stoi(c.attrs.at("enc_depth"));
  m.dims.dec_depth = std::stoi(c.attrs.at("dec_depth"));
  m.n_vars = std::stoll(c.attrs.at("n_vars"));
  m.world_hash = std::stoull(c.attrs.at("world_hash"), nullptr, 16);
  m.train_dropout = std::stod(c.attrs.at("train_dropout"));
  if (expect_world_hash && *expect_world_hash != m.world_hash)
    throw ConfigError("checkpoint world hash " + hex64(m.world_hash) +
                      " does not match the configured world " +
                      hex64(*expect_world_hash) + " (stale checkpoint?)");

  for (const auto& js : nlohmann::json::parse(c.attrs.at("schemas")))
    m.schemas.push_back(schema_from_json(js));

  m.background_enc = get_mlp(c, "bg", m.dims.enc_depth);
  for (std::size_t j = 0; j < m.schemas.size(); ++j)
    m.source_encs.push_back(
        get_mlp(c, "src" + std::to_string(j), m.dims.enc_depth));
  m.decoder = get_mlp(c, "dec", m.dims.dec_depth);

  m.norm.bg_mean = c.get_values("norm.bg_mean");
  m.norm.bg_std = c.get_values("norm.bg_std");
  m.norm.inc_mean = c.get_values("norm.inc_mean");
  m.norm.inc_std = c.get_values("norm.inc_std");
  m.norm.field_mean = c.get_values("norm.field_mean");
  m.norm.field_std = c.get_values("norm.field_std");
  m.norm.day_begin = std::stoll(c.attrs.at("norm_day_begin"));
  m.norm.day_end = std::stoll(c.attrs.at("norm_day_end"));
  for (const auto& s : m.schemas) {
    m.norm.ch_mean[s.id] = c.get_values("norm.ch_mean." + s.id);
    m.norm.ch_std[s.id] = c.get_values("norm.ch_std." + s.id);
    m.norm.raw_mean[s.id] = c.get_values("norm.raw_mean." + s.id);
    m.norm.raw_std[s.id] = c.get_values("norm.raw_std." + s.id);
  }
  m.validate();
  return m;
}

}  // namespace pointda::model
