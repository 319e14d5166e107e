#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointda/geo.hpp"
#include "pointda/ndcore.hpp"
#include "pointda/obs.hpp"
#include "pointda/partition.hpp"
#include "pointda/stats.hpp"

namespace pointda::model {

using nd::Mat;
using nd::Vec;

// Encoder input channels for a source: public channels with the wind
// direction expanded to its sine and cosine.
std::vector<std::string> encoder_channels(const obs::SourceSchema& schema);

struct LatentFeature {
  Vec v;
  double flag = 0.0;  // 1 when the source contributed points

  static LatentFeature absent(int d) { return {Vec::Zero(d), 0.0}; }
};

struct ModelDims {
  int latent_dim = 64;
  int hidden = 64;
  int enc_depth = 6;
  int dec_depth = 8;
};

// The assimilation operator: per-source point encoders, a background encoder,
// and a coordinate-query decoder over the fused latents. Parameters depend
// only on the schema list and dims, never on any grid resolution.
struct AssimModel {
  std::vector<obs::SourceSchema> schemas;
  nd::MlpParams background_enc;
  std::vector<nd::MlpParams> source_encs;
  nd::MlpParams decoder;
  ModelDims dims;
  NormStats norm;
  std::uint64_t world_hash = 0;
  double train_dropout = 0.0;
  std::int64_t n_vars = 5;

  static AssimModel init(const std::vector<obs::SourceSchema>& schemas,
                         const ModelDims& dims, const NormStats& norm,
                         std::uint64_t seed);

  int n_sources() const { return static_cast<int>(schemas.size()); }
  int fused_dim() const {
    return (n_sources() + 1) * (dims.latent_dim + 1);
  }
  std::int64_t param_count() const;
  void validate() const;
};

// Mean-pooled point-set encoding. Zero rows yield the absent latent without
// evaluating the encoder.
LatentFeature encode_source(const nd::MlpParams& encoder, const Mat& points,
                            nd::MlpTape* tape = nullptr);

// Flattens the ocean cells of a background patch into encoder points and
// mean-pools them. An all-land patch yields the absent latent.
LatentFeature encode_background(const nd::MlpParams& encoder,
                                const geo::GridField& background,
                                const part::PatchSpec& patch,
                                const NormStats& norm,
                                nd::MlpTape* tape = nullptr);

// Builds the normalized encoder point matrix for the background cells inside
// a patch (n x (4 + n_vars)).
Mat background_points(const geo::GridField& background,
                      const part::PatchSpec& patch, const NormStats& norm);

// Builds the normalized encoder point matrix for a subset of observations
// (n x (4 + encoder channels)).
Mat observation_points(const obs::ObservationSet& set,
                       const obs::SourceSchema& schema,
                       const std::vector<std::int64_t>& indices,
                       const NormStats& norm);

// Concatenates (vector, flag) blocks: background first, then sources in
// schema order.
Vec fuse(const LatentFeature& background,
         const std::vector<LatentFeature>& sources);

struct DecoderTape;

// Decodes normalized increments at encoded query coordinates (q x 4) given
// the fused context. Batched with row independence.
Mat decode(const nd::MlpParams& decoder, const Mat& queries, const Vec& fused,
           DecoderTape* tape = nullptr);

// Reference implementation that materializes [queries | fused] rows and runs
// the generic MLP; decode() must match it. Exposed for tests.
Mat decode_generic(const nd::MlpParams& decoder, const Mat& queries,
                   const Vec& fused);

struct DecoderTape {
  bool fast = false;
  Mat input;         // generic path: materialized rows
  nd::MlpTape tape;  // generic path
  Mat q;
  Vec fused;
  std::vector<Mat> z;
  std::vector<Mat> h;  // h[l] = input of layer l (l >= 1), h[depth] = output
};

// dL/dfused for a recorded decode; parameter grads accumulate into grads.
Vec decode_backward(const nd::MlpParams& decoder, const DecoderTape& tape,
                    const Mat& upstream, nd::MlpGrads& grads);

// --- per-patch network evaluation ---------------------------------------

struct PatchInputs {
  Mat bg_points;               // may be 0 rows (absent background patch)
  std::vector<Mat> src_points; // per source, 0 rows = absent
  Mat queries;                 // q x 4 encoded coordinates
};

struct PatchTape {
  nd::MlpTape bg_tape;
  std::vector<nd::MlpTape> src_tapes;
  LatentFeature bg_lat;
  std::vector<LatentFeature> src_lats;
  Vec fused;
  DecoderTape dec_tape;
};

struct ModelGrads {
  nd::MlpGrads background_enc;
  std::vector<nd::MlpGrads> source_encs;
  nd::MlpGrads decoder;

  static ModelGrads zeros_like(const AssimModel& m);
  void accumulate(const ModelGrads& other);
  void scale(double s);
  bool all_finite() const;
};

// Normalized increments at the queries (q x n_vars).
Mat patch_forward(const AssimModel& m, const PatchInputs& in, PatchTape* tape);

void patch_backward(const AssimModel& m, const PatchInputs& in,
                    const PatchTape& tape, const Mat& upstream,
                    ModelGrads& grads);

// --- full-field assimilation ---------------------------------------------

struct AssimOptions {
  part::PartitionConfig partition;
  int threads = 0;  // 0 = hardware default
  // Force these source ids absent at inference (leave-one-out analyses).
  std::vector<std::string> exclude_sources;
};

// Produces the analysis on the target grid: partition, encode, decode at
// every fine ocean cell, add the interpolated background, stitch.
geo::GridField assimilate(const AssimModel& m,
                          const geo::GridField& background,
                          const std::vector<obs::ObservationSet>& sources,
                          const geo::GridSpec& target,
                          const std::vector<std::uint8_t>& target_mask,
                          const AssimOptions& opt);

// --- checkpoint io ---------------------------------------------------------

void save_model(const std::string& path, const AssimModel& m,
                std::uint64_t config_hash,
                const std::map<std::string, std::string>& extra_attrs = {});
AssimModel load_model(const std::string& path,
                      std::optional<std::uint64_t> expect_world_hash = {});

}  // namespace pointda::model
