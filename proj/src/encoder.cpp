#include "synthlabel/encoder.hpp"

#include <fstream>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/hashing.hpp"
#include "synthlabel/rng.hpp"
#include "synthlabel/tnsr_io.hpp"

namespace synthlabel {

void EncoderConfig::validate() const {
  if (embed_dim == 0 || proj_hidden_dim == 0 || proj_out_dim == 0) {
    throw ParameterError("encoder dimensions must be positive");
  }
  if (in_channels != 1 && in_channels != 3) {
    throw ParameterError("encoder input must have 1 or 3 channels");
  }
  backbone_config().validate();
}

ConvNetConfig EncoderConfig::backbone_config() const {
  return ConvNetConfig{in_channels, in_h, in_w, conv_layers, embed_dim};
}

KeyValues EncoderConfig::to_kv() const {
  KeyValues kv;
  kv.set("in_channels", std::uint64_t{in_channels});
  kv.set("in_h", std::uint64_t{in_h});
  kv.set("in_w", std::uint64_t{in_w});
  kv.set("conv_layers", format_conv_layers(conv_layers));
  kv.set("embed_dim", std::uint64_t{embed_dim});
  kv.set("proj_hidden_dim", std::uint64_t{proj_hidden_dim});
  kv.set("proj_out_dim", std::uint64_t{proj_out_dim});
  kv.set("standardize_input", standardize_input);
  return kv;
}

EncoderConfig EncoderConfig::from_kv(const KeyValues& kv) {
  EncoderConfig c;
  c.in_channels = kv.get_u64("in_channels");
  c.in_h = kv.get_u64("in_h");
  c.in_w = kv.get_u64("in_w");
  c.conv_layers = parse_conv_layers(kv.get("conv_layers"));
  c.embed_dim = kv.get_u64("embed_dim");
  c.proj_hidden_dim = kv.get_u64("proj_hidden_dim");
  c.proj_out_dim = kv.get_u64("proj_out_dim");
  c.standardize_input = kv.get_bool("standardize_input");
  c.validate();
  return c;
}

EncoderModel EncoderModel::zeros(const EncoderConfig& config) {
  config.validate();
  EncoderModel m;
  m.config_ = config;
  m.backbone_ = ConvNet::zeros(config.backbone_config());
  m.w1_ = Tensor({config.embed_dim, config.proj_hidden_dim});
  m.b1_ = Tensor({config.proj_hidden_dim});
  m.w2_ = Tensor({config.proj_hidden_dim, config.proj_out_dim});
  m.b2_ = Tensor({config.proj_out_dim});
  return m;
}

EncoderModel EncoderModel::init(const EncoderConfig& config, std::uint64_t seed) {
  EncoderModel m = zeros(config);
  m.backbone_ = ConvNet::init(config.backbone_config(), derive_seed(seed, "theta"));
  Rng rng(derive_seed(seed, "proj"));
  m.w1_ = glorot_uniform(m.w1_.shape(), config.embed_dim, config.proj_hidden_dim, rng);
  m.w2_ = glorot_uniform(m.w2_.shape(), config.proj_hidden_dim, config.proj_out_dim, rng);
  return m;
}

std::vector<const Tensor*> EncoderModel::parameters() const {
  auto out = backbone_.parameters();
  out.insert(out.end(), {&w1_, &b1_, &w2_, &b2_});
  return out;
}

std::vector<Tensor*> EncoderModel::parameters() {
  auto out = backbone_.parameters();
  out.insert(out.end(), {&w1_, &b1_, &w2_, &b2_});
  return out;
}

EncoderModel::Bound EncoderModel::bind(ad::Graph& g, bool trainable) const {
  auto put = [&](const Tensor& t) { return trainable ? g.parameter(t) : g.constant_ref(t); };
  Bound b;
  b.backbone = backbone_.bind(g, trainable);
  b.w1 = put(w1_);
  b.b1 = put(b1_);
  b.w2 = put(w2_);
  b.b2 = put(b2_);
  return b;
}

ad::Var EncoderModel::encode(ad::Graph& g, const Bound& bound, ad::Var image) const {
  const ad::Var x = config_.standardize_input ? ad::standardize_channels(g, image) : image;
  return ad::relu(g, backbone_.forward(g, bound.backbone, x));
}

ad::Var EncoderModel::project(ad::Graph& g, const Bound& bound, ad::Var h) const {
  const Shape expected{1, config_.embed_dim};
  if (g.value(h).shape() != expected) {
    throw DimensionError("project expects h of shape " + shape_str(expected) + ", got " +
                         shape_str(g.value(h).shape()));
  }
  auto hidden = ad::relu(g, ad::add_bias(g, ad::matmul(g, h, bound.w1), bound.b1));
  return ad::add_bias(g, ad::matmul(g, hidden, bound.w2), bound.b2);
}

Tensor encode(const EncoderModel& model, const Tensor& image) {
  ad::Graph g;
  const auto bound = model.bind(g, false);
  const auto h = model.encode(g, bound, g.constant_ref(image));
  return g.value(h).reshaped({model.config().embed_dim});
}

Tensor project(const EncoderModel& model, const Tensor& h) {
  if (h.size() != model.config().embed_dim) {
    throw DimensionError("project expects an embedding of length " +
                         std::to_string(model.config().embed_dim) + ", got " + shape_str(h.shape()));
  }
  ad::Graph g;
  const auto bound = model.bind(g, false);
  const auto z = model.project(g, bound, g.constant(h.reshaped({1, h.size()})));
  return g.value(z).reshaped({model.config().proj_out_dim});
}

void write_encoder(std::ostream& out, const EncoderModel& model) {
  write_blob(out, model.config().to_kv().canonical_text());
  for (const Tensor* p : model.parameters()) write_tnsr(out, *p);
}

EncoderModel read_encoder(std::istream& in) {
  const auto config = EncoderConfig::from_kv(KeyValues::parse(read_blob(in)));
  EncoderModel model = EncoderModel::zeros(config);
  for (Tensor* p : model.parameters()) {
    Tensor t = read_tnsr(in);
    if (t.shape() != p->shape()) {
      throw IoError("checkpoint tensor " + shape_str(t.shape()) + " does not match config shape " +
                    shape_str(p->shape()));
    }
    if (!t.all_finite()) throw IoError("checkpoint contains non-finite parameters");
    *p = std::move(t);
  }
  return model;
}

void save_encoder(const std::filesystem::path& path, const EncoderModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_encoder(out, model);
}

EncoderModel load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_encoder(in);
}

std::string encoder_hash(const EncoderModel& model) {
  std::ostringstream out;
  write_encoder(out, model);
  return short_hash(out.str());
}

}  // namespace synthlabel
