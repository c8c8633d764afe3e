#include "csifb/ablnet/weights.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "csifb/binary_io.hpp"
#include "csifb/errors.hpp"

namespace csifb::ablnet {

std::vector<std::uint8_t> encode_weights(const std::vector<WeightRecord>& records) {
  io::Writer w;
  w.put_magic("ABLW");
  w.put<std::uint32_t>(kWeightsVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw RangeError("record name too long: " + r.name);
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.name.size()));
    w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(r.name.data()), r.name.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.value.rank()));
    for (std::size_t d : r.value.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_floats(r.value.span());
  }
  return w.bytes();
}

std::vector<WeightRecord> decode_weights(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("ABLW");
  r.expect_version(kWeightsVersion);
  const auto count = r.get<std::uint32_t>("record count");
  std::vector<WeightRecord> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightRecord rec;
    const auto len = r.get<std::uint16_t>("name length");
    rec.name = r.get_string(len, "record name");
    const std::size_t rank_at = r.offset();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible rank " + std::to_string(rank), rank_at);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      const std::size_t at = r.offset();
      d = r.get<std::uint32_t>("dimension");
      if (d == 0) throw FormatError("zero dimension in " + rec.name, at);
      total *= d;
      if (total > (std::size_t{1} << 32)) throw FormatError("record " + rec.name + " too large", at);
    }
    rec.value = Tensor<float>(shape);
    r.get_floats(rec.value.span(), "record payload");
    out.push_back(std::move(rec));
  }
  r.expect_end();
  return out;
}

std::vector<WeightRecord> model_records(const ModelConfig& cfg, const EncoderParams<float>* enc,
                                        const DecoderParams<float>* dec) {
  cfg.validate();
  std::vector<WeightRecord> out;
  out.push_back({"config", Tensor<float>({7}, std::vector<float>{
                                                  static_cast<float>(cfg.k_max), static_cast<float>(cfg.n_t),
                                                  static_cast<float>(cfg.hidden1), static_cast<float>(cfg.hidden2),
                                                  static_cast<float>(cfg.d), static_cast<float>(cfg.q),
                                                  static_cast<float>(static_cast<std::uint16_t>(cfg.arch))})});
  auto add = [&](ParamList<float> list) {
    for (const auto& np : list) out.push_back({np.name, np.param->value});
  };
  // params() needs mutable access; only values are copied.
  if (enc) add(const_cast<EncoderParams<float>*>(enc)->params());
  if (dec) add(const_cast<DecoderParams<float>*>(dec)->params());
  return out;
}

namespace {

ModelConfig config_from(const Tensor<float>& t) {
  if (t.size() != 7) throw FormatError("config record must hold 7 values", 0);
  auto as_size = [&](std::size_t i) {
    const float v = t[i];
    if (!(v >= 0.0f) || v != std::floor(v) || v > 1e7f) throw FormatError("config value is not a count", 0);
    return static_cast<std::size_t>(v);
  };
  ModelConfig cfg;
  cfg.k_max = as_size(0);
  cfg.n_t = as_size(1);
  cfg.hidden1 = as_size(2);
  cfg.hidden2 = as_size(3);
  cfg.d = as_size(4);
  cfg.q = static_cast<unsigned>(as_size(5));
  cfg.arch = static_cast<EncoderArch>(as_size(6));
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored model config is invalid: ") + e.what(), 0);
  }
  return cfg;
}

// Fills every parameter of `list` from `by_name`; returns false when none of
// them is present and throws when only some are.
bool fill(const ParamList<float>& list, const std::map<std::string, const Tensor<float>*>& by_name) {
  std::size_t found = 0;
  for (const auto& np : list) found += by_name.count(np.name);
  if (found == 0) return false;
  for (const auto& np : list) {
    const auto it = by_name.find(np.name);
    if (it == by_name.end()) throw FormatError("missing weight record " + np.name, 0);
    if (it->second->shape() != np.param->value.shape()) {
      throw FormatError("record " + np.name + " has shape " + it->second->shape_string() + ", expected " +
                            np.param->value.shape_string(),
                        0);
    }
    *np.param = Parameter<float>(*it->second);
  }
  return true;
}

}  // namespace

ModelWeights weights_from_records(const std::vector<WeightRecord>& records) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& r : records) {
    if (!by_name.emplace(r.name, &r.value).second) throw FormatError("duplicate record " + r.name, 0);
  }
  const auto cfg_it = by_name.find("config");
  if (cfg_it == by_name.end()) throw FormatError("weights file has no config record", 0);
  ModelWeights mw;
  mw.config = config_from(*cfg_it->second);
  std::mt19937_64 rng(0);
  auto enc = EncoderParams<float>::init(mw.config, rng);
  auto dec = DecoderParams<float>::init(mw.config, rng);
  if (fill(enc.params(), by_name)) mw.enc = std::move(enc);
  if (fill(dec.params(), by_name)) mw.dec = std::move(dec);
  const std::size_t expected = 1 + (mw.enc ? mw.enc->params().size() : 0) + (mw.dec ? mw.dec->params().size() : 0);
  if (expected != records.size()) throw FormatError("weights file has unrecognized records", 0);
  return mw;
}

void save_weights(const std::filesystem::path& path, const ModelConfig& cfg,
                  const EncoderParams<float>* enc, const DecoderParams<float>* dec) {
  io::Writer w;
  w.put_bytes(encode_weights(model_records(cfg, enc, dec)));
  w.save(path);
}

ModelWeights load_weights(const std::filesystem::path& path) {
  return weights_from_records(decode_weights(io::read_file(path)));
}

void save_model(const std::filesystem::path& path, const Model<float>& model) {
  save_weights(path, model.config, &model.enc, &model.dec);
}

Model<float> load_model(const std::filesystem::path& path) {
  auto mw = load_weights(path);
  if (!mw.enc || !mw.dec) throw FormatError("weights file does not hold a full model", 0);
  Model<float> m;
  m.config = mw.config;
  m.enc = std::move(*mw.enc);
  m.dec = std::move(*mw.dec);
  return m;
}

}  // namespace csifb::ablnet
