#include "crossview/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "crossview/config.hpp"
#include "crossview/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts are unsupported");

namespace crossview {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'X', 'V', 'I', 'E', 'W', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;
}  // namespace

ContainerWriter::ContainerWriter(std::string kind) {
  header_["format_version"] = kFormatVersion;
  header_["kind"] = std::move(kind);
}

void ContainerWriter::add_raw(const std::string& name, const char* dtype,
                              const std::vector<int>& shape, const void* data,
                              std::size_t elem_size, std::size_t count) {
  json rec;
  rec["name"] = name;
  rec["dtype"] = dtype;
  rec["shape"] = shape;
  rec["offset"] = payload_.size();
  rec["nbytes"] = elem_size * count;
  tensors_.push_back(std::move(rec));
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  payload_.insert(payload_.end(), bytes, bytes + elem_size * count);
}

void ContainerWriter::add_f32(const std::string& name, const std::vector<int>& shape,
                              const float* data) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  add_raw(name, "f32", shape, data, 4, n);
}

void ContainerWriter::add_f64(const std::string& name, const std::vector<int>& shape,
                              const double* data) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  add_raw(name, "f64", shape, data, 8, n);
}

void ContainerWriter::add_u64(const std::string& name, const std::vector<int>& shape,
                              const std::uint64_t* data) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  add_raw(name, "u64", shape, data, 8, n);
}

void ContainerWriter::write(const std::filesystem::path& path) {
  header_["tensors"] = tensors_;
  const std::string header_bytes = header_.dump();
  const std::uint64_t header_size = header_bytes.size();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFault("cannot open for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&header_size), 8);
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    out.write(reinterpret_cast<const char*>(payload_.data()),
              static_cast<std::streamsize>(payload_.size()));
    if (!out) throw RuntimeFault("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw RuntimeFault("cannot move checkpoint into place: " + ec.message());
}

ContainerReader::ContainerReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path.string());
  char magic[8];
  std::uint64_t header_size = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&header_size), 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("not a checkpoint container: " + path.string());
  }
  std::string header_bytes(header_size, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw ValidationError("truncated checkpoint header: " + path.string());
  try {
    header_ = json::parse(header_bytes);
  } catch (const json::exception& e) {
    throw ValidationError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (!header_.contains("format_version") ||
      header_["format_version"].get<int>() != kFormatVersion) {
    throw ValidationError("unsupported checkpoint format version in " + path.string());
  }
  kind_ = header_.value("kind", "");

  payload_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

  std::size_t expected_end = 0;
  for (const json& rec : header_.at("tensors")) {
    Record r;
    r.dtype = rec.at("dtype").get<std::string>();
    r.shape = rec.at("shape").get<std::vector<int>>();
    r.offset = rec.at("offset").get<std::size_t>();
    r.nbytes = rec.at("nbytes").get<std::size_t>();
    std::size_t n = 1;
    for (int d : r.shape) n *= static_cast<std::size_t>(d);
    const std::size_t elem = r.dtype == "f32" ? 4 : 8;
    if (r.nbytes != n * elem) {
      throw ValidationError("checkpoint shape table inconsistent for tensor '" +
                            rec.at("name").get<std::string>() + "'");
    }
    if (r.offset + r.nbytes > payload_.size()) {
      throw ValidationError("truncated checkpoint payload: " + path.string());
    }
    expected_end = std::max(expected_end, r.offset + r.nbytes);
    const std::string name = rec.at("name").get<std::string>();
    if (!records_.emplace(name, std::move(r)).second) {
      throw ValidationError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (expected_end != payload_.size()) {
    throw ValidationError("checkpoint payload size mismatch: " + path.string());
  }
}

bool ContainerReader::has(const std::string& name) const { return records_.count(name) > 0; }

std::vector<std::string> ContainerReader::tensor_names() const {
  std::vector<std::string> names;
  names.reserve(records_.size());
  for (const auto& [name, rec] : records_) {
    (void)rec;
    names.push_back(name);
  }
  return names;
}

const ContainerReader::Record& ContainerReader::find(const std::string& name,
                                                     const char* dtype) const {
  auto it = records_.find(name);
  if (it == records_.end()) {
    throw ValidationError("checkpoint " + path_.string() + " is missing tensor '" + name + "'");
  }
  if (it->second.dtype != dtype) {
    throw ValidationError("tensor '" + name + "' has dtype " + it->second.dtype + ", expected " +
                          dtype);
  }
  return it->second;
}

Tensor<float> ContainerReader::read_f32(const std::string& name) const {
  const Record& r = find(name, "f32");
  Tensor<float> t(r.shape);
  std::memcpy(t.data(), payload_.data() + r.offset, r.nbytes);
  return t;
}

Tensor<double> ContainerReader::read_f64(const std::string& name) const {
  const Record& r = find(name, "f64");
  Tensor<double> t(r.shape);
  std::memcpy(t.data(), payload_.data() + r.offset, r.nbytes);
  return t;
}

std::vector<std::uint64_t> ContainerReader::read_u64(const std::string& name) const {
  const Record& r = find(name, "u64");
  std::vector<std::uint64_t> v(r.nbytes / 8);
  std::memcpy(v.data(), payload_.data() + r.offset, r.nbytes);
  return v;
}

namespace {

void add_params(ContainerWriter& w, const nn::ParamRefs<float>& params) {
  for (const nn::Param<float>* p : params) {
    w.add_f32(p->name, p->value.shape(), p->value.data());
    if (p->trainable) {
      w.add_f32(p->name + ".adam_m", p->adam_m.shape(), p->adam_m.data());
      w.add_f32(p->name + ".adam_v", p->adam_v.shape(), p->adam_v.data());
    }
  }
}

void load_params(const ContainerReader& r, const nn::ParamRefs<float>& params) {
  for (nn::Param<float>* p : params) {
    Tensor<float> v = r.read_f32(p->name);
    if (v.shape() != p->value.shape()) {
      throw ValidationError("tensor '" + p->name + "' has shape " + shape_string(v.shape()) +
                            ", model expects " + shape_string(p->value.shape()));
    }
    p->value = std::move(v);
    if (p->trainable) {
      p->adam_m = r.read_f32(p->name + ".adam_m");
      p->adam_v = r.read_f32(p->name + ".adam_v");
      if (p->adam_m.shape() != p->value.shape() || p->adam_v.shape() != p->value.shape()) {
        throw ValidationError("Adam moments for '" + p->name + "' have the wrong shape");
      }
    }
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  ContainerWriter w("train_state");
  w.header()["train_config"] = train_config_to_json(state.config);
  w.header()["generator_config"] = generator_config_to_json(state.gen_config);
  w.header()["counters"] = {{"epoch", state.epoch},
                            {"step", state.step},
                            {"gen_adam_t", state.gen_adam_t},
                            {"disc_adam_t", state.disc_adam_t}};
  add_params(w, state.gen->params());
  add_params(w, state.disc->params());
  w.add_u64("rng.state", {4}, state.rng.state().data());
  w.add_u64("gen.noise_rng.state", {4}, state.gen->noise_rng().state().data());
  std::vector<double> d_hist(state.history.size()), g_hist(state.history.size());
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    d_hist[i] = state.history[i].d_loss;
    g_hist[i] = state.history[i].g_loss;
  }
  const int hist_n = static_cast<int>(state.history.size());
  if (hist_n > 0) {
    w.add_f64("trace.d_loss", {hist_n}, d_hist.data());
    w.add_f64("trace.g_loss", {hist_n}, g_hist.data());
  }
  w.write(path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  ContainerReader r(path);
  if (r.kind() != "train_state") {
    throw ValidationError("checkpoint " + path.string() + " holds a '" + r.kind() +
                          "', not a train_state");
  }
  TrainState state;
  state.config = train_config_from_json(r.header().at("train_config"));
  state.gen_config = generator_config_from_json(r.header().at("generator_config"));
  state.gen = std::make_unique<Generator<float>>(GeneratorArch::from_config(state.gen_config),
                                                 Seed{0});
  state.disc = std::make_unique<Discriminator<float>>(
      DiscriminatorArch::from_profile(state.gen_config.width_multiplier,
                                      state.gen_config.kernel_size),
      Seed{0});
  load_params(r, state.gen->params());
  load_params(r, state.disc->params());

  const json& counters = r.header().at("counters");
  state.epoch = counters.at("epoch").get<std::uint64_t>();
  state.step = counters.at("step").get<std::uint64_t>();
  state.gen_adam_t = counters.at("gen_adam_t").get<std::uint64_t>();
  state.disc_adam_t = counters.at("disc_adam_t").get<std::uint64_t>();

  const auto rng_state = r.read_u64("rng.state");
  if (rng_state.size() != 4) throw ValidationError("rng.state must hold 4 words");
  state.rng.set_state({rng_state[0], rng_state[1], rng_state[2], rng_state[3]});
  const auto noise_state = r.read_u64("gen.noise_rng.state");
  if (noise_state.size() != 4) throw ValidationError("gen.noise_rng.state must hold 4 words");
  state.gen->noise_rng().set_state({noise_state[0], noise_state[1], noise_state[2],
                                    noise_state[3]});

  if (r.has("trace.d_loss")) {
    Tensor<double> d = r.read_f64("trace.d_loss");
    Tensor<double> g = r.read_f64("trace.g_loss");
    if (!d.same_shape(g)) throw ValidationError("loss trace tensors disagree in length");
    state.history.resize(d.numel());
    for (std::size_t i = 0; i < d.numel(); ++i) state.history[i] = {d[i], g[i]};
  }
  return state;
}

}  // namespace crossview
