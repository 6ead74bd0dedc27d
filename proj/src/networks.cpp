#include "mfgan/networks.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>

namespace mfgan::nn {

namespace {

constexpr std::string_view kMagic = "mfgan-params 1";

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::exp: return "exp";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string to_string(LayerKind k) { return k == LayerKind::dense ? "dense" : "dgm"; }
std::string to_string(Embedding e) { return e == Embedding::identity ? "identity" : "fourier"; }
std::string to_string(DensityMode m) {
  return m == DensityMode::normalized_grid ? "normalized_grid" : "penalty";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "exp") return Activation::exp;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

Embedding parse_embedding(std::string_view s) {
  if (s == "identity") return Embedding::identity;
  if (s == "fourier") return Embedding::fourier;
  throw ConfigError("unknown embedding '" + std::string(s) + "'");
}

DensityMode parse_density_mode(std::string_view s) {
  if (s == "normalized_grid") return DensityMode::normalized_grid;
  if (s == "penalty") return DensityMode::penalty;
  throw ConfigError("unknown density mode '" + std::string(s) + "'");
}

static LayerKind parse_layer_kind(std::string_view s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "dgm") return LayerKind::dgm;
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

std::size_t Architecture::embedded_dim() const {
  const std::size_t spatial = input_dim - time_axes;
  return time_axes + (embedding == Embedding::fourier ? 2 * spatial : spatial);
}

void Architecture::validate() const {
  if (input_dim == 0) throw ConfigError("architecture: input_dim must be >= 1");
  if (time_axes > input_dim) throw ConfigError("architecture: time_axes exceeds input_dim");
  std::size_t prev = embedded_dim();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& layer = layers[l];
    if (layer.width == 0) throw ConfigError("architecture: layer width must be >= 1");
    if (layer.kind == LayerKind::dgm) {
      if (l == 0) throw ConfigError("architecture: a DGM layer needs a preceding dense layer");
      if (prev != layer.width) {
        throw ConfigError("architecture: DGM layer width must match the previous layer");
      }
    }
    prev = layer.width;
  }
}

std::size_t Architecture::parameter_count() const {
  validate();
  const std::size_t in = embedded_dim();
  std::size_t prev = in;
  std::size_t count = 0;
  for (const LayerSpec& layer : layers) {
    const std::size_t n = layer.width;
    if (layer.kind == LayerKind::dense) {
      count += n * prev + n;
    } else {
      count += 4 * (n * in + n * n + n);
    }
    prev = n;
  }
  return count + prev + 1;
}

Architecture Architecture::dgm(std::size_t input_dim, std::size_t width, std::size_t dgm_layers,
                               Activation act, Embedding embedding, std::size_t time_axes) {
  Architecture a;
  a.input_dim = input_dim;
  a.time_axes = time_axes;
  a.embedding = embedding;
  a.layers.push_back({LayerKind::dense, width, act});
  for (std::size_t l = 0; l < dgm_layers; ++l) a.layers.push_back({LayerKind::dgm, width, act});
  a.validate();
  return a;
}

Architecture Architecture::mlp(std::size_t input_dim, const std::vector<std::size_t>& widths,
                               Activation act, Embedding embedding, std::size_t time_axes) {
  Architecture a;
  a.input_dim = input_dim;
  a.time_axes = time_axes;
  a.embedding = embedding;
  for (std::size_t w : widths) a.layers.push_back({LayerKind::dense, w, act});
  a.validate();
  return a;
}

double NetworkParams::extra(std::string_view name) const {
  for (const auto& [k, v] : extras) {
    if (k == name) return v;
  }
  throw Error("network has no extra scalar '" + std::string(name) + "'");
}

void NetworkParams::set_extra(std::string_view name, double v) {
  for (auto& [k, value] : extras) {
    if (k == name) {
      value = v;
      return;
    }
  }
  extras.emplace_back(std::string(name), v);
}

bool NetworkParams::has_extra(std::string_view name) const {
  for (const auto& e : extras) {
    if (e.first == name) return true;
  }
  return false;
}

NetworkParams initialize(const Architecture& arch, Rng& rng) {
  NetworkParams p;
  p.architecture = arch;
  p.values.reserve(arch.parameter_count());
  auto matrix = [&](std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t k = 0; k < rows * cols; ++k) p.values.push_back(uniform(rng, -limit, limit));
  };
  auto bias = [&](std::size_t rows) { p.values.insert(p.values.end(), rows, 0.0); };

  const std::size_t in = arch.embedded_dim();
  std::size_t prev = in;
  for (const LayerSpec& layer : arch.layers) {
    const std::size_t n = layer.width;
    if (layer.kind == LayerKind::dense) {
      matrix(n, prev);
      bias(n);
    } else {
      for (int g = 0; g < 4; ++g) {
        matrix(n, in);
        matrix(n, n);
        bias(n);
      }
    }
    prev = n;
  }
  matrix(1, prev);
  bias(1);
  return p;
}

std::vector<ad::Var> bind(const NetworkParams& p, ad::Tape* tape, bool trainable) {
  std::vector<ad::Var> out;
  out.reserve(p.trainable_count());
  auto push = [&](double v) {
    if (trainable) {
      out.emplace_back(*tape, tape->leaf(v, true));
    } else {
      out.emplace_back(v);
    }
  };
  for (double v : p.values) push(v);
  for (const auto& e : p.extras) push(e.second);
  return out;
}

// --- checkpoint -------------------------------------------------------------

static nlohmann::json to_json(const Architecture& a) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : a.layers) {
    layers.push_back({{"kind", to_string(l.kind)}, {"width", l.width},
                      {"activation", to_string(l.activation)}});
  }
  return {{"input_dim", a.input_dim},
          {"time_axes", a.time_axes},
          {"embedding", to_string(a.embedding)},
          {"layers", layers},
          {"output_activation", to_string(a.output_activation)}};
}

static Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.time_axes = j.at("time_axes").get<std::size_t>();
  a.embedding = parse_embedding(j.at("embedding").get<std::string>());
  for (const auto& l : j.at("layers")) {
    a.layers.push_back({parse_layer_kind(l.at("kind").get<std::string>()),
                        l.at("width").get<std::size_t>(),
                        parse_activation(l.at("activation").get<std::string>())});
  }
  a.output_activation = parse_activation(j.at("output_activation").get<std::string>());
  a.validate();
  return a;
}

static void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  out.write(bytes, 8);
}

static double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error("checkpoint: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_checkpoint(std::ostream& out, const NetworkParams& params) {
  nlohmann::json header = {{"architecture", to_json(params.architecture)},
                           {"value_count", params.values.size()},
                           {"extras", nlohmann::json::array()}};
  for (const auto& e : params.extras) header["extras"].push_back(e.first);
  out << kMagic << '\n' << header.dump() << '\n';
  for (double v : params.values) write_le(out, v);
  for (const auto& e : params.extras) write_le(out, e.second);
  if (!out) throw Error("checkpoint: write failed");
}

NetworkParams read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw Error("checkpoint: bad magic line");
  if (!std::getline(in, line)) throw Error("checkpoint: missing descriptor");
  const auto header = nlohmann::json::parse(line);
  NetworkParams p;
  p.architecture = architecture_from_json(header.at("architecture"));
  const auto count = header.at("value_count").get<std::size_t>();
  if (count != p.architecture.parameter_count()) {
    throw Error("checkpoint: value count does not match the descriptor");
  }
  p.values.resize(count);
  for (double& v : p.values) v = read_le(in);
  for (const auto& name : header.at("extras")) p.extras.emplace_back(name.get<std::string>(), read_le(in));
  return p;
}

void save_checkpoint(const std::string& path, const NetworkParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_checkpoint(out, params);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_checkpoint(in);
}

// --- density ----------------------------------------------------------------

double density_normalizer(const NetworkParams& f, std::size_t points_per_axis) {
  return density_normalizer<double>(f.architecture, std::span<const double>(f.values),
                                    points_per_axis);
}

double density_eval(const NetworkParams& f, std::span<const double> x, DensityMode mode,
                    std::size_t points_per_axis) {
  const double raw = guarded_exp(evaluate(f, x));
  if (mode == DensityMode::penalty) return raw;
  return raw / density_normalizer(f, points_per_axis);
}

}  // namespace mfgan::nn
