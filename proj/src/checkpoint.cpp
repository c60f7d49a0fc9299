#include "detectlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "detectlab/errors.hpp"

namespace detectlab {

using json = nlohmann::ordered_json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Supervised: return "supervised";
    case ModelKind::Scl: return "scl";
    case ModelKind::Gan: return "gan";
  }
  return "?";
}

namespace {

json params_json(std::span<const ad::Parameter* const> params) {
  auto arr = json::array();
  for (const auto* p : params) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());  // column-major
    arr.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}});
  }
  return arr;
}

void load_params(const json& arr, std::span<ad::Parameter* const> params, const std::string& group) {
  if (!arr.is_array() || arr.size() != params.size()) {
    throw ValidationError("checkpoint group '" + group + "' has the wrong number of parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& j = arr[i];
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    if (j.at("name").get<std::string>() != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw ValidationError("checkpoint parameter mismatch at " + group + "[" + std::to_string(i) + "] (" + p.name + ")");
    }
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ValidationError("checkpoint parameter " + p.name + " has the wrong size");
    p.value = Eigen::Map<const ad::Matrix>(data.data(), rows, cols);
    p.zero_grad();
  }
}

json tokenizer_json(const Tokenizer& t) {
  return {{"tokens", t.tokens()}, {"unk_id", t.unk_id()}, {"max_len", t.max_len()}};
}

Tokenizer tokenizer_from(const json& j) {
  return Tokenizer(j.at("tokens").get<std::vector<std::string>>(), j.at("unk_id").get<int>(), j.at("max_len").get<int>());
}

json spec_json(const EncoderSpec& s) {
  return {{"vocab_size", s.vocab_size}, {"hidden_dim", s.hidden_dim}, {"layers", s.layers},
          {"ff_dim", s.ff_dim},         {"max_len", s.max_len},       {"positional", s.positional}};
}

EncoderSpec spec_from(const json& j) {
  EncoderSpec s;
  s.vocab_size = j.at("vocab_size").get<int>();
  s.hidden_dim = j.at("hidden_dim").get<int>();
  s.layers = j.at("layers").get<int>();
  s.ff_dim = j.at("ff_dim").get<int>();
  s.max_len = j.at("max_len").get<int>();
  s.positional = j.at("positional").get<bool>();
  return s;
}

json header(ModelKind kind, const Tokenizer& tok, const EncoderModel& enc) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["kind"] = to_string(kind);
  j["tokenizer"] = tokenizer_json(tok);
  j["encoder"] = {{"spec", spec_json(enc.spec())}, {"params", params_json(enc.parameters())}};
  return j;
}

json parse_checked(const std::string& text, std::optional<ModelKind> expected) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) throw ValidationError("not a detectlab checkpoint");
  if (!j.contains("version") || !j["version"].is_number_integer()) throw ValidationError("checkpoint has no version field");
  if (j["version"].get<int>() != kCheckpointVersion) {
    throw ValidationError("checkpoint version " + j["version"].dump() + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (expected && j.value("kind", "") != to_string(*expected)) {
    throw ValidationError("checkpoint holds a '" + j.value("kind", "") + "' model, expected '" + to_string(*expected) + "'");
  }
  return j;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

EncoderModel encoder_from(const json& j) {
  auto enc = EncoderModel::zeros(spec_from(j.at("spec")));
  load_params(j.at("params"), enc.parameters(), "encoder");
  return enc;
}

}  // namespace

std::string checkpoint_json(const SupervisedDetector& d) {
  auto j = header(ModelKind::Supervised, d.tokenizer, d.encoder);
  j["head"] = {{"threshold", d.threshold}, {"params", params_json(d.head.parameters())}};
  return j.dump() + "\n";
}

std::string checkpoint_json(const StyleModel& m) {
  auto j = header(ModelKind::Scl, m.tokenizer, m.encoder);
  j["head"] = {{"input_dim", m.head.input_dim()},
               {"output_dim", m.head.output_dim()},
               {"bias", m.head.has_bias()},
               {"params", params_json(m.head.parameters())}};
  return j.dump() + "\n";
}

std::string checkpoint_json(const GanDetector& d) {
  auto j = header(ModelKind::Gan, d.tokenizer, d.encoder);
  j["generator"] = params_json(d.generator.parameters());
  j["discriminator"] = params_json(d.discriminator.parameters());
  return j.dump() + "\n";
}

ModelKind checkpoint_kind(const std::string& text) {
  const auto kind = parse_checked(text, std::nullopt).value("kind", "");
  for (auto k : {ModelKind::Supervised, ModelKind::Scl, ModelKind::Gan}) {
    if (kind == to_string(k)) return k;
  }
  throw ValidationError("unknown checkpoint kind '" + kind + "'");
}

SupervisedDetector supervised_from_checkpoint(const std::string& text) {
  const auto j = parse_checked(text, ModelKind::Supervised);
  return guarded([&] {
    SupervisedDetector d;
    d.tokenizer = tokenizer_from(j.at("tokenizer"));
    d.encoder = encoder_from(j.at("encoder"));
    d.head = ClassifierHead::zeros(d.encoder.hidden_dim());
    load_params(j.at("head").at("params"), d.head.parameters(), "head");
    d.threshold = j.at("head").at("threshold").get<double>();
    return d;
  });
}

StyleModel style_model_from_checkpoint(const std::string& text) {
  const auto j = parse_checked(text, ModelKind::Scl);
  return guarded([&] {
    StyleModel m;
    m.tokenizer = tokenizer_from(j.at("tokenizer"));
    m.encoder = encoder_from(j.at("encoder"));
    const auto& h = j.at("head");
    m.head = ProjectionHead(h.at("input_dim").get<int>(), h.at("output_dim").get<int>(), 0, h.at("bias").get<bool>());
    load_params(h.at("params"), m.head.parameters(), "head");
    return m;
  });
}

GanDetector gan_from_checkpoint(const std::string& text) {
  const auto j = parse_checked(text, ModelKind::Gan);
  return guarded([&] {
    GanDetector d;
    d.tokenizer = tokenizer_from(j.at("tokenizer"));
    d.encoder = encoder_from(j.at("encoder"));
    // Shapes: generator w1 is noise x hidden; discriminator w1 is d_h x hidden.
    const auto& g = j.at("generator");
    const auto& disc = j.at("discriminator");
    d.generator = Generator::zeros(g.at(0).at("rows").get<int>(), g.at(0).at("cols").get<int>(), d.encoder.hidden_dim());
    d.discriminator = Discriminator(d.encoder.hidden_dim(), disc.at(0).at("cols").get<int>(), 0);
    load_params(g, d.generator.parameters(), "generator");
    load_params(disc, d.discriminator.parameters(), "discriminator");
    return d;
  });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

}  // namespace detectlab
