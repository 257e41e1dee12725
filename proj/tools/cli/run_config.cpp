#include "run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "vidpred/errors.hpp"

namespace vidpred::cli {
namespace {

// Wraps a YAML mapping, remembers which keys were read and rejects the rest.
class Section {
 public:
  Section(YAML::Node node, std::string name, const std::string& source)
      : node_(std::move(node)), name_(std::move(name)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      fail(node_, "section '" + name_ + "' must be a mapping");
    }
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    const auto value = node_[key];
    try {
      out = value.as<T>();
    } catch (const YAML::Exception&) {
      fail(value, "bad value for '" + qualified(key) + "'");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(has(key) ? node_[key] : YAML::Node(), qualified(key), source_);
  }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return has(key) ? node_[key] : YAML::Node();
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
    throw ConfigError(location(at) + what);
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) {
        throw ConfigError(location(kv.first) + "unknown key '" + qualified(key) + "'");
      }
    }
  }

  std::string location(const YAML::Node& at) const {
    const auto mark = at.Mark();
    if (mark.line < 0) return source_ + ": ";
    return source_ + ":" + std::to_string(mark.line + 1) + ": ";
  }

 private:
  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  YAML::Node node_;
  std::string name_;
  std::string source_;
  std::set<std::string> seen_;
};

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<SkipKind> kSkipKinds[] = {
    {SkipKind::None, "none"}, {SkipKind::Residual, "residual"}, {SkipKind::Attention, "attention"}};
constexpr EnumName<WeightsSource> kWeightSources[] = {{WeightsSource::RandomFixed, "random-fixed"},
                                                      {WeightsSource::File, "file"}};
constexpr EnumName<TemporalPooling> kPoolings[] = {{TemporalPooling::Mean, "mean"},
                                                   {TemporalPooling::Max, "max"}};
constexpr EnumName<RescaleMode> kRescales[] = {{RescaleMode::ShorterSide, "shorter-side"},
                                               {RescaleMode::None, "none"}};
constexpr EnumName<SpriteShape> kShapes[] = {
    {SpriteShape::Square, "square"}, {SpriteShape::Disk, "disk"}, {SpriteShape::Cross, "cross"}};

template <typename E, size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

template <typename E, size_t N>
void get_enum(Section& s, const std::string& key, const EnumName<E> (&table)[N], E& out) {
  std::string name = enum_name(table, out);
  const auto node = s.raw(key);
  s.get(key, name);
  for (const auto& e : table) {
    if (name == e.name) {
      out = e.value;
      return;
    }
  }
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  s.fail(node, "'" + key + "' must be one of: " + allowed);
}

void parse_tap_spec(Section s, TapSpec& spec) {
  s.get("backbone_id", spec.backbone_id);
  const auto taps = s.raw("tap_layers");
  if (taps && taps.IsScalar() && taps.as<std::string>() == "all") {
    spec.tap_layers = conv_layer_ids(spec.backbone_id);
  } else {
    s.get("tap_layers", spec.tap_layers);
  }
  s.get("normalize_input", spec.normalize_input);
  get_enum(s, "weights_source", kWeightSources, spec.weights_source);
  s.get("weights_path", spec.weights_path);
  s.get("seed", spec.seed);
  s.get("input_size", spec.input_size);
  s.finish();
}

void parse_transform(Section s, TransformSpec& t) {
  s.get("height", t.height);
  s.get("width", t.width);
  get_enum(s, "rescale", kRescales, t.rescale);
  s.get("random_crop", t.random_crop);
  s.get("seed", t.seed);
  s.finish();
}

YAML::Node tap_spec_node(const TapSpec& spec) {
  YAML::Node n;
  n["backbone_id"] = spec.backbone_id;
  n["tap_layers"] = spec.tap_layers;
  n["normalize_input"] = spec.normalize_input;
  n["weights_source"] = enum_name(kWeightSources, spec.weights_source);
  n["weights_path"] = spec.weights_path;
  n["seed"] = spec.seed;
  n["input_size"] = spec.input_size;
  return n;
}

YAML::Node transform_node(const TransformSpec& t) {
  YAML::Node n;
  n["height"] = t.height;
  n["width"] = t.width;
  n["rescale"] = enum_name(kRescales, t.rescale);
  n["random_crop"] = t.random_crop;
  n["seed"] = t.seed;
  return n;
}

}  // namespace

int64_t RunConfig::resolved_window_length() const {
  if (dataset.window_length > 0) return dataset.window_length;
  const auto sched = train.schedule.resolved(predictor.input_frames);
  return predictor.input_frames + (sched.enabled ? sched.max_self_fed_steps : 0) + 1;
}

void RunConfig::validate() const {
  predictor.validate();
  train.validate();
  if (dataset.type != "synthetic" && dataset.type != "directory") {
    throw ConfigError("dataset.type must be 'synthetic' or 'directory'");
  }
  if (dataset.type == "directory" && !std::filesystem::is_directory(dataset.path)) {
    throw ConfigError("dataset.path does not exist: " + dataset.path);
  }
  if (dataset.type == "synthetic") {
    dataset.synthetic.validate();
    if (dataset.synthetic.channels != predictor.channels) {
      throw ConfigError("dataset.synthetic.channels must equal predictor.channels");
    }
  }
  if (dataset.transform.height != predictor.height || dataset.transform.width != predictor.width) {
    throw ConfigError("dataset.transform size must equal the predictor image size");
  }
  if (features.weights_source == WeightsSource::File &&
      !std::filesystem::is_regular_file(features.weights_path)) {
    throw ConfigError("features.weights_path does not exist: " + features.weights_path);
  }
  const auto& emb = metrics.embedder.frame_backbone;
  if (emb.weights_source == WeightsSource::File &&
      !std::filesystem::is_regular_file(emb.weights_path)) {
    throw ConfigError("metrics.embedder.weights_path does not exist: " + emb.weights_path);
  }
  if (metrics.horizons.empty()) {
    throw ConfigError("metrics.horizons must not be empty");
  }
  for (const auto h : metrics.horizons) {
    if (h < 1) throw ConfigError("metrics.horizons must be positive");
  }
  const auto needed = resolved_window_length();
  const auto sched = train.schedule.resolved(predictor.input_frames);
  if (needed < predictor.input_frames + (sched.enabled ? sched.max_self_fed_steps : 0) + 1) {
    throw ConfigError("dataset.window_length is too short for the cycle schedule");
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  Section top(root, "", source);
  top.get("output_dir", cfg.output_dir);
  top.get("seed", cfg.seed);
  top.get("deterministic", cfg.deterministic);

  {
    auto p = top.child("predictor");
    auto& pc = cfg.predictor;
    p.get("input_frames", pc.input_frames);
    p.get("channels", pc.channels);
    p.get("height", pc.height);
    p.get("width", pc.width);
    p.get("widths", pc.widths);
    p.get("latent_dim", pc.latent_dim);
    p.get("deterministic_latent", pc.deterministic_latent);
    auto sk = p.child("skip");
    get_enum(sk, "kind", kSkipKinds, pc.skip.kind);
    sk.get("resolutions", pc.skip.resolutions);
    sk.get("heads", pc.skip.heads);
    sk.get("qk_dim", pc.skip.qk_dim);
    sk.finish();
    p.finish();
  }
  {
    auto t = top.child("train");
    auto& tc = cfg.train;
    t.get("epochs", tc.epochs);
    t.get("batch_size", tc.batch_size);
    t.get("windows_per_sequence", tc.windows_per_sequence);
    t.get("checkpoint_every", tc.checkpoint_every);
    auto o = t.child("optimizer");
    o.get("name", tc.optimizer.name);
    o.get("learning_rate", tc.optimizer.learning_rate);
    o.get("beta1", tc.optimizer.beta1);
    o.get("beta2", tc.optimizer.beta2);
    o.get("eps", tc.optimizer.eps);
    o.get("weight_decay", tc.optimizer.weight_decay);
    o.get("momentum", tc.optimizer.momentum);
    o.finish();
    auto l = t.child("loss");
    l.get("perceptual_weight", tc.loss.perceptual_weight);
    l.get("reconstruction_weight", tc.loss.reconstruction_weight);
    l.get("latent_kl_weight", tc.loss.latent_kl_weight);
    l.get("alpha", tc.loss.alpha);
    l.finish();
    auto s = t.child("schedule");
    s.get("enabled", tc.schedule.enabled);
    s.get("start_fraction", tc.schedule.start_fraction);
    s.get("max_self_fed_steps", tc.schedule.max_self_fed_steps);
    std::string ramp = "stepwise-linear";
    const auto ramp_node = s.raw("ramp");
    s.get("ramp", ramp);
    if (ramp != "stepwise-linear") s.fail(ramp_node, "'ramp' must be stepwise-linear");
    s.finish();
    t.finish();
  }
  parse_tap_spec(top.child("features"), cfg.features);
  {
    auto d = top.child("dataset");
    auto& dc = cfg.dataset;
    d.get("type", dc.type);
    d.get("path", dc.path);
    d.get("heldout_seed", dc.heldout_seed);
    d.get("heldout_sequences", dc.heldout_sequences);
    d.get("window_length", dc.window_length);
    dc.transform.height = cfg.predictor.height;
    dc.transform.width = cfg.predictor.width;
    parse_transform(d.child("transform"), dc.transform);
    auto sy = d.child("synthetic");
    auto& ss = dc.synthetic;
    ss.size = cfg.predictor.height;
    ss.channels = cfg.predictor.channels;
    sy.get("num_sequences", ss.num_sequences);
    sy.get("length", ss.length);
    sy.get("size", ss.size);
    sy.get("channels", ss.channels);
    sy.get("min_sprites", ss.min_sprites);
    sy.get("max_sprites", ss.max_sprites);
    sy.get("min_sprite_size", ss.min_sprite_size);
    sy.get("max_sprite_size", ss.max_sprite_size);
    sy.get("max_speed", ss.max_speed);
    sy.get("seed", ss.seed);
    const auto sprites = sy.raw("sprites");
    if (sprites.IsDefined() && !sprites.IsNull()) {
      if (!sprites.IsSequence()) sy.fail(sprites, "'sprites' must be a list");
      for (const auto& node : sprites) {
        Section sp(node, "dataset.synthetic.sprites[]", source);
        Sprite s;
        get_enum(sp, "shape", kShapes, s.shape);
        sp.get("size", s.size);
        sp.get("color", s.color);
        sp.get("x", s.x);
        sp.get("y", s.y);
        sp.get("vx", s.vx);
        sp.get("vy", s.vy);
        sp.finish();
        ss.sprites.push_back(s);
      }
    }
    sy.finish();
    d.finish();
  }
  {
    auto m = top.child("metrics");
    m.get("horizons", cfg.metrics.horizons);
    auto e = m.child("embedder");
    parse_tap_spec(e.child("frame_backbone"), cfg.metrics.embedder.frame_backbone);
    get_enum(e, "temporal_pooling", kPoolings, cfg.metrics.embedder.temporal_pooling);
    e.get("output_dim", cfg.metrics.embedder.output_dim);
    e.finish();
    m.finish();
  }
  top.finish();
  cfg.train.seed = cfg.seed;
  cfg.train.deterministic = cfg.deterministic;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read config file: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string serialize_run_config(const RunConfig& cfg) {
  YAML::Node root;
  root["output_dir"] = cfg.output_dir;
  root["seed"] = cfg.seed;
  root["deterministic"] = cfg.deterministic;

  const auto& pc = cfg.predictor;
  YAML::Node p;
  p["input_frames"] = pc.input_frames;
  p["channels"] = pc.channels;
  p["height"] = pc.height;
  p["width"] = pc.width;
  p["widths"] = pc.widths;
  p["latent_dim"] = pc.latent_dim;
  p["deterministic_latent"] = pc.deterministic_latent;
  p["skip"]["kind"] = enum_name(kSkipKinds, pc.skip.kind);
  p["skip"]["resolutions"] = pc.skip.resolutions;
  p["skip"]["heads"] = pc.skip.heads;
  p["skip"]["qk_dim"] = pc.skip.qk_dim;
  root["predictor"] = p;

  const auto& tc = cfg.train;
  YAML::Node t;
  t["epochs"] = tc.epochs;
  t["batch_size"] = tc.batch_size;
  t["windows_per_sequence"] = tc.windows_per_sequence;
  t["checkpoint_every"] = tc.checkpoint_every;
  t["optimizer"]["name"] = tc.optimizer.name;
  t["optimizer"]["learning_rate"] = tc.optimizer.learning_rate;
  t["optimizer"]["beta1"] = tc.optimizer.beta1;
  t["optimizer"]["beta2"] = tc.optimizer.beta2;
  t["optimizer"]["eps"] = tc.optimizer.eps;
  t["optimizer"]["weight_decay"] = tc.optimizer.weight_decay;
  t["optimizer"]["momentum"] = tc.optimizer.momentum;
  t["loss"]["perceptual_weight"] = tc.loss.perceptual_weight;
  t["loss"]["reconstruction_weight"] = tc.loss.reconstruction_weight;
  t["loss"]["latent_kl_weight"] = tc.loss.latent_kl_weight;
  t["loss"]["alpha"] = tc.loss.alpha;
  t["schedule"]["enabled"] = tc.schedule.enabled;
  t["schedule"]["start_fraction"] = tc.schedule.start_fraction;
  t["schedule"]["max_self_fed_steps"] = tc.schedule.max_self_fed_steps;
  t["schedule"]["ramp"] = "stepwise-linear";
  root["train"] = t;

  root["features"] = tap_spec_node(cfg.features);

  const auto& dc = cfg.dataset;
  YAML::Node d;
  d["type"] = dc.type;
  d["path"] = dc.path;
  d["heldout_seed"] = dc.heldout_seed;
  d["heldout_sequences"] = dc.heldout_sequences;
  d["window_length"] = dc.window_length;
  d["transform"] = transform_node(dc.transform);
  const auto& ss = dc.synthetic;
  YAML::Node sy;
  sy["num_sequences"] = ss.num_sequences;
  sy["length"] = ss.length;
  sy["size"] = ss.size;
  sy["channels"] = ss.channels;
  sy["min_sprites"] = ss.min_sprites;
  sy["max_sprites"] = ss.max_sprites;
  sy["min_sprite_size"] = ss.min_sprite_size;
  sy["max_sprite_size"] = ss.max_sprite_size;
  sy["max_speed"] = ss.max_speed;
  sy["seed"] = ss.seed;
  if (!ss.sprites.empty()) {
    for (const auto& s : ss.sprites) {
      YAML::Node n;
      n["shape"] = enum_name(kShapes, s.shape);
      n["size"] = s.size;
      n["color"] = s.color;
      n["x"] = s.x;
      n["y"] = s.y;
      n["vx"] = s.vx;
      n["vy"] = s.vy;
      sy["sprites"].push_back(n);
    }
  }
  d["synthetic"] = sy;
  root["dataset"] = d;

  YAML::Node m;
  m["horizons"] = cfg.metrics.horizons;
  m["embedder"]["frame_backbone"] = tap_spec_node(cfg.metrics.embedder.frame_backbone);
  m["embedder"]["temporal_pooling"] =
      enum_name(kPoolings, cfg.metrics.embedder.temporal_pooling);
  m["embedder"]["output_dim"] = cfg.metrics.embedder.output_dim;
  root["metrics"] = m;

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace vidpred::cli
