#include "vidpred/checkpoint.hpp"

#include <filesystem>
#include <sstream>

#include <ATen/core/ivalue.h>
#include <nlohmann/json.hpp>

#include "vidpred/errors.hpp"

namespace vidpred {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "vidpred-checkpoint/1";

const char* skip_kind_name(SkipKind k) {
  switch (k) {
    case SkipKind::None:
      return "none";
    case SkipKind::Residual:
      return "residual";
    case SkipKind::Attention:
      return "attention";
  }
  return "none";
}

SkipKind skip_kind_from(const std::string& s) {
  if (s == "none") return SkipKind::None;
  if (s == "residual") return SkipKind::Residual;
  if (s == "attention") return SkipKind::Attention;
  throw ConfigError("unknown skip kind '" + s + "'");
}

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key,
                        const std::string& path) {
  c10::IValue v;
  if (!archive.try_read(key, v) || !v.isString()) {
    throw IoError("checkpoint '" + path + "' lacks the '" + key + "' record");
  }
  return v.toStringRef();
}

torch::serialize::InputArchive open_archive(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError("checkpoint not found: " + path);
  }
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path);
  } catch (const c10::Error& e) {
    throw IoError("cannot read checkpoint '" + path + "': " + e.what_without_backtrace());
  }
  if (read_string(archive, "format", path) != kFormat) {
    throw IoError("'" + path + "' is not a vidpred checkpoint");
  }
  return archive;
}

Checkpoint read_meta(torch::serialize::InputArchive& archive, const std::string& path) {
  Checkpoint meta;
  meta.config = predictor_config_from_json(read_string(archive, "predictor_config", path));
  const auto progress = json::parse(read_string(archive, "progress", path));
  meta.progress.epoch = progress.at("epoch").get<int64_t>();
  meta.progress.total_epochs = progress.at("total_epochs").get<int64_t>();
  meta.progress.seed = progress.at("seed").get<uint64_t>();
  c10::IValue run;
  if (archive.try_read("run_config", run) && run.isString()) {
    meta.run_config = run.toStringRef();
  }
  return meta;
}

}  // namespace

std::string predictor_config_to_json(const PredictorConfig& cfg) {
  json j;
  j["input_frames"] = cfg.input_frames;
  j["channels"] = cfg.channels;
  j["height"] = cfg.height;
  j["width"] = cfg.width;
  j["widths"] = cfg.widths;
  j["latent_dim"] = cfg.latent_dim;
  j["deterministic_latent"] = cfg.deterministic_latent;
  j["skip"] = {{"kind", skip_kind_name(cfg.skip.kind)},
               {"resolutions", cfg.skip.resolutions},
               {"heads", cfg.skip.heads},
               {"qk_dim", cfg.skip.qk_dim}};
  return j.dump();
}

PredictorConfig predictor_config_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    PredictorConfig cfg;
    cfg.input_frames = j.at("input_frames").get<int64_t>();
    cfg.channels = j.at("channels").get<int64_t>();
    cfg.height = j.at("height").get<int64_t>();
    cfg.width = j.at("width").get<int64_t>();
    cfg.widths = j.at("widths").get<std::vector<int64_t>>();
    cfg.latent_dim = j.at("latent_dim").get<int64_t>();
    cfg.deterministic_latent = j.at("deterministic_latent").get<bool>();
    const auto& s = j.at("skip");
    cfg.skip.kind = skip_kind_from(s.at("kind").get<std::string>());
    cfg.skip.resolutions = s.at("resolutions").get<std::vector<int64_t>>();
    cfg.skip.heads = s.at("heads").get<int64_t>();
    cfg.skip.qk_dim = s.at("qk_dim").get<int64_t>();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed predictor config record: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, Predictor& model, const Checkpoint& meta,
                     torch::optim::Optimizer* optimizer) {
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kFormat)));
  archive.write("predictor_config", c10::IValue(predictor_config_to_json(model->config())));
  const json progress = {{"epoch", meta.progress.epoch},
                         {"total_epochs", meta.progress.total_epochs},
                         {"seed", meta.progress.seed}};
  archive.write("progress", c10::IValue(progress.dump()));
  archive.write("run_config", c10::IValue(meta.run_config));

  torch::serialize::OutputArchive weights;
  for (const auto& item : model->named_parameters(true)) {
    weights.write(item.key(), item.value().detach());
  }
  archive.write("model", weights);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive opt;
    optimizer->save(opt);
    archive.write("optimizer", opt);
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  try {
    archive.save_to(path);
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint '" + path + "': " + e.what_without_backtrace());
  }
}

Checkpoint read_checkpoint_meta(const std::string& path) {
  auto archive = open_archive(path);
  return read_meta(archive, path);
}

Checkpoint load_checkpoint_into(const std::string& path, Predictor& model,
                                torch::optim::Optimizer* optimizer) {
  auto archive = open_archive(path);
  auto meta = read_meta(archive, path);
  if (!(meta.config == model->config())) {
    throw ConfigError("checkpoint '" + path + "' was written for a different predictor config");
  }
  torch::serialize::InputArchive weights;
  if (!archive.try_read("model", weights)) {
    throw IoError("checkpoint '" + path + "' has no model weights");
  }
  torch::NoGradGuard no_grad;
  for (auto& item : model->named_parameters(true)) {
    torch::Tensor stored;
    if (!weights.try_read(item.key(), stored)) {
      throw ConfigError("checkpoint '" + path + "' is missing weight '" + item.key() + "'");
    }
    if (stored.sizes() != item.value().sizes()) {
      std::ostringstream msg;
      msg << "checkpoint '" << path << "' weight '" << item.key() << "' has shape "
          << stored.sizes() << ", config expects " << item.value().sizes();
      throw ConfigError(msg.str());
    }
    item.value().copy_(stored);
  }
  if (optimizer != nullptr) {
    torch::serialize::InputArchive opt;
    if (!archive.try_read("optimizer", opt)) {
      throw IoError("checkpoint '" + path + "' has no optimizer state to resume from");
    }
    optimizer->load(opt);
  }
  return meta;
}

Predictor load_checkpoint(const std::string& path, Checkpoint* meta) {
  const auto stored = read_checkpoint_meta(path);
  Predictor model(stored.config);
  auto loaded = load_checkpoint_into(path, model);
  if (meta != nullptr) {
    *meta = loaded;
  }
  return model;
}

}  // namespace vidpred
