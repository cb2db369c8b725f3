#include "sparse_score/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sparse_score {

using json = nlohmann::json;

std::string checkpoint_to_json(const ScoreModel& model, const std::string& config_hash) {
  const Architecture& arch = model.architecture();
  json j;
  j["format"] = "sparse_score.checkpoint";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = config_hash;
  j["kappa"] = model.kappa();
  j["architecture"] = {{"dim", arch.dim},
                       {"hidden", arch.hidden},
                       {"time_feat_dim", arch.time_feat_dim},
                       {"fourier_scale", arch.fourier_scale}};
  const Constraints& c = model.constraints();
  j["constraints"] = {{"l1_radius", c.l1_radius},
                      {"output_l1_cap", c.output_l1_cap},
                      {"output_cap", c.output_cap}};
  j["frequencies"] = std::vector<double>(model.frequencies().data(),
                                         model.frequencies().data() + model.frequencies().size());
  json layers = json::array();
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const auto w = model.weight(k);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index col = 0; col < w.cols(); ++col) flat.push_back(w(r, col));
    }
    layers.push_back({{"name", "layer" + std::to_string(k) + ".weight"},
                      {"shape", {w.rows(), w.cols()}},
                      {"data", flat}});
    const auto b = model.bias(k);
    layers.push_back({{"name", "layer" + std::to_string(k) + ".bias"},
                      {"shape", {b.size()}},
                      {"data", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

ScoreModel checkpoint_from_json(const std::string& text, std::string* config_hash) {
  const json j = json::parse(text);
  if (j.value("format", "") != "sparse_score.checkpoint") {
    throw std::runtime_error("checkpoint: unrecognized format");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + j.at("version").dump());
  }
  Architecture arch;
  const json& a = j.at("architecture");
  arch.dim = a.at("dim").get<Index>();
  arch.hidden = a.at("hidden").get<std::vector<Index>>();
  arch.time_feat_dim = a.at("time_feat_dim").get<Index>();
  arch.fourier_scale = a.at("fourier_scale").get<double>();

  Constraints cons;
  const json& c = j.at("constraints");
  cons.l1_radius = c.at("l1_radius").get<double>();
  cons.output_l1_cap = c.at("output_l1_cap").get<double>();
  cons.output_cap = c.at("output_cap").get<bool>();

  const auto freqs = j.at("frequencies").get<std::vector<double>>();
  Vector frequencies = Eigen::Map<const Vector>(freqs.data(), static_cast<Index>(freqs.size()));

  // Build an empty model for the layout, then fill it layer by layer.
  ScoreModel layout = ScoreModel::from_parts(
      arch, Vector::Zero([&] {
        Index in = arch.input_dim();
        Index total = 0;
        for (Index h : arch.hidden) {
          total += h * in + h;
          in = h;
        }
        return total + arch.dim * in + arch.dim;
      }()),
      frequencies, 1.0, cons);
  Vector theta = layout.theta();

  const json& layers = j.at("layers");
  if (layers.size() != 2 * layout.layer_count()) {
    throw std::runtime_error("checkpoint: layer count does not match architecture");
  }
  for (std::size_t k = 0; k < layout.layer_count(); ++k) {
    const json& w = layers.at(2 * k);
    const json& b = layers.at(2 * k + 1);
    const auto wshape = w.at("shape").get<std::vector<Index>>();
    if (wshape.size() != 2 || wshape[0] != layout.layer_out(k) || wshape[1] != layout.layer_in(k)) {
      throw std::runtime_error("checkpoint: bad shape for " + w.value("name", std::string("?")));
    }
    const auto wdata = w.at("data").get<std::vector<double>>();
    const auto bdata = b.at("data").get<std::vector<double>>();
    if (static_cast<Index>(wdata.size()) != wshape[0] * wshape[1] ||
        static_cast<Index>(bdata.size()) != layout.layer_out(k)) {
      throw std::runtime_error("checkpoint: data length mismatch in layer " + std::to_string(k));
    }
    Eigen::Map<Matrix> W(theta.data() + layout.weight_offset(k), wshape[0], wshape[1]);
    for (Index r = 0; r < wshape[0]; ++r) {
      for (Index col = 0; col < wshape[1]; ++col) {
        W(r, col) = wdata[static_cast<std::size_t>(r * wshape[1] + col)];
      }
    }
    for (Index r = 0; r < layout.layer_out(k); ++r) {
      theta(layout.bias_offset(k) + r) = bdata[static_cast<std::size_t>(r)];
    }
  }
  if (config_hash) *config_hash = j.value("config_hash", std::string());
  return ScoreModel::from_parts(arch, std::move(theta), std::move(frequencies),
                                j.at("kappa").get<double>(), cons);
}

void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model,
                     const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << checkpoint_to_json(model, config_hash) << '\n';
}

ScoreModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str(), config_hash);
}

}  // namespace sparse_score
