#include "mhaff/explain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mhaff/detail/text_util.hpp"

namespace mhaff::explain {

AttentionSummary export_attention(const std::vector<model::Prediction>& preds, const std::vector<int>& labels,
                                  std::size_t heads, std::size_t classes) {
  if (preds.size() != labels.size()) throw Error(ErrorCode::kSizeMismatch, "predictions and labels differ in length");
  AttentionSummary s;
  s.heads = heads;
  s.classes = classes;
  s.counts.assign(classes, 0);
  s.radiomics.assign(heads + 1, std::vector<double>(classes, 0.0));
  s.deep.assign(heads + 1, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(labels[i]));
    }
    const auto c = static_cast<std::size_t>(labels[i]);
    if (preds[i].attention.size() != heads) throw Error(ErrorCode::kShapeMismatch, "prediction has no per-head attention");
    ++s.counts[c];
    for (std::size_t j = 0; j < heads; ++j) {
      const auto& a = preds[i].attention[j];
      double deep = 0;
      for (std::size_t t = 1; t < a.size(); ++t) deep += a[t];
      s.radiomics[j][c] += a[0];
      s.deep[j][c] += deep;
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (s.counts[c] == 0) continue;
    const double n = static_cast<double>(s.counts[c]);
    for (std::size_t j = 0; j < heads; ++j) {
      s.radiomics[j][c] /= n;
      s.deep[j][c] /= n;
      s.radiomics[heads][c] += s.radiomics[j][c];
      s.deep[heads][c] += s.deep[j][c];
    }
    s.radiomics[heads][c] /= static_cast<double>(heads);
    s.deep[heads][c] /= static_cast<double>(heads);
  }
  return s;
}

std::string format_attention_csv(const AttentionSummary& s, const ConfigEcho& config) {
  std::ostringstream os;
  os << format_config_comments(config);
  os << "head,class,count,radiomics,deep\n";
  for (std::size_t j = 0; j <= s.heads; ++j)
    for (std::size_t c = 0; c < s.classes; ++c) {
      os << (j == s.heads ? std::string("all") : std::to_string(j)) << ',' << c << ',' << s.counts[c] << ',';
      if (s.counts[c] == 0) {
        os << "NA,NA\n";
      } else {
        os << detail::format_double(s.radiomics[j][c]) << ',' << detail::format_double(s.deep[j][c]) << '\n';
      }
    }
  return os.str();
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t in, std::size_t out) {
  std::vector<double> dst(out * out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const auto coord = [&](std::size_t o, std::size_t& i0, std::size_t& i1, double& t) {
    double c = (static_cast<double>(o) + 0.5) * scale - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::size_t>(std::floor(c));
    i1 = std::min(i0 + 1, in - 1);
    t = c - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out; ++y) {
    std::size_t y0, y1;
    double ty;
    coord(y, y0, y1, ty);
    for (std::size_t x = 0; x < out; ++x) {
      std::size_t x0, x1;
      double tx;
      coord(x, x0, x1, tx);
      const double top = src[y0 * in + x0] * (1 - tx) + src[y0 * in + x1] * tx;
      const double bottom = src[y1 * in + x0] * (1 - tx) + src[y1 * in + x1] * tx;
      dst[y * out + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return dst;
}

std::vector<Heatmap> grad_cam(const model::ModelConfig& c, const nn::ParamMap<float>& params, const model::ModelInput& input,
                              std::size_t target) {
  if (target >= c.m) throw Error(ErrorCode::kLabelOutOfRange, "target class " + std::to_string(target));
  if (c.precomputed || c.fusion == model::Fusion::kRadiomicsOnly) {
    throw Error(ErrorCode::kInvalidValue, "Grad-CAM needs the image backbone");
  }
  nn::Graph<float> g;
  const auto bound = model::bind_params(g, params, true);
  const auto f = model::forward_pass(g, c, bound, input);
  g.backward(nn::pick(f.logits, target));
  const auto& shape = f.feature_maps.shape();  // (n, C, s, s)
  const std::size_t channels = shape[1], side = shape[2], area = side * side;
  const auto act = f.feature_maps.value();
  const auto grad = f.feature_maps.grad();
  std::vector<Heatmap> maps;
  for (std::size_t n = 0; n < c.n; ++n) {
    std::vector<double> cam(area, 0.0);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::size_t base = (n * channels + ch) * area;
      double w = 0;
      for (std::size_t i = 0; i < area; ++i) w += grad[base + i];
      w /= static_cast<double>(area);
      for (std::size_t i = 0; i < area; ++i) cam[i] += w * act[base + i];
    }
    for (auto& v : cam) v = std::max(v, 0.0);
    auto up = resize_bilinear(cam, side, c.roi_side);
    const double mx = *std::max_element(up.begin(), up.end());
    for (auto& v : up) v = mx > 0 ? std::clamp(v / mx, 0.0, 1.0) : 0.0;
    maps.push_back(std::move(up));
  }
  return maps;
}

std::string format_pgm(const Heatmap& map, std::size_t side) {
  std::ostringstream os;
  os << "P2\n" << side << ' ' << side << "\n255\n";
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      os << (x ? " " : "") << static_cast<int>(std::lround(std::clamp(map[y * side + x], 0.0, 1.0) * 255.0));
    }
    os << '\n';
  }
  return os.str();
}

Heatmap parse_pgm(const std::string& text, std::size_t* side_out) {
  const auto tokens = detail::split_whitespace(text);
  if (tokens.size() < 4 || tokens[0] != "P2") throw Error(ErrorCode::kBadMagic, "not an ASCII PGM");
  std::int64_t w = 0, h = 0, maxval = 0;
  if (!detail::parse_int(tokens[1], w) || !detail::parse_int(tokens[2], h) || !detail::parse_int(tokens[3], maxval) || w <= 0 ||
      h != w || maxval <= 0) {
    throw Error(ErrorCode::kInvalidValue, "bad PGM header");
  }
  const auto count = static_cast<std::size_t>(w * h);
  if (tokens.size() != 4 + count) throw Error(ErrorCode::kTruncated, "PGM pixel count");
  Heatmap map(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::int64_t v = 0;
    if (!detail::parse_int(tokens[4 + i], v) || v < 0 || v > maxval) throw Error(ErrorCode::kInvalidValue, "PGM pixel");
    map[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  if (side_out) *side_out = static_cast<std::size_t>(w);
  return map;
}

}  // namespace mhaff::explain
