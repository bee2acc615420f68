#include "tropattn/network.hpp"

#include <nlohmann/json.hpp>

namespace tropattn {

BlockNetwork::BlockNetwork(Eigen::Index dim, std::vector<BlockLayer> layers)
    : dim_(dim), layers_(std::move(layers)) {
  if (dim_ <= 0) throw Error("network dimension must be positive");
  for (const auto& layer : layers_) {
    if (layer.heads.empty()) throw Error("every layer needs at least one head");
    Eigen::Index concat = 0;
    for (const auto& h : layer.heads) {
      if (h.input_dim() != dim_) throw Error("head query map does not accept the model dimension");
      concat += h.value_dim();
    }
    if (layer.w_o) {
      if (layer.w_o->rows() != dim_ || layer.w_o->cols() != concat)
        throw Error("output projection has the wrong shape");
    } else if (concat != dim_) {
      throw Error("identity output projection needs concatenated values of the model dimension");
    }
    if (layer.ffn) {
      const auto& f = *layer.ffn;
      if (f.w1.cols() != dim_ || f.b1.size() != f.w1.rows() || f.w2.rows() != dim_ ||
          f.w2.cols() != f.w1.rows() || f.b2.size() != dim_)
        throw Error("feed-forward weights have inconsistent shapes");
    }
  }
}

std::string Signature::key() const {
  std::string out;
  for (const auto& l : layers) {
    for (auto r : l.routing) out.append(reinterpret_cast<const char*>(&r), sizeof(r));
    out.push_back('|');
    unsigned char acc = 0;
    int nbits = 0;
    auto flush_bits = [&](const std::vector<bool>& bits) {
      for (bool b : bits) {
        acc = static_cast<unsigned char>(acc | (b ? 1U << nbits : 0U));
        if (++nbits == 8) {
          out.push_back(static_cast<char>(acc));
          acc = 0;
          nbits = 0;
        }
      }
      if (nbits) out.push_back(static_cast<char>(acc));
      acc = 0;
      nbits = 0;
    };
    flush_bits(l.ffn_bits);
    out.push_back('|');
    flush_bits(l.dominant);
    out.push_back(';');
  }
  return out;
}

ForwardResult forward(const Vector& x, const BlockNetwork& net, Temperature temp) {
  if (x.size() != net.dim()) throw Error("dimension mismatch");
  ForwardResult out{x, {}};
  out.sig.layers.reserve(net.depth());
  for (const auto& layer : net.layers()) {
    LayerSignature ls;
    ls.routing.reserve(layer.heads.size());
    Eigen::Index concat = 0;
    for (const auto& h : layer.heads) concat += h.value_dim();
    Vector gathered(concat);
    Eigen::Index offset = 0;
    for (const auto& h : layer.heads) {
      const Vector q = h.project_query(out.y);
      if (temp.is_zero()) {
        const auto r = hard_routing(q, h);
        if (r.is_tie()) out.sig.boundary = true;
        ls.routing.push_back(static_cast<std::uint32_t>(r.winner));
        gathered.segment(offset, h.value_dim()) = h.value(r.winner);
      } else {
        const Vector w = attention_weights(q, h, temp);
        Eigen::Index arg = 0;
        const double top = w.maxCoeff(&arg);
        ls.routing.push_back(static_cast<std::uint32_t>(arg));
        ls.dominant.push_back(top > 0.5);
        gathered.segment(offset, h.value_dim()) = h.values().transpose() * w;
      }
      offset += h.value_dim();
    }
    Vector u = layer.w_o ? Vector(*layer.w_o * gathered) : gathered;
    if (layer.residual) u += out.y;

    if (layer.ffn) {
      const auto& f = *layer.ffn;
      Vector pre = f.w1 * u + f.b1;
      ls.ffn_bits.resize(static_cast<std::size_t>(pre.size()));
      for (Eigen::Index i = 0; i < pre.size(); ++i) {
        if (std::abs(pre[i]) <= kTieTolerance) out.sig.boundary = true;
        ls.ffn_bits[static_cast<std::size_t>(i)] = pre[i] > 0.0;
        pre[i] = std::max(pre[i], 0.0);
      }
      Vector y = f.w2 * pre + f.b2;
      if (f.residual) y += u;
      out.y = std::move(y);
    } else {
      out.y = std::move(u);
    }
    out.sig.layers.push_back(std::move(ls));
  }
  return out;
}

nlohmann::json to_json(const BlockNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : l.heads) heads.push_back(to_json(h));
    nlohmann::json jl = {{"heads", std::move(heads)}, {"residual", l.residual}};
    jl["w_o"] = l.w_o ? matrix_to_json(*l.w_o) : nlohmann::json("identity");
    if (l.ffn) {
      jl["ffn"] = {{"w1", matrix_to_json(l.ffn->w1)},
                   {"b1", to_std(l.ffn->b1)},
                   {"w2", matrix_to_json(l.ffn->w2)},
                   {"b2", to_std(l.ffn->b2)},
                   {"residual", l.ffn->residual}};
    }
    layers.push_back(std::move(jl));
  }
  return {{"dim", net.dim()}, {"layers", std::move(layers)}};
}

BlockNetwork network_from_json(const nlohmann::json& j) {
  std::vector<BlockLayer> layers;
  for (const auto& jl : j.at("layers")) {
    BlockLayer l;
    for (const auto& jh : jl.at("heads")) l.heads.push_back(head_from_json(jh));
    l.residual = jl.value("residual", true);
    if (jl.contains("w_o") && !jl.at("w_o").is_string()) l.w_o = matrix_from_json(jl.at("w_o"));
    if (jl.contains("ffn")) {
      const auto& jf = jl.at("ffn");
      l.ffn = FeedForward{matrix_from_json(jf.at("w1")),
                          to_vector(jf.at("b1").get<std::vector<double>>()),
                          matrix_from_json(jf.at("w2")),
                          to_vector(jf.at("b2").get<std::vector<double>>()),
                          jf.value("residual", false)};
    }
    layers.push_back(std::move(l));
  }
  return BlockNetwork(j.at("dim").get<Eigen::Index>(), std::move(layers));
}

}  // namespace tropattn
