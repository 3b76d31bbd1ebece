// Copyright 2026 The qlatent Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qlatent/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "qlatent/config.hpp"

namespace qlatent::ckpt {

namespace {

constexpr char kMagic[4] = {'Q', 'L', 'D', 'M'};

class Writer {
  public:
    void bytes(const void *p, std::size_t n) {
        const auto *c = static_cast<const char *>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    template <class T> void le(T v) {
        using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        U u;
        std::memcpy(&u, &v, sizeof u);
        for (std::size_t i = 0; i < sizeof u; ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void str(const std::string &s) {
        le(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void floats(const std::vector<float> &v) {
        for (float f : v) le(f);
    }
    [[nodiscard]] const std::vector<char> &data() const { return buf_; }

  private:
    std::vector<char> buf_;
};

class Reader {
  public:
    explicit Reader(std::vector<char> data, std::string source) : buf_(std::move(data)), source_(std::move(source)) {}
    void bytes(void *p, std::size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <class T> T le() {
        using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        need(sizeof(U));
        U u = 0;
        for (std::size_t i = 0; i < sizeof u; ++i)
            u |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += sizeof u;
        T v;
        std::memcpy(&v, &u, sizeof v);
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::string str() {
        const auto n = le<std::uint32_t>();
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<float> floats(std::size_t n) {
        if (n > (buf_.size() - pos_) / 4) fail("truncated tensor data");
        std::vector<float> v(n);
        for (auto &f : v) f = le<float>();
        return v;
    }
    [[nodiscard]] bool at_end() const { return pos_ == buf_.size(); }
    [[noreturn]] void fail(const std::string &what) const {
        throw std::runtime_error("corrupt checkpoint " + source_ + ": " + what);
    }

  private:
    void need(std::size_t n) const {
        if (n > buf_.size() - pos_) fail("unexpected end of file");
    }
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::string source_;
};

std::vector<float> to_floats(std::span<const double> v) { return {v.begin(), v.end()}; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

void copy_params(const Checkpoint &c, const nn::NamedParams &params, const std::string &source) {
    std::map<std::string, const NamedArray *> by_name;
    for (const auto &t : c.tensors) by_name[t.name] = &t;
    if (by_name.size() != params.size()) {
        throw std::runtime_error("checkpoint " + source + " holds " + std::to_string(by_name.size()) +
                                 " tensors, model expects " + std::to_string(params.size()));
    }
    for (const auto &[name, p] : params) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint " + source + " lacks tensor " + name);
        const auto &a = *it->second;
        if (!std::equal(a.shape.begin(), a.shape.end(), p.shape().begin(), p.shape().end())) {
            throw std::runtime_error("checkpoint " + source + " tensor " + name + " has the wrong shape");
        }
        auto dst = ad::Tensor(p).mutable_data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(a.values[i]);
    }
}

cfg::Config parse_config(const std::string &text) { return cfg::Config::from_string(text); }

ansatz::AnsatzKind read_kind(cfg::Config &c) { return ansatz::parse_kind(c.get_string("quantum_kind", "ESE2")); }

} // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::VAE ? "vae" : "unet"; }

void write_file(const std::filesystem::path &path, const Checkpoint &c) {
    Writer w;
    w.bytes(kMagic, 4);
    w.le(kFormatVersion);
    w.le(static_cast<std::uint32_t>(c.kind));
    w.str(c.config);
    w.le(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto &t : c.tensors) {
        w.str(t.name);
        w.le(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.le(d);
        w.floats(t.values);
    }
    w.u8(c.optimizer ? 1 : 0);
    if (c.optimizer) {
        w.le(c.optimizer->step);
        for (std::size_t i = 0; i < c.tensors.size(); ++i) {
            w.floats(c.optimizer->m.at(i));
            w.floats(c.optimizer->v.at(i));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path.string());
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic");
    const auto version = r.le<std::uint32_t>();
    if (version != kFormatVersion) {
        throw std::runtime_error("checkpoint " + path.string() + " has format version " + std::to_string(version) +
                                 ", expected " + std::to_string(kFormatVersion));
    }
    Checkpoint c;
    const auto kind = r.le<std::uint32_t>();
    if (kind > 1) r.fail("unknown model kind");
    c.kind = static_cast<ModelKind>(kind);
    c.config = r.str();
    const auto n = r.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedArray a;
        a.name = r.str();
        const auto rank = r.le<std::uint32_t>();
        if (rank > 8) r.fail("tensor rank too large");
        std::uint64_t numel = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            a.shape.push_back(r.le<std::uint64_t>());
            numel *= a.shape.back();
        }
        a.values = r.floats(numel);
        c.tensors.push_back(std::move(a));
    }
    const auto has_opt = r.u8();
    if (has_opt > 1) r.fail("bad optimizer flag");
    if (has_opt) {
        OptimizerState s;
        s.step = r.le<std::uint64_t>();
        for (const auto &t : c.tensors) {
            s.m.push_back(r.floats(t.values.size()));
            s.v.push_back(r.floats(t.values.size()));
        }
        c.optimizer = std::move(s);
    }
    if (!r.at_end()) r.fail("trailing bytes");
    return c;
}

std::string vae_config_text(const models::VAEConfig &c, double latent_scale) {
    std::ostringstream s;
    s << "image_size = " << c.image_size << "\nlatent_size = " << c.latent_size
      << "\nlatent_channels = " << c.latent_channels << "\nbase_channels = " << c.base_channels
      << "\nquantum = " << (c.quantum ? "true" : "false") << "\nquantum_qubits = " << c.quantum_cfg.n_qubits
      << "\nquantum_layers = " << c.quantum_cfg.n_layers << "\nquantum_kind = " << ansatz::to_string(c.quantum_cfg.kind)
      << "\nkl_weight = " << fmt(c.kl_weight) << "\nssim_weight = " << fmt(c.ssim_weight)
      << "\nlatent_scale = " << fmt(latent_scale) << "\n";
    return s.str();
}

std::string unet_config_text(const models::UNetConfig &c) {
    std::ostringstream s;
    s << "in_channels = " << c.in_channels << "\nlatent_size = " << c.latent_size
      << "\nbase_channels = " << c.base_channels << "\nn_ublocks = " << c.n_ublocks
      << "\nn_mid_resblocks = " << c.n_mid_resblocks << "\nquantum = " << (c.quantum ? "true" : "false")
      << "\nquantum_qubits = " << c.quantum_cfg.n_qubits << "\nquantum_layers = " << c.quantum_cfg.n_layers
      << "\nquantum_kind = " << ansatz::to_string(c.quantum_cfg.kind) << "\nn_classes = " << c.n_classes
      << "\ncdcnn_nodes = " << c.cdcnn_nodes << "\n";
    return s.str();
}

Checkpoint capture(ModelKind kind, std::string config, const nn::NamedParams &params, const optim::Optimizer *opt) {
    Checkpoint c;
    c.kind = kind;
    c.config = std::move(config);
    for (const auto &[name, p] : params) {
        c.tensors.push_back({name, {p.shape().begin(), p.shape().end()}, to_floats(p.data())});
    }
    if (opt) {
        if (opt->params().size() != params.size()) throw std::invalid_argument("optimizer does not match the model");
        OptimizerState s;
        s.step = opt->step_count();
        for (std::size_t i = 0; i < params.size(); ++i) {
            s.m.push_back(to_floats(opt->first_moments()[i]));
            s.v.push_back(to_floats(opt->second_moments()[i]));
        }
        c.optimizer = std::move(s);
    }
    return c;
}

void save_vae(const std::filesystem::path &path, const models::VAE &vae, const optim::Optimizer *opt) {
    write_file(path, capture(ModelKind::VAE, vae_config_text(vae.config(), vae.latent_scale), vae.parameters(), opt));
}

void save_unet(const std::filesystem::path &path, const models::UNet &unet, const optim::Optimizer *opt) {
    write_file(path, capture(ModelKind::UNet, unet_config_text(unet.config()), unet.parameters(), opt));
}

LoadedVAE load_vae(const std::filesystem::path &path) {
    auto c = read_file(path);
    if (c.kind != ModelKind::VAE) throw std::runtime_error("checkpoint " + path.string() + " is not a vae");
    models::VAEConfig vc;
    double scale = 1.0;
    try {
        auto k = parse_config(c.config);
        vc.image_size = static_cast<int>(k.get_int("image_size", 64, 8, 4096));
        vc.latent_size = static_cast<int>(k.get_int("latent_size", 8, 1, 512));
        vc.latent_channels = static_cast<int>(k.get_int("latent_channels", 4, 1, 1024));
        vc.base_channels = static_cast<int>(k.get_int("base_channels", 16, 1, 4096));
        vc.quantum = k.get_bool("quantum", false);
        vc.quantum_cfg.n_qubits = static_cast<int>(k.get_int("quantum_qubits", 4, 1, 64));
        vc.quantum_cfg.n_layers = static_cast<int>(k.get_int("quantum_layers", 2, 1, 1000));
        vc.quantum_cfg.kind = read_kind(k);
        vc.kl_weight = k.get_double("kl_weight", 1e-6, 0, 1e9);
        vc.ssim_weight = k.get_double("ssim_weight", 1.0, 0, 1e9);
        scale = k.get_double("latent_scale", 1.0, 1e-12, 1e12);
        k.reject_unused();
    } catch (const std::invalid_argument &e) {
        throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    LoadedVAE out{models::VAE(vc, 0), c.optimizer};
    out.model.latent_scale = scale;
    copy_params(c, out.model.parameters(), path.string());
    return out;
}

LoadedUNet load_unet(const std::filesystem::path &path) {
    auto c = read_file(path);
    if (c.kind != ModelKind::UNet) throw std::runtime_error("checkpoint " + path.string() + " is not a unet");
    models::UNetConfig uc;
    try {
        auto k = parse_config(c.config);
        uc.in_channels = static_cast<int>(k.get_int("in_channels", 4, 1, 1024));
        uc.latent_size = static_cast<int>(k.get_int("latent_size", 8, 1, 512));
        uc.base_channels = static_cast<int>(k.get_int("base_channels", 32, 2, 4096));
        uc.n_ublocks = static_cast<int>(k.get_int("n_ublocks", 5, 1, 64));
        uc.n_mid_resblocks = static_cast<int>(k.get_int("n_mid_resblocks", 2, 0, 64));
        uc.quantum = k.get_bool("quantum", false);
        uc.quantum_cfg.n_qubits = static_cast<int>(k.get_int("quantum_qubits", 4, 1, 64));
        uc.quantum_cfg.n_layers = static_cast<int>(k.get_int("quantum_layers", 2, 1, 1000));
        uc.quantum_cfg.kind = read_kind(k);
        uc.n_classes = static_cast<int>(k.get_int("n_classes", 3, 0, 1000));
        uc.cdcnn_nodes = static_cast<int>(k.get_int("cdcnn_nodes", 0, 0, 64));
        k.reject_unused();
    } catch (const std::invalid_argument &e) {
        throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    LoadedUNet out{models::UNet(uc, 0), c.optimizer};
    copy_params(c, out.model.parameters(), path.string());
    return out;
}

void restore_optimizer(optim::Optimizer &opt, const OptimizerState &state) {
    std::vector<std::vector<double>> m, v;
    for (const auto &x : state.m) m.emplace_back(x.begin(), x.end());
    for (const auto &x : state.v) v.emplace_back(x.begin(), x.end());
    opt.load_state(state.step, std::move(m), std::move(v));
}

} // namespace qlatent::ckpt
