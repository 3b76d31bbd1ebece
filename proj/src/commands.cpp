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

#include "qlatent/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qlatent/ansatz.hpp"
#include "qlatent/checkpoint.hpp"
#include "qlatent/diagnostics.hpp"
#include "qlatent/diffusion.hpp"
#include "qlatent/manifest.hpp"
#include "qlatent/metrics.hpp"
#include "qlatent/noise.hpp"
#include "qlatent/plot.hpp"
#include "qlatent/synthetic.hpp"

namespace qlatent::cmd {

namespace fs = std::filesystem;
using ad::Tensor;

namespace {

constexpr long long kMaxSeed = 0x7fffffffffffffffLL;

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)};
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.10g", v);
    return b;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void progress(const std::string &line) { std::cerr << line << std::endl; }

// Shared tail of every settings parse: reject typos and echo what was resolved.
void seal(cfg::Config &c, const fs::path &out) {
    c.reject_unused();
    write_text(out / "config.resolved.ini", c.resolved_ini());
}

nn::QuantumLayerConfig read_quantum(cfg::Config &c) {
    nn::QuantumLayerConfig q;
    q.n_qubits = static_cast<int>(c.get_int("quantum_qubits", 4, 2, 14));
    q.n_layers = static_cast<int>(c.get_int("quantum_layers", 2, 1, 64));
    q.kind = ansatz::parse_kind(c.get_string("quantum_kind", "ESE2"));
    return q;
}

optim::OptimizerConfig read_optimizer(cfg::Config &c, const std::string &default_kind) {
    optim::OptimizerConfig o;
    const auto kind = c.get_string("optimizer", default_kind);
    if (kind == "adam") {
        o.kind = optim::OptimizerKind::Adam;
    } else if (kind == "adamw") {
        o.kind = optim::OptimizerKind::AdamW;
    } else {
        throw std::invalid_argument("config key 'optimizer': expected adam or adamw, got '" + kind + "'");
    }
    o.lr = c.get_double("lr", 1e-3, 1e-12, 10.0);
    o.weight_decay = c.get_double("weight_decay", 0.01, 0.0, 1.0);
    o.validate();
    return o;
}

diffusion::DiffusionSchedule read_schedule(cfg::Config &c) {
    const int T = static_cast<int>(c.get_int("T", 1000, 2, 100000));
    const double b0 = c.get_double("beta_start", 1e-4, 1e-12, 0.999);
    const double b1 = c.get_double("beta_end", 0.02, 1e-12, 0.999);
    return diffusion::build_schedule(T, b0, b1);
}

metrics::EvalOptions read_eval(cfg::Config &c) {
    metrics::EvalOptions e;
    e.embedding.kind = metrics::parse_embedding(c.get_string("embedding", "random_projection"));
    e.embedding.output_dim = static_cast<int>(c.get_int("embedding_dim", 64, 2, 1 << 20));
    e.embedding.seed = static_cast<std::uint64_t>(c.get_int("embedding_seed", 0, 0, kMaxSeed));
    e.embedding.validate();
    e.sigma = c.get_double("sigma", 10.0, 1e-12, 1e12);
    e.k = static_cast<int>(c.get_int("k", 3, 1, 1000));
    return e;
}

void require_exists(const fs::path &p, const std::string &what) {
    if (!fs::exists(p)) throw std::runtime_error(what + " not found: " + p.string());
}

// Means of `chunks` consecutive equal slices of a loss trace.
std::vector<double> chunk_means(const std::vector<double> &v, std::size_t chunks) {
    std::vector<double> out;
    if (v.size() < chunks) return out;
    const std::size_t per = v.size() / chunks;
    for (std::size_t k = 0; k < chunks; ++k) {
        const auto b = v.begin() + static_cast<long>(k * per);
        out.push_back(std::accumulate(b, b + static_cast<long>(per), 0.0) / static_cast<double>(per));
    }
    return out;
}

void add_chunks(Summary &s, const std::vector<double> &losses) {
    const auto m = chunk_means(losses, 5);
    for (std::size_t i = 0; i < m.size(); ++i) s["smoothed_loss_" + std::to_string(i)] = m[i];
}

std::vector<std::vector<double>> snapshot_theta(const nn::NamedParams &p) {
    std::vector<std::vector<double>> out;
    for (const auto &[name, t] : p)
        if (name.ends_with(".theta")) out.emplace_back(t.data().begin(), t.data().end());
    return out;
}

double update_norm(const nn::NamedParams &p, const std::vector<std::vector<double>> &before) {
    double acc = 0;
    std::size_t k = 0;
    for (const auto &[name, t] : p) {
        if (!name.ends_with(".theta")) continue;
        for (std::size_t i = 0; i < t.numel(); ++i) acc += std::pow(t.data()[i] - before[k][i], 2);
        ++k;
    }
    return std::sqrt(acc);
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64 &rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

// Batches of `batch` indices; the tail batch is kept when it is non-empty.
std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t> &idx, std::size_t batch) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < idx.size(); i += batch)
        out.emplace_back(idx.begin() + static_cast<long>(i), idx.begin() + static_cast<long>(std::min(idx.size(), i + batch)));
    return out;
}

Tensor gather_images(const std::vector<img::Image> &images, const std::vector<std::size_t> &idx) {
    std::vector<img::Image> pick;
    pick.reserve(idx.size());
    for (auto i : idx) pick.push_back(images[i]);
    return img::to_tensor(pick);
}

Tensor gather_rows(const Tensor &t, const std::vector<std::size_t> &idx) {
    const std::size_t per = t.numel() / t.dim(0);
    std::vector<double> d;
    d.reserve(idx.size() * per);
    for (auto i : idx) d.insert(d.end(), t.data().begin() + static_cast<long>(i * per), t.data().begin() + static_cast<long>((i + 1) * per));
    ad::Shape s = t.shape();
    s[0] = idx.size();
    return Tensor::from_data(s, std::move(d));
}

Tensor concat_rows(const std::vector<Tensor> &parts) {
    std::vector<double> d;
    std::size_t rows = 0;
    for (const auto &p : parts) {
        d.insert(d.end(), p.data().begin(), p.data().end());
        rows += p.dim(0);
    }
    ad::Shape s = parts.at(0).shape();
    s[0] = rows;
    return Tensor::from_data(s, std::move(d));
}

// Frozen-encoder latents of all images, in chunks to bound memory.
models::Latents encode_all(const models::VAE &vae, const std::vector<img::Image> &images) {
    std::vector<Tensor> parts;
    for (std::size_t i = 0; i < images.size(); i += 16) {
        std::vector<std::size_t> idx;
        for (std::size_t j = i; j < std::min(images.size(), i + 16); ++j) idx.push_back(j);
        parts.push_back(vae.encode_latents(gather_images(images, idx)).values);
    }
    return models::Latents::assume_frozen(concat_rows(parts));
}

std::string loss_plot_title(const std::string &what) { return what + " training loss"; }

struct SampleSettings {
    int n_per_class = 8;
    std::vector<int> classes;
    int steps = 100;
    std::uint64_t seed = 0;
    double clip = 10.0;
};

// Generates n images for every class; labels follow the class ids.
void generate_set(const models::VAE &vae, const models::UNet &unet, const diffusion::DiffusionSchedule &sched,
                  const SampleSettings &s, std::vector<data::Entry> &entries, std::vector<img::Image> &images) {
    for (int cls : s.classes) {
        const auto r = diffusion::sample_latents(unet, s.n_per_class, cls, s.steps, sched,
                                                 derive_seed(s.seed, {static_cast<std::uint64_t>(cls)}), s.clip);
        const auto batch = img::from_tensor(vae.decode_latents(r.latents));
        for (std::size_t i = 0; i < batch.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "c%d_%05zu.ppm", cls, i);
            entries.push_back({name, cls, "generated"});
            images.push_back(img::quantize8(batch[i]));
        }
    }
}

std::vector<int> read_classes(cfg::Config &c, int n_classes) {
    if (n_classes < 1) throw std::invalid_argument("model has no classes to sample");
    return c.get_int_range("classes", "0.." + std::to_string(n_classes - 1), -1, n_classes - 1);
}

SampleSettings read_sample_settings(cfg::Config &c, int n_classes, int T) {
    SampleSettings s;
    s.n_per_class = static_cast<int>(c.get_int("n_per_class", 8, 1, 100000));
    s.classes = read_classes(c, n_classes);
    s.steps = static_cast<int>(c.get_int("steps", 100, 1, T));
    s.seed = static_cast<std::uint64_t>(c.get_int("seed", 0, 0, kMaxSeed));
    s.clip = c.get_double("clip", 10.0, 1e-6, 1e12);
    return s;
}

// Real subset whose class counts are an integer multiple of the generated
// counts where possible; also reports the largest proportion gap.
struct MatchedReal {
    std::vector<img::Image> images;
    double max_gap = 0.0;
};

MatchedReal match_real(const data::LoadedImages &real, const std::vector<data::Entry> &gen) {
    std::map<int, std::size_t> gen_count, real_count;
    for (const auto &e : gen) ++gen_count[e.class_id];
    for (const auto &e : real.entries) ++real_count[e.class_id];
    std::size_t r = std::numeric_limits<std::size_t>::max();
    for (const auto &[cls, n] : gen_count) r = std::min(r, real_count[cls] / n);
    MatchedReal m;
    std::map<int, std::size_t> want, taken;
    for (const auto &[cls, n] : gen_count) want[cls] = r == 0 ? real_count[cls] : n * r;
    for (std::size_t i = 0; i < real.entries.size(); ++i) {
        const int cls = real.entries[i].class_id;
        if (want.count(cls) && taken[cls] < want[cls]) {
            ++taken[cls];
            m.images.push_back(real.images[i]);
        }
    }
    const double ng = static_cast<double>(gen.size()), nr = static_cast<double>(m.images.size());
    for (const auto &[cls, n] : gen_count) {
        m.max_gap = std::max(m.max_gap, std::abs(static_cast<double>(n) / ng - static_cast<double>(taken[cls]) / std::max(nr, 1.0)));
    }
    return m;
}

} // namespace

std::string alpha_dir_name(double alpha) {
    char b[40];
    std::snprintf(b, sizeof b, "alpha_%g", alpha);
    return b;
}

// ---------------------------------------------------------------------------

Summary ansatz_bench(cfg::Config &c, const fs::path &out) {
    std::vector<ansatz::AnsatzKind> kinds;
    for (const auto &k : c.get_list("kinds", "SE,ESE1,ESE2")) kinds.push_back(ansatz::parse_kind(k));
    const auto qubits = c.get_int_range("qubits", "4..12:2", 2, 14);
    const auto layers = c.get_int_range("layers", "6", 1, 64);
    const auto gv_samples = static_cast<std::size_t>(c.get_int("gv_samples", 200, diag::kMinVarianceSamples, 1000000));
    const auto ee_draws = static_cast<std::size_t>(c.get_int("ee_draws", 10, 1, 100000));
    const auto shots = static_cast<std::size_t>(c.get_int("shots", 1000, 1, 100000000));
    noise::NoiseModel nm;
    nm.readout_alpha = c.get_double("alpha", 0.05, 0.0, 0.4999);
    nm.p1 = c.get_double("p1", 5e-4, 0.0, 0.4999);
    nm.p2 = c.get_double("p2", 1e-2, 0.0, 0.4999);
    nm.trajectories = static_cast<std::size_t>(c.get_int("trajectories", 100, 1, 1000000));
    nm.validate();
    if (shots < nm.trajectories) throw std::invalid_argument("config key 'shots' must be >= trajectories");
    const double threshold = c.get_double("threshold", 1.0, 0.0, 64.0);
    const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 1, 0, kMaxSeed));
    seal(c, out);

    std::ostringstream csv, slopes_csv;
    csv << "kind,n_qubits,n_layers,param_count,entanglement_entropy,gradient_variance,gv_stderr,hamming_raw,"
           "hamming_mitigated,control_distance,routed_two_qubit_gates,within_threshold\n";
    slopes_csv << "kind,n_layers,slope\n";
    plot::Figure ham{"Noisy Hamming distance", "parameter count", "bits", {}};
    plot::Figure ee{"Entanglement entropy (half partition)", "parameter count", "nats", {}};
    plot::Figure gv{"Gradient variance", "qubits", "log10 variance", {}};
    Summary summary;
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        const auto kind = kinds[ki];
        for (int L : layers) {
            const std::string series = ansatz::to_string(kind) + " L=" + std::to_string(L);
            plot::Series hs{series, {}, {}}, es{series, {}, {}}, gs{series, {}, {}};
            diag::GradientVarianceSweep sweep;
            sweep.kind = kind;
            sweep.n_layers = L;
            sweep.samples_per_point = gv_samples;
            for (int n : qubits) {
                const ansatz::AnsatzSpec spec{kind, n, L};
                ansatz::validate(spec);
                const auto P = static_cast<std::size_t>(ansatz::param_count(spec));
                const auto cell = [&](std::uint64_t purpose) {
                    return derive_seed(seed, {ki, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(L), purpose});
                };
                std::mt19937_64 rng(cell(0));
                const auto part = diag::half_partition(n);
                double ent = 0;
                for (std::size_t d = 0; d < ee_draws; ++d) {
                    std::vector<double> th(P);
                    for (auto &v : th) v = angle(rng);
                    ent += diag::entanglement_entropy(sim::run_circuit(ansatz::build_ansatz(spec, th)), part);
                }
                ent /= static_cast<double>(ee_draws);
                const auto var = diag::gradient_variance(spec, gv_samples, cell(1));

                std::vector<double> th(P);
                for (auto &v : th) v = angle(rng);
                const auto circuit = ansatz::build_ansatz(spec, th);
                const auto state = sim::run_circuit(circuit);
                const auto ideal = noise::sample_ideal(state, shots, cell(2));
                const auto routed = noise::route_to_linear_chain(circuit);
                const auto physical = noise::sample_noisy(routed.circuit, th, nm, shots, cell(3));
                noise::EmpiricalDistribution noisy(n);
                for (const auto &[idx, count] : physical.counts())
                    noisy.add(noise::physical_to_logical(idx, routed.final_layout), count);
                const double raw = noise::expected_hamming_distance(ideal, noisy);
                const auto mitigated = noise::mitigate_confusion(noisy, noise::ConfusionMatrix::uniform(n, nm.readout_alpha));
                const auto mm = noise::marginals(mitigated, n);
                const double mit = noise::expected_hamming_distance(ideal.marginals(), mm);
                const double control = noise::sampling_control_distance(state, shots, {cell(4), cell(5)});
                const auto two_q = routed.circuit.two_qubit_gate_count();

                csv << ansatz::to_string(kind) << ',' << n << ',' << L << ',' << P << ',' << fmt(ent) << ','
                    << fmt(var.variance) << ',' << fmt(var.stderr_) << ',' << fmt(raw) << ',' << fmt(mit) << ','
                    << fmt(control) << ',' << two_q << ',' << (raw <= threshold ? 1 : 0) << '\n';
                hs.x.push_back(static_cast<double>(P));
                hs.y.push_back(raw);
                es.x.push_back(static_cast<double>(P));
                es.y.push_back(ent);
                gs.x.push_back(n);
                gs.y.push_back(std::log10(std::max(var.variance, 1e-300)));
                sweep.qubit_range.push_back(n);
                sweep.variances.push_back(var.variance);
                sweep.stderrs.push_back(var.stderr_);
                progress("ansatz-bench " + series + " n=" + std::to_string(n) + " gv=" + fmt(var.variance) +
                         " hamming=" + fmt(raw));
            }
            if (sweep.qubit_range.size() >= 3) {
                const double slope = diag::fit_bp_slope(sweep);
                slopes_csv << ansatz::to_string(kind) << ',' << L << ',' << fmt(slope) << '\n';
                summary["slope_" + ansatz::to_string(kind) + "_L" + std::to_string(L)] = slope;
            }
            ham.series.push_back(hs);
            ee.series.push_back(es);
            gv.series.push_back(gs);
        }
    }
    write_text(out / "ansatz_bench.csv", csv.str());
    write_text(out / "slopes.csv", slopes_csv.str());
    plot::write_svg(out / "hamming_vs_params.svg", ham);
    plot::write_svg(out / "ee_vs_params.svg", ee);
    plot::write_svg(out / "gv_vs_qubits.svg", gv);
    return summary;
}

// ---------------------------------------------------------------------------

Summary make_dataset(cfg::Config &c, const fs::path &out) {
    const int n = static_cast<int>(c.get_int("n_per_class", 100, 5, 1000000));
    const int size = static_cast<int>(c.get_int("image_size", 64, 16, 4096));
    const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 0, 0, kMaxSeed));
    const bool quarter = c.get_bool("quarter", false);
    seal(c, out);
    auto ds = synth::generate_dataset(n, seed, size);
    if (quarter) ds = synth::quarter_train(ds, derive_seed(seed, {4}));
    data::write_dataset(out, ds);
    Summary s;
    s["images"] = static_cast<double>(ds.samples.size());
    s["train"] = static_cast<double>(ds.split(synth::Split::Train).size());
    s["val"] = static_cast<double>(ds.split(synth::Split::Val).size());
    s["test"] = static_cast<double>(ds.split(synth::Split::Test).size());
    return s;
}

// ---------------------------------------------------------------------------

Summary train_vae(cfg::Config &c, const fs::path &out) {
    const fs::path data_dir = c.require_string("data");
    const auto split = c.get_string("split", "train");
    models::VAEConfig vc;
    vc.base_channels = static_cast<int>(c.get_int("base_channels", 16, 1, 4096));
    vc.latent_channels = static_cast<int>(c.get_int("latent_channels", 4, 1, 1024));
    vc.quantum = c.get_bool("quantum", false);
    vc.quantum_cfg = read_quantum(c);
    vc.kl_weight = c.get_double("kl_weight", 1e-6, 0.0, 1e6);
    vc.ssim_weight = c.get_double("ssim_weight", 1.0, 0.0, 1e6);
    const int epochs = static_cast<int>(c.get_int("epochs", 5, 1, 1000000));
    const auto batch = static_cast<std::size_t>(c.get_int("batch", 16, 1, 100000));
    const auto opt_cfg = read_optimizer(c, "adam");
    const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 0, 0, kMaxSeed));
    seal(c, out);

    const auto data = data::load_images(data_dir, split);
    if (data.images.empty()) throw std::runtime_error("no '" + split + "' images in " + data_dir.string());
    vc.image_size = static_cast<int>(data.images[0].size);
    vc.latent_size = vc.image_size / 8;
    vc.validate();
    models::VAE vae(vc, seed);
    optim::Optimizer opt(opt_cfg, vae.parameters());
    const auto theta0 = snapshot_theta(vae.parameters());
    std::mt19937_64 rng(derive_seed(seed, {1}));

    std::ostringstream csv;
    csv << "epoch,step,pixel,ssim,kl,total\n";
    std::vector<double> totals;
    std::size_t step = 0;
    for (int e = 0; e < epochs; ++e) {
        for (const auto &b : batches_of(shuffled(data.images.size(), rng), batch)) {
            const auto rep = diffusion::vae_train_step(vae, opt, gather_images(data.images, b), rng);
            ++step;
            totals.push_back(rep.total);
            csv << e << ',' << step << ',' << fmt(rep.pixel) << ',' << fmt(rep.ssim) << ',' << fmt(rep.kl) << ','
                << fmt(rep.total) << '\n';
        }
        ckpt::save_vae(out / "vae.qldm", vae, &opt);
        progress("train-vae epoch " + std::to_string(e + 1) + "/" + std::to_string(epochs) + " loss " + fmt(totals.back()));
    }
    // Normalize latents to unit spread for diffusion.
    vae.freeze();
    const auto mu = encode_all(vae, data.images).values;
    double mean = 0, sq = 0;
    for (double v : mu.data()) mean += v;
    mean /= static_cast<double>(mu.numel());
    for (double v : mu.data()) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(mu.numel()));
    vae.latent_scale = sd > 1e-8 ? 1.0 / sd : 1.0;
    ckpt::save_vae(out / "vae.qldm", vae, &opt);

    write_text(out / "vae_loss.csv", csv.str());
    plot::Series s{"total", {}, {}};
    for (std::size_t i = 0; i < totals.size(); ++i) {
        s.x.push_back(static_cast<double>(i + 1));
        s.y.push_back(totals[i]);
    }
    plot::write_svg(out / "vae_loss.svg", {loss_plot_title("VAE"), "step", "loss", {s}});

    Summary sum;
    sum["parameters"] = static_cast<double>(vae.parameter_count());
    sum["quantum_parameters"] = static_cast<double>(vae.quantum_parameter_count());
    sum["quantum_parameters_per_layer"] = vc.quantum ? 3.0 * vc.quantum_cfg.n_layers * vc.quantum_cfg.n_qubits : 0.0;
    sum["quantum_update_norm"] = update_norm(vae.parameters(), theta0);
    sum["first_loss"] = totals.front();
    sum["final_loss"] = totals.back();
    sum["latent_scale"] = vae.latent_scale;
    sum["steps"] = static_cast<double>(step);
    add_chunks(sum, totals);
    return sum;
}

// ---------------------------------------------------------------------------

Summary train_ddpm(cfg::Config &c, const fs::path &out) {
    const fs::path data_dir = c.require_string("data");
    const fs::path vae_path = c.require_string("vae");
    const auto split = c.get_string("split", "train");
    models::UNetConfig uc;
    uc.base_channels = static_cast<int>(c.get_int("base_channels", 32, 2, 4096));
    uc.n_ublocks = static_cast<int>(c.get_int("n_ublocks", 5, 1, 64));
    uc.n_mid_resblocks = static_cast<int>(c.get_int("n_mid_resblocks", 2, 0, 64));
    uc.quantum = c.get_bool("quantum", false);
    uc.quantum_cfg = read_quantum(c);
    uc.n_classes = static_cast<int>(c.get_int("n_classes", 3, 0, 1000));
    uc.cdcnn_nodes = static_cast<int>(c.get_int("cdcnn_nodes", 0, 0, 64));
    const bool conditional = c.get_bool("conditional", true);
    const auto sched = read_schedule(c);
    const int epochs = static_cast<int>(c.get_int("epochs", 20, 1, 1000000));
    const auto batch = static_cast<std::size_t>(c.get_int("batch", 16, 1, 100000));
    const auto opt_cfg = read_optimizer(c, "adamw");
    const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 0, 0, kMaxSeed));
    seal(c, out);

    require_exists(vae_path, "vae checkpoint");
    auto vae = ckpt::load_vae(vae_path).model;
    vae.freeze();
    const auto data = data::load_images(data_dir, split);
    if (data.images.empty()) throw std::runtime_error("no '" + split + "' images in " + data_dir.string());
    for (const auto &e : data.entries) {
        if (conditional && e.class_id >= uc.n_classes) {
            throw std::runtime_error("class id " + std::to_string(e.class_id) + " exceeds n_classes");
        }
    }
    uc.in_channels = vae.config().latent_channels;
    uc.latent_size = vae.config().latent_size;
    uc.validate();
    const auto latents = encode_all(vae, data.images);
    models::UNet unet(uc, seed);
    optim::Optimizer opt(opt_cfg, unet.parameters());
    const auto theta0 = snapshot_theta(unet.parameters());
    std::mt19937_64 rng(derive_seed(seed, {2}));
    const diffusion::NoisePredictor zero = [](const Tensor &x, std::span<const int>, std::span<const int>) {
        return Tensor::zeros(x.shape());
    };

    std::ostringstream csv;
    csv << "epoch,step,loss,zero_baseline\n";
    std::vector<double> losses, baselines;
    std::size_t step = 0;
    double last_epoch_loss = 0, last_epoch_base = 0;
    for (int e = 0; e < epochs; ++e) {
        double el = 0, eb = 0;
        std::size_t nb = 0;
        for (const auto &b : batches_of(shuffled(data.images.size(), rng), batch)) {
            std::vector<int> labels;
            for (auto i : b) labels.push_back(conditional ? data.entries[i].class_id : -1);
            const auto lat = models::Latents::assume_frozen(gather_rows(latents.values, b));
            // Same t and noise draws as the step below, scored for the zero predictor.
            auto probe = rng;
            const double base = diffusion::diffusion_loss(zero, lat.values, labels, sched, probe).item();
            const double loss = diffusion::ddpm_train_step(unet, opt, lat, labels, sched, rng);
            ++step;
            ++nb;
            el += loss;
            eb += base;
            losses.push_back(loss);
            baselines.push_back(base);
            csv << e << ',' << step << ',' << fmt(loss) << ',' << fmt(base) << '\n';
        }
        last_epoch_loss = el / static_cast<double>(nb);
        last_epoch_base = eb / static_cast<double>(nb);
        ckpt::save_unet(out / "unet.qldm", unet, &opt);
        progress("train-ddpm epoch " + std::to_string(e + 1) + "/" + std::to_string(epochs) + " loss " +
                 fmt(last_epoch_loss) + " (zero predictor " + fmt(last_epoch_base) + ")");
    }
    write_text(out / "ddpm_loss.csv", csv.str());
    plot::Series ls{"loss", {}, {}}, bs{"zero predictor", {}, {}};
    for (std::size_t i = 0; i < losses.size(); ++i) {
        ls.x.push_back(static_cast<double>(i + 1));
        ls.y.push_back(losses[i]);
        bs.x.push_back(static_cast<double>(i + 1));
        bs.y.push_back(baselines[i]);
    }
    plot::write_svg(out / "ddpm_loss.svg", {loss_plot_title("DDPM"), "step", "loss", {ls, bs}});

    Summary sum;
    sum["parameters"] = static_cast<double>(unet.parameter_count());
    sum["quantum_layers"] = static_cast<double>(unet.quantum_layer_count());
    sum["quantum_parameters"] = static_cast<double>(unet.quantum_parameter_count());
    sum["quantum_parameters_per_layer"] = uc.quantum ? 3.0 * uc.quantum_cfg.n_layers * uc.quantum_cfg.n_qubits : 0.0;
    sum["cdcnn_parameters"] = static_cast<double>(unet.cdcnn_parameter_count());
    sum["quantum_update_norm"] = update_norm(unet.parameters(), theta0);
    sum["final_loss"] = last_epoch_loss;
    sum["final_zero_baseline"] = last_epoch_base;
    sum["steps"] = static_cast<double>(step);
    add_chunks(sum, losses);
    return sum;
}

// ---------------------------------------------------------------------------

Summary sample(cfg::Config &c, const fs::path &out) {
    const fs::path vae_path = c.require_string("vae");
    const fs::path unet_path = c.require_string("unet");
    const auto alphas = c.get_doubles("alphas", "", 0.0, 0.4999);
    const auto shots = static_cast<std::size_t>(c.get_int("shots", 1000, 1, 100000000));
    const auto sched = read_schedule(c);
    // Classes can only be checked against the model, so peek at the checkpoint first.
    require_exists(vae_path, "vae checkpoint");
    require_exists(unet_path, "unet checkpoint");
    auto vae = ckpt::load_vae(vae_path).model;
    auto unet = ckpt::load_unet(unet_path).model;
    const auto s = read_sample_settings(c, unet.config().n_classes, sched.T);
    seal(c, out);
    vae.freeze();

    Summary sum;
    const bool has_quantum = unet.quantum_layer_count() > 0 || vae.quantum_parameter_count() > 0;
    sum["quantum_layers_present"] = has_quantum ? 1 : 0;
    if (alphas.empty()) {
        std::vector<data::Entry> entries;
        std::vector<img::Image> images;
        generate_set(vae, unet, sched, s, entries, images);
        data::write_images(out / "samples", entries, images);
        sum["images"] = static_cast<double>(images.size());
        return sum;
    }
    if (!has_quantum) progress("sample: models have no quantum layers; alpha only renames the output sets");
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        const nn::ShotMode mode{shots, alphas[a], derive_seed(s.seed, {100 + a})};
        vae.set_shot_mode(mode);
        unet.set_shot_mode(mode);
        std::vector<data::Entry> entries;
        std::vector<img::Image> images;
        generate_set(vae, unet, sched, s, entries, images);
        data::write_images(out / alpha_dir_name(alphas[a]), entries, images);
        sum["images_" + alpha_dir_name(alphas[a])] = static_cast<double>(images.size());
        progress("sample: wrote " + alpha_dir_name(alphas[a]));
    }
    return sum;
}

// ---------------------------------------------------------------------------

Summary evaluate(cfg::Config &c, const fs::path &out) {
    const fs::path real_dir = c.require_string("real");
    const auto real_split = c.get_string("real_split", "test");
    const auto gen_dirs = c.get_list("generated", "");
    if (gen_dirs.empty()) throw std::invalid_argument("config key 'generated' needs at least one directory");
    const auto opts = read_eval(c);
    const double tolerance = c.get_double("proportion_tolerance", 0.05, 0.0, 1.0);
    seal(c, out);

    const auto real = data::load_images(real_dir, real_split);
    if (real.images.empty()) throw std::runtime_error("no '" + real_split + "' images in " + real_dir.string());
    std::ostringstream csv;
    csv << metrics::csv_header() << '\n';
    Summary sum;
    std::size_t warnings = 0;
    for (const auto &g : gen_dirs) {
        const auto gen = data::load_images(g);
        if (gen.images.empty()) throw std::runtime_error("no images in " + g);
        const auto matched = match_real(real, gen.entries);
        if (matched.max_gap > tolerance) {
            ++warnings;
            progress("warning: class proportions of " + g + " differ from the real set by " + fmt(matched.max_gap));
        }
        const auto label = fs::path(g).filename().string();
        const auto report = metrics::evaluate(matched.images, gen.images, opts, label);
        csv << metrics::csv_row(report) << '\n';
        sum["frechet_" + label] = report.frechet;
    }
    write_text(out / "metrics.csv", csv.str());
    sum["rows"] = static_cast<double>(gen_dirs.size());
    sum["proportion_warnings"] = static_cast<double>(warnings);
    return sum;
}

// ---------------------------------------------------------------------------

Summary compare_models(cfg::Config &c, const fs::path &out) {
    const auto variants = c.get_list("variants", "");
    if (variants.empty()) throw std::invalid_argument("config key 'variants' needs at least one name");
    std::vector<std::pair<fs::path, fs::path>> paths;
    for (const auto &v : variants) paths.emplace_back(c.require_string(v + ".vae"), c.require_string(v + ".unet"));
    const fs::path real_dir = c.require_string("real");
    const auto real_split = c.get_string("real_split", "test");
    const auto sched = read_schedule(c);
    const auto opts = read_eval(c);
    for (std::size_t i = 0; i < variants.size(); ++i) {
        for (const auto &p : {paths[i].first, paths[i].second}) {
            if (!fs::exists(p)) {
                throw std::runtime_error("variant '" + variants[i] + "': missing checkpoint " + p.string());
            }
        }
    }
    const auto s = read_sample_settings(c, ckpt::load_unet(paths[0].second).model.config().n_classes, sched.T);
    seal(c, out);

    const auto real = data::load_images(real_dir, real_split);
    if (real.images.empty()) throw std::runtime_error("no '" + real_split + "' images in " + real_dir.string());
    std::ostringstream csv;
    csv << "variant,vae_parameters,unet_parameters,vae_quantum_parameters,unet_quantum_parameters,"
           "cdcnn_parameters,added_parameters,"
        << metrics::csv_header() << '\n';
    Summary sum;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        auto vae = ckpt::load_vae(paths[i].first).model;
        const auto unet = ckpt::load_unet(paths[i].second).model;
        vae.freeze();
        std::vector<data::Entry> entries;
        std::vector<img::Image> images;
        generate_set(vae, unet, sched, s, entries, images);
        const auto matched = match_real(real, entries);
        const auto report = metrics::evaluate(matched.images, images, opts, variants[i]);
        const auto added = vae.quantum_parameter_count() + unet.quantum_parameter_count() + unet.cdcnn_parameter_count();
        csv << variants[i] << ',' << vae.parameter_count() << ',' << unet.parameter_count() << ','
            << vae.quantum_parameter_count() << ',' << unet.quantum_parameter_count() << ','
            << unet.cdcnn_parameter_count() << ',' << added << ',' << metrics::csv_row(report) << '\n';
        sum["added_parameters_" + variants[i]] = static_cast<double>(added);
        progress("compare-models: " + variants[i] + " done");
    }
    write_text(out / "compare.csv", csv.str());
    sum["rows"] = static_cast<double>(variants.size());
    return sum;
}

// ---------------------------------------------------------------------------

const std::vector<CommandInfo> &commands() {
    static const std::vector<CommandInfo> list = {
        {"ansatz-bench", "gradient variance, entanglement and noisy Hamming sweeps over ansatz kinds", ansatz_bench},
        {"make-dataset", "write a synthetic fundus-like dataset (PPM + manifest.csv)", make_dataset},
        {"train-vae", "train the classical or quantum VAE", train_vae},
        {"train-ddpm", "train the classical, quantum or CDCNN UNet on frozen VAE latents", train_ddpm},
        {"sample", "generate images per class, optionally through shot-based readout noise", sample},
        {"evaluate", "metric report comparing generated directories to real images", evaluate},
        {"compare-models", "sample and evaluate several trained variants side by side", compare_models},
    };
    return list;
}

Summary run(const std::string &name, cfg::Config &config, const fs::path &out) {
    const auto &list = commands();
    const auto it = std::find_if(list.begin(), list.end(), [&](const CommandInfo &c) { return c.name == name; });
    if (it == list.end()) throw std::invalid_argument("unknown command '" + name + "'");
    fs::create_directories(out);
    const auto t0 = std::chrono::steady_clock::now();
    const auto summary = it->fn(config, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream log;
    log << "command = " << name << '\n';
    for (const auto &[k, v] : summary) log << k << " = " << fmt(v) << '\n';
    write_text(out / "run.log", log.str());
    write_text(out / "timing.txt", "seconds = " + fmt(secs) + "\n");
    return summary;
}

} // namespace qlatent::cmd
