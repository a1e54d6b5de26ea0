#include "rlcsc/trainer.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rlcsc {

void TrainConfig::validate() const {
    if (batch_size < 1) throw FormatError("train config: batch_size must be >= 1");
    if (epochs < 1) throw FormatError("train config: epochs must be >= 1");
    if (lr0 <= 0.0 || lr_decay_factor <= 0.0)
        throw FormatError("train config: learning rates must be positive");
    if (lr_decay_every < 1) throw FormatError("train config: lr_decay_every must be >= 1");
    if (momentum < 0.0 || weight_decay < 0.0)
        throw FormatError("train config: momentum and weight_decay must be nonnegative");
    if (clip_theta <= 0.0) throw FormatError("train config: clip_theta must be positive");
    if (checkpoint_every < 1) throw FormatError("train config: checkpoint_every must be >= 1");
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string trimmed = line.substr(first, last - first + 1);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw FormatError(path.string() + " line " + std::to_string(lineno) +
                              ": expected key=value, got '" + trimmed + "'");
        const std::string key = trimmed.substr(0, eq);
        const std::string value = trimmed.substr(eq + 1);
        try {
            if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "momentum") cfg.momentum = std::stod(value);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
            else if (key == "lr0") cfg.lr0 = std::stod(value);
            else if (key == "lr_decay_factor") cfg.lr_decay_factor = std::stod(value);
            else if (key == "lr_decay_every") cfg.lr_decay_every = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "clip_theta") cfg.clip_theta = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "residual_enabled") cfg.residual_enabled = (value == "true" || value == "1");
            else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(value);
            else
                throw FormatError(path.string() + " line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(path.string() + " line " + std::to_string(lineno) +
                              ": cannot parse value '" + value + "' for key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::string train_config_to_string(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "batch_size=" << cfg.batch_size << "\n"
        << "momentum=" << cfg.momentum << "\n"
        << "weight_decay=" << cfg.weight_decay << "\n"
        << "lr0=" << cfg.lr0 << "\n"
        << "lr_decay_factor=" << cfg.lr_decay_factor << "\n"
        << "lr_decay_every=" << cfg.lr_decay_every << "\n"
        << "epochs=" << cfg.epochs << "\n"
        << "clip_theta=" << cfg.clip_theta << "\n"
        << "seed=" << cfg.seed << "\n"
        << "residual_enabled=" << (cfg.residual_enabled ? "true" : "false") << "\n"
        << "checkpoint_every=" << cfg.checkpoint_every << "\n";
    return out.str();
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw NumericError("lr_schedule: epoch must be >= 0");
    return cfg.lr0 / std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

void he_init(RlcscParams<float>& params, Rng& rng) {
    Rng stream = rng.split(rng_stream::kHeInit);
    for (Tensor4<float>* k : {&params.f0, &params.f1, &params.w1, &params.s, &params.w2, &params.h}) {
        const double sigma = std::sqrt(2.0 / (static_cast<double>(k->n) * k->h * k->w));
        for (auto& v : k->data) v = static_cast<float>(sigma * stream.next_gaussian());
    }
    std::fill(params.theta.data.begin(), params.theta.data.end(), 0.0f);
}

ParamSet ParamSet::zeros_like(const RlcscParams<float>& p) {
    ParamSet s;
    s.f0 = Tensor4<float>(p.f0.n, p.f0.c, p.f0.h, p.f0.w);
    s.f1 = Tensor4<float>(p.f1.n, p.f1.c, p.f1.h, p.f1.w);
    s.w1 = Tensor4<float>(p.w1.n, p.w1.c, p.w1.h, p.w1.w);
    s.s = Tensor4<float>(p.s.n, p.s.c, p.s.h, p.s.w);
    s.w2 = Tensor4<float>(p.w2.n, p.w2.c, p.w2.h, p.w2.w);
    s.h = Tensor4<float>(p.h.n, p.h.c, p.h.h, p.h.w);
    s.theta = Tensor4<float>(p.theta.n, p.theta.c, p.theta.h, p.theta.w);
    return s;
}

namespace {

struct NamedTriple {
    const char* name;
    Tensor4<float>* w;
    const Tensor4<float>* g;
    Tensor4<float>* v;
    bool is_theta;
};

} // namespace

void sgd_step(RlcscParams<float>& params, const ParamSet& grads, ParamSet& velocity, double lr,
              const TrainConfig& cfg, long step_index) {
    const float clip = static_cast<float>(cfg.clip_theta);
    const float wd = static_cast<float>(cfg.weight_decay);
    const float mom = static_cast<float>(cfg.momentum);
    const float flr = static_cast<float>(lr);

    const std::array<NamedTriple, 7> items = {{
        {"F0", &params.f0, &grads.f0, &velocity.f0, false},
        {"F1", &params.f1, &grads.f1, &velocity.f1, false},
        {"W1", &params.w1, &grads.w1, &velocity.w1, false},
        {"S", &params.s, &grads.s, &velocity.s, false},
        {"W2", &params.w2, &grads.w2, &velocity.w2, false},
        {"H", &params.h, &grads.h, &velocity.h, false},
        {"theta", &params.theta, &grads.theta, &velocity.theta, true},
    }};

    for (const NamedTriple& it : items) {
        if (!it.w->same_shape(*it.g))
            throw ShapeError(std::string("sgd_step: gradient shape mismatch for ") + it.name);
        for (std::size_t i = 0; i < it.w->numel(); ++i) {
            float g = it.g->data[i];
            if (!std::isfinite(g))
                throw NumericError(std::string("sgd_step: non-finite gradient in ") + it.name +
                                   " at step " + std::to_string(step_index));
            g = g > clip ? clip : (g < -clip ? -clip : g);
            if (!it.is_theta) g += wd * it.w->data[i]; // decay fights the theta projection
            it.v->data[i] = mom * it.v->data[i] + g;
            it.w->data[i] -= flr * it.v->data[i];
        }
        if (it.is_theta)
            for (auto& t : it.w->data)
                if (t < 0.0f) t = 0.0f;
    }
}

double batch_loss(const RlcscParams<float>& params, const Tensor4<float>& ilr,
                  const Tensor4<float>& hr, bool residual_enabled) {
    if (ilr.n == 0) throw FormatError("batch_loss: empty batch");
    const Tensor4<float> r = residual(params, ilr);
    return residual_enabled ? mse(add(r, ilr), hr) : mse(r, hr);
}

namespace {

constexpr char kCkptMagic[6] = {'R', 'L', 'C', 'S', 'C', '1'};
constexpr std::uint32_t kCkptVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError(std::string("checkpoint: truncated at ") + what);
    return v;
}

void write_tensor(std::ofstream& out, const Tensor4<float>& t) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

void read_tensor(std::ifstream& in, Tensor4<float>& t, const char* what) {
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw FormatError(std::string("checkpoint: truncated tensor ") + what);
}

template <class Fn>
void for_each_param_tensor(RlcscParams<float>& p, ParamSet& v, Fn fn) {
    fn(v.f0, "vel F0"); // momentum buffers first, then parameters, fixed order
    fn(v.f1, "vel F1");
    fn(v.w1, "vel W1");
    fn(v.s, "vel S");
    fn(v.w2, "vel W2");
    fn(v.h, "vel H");
    fn(v.theta, "vel theta");
    fn(p.f0, "F0");
    fn(p.f1, "F1");
    fn(p.w1, "W1");
    fn(p.s, "S");
    fn(p.w2, "W2");
    fn(p.h, "H");
    fn(p.theta, "theta");
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(kCkptMagic, sizeof(kCkptMagic));
        write_u32(out, kCkptVersion);
        write_u32(out, static_cast<std::uint32_t>(ckpt.model.n_f));
        write_u32(out, static_cast<std::uint32_t>(ckpt.model.m_f));
        write_u32(out, static_cast<std::uint32_t>(ckpt.model.s));
        write_u32(out, static_cast<std::uint32_t>(ckpt.model.c_img));
        write_u32(out, static_cast<std::uint32_t>(ckpt.model.recursions));
        write_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
        auto p = ckpt.params;   // serialized layout lives in for_each_param_tensor
        auto v = ckpt.velocity;
        for_each_param_tensor(p, v, [&](Tensor4<float>& t, const char*) { write_tensor(out, t); });
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw FormatError(path.string() + ": not a checkpoint (bad magic)");
    const auto version = read_u32(in, "version");
    if (version != kCkptVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.model.n_f = static_cast<int>(read_u32(in, "n_f"));
    ckpt.model.m_f = static_cast<int>(read_u32(in, "m_f"));
    ckpt.model.s = static_cast<int>(read_u32(in, "s"));
    ckpt.model.c_img = static_cast<int>(read_u32(in, "c_img"));
    ckpt.model.recursions = static_cast<int>(read_u32(in, "recursions"));
    ckpt.model.validate();
    ckpt.epoch = static_cast<int>(read_u32(in, "epoch"));
    ckpt.params = RlcscParams<float>::make(ckpt.model);
    ckpt.velocity = ParamSet::zeros_like(ckpt.params);
    for_each_param_tensor(ckpt.params, ckpt.velocity,
                          [&](Tensor4<float>& t, const char* what) { read_tensor(in, t, what); });
    char extra;
    if (in.read(&extra, 1)) throw FormatError(path.string() + ": trailing bytes in checkpoint");
    return ckpt;
}

namespace {

std::vector<std::uint64_t> shuffled_indices(std::uint64_t n, Rng rng) {
    std::vector<std::uint64_t> idx(n);
    for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
    for (std::uint64_t i = n; i > 1; --i) {
        const std::uint64_t j = rng.next_below(static_cast<std::uint32_t>(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

TrainResult run_training(const PatchSet& data, Checkpoint start, const TrainConfig& cfg,
                         const TrainSink& sink) {
    cfg.validate();
    if (data.count == 0) throw FormatError("train: empty patch set");
    start.params.validate();

    const int patch = data.patch_size;
    const std::uint64_t n = data.count;
    const long steps_per_epoch = static_cast<long>((n + cfg.batch_size - 1) / cfg.batch_size);
    const std::size_t pp = data.floats_per_patch();

    Rng rng(cfg.seed);
    std::ofstream csv;
    if (!sink.out_dir.empty()) {
        std::filesystem::create_directories(sink.out_dir);
        const auto csv_path = sink.out_dir / "loss.csv";
        const bool append = sink.append_csv && std::filesystem::exists(csv_path);
        csv.open(csv_path, append ? std::ios::app : std::ios::trunc);
        if (!csv) throw IoError("cannot write " + csv_path.string());
        if (!append) csv << "epoch,step,loss,lr\n";
    }

    TrainResult result;
    result.checkpoint = std::move(start);
    Checkpoint& ckpt = result.checkpoint;
    long global_step = static_cast<long>(ckpt.epoch) * steps_per_epoch;

    for (int epoch = ckpt.epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        const auto order = shuffled_indices(n, rng.split(rng_stream::kShuffleBase + epoch));

        double loss_sum = 0.0; // sample-weighted
        for (long step = 0; step < steps_per_epoch; ++step) {
            const std::uint64_t lo = static_cast<std::uint64_t>(step) * cfg.batch_size;
            const std::uint64_t hi = std::min<std::uint64_t>(lo + cfg.batch_size, n);
            const int bsz = static_cast<int>(hi - lo);

            Tensor4<float> ilr(bsz, 1, patch, patch), hr(bsz, 1, patch, patch);
            for (int b = 0; b < bsz; ++b) {
                const std::uint64_t src = order[lo + b];
                std::memcpy(ilr.plane(b, 0), data.ilr(src), pp * sizeof(float));
                std::memcpy(hr.plane(b, 0), data.hr(src), pp * sizeof(float));
            }

            Tape<float> tape;
            const ParamVars pv = register_params(tape, ckpt.params);
            const VarId in = tape.leaf(ilr);
            const VarId target = tape.leaf(hr);
            const VarId r = residual_tape(tape, pv, in, ckpt.params.recursions);
            const VarId pred = cfg.residual_enabled ? tape.add(r, in) : r;
            const VarId loss = tape.mse(pred, target);

            const double loss_value = static_cast<double>(tape.value(loss).data[0]);
            if (!std::isfinite(loss_value))
                throw NumericError("train: diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step) +
                                   "; last good checkpoint kept");
            loss_sum += loss_value * bsz;

            const auto grads = tape.backward(loss);
            ParamSet g;
            g.f0 = grads.at(pv.f0);
            g.f1 = grads.at(pv.f1);
            g.w1 = grads.at(pv.w1);
            g.s = grads.at(pv.s);
            g.w2 = grads.at(pv.w2);
            g.h = grads.at(pv.h);
            g.theta = grads.at(pv.theta);
            sgd_step(ckpt.params, g, ckpt.velocity, lr, cfg, global_step);
            ++global_step;
        }

        ckpt.epoch = epoch + 1;
        EpochStat stat{epoch, global_step, loss_sum / static_cast<double>(n), lr};
        result.trace.push_back(stat);
        if (csv.is_open()) {
            // rows carry the completed-epoch count, matching checkpoint names
            csv << (stat.epoch + 1) << "," << stat.steps_done << "," << stat.mean_loss << ","
                << stat.lr << "\n";
            csv.flush();
        }
        if (sink.console)
            std::printf("epoch %3d  lr %.2e  mean loss %.6e\n", epoch + 1, lr, stat.mean_loss);
        if (!sink.out_dir.empty() && ((epoch + 1) % cfg.checkpoint_every == 0))
            save_checkpoint(ckpt, sink.out_dir / ("checkpoint-" + std::to_string(epoch + 1) + ".bin"));
    }

    if (!sink.out_dir.empty()) save_checkpoint(ckpt, sink.out_dir / "checkpoint-final.bin");
    return result;
}

} // namespace

TrainResult train(const PatchSet& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainSink& sink) {
    Checkpoint start;
    start.model = model_cfg;
    start.epoch = 0;
    start.params = RlcscParams<float>::make(model_cfg);
    Rng rng(cfg.seed);
    he_init(start.params, rng);
    start.velocity = ParamSet::zeros_like(start.params);
    return run_training(data, std::move(start), cfg, sink);
}

TrainResult train_from(const PatchSet& data, const Checkpoint& start, const TrainConfig& cfg,
                       const TrainSink& sink) {
    return run_training(data, start, cfg, sink);
}

} // namespace rlcsc
