#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rlcsc/dataset.hpp"
#include "rlcsc/gradcheck.hpp"
#include "rlcsc/metrics.hpp"
#include "rlcsc/resize.hpp"
#include "rlcsc/sparse.hpp"
#include "rlcsc/trainer.hpp"

namespace {

// 0 ok, 1 usage, 2 I/O, 3 file/config format, 4 numeric failure
enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kFormat = 3, kNumeric = 4 };

std::pair<int, int> parse_channel_pair(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos)
        throw rlcsc::FormatError("--channels expects 'n_f,m_f', got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw rlcsc::FormatError("--channels expects 'n_f,m_f', got '" + s + "'");
    }
}

std::vector<int> parse_scale_list(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!tok.empty()) {
            int v = 0;
            try {
                v = std::stoi(tok);
            } catch (const std::exception&) {
                throw rlcsc::FormatError("--scales: bad entry '" + tok + "'");
            }
            out.push_back(v);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw rlcsc::FormatError("--scales: empty list");
    return out;
}

int cmd_prepare(const std::string& manifest, const std::string& out, const std::string& scales,
                int patch, int stride, const std::string& aug, std::uint64_t seed) {
    (void)seed; // patch extraction is fully deterministic; kept for interface parity
    rlcsc::AugmentSpec spec = aug == "full" ? rlcsc::AugmentSpec::full() : rlcsc::AugmentSpec::none();
    spec.sr_scales = parse_scale_list(scales);

    std::vector<rlcsc::ImageY> images;
    for (const auto& path : rlcsc::read_manifest(manifest)) images.push_back(rlcsc::load_y(path));
    if (images.empty()) throw rlcsc::FormatError("prepare: manifest lists no images");

    rlcsc::BuildStats stats;
    const rlcsc::PatchSet set = rlcsc::build_patchset(images, spec, patch, stride, &stats);
    rlcsc::save_patchset(set, out);
    std::printf("pairs: %" PRIu64 "\n", set.count);
    std::printf("digest: %016" PRIx64 "\n", rlcsc::patchset_digest(set));
    if (stats.variants_skipped > 0)
        std::printf("skipped %zu undersized variants\n", stats.variants_skipped);
    return kOk;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out_dir, int k,
              const std::string& channels, const std::string& resume) {
    const rlcsc::PatchSet set = rlcsc::load_patchset(data);
    const rlcsc::TrainConfig cfg = rlcsc::parse_train_config(config);

    rlcsc::TrainSink sink;
    sink.out_dir = out_dir;
    sink.console = true;

    rlcsc::TrainResult result;
    if (!resume.empty()) {
        const rlcsc::Checkpoint start = rlcsc::load_checkpoint(resume);
        if (start.epoch >= cfg.epochs)
            throw rlcsc::FormatError("resume: checkpoint already at epoch " +
                                     std::to_string(start.epoch) + " of " + std::to_string(cfg.epochs));
        sink.append_csv = true;
        result = rlcsc::train_from(set, start, cfg, sink);
    } else {
        const auto [n_f, m_f] = parse_channel_pair(channels);
        rlcsc::ModelConfig model_cfg;
        model_cfg.n_f = n_f;
        model_cfg.m_f = m_f;
        model_cfg.recursions = k;
        model_cfg.validate();
        result = rlcsc::train(set, model_cfg, cfg, sink);
    }
    std::printf("trained through epoch %d; final mean loss %.6e\n", result.checkpoint.epoch,
                result.trace.empty() ? 0.0 : result.trace.back().mean_loss);
    return kOk;
}

int cmd_sr(const std::string& model, const std::string& input, int scale, const std::string& output,
           bool allow_any) {
    if (!allow_any && scale != 2 && scale != 3 && scale != 4)
        throw rlcsc::NumericError("sr: scale must be 2, 3 or 4 (use --allow-any to override)");

    const rlcsc::Checkpoint ckpt = rlcsc::load_checkpoint(model);
    const auto params = ckpt.params.cast<double>();
    const rlcsc::LoadedImage src = rlcsc::load_image(input);

    const rlcsc::ImageY ilr = rlcsc::bicubic_resize(src.y, scale);
    const auto t0 = std::chrono::steady_clock::now();
    const rlcsc::ImageY out_y =
        rlcsc::clamp01(rlcsc::ImageY::from_tensor(rlcsc::forward(params, ilr.to_tensor())));
    const auto t1 = std::chrono::steady_clock::now();

    if (src.rgb) {
        const rlcsc::ImageYcc ycc = rlcsc::rgb_to_ycbcr(*src.rgb);
        rlcsc::ImageYcc up;
        up.y = out_y;
        up.cb = rlcsc::bicubic_resize(ycc.cb, scale);
        up.cr = rlcsc::bicubic_resize(ycc.cr, scale);
        rlcsc::ImageRgb rgb = rlcsc::ycbcr_to_rgb(up);
        for (auto* plane : {&rgb.r, &rgb.g, &rgb.b})
            for (auto& v : *plane) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        rlcsc::save_rgb(rgb, output);
    } else {
        rlcsc::save_y(out_y, output);
    }
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    std::printf("%dx%d -> %dx%d, forward %.1f ms\n", src.y.h, src.y.w, out_y.h, out_y.w, ms);
    return kOk;
}

int cmd_eval(const std::string& model, bool bicubic, const std::string& manifest, int scale, int crop,
             const std::string& csv) {
    const auto files = rlcsc::read_manifest(manifest);
    rlcsc::Predictor predictor;
    if (bicubic) {
        predictor = rlcsc::bicubic_predictor();
    } else {
        const rlcsc::Checkpoint ckpt = rlcsc::load_checkpoint(model);
        predictor = rlcsc::model_predictor(ckpt.params.cast<double>());
    }
    const rlcsc::EvalReport report = rlcsc::evaluate(files, predictor, scale, crop < 0 ? scale : crop);
    std::fputs(rlcsc::report_table(report).c_str(), stdout);
    if (!csv.empty()) {
        std::ofstream out(csv, std::ios::trunc);
        if (!out) throw rlcsc::IoError("cannot write " + csv);
        out << rlcsc::report_csv(report);
    }
    return report.missing.empty() ? kOk : kIo;
}

int cmd_ista_demo(int n, int m, double lambda, int iters, std::uint64_t seed) {
    if (n < 1 || m < 1 || iters < 1) throw rlcsc::NumericError("ista-demo: sizes must be positive");
    rlcsc::Rng rng = rlcsc::Rng(seed).split(rlcsc::rng_stream::kProblemGen);

    rlcsc::sparse::SparseProblem p;
    p.dict = rlcsc::sparse::Matrix(n, m);
    for (auto& v : p.dict.a) v = rng.next_gaussian() / std::sqrt(static_cast<double>(n));
    rlcsc::sparse::Vec z_true(m, 0.0);
    for (int j = 0; j < std::max(1, m / 4); ++j)
        z_true[rng.next_below(static_cast<std::uint32_t>(m))] = rng.next_gaussian();
    p.signal = rlcsc::sparse::matvec(p.dict, z_true);
    for (auto& v : p.signal) v += 0.01 * rng.next_gaussian();
    p.lambda = lambda;
    p.step_constant = 1.01 * rlcsc::sparse::estimate_mu_max(p.dict);

    const auto res = rlcsc::sparse::ista_solve(p, iters);
    const auto& tr = res.objective_trace;
    std::printf("problem %dx%d, lambda %.4g, L %.6g\n", n, m, lambda, p.step_constant);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i < 5 || i + 5 >= tr.size())
            std::printf("iter %4zu  objective %.10e\n", i, tr[i]);
        else if (i == 5)
            std::printf("...\n");
    }
    int violations = 0;
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i] > tr[i - 1] + 1e-10) ++violations;

    const double oracle = rlcsc::sparse::reference_prox_grad_min(p.dict, p.signal, lambda, 10000);
    std::printf("final objective   %.10e\n", tr.back());
    std::printf("oracle objective  %.10e\n", oracle);
    std::printf("oracle gap        %.3e\n", tr.back() - oracle);
    std::printf("monotonicity violations: %d\n", violations);
    return violations == 0 ? kOk : kNumeric;
}

int cmd_gradcheck(int k, const std::string& channels, double eps, std::uint64_t seed, int size) {
    const auto [n_f, m_f] = parse_channel_pair(channels);
    rlcsc::ModelConfig cfg;
    cfg.n_f = n_f;
    cfg.m_f = m_f;
    cfg.recursions = k;
    cfg.validate();

    rlcsc::Rng rng(seed);
    auto params = rlcsc::RlcscParams<double>::make(cfg);
    for (auto* t : {&params.f0, &params.f1, &params.w1, &params.s, &params.w2, &params.h}) {
        const double sigma = std::sqrt(2.0 / (static_cast<double>(t->n) * t->h * t->w));
        for (auto& v : t->data) v = sigma * rng.next_gaussian();
    }
    for (auto& v : params.theta.data) v = 0.05 * rng.next_unit();

    rlcsc::Tensor4<double> input(1, cfg.c_img, size, size), target(1, cfg.c_img, size, size);
    for (auto& v : input.data) v = rng.next_unit();
    for (auto& v : target.data) v = rng.next_unit();

    const auto report = rlcsc::gradient_check(params, input, target, eps);
    std::printf("checked %zu entries, max relative error %.3e (%s[%zu])\n", report.entries_checked,
                report.max_rel_err, report.worst_param.c_str(), report.worst_index);
    const bool pass = report.max_rel_err < 1e-4;
    std::printf("%s\n", pass ? "PASS" : "FAIL");
    return pass ? kOk : kNumeric;
}

int cmd_summary(int k, const std::string& channels) {
    const auto [n_f, m_f] = parse_channel_pair(channels);
    rlcsc::ModelConfig cfg;
    cfg.n_f = n_f;
    cfg.m_f = m_f;
    cfg.recursions = k;
    cfg.validate();
    const auto params = rlcsc::RlcscParams<float>::make(cfg);

    std::printf("recursions K: %d\n", cfg.recursions);
    std::printf("depth: %d\n", rlcsc::depth(params));
    auto row = [](const char* name, const rlcsc::Tensor4<float>& t) {
        std::printf("%-6s %s  %zu\n", name, t.shape_str().c_str(), t.numel());
    };
    row("F0", params.f0);
    row("F1", params.f1);
    row("W1", params.w1);
    row("S", params.s);
    row("W2", params.w2);
    row("H", params.h);
    row("theta", params.theta);
    std::printf("total parameters: %zu\n", params.parameter_count());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RL-CSC super-resolution toolkit"};
    app.require_subcommand(1);

    // prepare
    std::string p_manifest, p_out, p_scales = "2,3,4", p_aug = "full";
    int p_patch = 33, p_stride = 33;
    std::uint64_t p_seed = 0;
    auto* prepare = app.add_subcommand("prepare", "Build a packed training patch set");
    prepare->add_option("--manifest", p_manifest, "image list file")->required();
    prepare->add_option("--out", p_out, "output patch file")->required();
    prepare->add_option("--scales", p_scales, "SR scales, e.g. 2,3,4");
    prepare->add_option("--patch", p_patch, "patch size");
    prepare->add_option("--stride", p_stride, "patch stride");
    prepare->add_option("--aug", p_aug, "full|none")->check(CLI::IsMember({"full", "none"}));
    prepare->add_option("--seed", p_seed, "seed (reserved; extraction is deterministic)");

    // train
    std::string t_data, t_config, t_out_dir, t_channels = "128,256", t_resume;
    int t_k = 25;
    auto* train = app.add_subcommand("train", "Train a model on a patch set");
    train->add_option("--data", t_data, "patch file from prepare")->required();
    train->add_option("--config", t_config, "key=value training config")->required();
    train->add_option("--out-dir", t_out_dir, "checkpoint/loss output directory")->required();
    train->add_option("--k", t_k, "recursion count");
    train->add_option("--channels", t_channels, "n_f,m_f");
    train->add_option("--resume", t_resume, "checkpoint to continue from");

    // sr
    std::string s_model, s_input, s_output;
    int s_scale = 0;
    bool s_allow_any = false;
    auto* sr = app.add_subcommand("sr", "Upscale an image with a trained model");
    sr->add_option("--model", s_model, "checkpoint file")->required();
    sr->add_option("--input", s_input, "input image (PNG/PGM)")->required();
    sr->add_option("--scale", s_scale, "upscaling factor")->required();
    sr->add_option("--output", s_output, "output PNG")->required();
    sr->add_flag("--allow-any", s_allow_any, "permit scales outside 2,3,4");

    // eval
    std::string e_model, e_manifest, e_csv;
    bool e_bicubic = false;
    int e_scale = 0, e_crop = -1;
    auto* eval = app.add_subcommand("eval", "PSNR/SSIM over a dataset manifest");
    auto* em = eval->add_option("--model", e_model, "checkpoint file");
    auto* eb = eval->add_flag("--bicubic", e_bicubic, "evaluate the bicubic baseline");
    em->excludes(eb);
    eval->add_option("--manifest", e_manifest, "image list file")->required();
    eval->add_option("--scale", e_scale, "SR factor")->required();
    eval->add_option("--crop", e_crop, "border crop in px (default: scale)");
    eval->add_option("--csv", e_csv, "also write CSV here");

    // ista-demo
    int i_n = 8, i_m = 16, i_iters = 100;
    double i_lambda = 0.1;
    std::uint64_t i_seed = 0;
    auto* ista = app.add_subcommand("ista-demo", "Run ISTA on a random problem");
    ista->add_option("--n", i_n, "signal dimension");
    ista->add_option("--m", i_m, "code dimension");
    ista->add_option("--lambda", i_lambda, "l1 weight");
    ista->add_option("--iters", i_iters, "iterations");
    ista->add_option("--seed", i_seed, "seed");

    // gradcheck
    int g_k = 3, g_size = 6;
    std::string g_channels = "16,32";
    double g_eps = 1e-5;
    std::uint64_t g_seed = 0;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
    gradcheck->add_option("--k", g_k, "recursion count");
    gradcheck->add_option("--channels", g_channels, "n_f,m_f");
    gradcheck->add_option("--eps", g_eps, "central-difference step");
    gradcheck->add_option("--seed", g_seed, "seed");
    gradcheck->add_option("--size", g_size, "test input spatial size");

    // summary
    int m_k = 25;
    std::string m_channels = "128,256";
    auto* summary = app.add_subcommand("summary", "Print depth, layer shapes, parameter count");
    summary->add_option("--k", m_k, "recursion count");
    summary->add_option("--channels", m_channels, "n_f,m_f");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*prepare) return cmd_prepare(p_manifest, p_out, p_scales, p_patch, p_stride, p_aug, p_seed);
        if (*train) return cmd_train(t_data, t_config, t_out_dir, t_k, t_channels, t_resume);
        if (*sr) return cmd_sr(s_model, s_input, s_scale, s_output, s_allow_any);
        if (*eval) return cmd_eval(e_model, e_bicubic, e_manifest, e_scale, e_crop, e_csv);
        if (*ista) return cmd_ista_demo(i_n, i_m, i_lambda, i_iters, i_seed);
        if (*gradcheck) return cmd_gradcheck(g_k, g_channels, g_eps, g_seed, g_size);
        if (*summary) return cmd_summary(m_k, m_channels);
    } catch (const rlcsc::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const rlcsc::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumeric;
    } catch (const rlcsc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFormat;
    }
    return kUsage;
}
