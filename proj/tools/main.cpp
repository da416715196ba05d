#include <CLI11.hpp>

#include "ganmod/checkpoint.hpp"
#include "ganmod/inference.hpp"
#include "ganmod/png_io.hpp"
#include "ganmod/runconfig.hpp"
#include "ganmod/trainer.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace ganmod;

struct ConfigArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value run configuration file");
    cmd->add_option("--seed", args.seed, "seed override (mandatory if the config sets none)");
}

RunConfig resolve_config(const ConfigArgs& args) {
    RunConfig rc;
    if (!args.config_path.empty()) {
        rc = parse_run_config(args.config_path);
    } else {
        rc.syn = SynthesisConfig::toy_default();
    }
    if (args.seed) {
        rc.train.seed = *args.seed;
        rc.seed_set = true;
    }
    if (!rc.seed_set) throw ArgumentError("a seed is required: set 'seed' in the config or pass --seed");
    return rc;
}

int parse_domain(const DomainRegistry& reg, const std::string& spec) {
    bool digits = !spec.empty();
    for (char c : spec)
        if (!std::isdigit(static_cast<unsigned char>(c))) digits = false;
    if (digits) {
        int idx = std::stoi(spec);
        if (idx < 0 || idx >= reg.size())
            throw ArgumentError("domain index " + spec + " out of range (registry has " +
                                std::to_string(reg.size()) + " domains)");
        return idx;
    }
    int idx = reg.index_of(spec);
    if (idx < 0) throw ArgumentError("unknown domain '" + spec + "'");
    return idx;
}

Tensor parse_mix(const std::string& spec, int count) {
    Tensor c({count});
    int i = 0;
    std::string cur;
    auto flush = [&](const std::string& s) {
        if (i >= count) throw ArgumentError("--mix has more entries than domains");
        try {
            c[i++] = std::stod(s);
        } catch (const std::exception&) {
            throw ArgumentError("--mix entry '" + s + "' is not a number");
        }
    };
    for (char ch : spec) {
        if (ch == ',') {
            flush(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    flush(cur);
    if (i != count)
        throw ArgumentError("--mix needs one weight per domain (" + std::to_string(count) + ")");
    validate_condition(c, count);
    return c;
}

Tensor z_from_seed(int d_z, uint64_t seed) {
    Rng rng(mix_seed(seed, streams::eval));
    Tensor z({d_z});
    for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
    return z;
}

CheckpointBundle bundle_from_session(const TrainSession& session) {
    CheckpointBundle b;
    b.phase = "adapted";
    b.step = session.step();
    b.syn = session.generator().config();
    b.train = session.config();
    b.gen = session.generator();
    b.has_hyper = true;
    b.hyper = session.hyper();
    b.registry = session.registry();
    b.has_moments = true;
    TrainSession& mut = const_cast<TrainSession&>(session); // moment_tensors only reads
    for (const NamedTensor& t : mut.optimizer().moment_tensors()) {
        if (t.name.rfind("adam.m.", 0) == 0) b.adam_m.push_back(*t.tensor);
        else b.adam_v.push_back(*t.tensor);
    }
    b.adam_t = mut.optimizer().steps_taken();
    return b;
}

void emit_sample_grid(const TrainSession& session, const std::string& dir, int64_t step) {
    AdaptedModel model;
    model.syn = session.generator().config();
    model.train = session.config();
    model.gen = session.generator();
    model.hyper = session.hyper();
    model.registry = session.registry();
    model.step = step;
    int N = model.registry.size();
    const int kSeedsPerDomain = 4;
    std::vector<Tensor> cells;
    std::vector<GridCellMeta> meta;
    for (int d = 0; d < N; ++d) {
        Tensor cond = one_hot(d, N);
        for (int s = 0; s < kSeedsPerDomain; ++s) {
            uint64_t seed = static_cast<uint64_t>(s) + 1;
            cells.push_back(synthesize_adapted(model, z_from_seed(model.syn.d_z, seed), cond, 1.0, 1.0));
            GridCellMeta m;
            m.seed = seed;
            m.condition.assign(cond.data(), cond.data() + N);
            meta.push_back(std::move(m));
        }
    }
    write_image_grid(dir + "/samples_step" + std::to_string(step) + ".png", cells, kSeedsPerDomain, meta);
}

int cmd_pretrain(const ConfigArgs& cargs, const std::string& out, int64_t steps_override,
                 const std::string& log_path) {
    RunConfig rc = resolve_config(cargs);
    if (steps_override >= 0) rc.train.pretrain_steps = steps_override;
    Generator gen = Generator::random_init(rc.syn, rc.train.seed);
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::trunc);
        if (!log) throw IoError("cannot write " + log_path);
        log << "step,loss\n";
    }
    pretrain_source(gen, rc.train, [&](int64_t step, double loss) {
        if (log.is_open()) log << step << "," << loss << "\n";
        if (step % 100 == 0) std::cout << "pretrain step " << step << " loss " << loss << "\n";
    });
    CheckpointBundle b;
    b.phase = "source";
    b.syn = rc.syn;
    b.train = rc.train;
    b.gen = std::move(gen);
    save_checkpoint(b, out);
    std::cout << "wrote source checkpoint " << out << "\n";
    return 0;
}

int cmd_prepare(const ConfigArgs& cargs, const std::string& ckpt, const std::string& data,
                const std::string& out) {
    CheckpointBundle b = load_checkpoint(ckpt);
    if (!cargs.config_path.empty() || cargs.seed) {
        ConfigArgs merged = cargs;
        RunConfig rc = resolve_config(merged);
        b.train = rc.train;
    }
    int res = b.syn.output_resolution();
    DomainRegistry reg = data.empty() ? build_registry(default_target_specs(b.train.seed), res)
                                      : load_registry_from_folders(data, res);
    ToyConvEncoder encoder({res, b.train.d_e, b.train.encoder_seed});
    InversionOptions opt;
    opt.lr = b.train.invert_lr;
    opt.iters = b.train.invert_steps;
    opt.stop_sim = b.train.invert_stop_sim;
    opt.seed = b.train.seed;
    prepare_registry(b.gen, encoder, reg, opt);
    b.registry = std::move(reg);
    save_checkpoint(b, out);
    std::cout << "prepared " << b.registry.size() << " domains -> " << out << "\n";
    return 0;
}

int cmd_train(const std::string& ckpt, const std::string& config_path, int64_t steps_override,
              const std::string& out, const std::string& log_path, const std::string& samples_dir) {
    CheckpointBundle b = load_checkpoint(ckpt);
    if (!config_path.empty()) {
        RunConfig rc = parse_run_config(config_path);
        SynthesisConfig& a = rc.syn;
        SynthesisConfig& s = b.syn;
        bool same = a.d_z == s.d_z && a.d_w == s.d_w && a.mapping_layers == s.mapping_layers &&
                    a.layers.size() == s.layers.size();
        for (size_t i = 0; same && i < a.layers.size(); ++i)
            same = a.layers[i].c_in == s.layers[i].c_in && a.layers[i].c_out == s.layers[i].c_out &&
                   a.layers[i].kernel == s.layers[i].kernel &&
                   a.layers[i].resolution == s.layers[i].resolution;
        if (!same) throw ConfigError("config architecture does not match the checkpoint");
        b.train = rc.train;
    }
    if (steps_override >= 0) b.train.steps = steps_override;
    if (b.registry.size() == 0) throw ConfigError("checkpoint has no registry; run prepare first");

    int res = b.syn.output_resolution();
    ToyConvEncoder encoder({res, b.train.d_e, b.train.encoder_seed});
    ToyConvEncoder id_encoder({res, b.train.d_e, b.train.id_encoder_seed});
    TrainSession session(b.train, b.gen, b.registry, encoder, id_encoder);
    if (b.has_hyper) {
        if (!b.has_moments) throw ConfigError("adapted checkpoint is missing optimizer moments");
        session.restore(std::move(b.hyper), std::move(b.adam_m), std::move(b.adam_v), b.adam_t, b.step);
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::trunc);
        if (!log) throw IoError("cannot write " + log_path);
        log << "step,total,contra,mtg,id,grad_norm\n";
    }
    int64_t remaining = b.train.steps - session.step();
    session.run(remaining > 0 ? remaining : 0, [&](const TrainSession& s, const StepStats& st) {
        int64_t done = s.step();
        if (log.is_open())
            log << (done - 1) << "," << st.loss.total << "," << st.loss.contra << "," << st.loss.mtg << ","
                << st.loss.id << "," << st.grad_norm << "\n";
        if (done % 100 == 0 || done == b.train.steps)
            std::cout << "step " << done << "/" << b.train.steps << " loss " << st.loss.total << "\n";
        if (s.config().checkpoint_every > 0 && done % s.config().checkpoint_every == 0 &&
            done != b.train.steps)
            save_checkpoint(bundle_from_session(s), out);
        if (!samples_dir.empty() && s.config().sample_every > 0 && done % s.config().sample_every == 0)
            emit_sample_grid(s, samples_dir, done);
    });
    save_checkpoint(bundle_from_session(session), out);
    std::cout << "wrote adapted checkpoint " << out << " at step " << session.step() << "\n";
    return 0;
}

int cmd_synth(const std::string& ckpt, uint64_t seed, const std::string& domain, const std::string& mix,
              double alpha, double kappa, const std::string& out) {
    AdaptedModel model = make_adapted_model(load_checkpoint(ckpt));
    Tensor cond = mix.empty() ? one_hot(parse_domain(model.registry, domain), model.registry.size())
                              : parse_mix(mix, model.registry.size());
    Tensor img = synthesize_adapted(model, z_from_seed(model.syn.d_z, seed), cond, alpha, kappa);
    write_png(out, img);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_interp(const std::string& ckpt, uint64_t seed, const std::string& from, const std::string& to,
               int steps, double alpha, double kappa, bool v_space, const std::string& out) {
    AdaptedModel model = make_adapted_model(load_checkpoint(ckpt));
    int N = model.registry.size();
    Tensor c_a = one_hot(parse_domain(model.registry, from), N);
    Tensor c_b = one_hot(parse_domain(model.registry, to), N);
    Tensor w = model.gen.mapping_forward(z_from_seed(model.syn.d_z, seed));
    std::vector<Tensor> images = domain_sweep(model, w, c_a, c_b, steps, alpha, kappa, v_space);
    std::vector<GridCellMeta> meta;
    for (int i = 0; i < steps; ++i) {
        double t = static_cast<double>(i) / (steps - 1);
        Tensor ci = interpolate_domains(c_a, c_b, t);
        GridCellMeta m;
        m.seed = seed;
        m.condition.assign(ci.data(), ci.data() + N);
        m.alpha = alpha;
        m.kappa = kappa;
        meta.push_back(std::move(m));
    }
    write_image_grid(out, images, steps, meta);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_translate(const std::string& ckpt, const std::string& input, double alpha, double kappa,
                  uint64_t seed, const std::string& out) {
    AdaptedModel model = make_adapted_model(load_checkpoint(ckpt));
    int res = model.syn.output_resolution();
    Tensor target = resize_bilinear(center_crop_square(read_png(input)), res, res);
    ToyConvEncoder encoder = model.make_encoder();
    InversionOptions opt;
    opt.lr = model.train.invert_lr;
    opt.iters = model.train.invert_steps;
    opt.stop_sim = model.train.invert_stop_sim;
    opt.seed = seed;
    InversionResult inv = invert_image(model.gen, encoder, target, opt);
    std::cout << "inverted " << input << ": pixel L1 " << inv.pixel_l1 << ", 1-sim " << inv.one_minus_sim
              << " after " << inv.iters_run << " iterations\n";
    int N = model.registry.size();
    std::vector<Tensor> cells;
    std::vector<GridCellMeta> meta;
    cells.push_back(model.gen.synthesize(inv.w)); // source reconstruction
    meta.push_back({seed, {}, 0.0, 0.0});
    for (int d = 0; d < N; ++d) {
        Tensor cond = one_hot(d, N);
        cells.push_back(synthesize_adapted_w(model, inv.w, cond, alpha, kappa));
        GridCellMeta m;
        m.seed = seed;
        m.condition.assign(cond.data(), cond.data() + N);
        m.alpha = alpha;
        m.kappa = kappa;
        meta.push_back(std::move(m));
    }
    write_image_grid(out, cells, N + 1, meta);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_sweep(const std::string& ckpt, uint64_t seed, const std::string& domain, int alpha_steps,
              int kappa_steps, const std::string& out) {
    if (alpha_steps < 2 || kappa_steps < 2) throw ArgumentError("sweep needs at least 2 steps per axis");
    AdaptedModel model = make_adapted_model(load_checkpoint(ckpt));
    Tensor cond = one_hot(parse_domain(model.registry, domain), model.registry.size());
    Tensor w = model.gen.mapping_forward(z_from_seed(model.syn.d_z, seed));
    std::vector<Tensor> cells;
    std::vector<GridCellMeta> meta;
    for (int a = 0; a < alpha_steps; ++a) {
        double alpha = static_cast<double>(a) / (alpha_steps - 1);
        for (int k = 0; k < kappa_steps; ++k) {
            double kappa = static_cast<double>(k) / (kappa_steps - 1);
            cells.push_back(synthesize_adapted_w(model, w, cond, alpha, kappa));
            GridCellMeta m;
            m.seed = seed;
            m.condition.assign(cond.data(), cond.data() + model.registry.size());
            m.alpha = alpha;
            m.kappa = kappa;
            meta.push_back(std::move(m));
        }
    }
    write_image_grid(out, cells, kappa_steps, meta);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_params(const std::string& config_path, const std::vector<int>& domain_counts) {
    SynthesisConfig syn = SynthesisConfig::toy_default();
    TrainingConfig train;
    if (!config_path.empty()) {
        RunConfig rc = parse_run_config(config_path);
        syn = rc.syn;
        train = rc.train;
    }
    Generator gen(syn);
    int64_t gen_params = gen.param_count();
    std::cout << "generator parameters: " << gen_params << "\n\n";
    std::cout << "per-layer residual parameterization (d_v = " << train.d_v << "):\n";
    std::cout << "  layer        full residual    hyper heads\n";
    for (size_t i = 0; i < syn.layers.size(); ++i) {
        const LayerConfig& l = syn.layers[i];
        int64_t full = static_cast<int64_t>(l.c_in) * l.c_out * l.kernel * l.kernel;
        int64_t heads = Hypernet::analytic_layer_param_count(l, train.d_v);
        std::printf("  %zu  %dx%d k%d   %12lld %14lld\n", i, l.c_in, l.c_out, l.kernel,
                    static_cast<long long>(full), static_cast<long long>(heads));
    }
    std::cout << "\nscaling with domain count N (adapted = generator + hyper-network;\n"
                 "baseline = N separately finetuned generators):\n";
    std::cout << "  N      adapted     baseline   analytic==measured\n";
    for (int n : domain_counts) {
        HypernetConfig hc;
        hc.n_domains = n;
        hc.d_v = train.d_v;
        hc.layers = syn.layers;
        Hypernet hyper(hc);
        int64_t measured = hyper.param_count();
        int64_t analytic = Hypernet::analytic_param_count(hc);
        std::printf("  %-3d %10lld %12lld   %s\n", n, static_cast<long long>(gen_params + measured),
                    static_cast<long long>(gen_params * n), analytic == measured ? "yes" : "NO");
        if (analytic != measured)
            throw ConfigError("analytic parameter count " + std::to_string(analytic) +
                              " != measured " + std::to_string(measured));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic multi-domain GAN adaptation at desk scale"};
    app.require_subcommand(1);

    ConfigArgs pre_cfg;
    std::string pre_out, pre_log;
    int64_t pre_steps = -1;
    CLI::App* pre = app.add_subcommand("pretrain", "fit the source generator to the procedural source domain");
    add_config_args(pre, pre_cfg);
    pre->add_option("--out", pre_out, "output checkpoint path")->required();
    pre->add_option("--steps", pre_steps, "override pretraining step count");
    pre->add_option("--log", pre_log, "CSV loss log path");

    ConfigArgs prep_cfg;
    std::string prep_ckpt, prep_data, prep_out;
    CLI::App* prep = app.add_subcommand("prepare", "build the domain registry and cache inverted latents");
    add_config_args(prep, prep_cfg);
    prep->add_option("--checkpoint", prep_ckpt, "source checkpoint")->required();
    prep->add_option("--data", prep_data, "folder of domain subfolders with PNGs (default: procedural set)");
    prep->add_option("--out", prep_out, "output checkpoint path")->required();

    std::string tr_ckpt, tr_config, tr_out, tr_log, tr_samples;
    int64_t tr_steps = -1;
    CLI::App* tr = app.add_subcommand("train", "adapt: train the hyper-network against the registry");
    tr->add_option("--checkpoint", tr_ckpt, "prepared (or adapted, to resume) checkpoint")->required();
    tr->add_option("--config", tr_config, "config override; architecture must match the checkpoint");
    tr->add_option("--steps", tr_steps, "total training steps to reach");
    tr->add_option("--out", tr_out, "output checkpoint path")->required();
    tr->add_option("--log", tr_log, "CSV loss log path");
    tr->add_option("--samples-dir", tr_samples, "emit sample grids here every sample_every steps");

    std::string sy_ckpt, sy_domain, sy_mix, sy_out;
    uint64_t sy_seed = 0;
    double sy_alpha = 1.0, sy_kappa = 1.0;
    CLI::App* sy = app.add_subcommand("synth", "synthesize one adapted image");
    sy->add_option("--checkpoint", sy_ckpt)->required();
    sy->add_option("--seed", sy_seed, "latent seed")->required();
    sy->add_option("--domain", sy_domain, "target domain name or index");
    sy->add_option("--mix", sy_mix, "soft condition, comma-separated weights summing to 1");
    sy->add_option("--alpha", sy_alpha, "adaptation degree");
    sy->add_option("--kappa", sy_kappa, "style-mixing strength in [0,1]");
    sy->add_option("--out", sy_out, "output PNG")->required();

    std::string in_ckpt, in_from, in_to, in_out;
    uint64_t in_seed = 0;
    int in_steps = 7;
    double in_alpha = 1.0, in_kappa = 1.0;
    bool in_vspace = false;
    CLI::App* in = app.add_subcommand("interp", "sweep between two domains");
    in->add_option("--checkpoint", in_ckpt)->required();
    in->add_option("--seed", in_seed)->required();
    in->add_option("--from", in_from, "start domain")->required();
    in->add_option("--to", in_to, "end domain")->required();
    in->add_option("--steps", in_steps, "frames including both endpoints");
    in->add_option("--alpha", in_alpha);
    in->add_option("--kappa", in_kappa);
    in->add_flag("--v-space", in_vspace, "interpolate in the domain-latent space instead of on c");
    in->add_option("--out", in_out, "output grid PNG")->required();

    std::string txl_ckpt, txl_input, txl_out;
    uint64_t txl_seed = 0;
    double txl_alpha = 1.0, txl_kappa = 1.0;
    CLI::App* txl = app.add_subcommand("translate", "invert an image and render it in every domain");
    txl->add_option("--checkpoint", txl_ckpt)->required();
    txl->add_option("--input", txl_input, "input PNG")->required();
    txl->add_option("--alpha", txl_alpha);
    txl->add_option("--kappa", txl_kappa);
    txl->add_option("--seed", txl_seed, "inversion seed");
    txl->add_option("--out", txl_out, "output grid PNG")->required();

    std::string sw_ckpt, sw_domain, sw_out;
    uint64_t sw_seed = 0;
    int sw_alpha_steps = 5, sw_kappa_steps = 5;
    CLI::App* sw = app.add_subcommand("sweep", "alpha x kappa control grid for one domain");
    sw->add_option("--checkpoint", sw_ckpt)->required();
    sw->add_option("--seed", sw_seed)->required();
    sw->add_option("--domain", sw_domain)->required();
    sw->add_option("--alpha-steps", sw_alpha_steps);
    sw->add_option("--kappa-steps", sw_kappa_steps);
    sw->add_option("--out", sw_out, "output grid PNG")->required();

    std::string pa_config;
    std::vector<int> pa_domains{1, 2, 5, 10};
    CLI::App* pa = app.add_subcommand("params", "analytic vs measured parameter-count report");
    pa->add_option("--config", pa_config);
    pa->add_option("--domains", pa_domains, "domain counts to tabulate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(pre)) return cmd_pretrain(pre_cfg, pre_out, pre_steps, pre_log);
        if (app.got_subcommand(prep)) return cmd_prepare(prep_cfg, prep_ckpt, prep_data, prep_out);
        if (app.got_subcommand(tr)) return cmd_train(tr_ckpt, tr_config, tr_steps, tr_out, tr_log, tr_samples);
        if (app.got_subcommand(sy)) {
            if (sy_domain.empty() == sy_mix.empty())
                throw ArgumentError("synth needs exactly one of --domain or --mix");
            return cmd_synth(sy_ckpt, sy_seed, sy_domain, sy_mix, sy_alpha, sy_kappa, sy_out);
        }
        if (app.got_subcommand(in))
            return cmd_interp(in_ckpt, in_seed, in_from, in_to, in_steps, in_alpha, in_kappa, in_vspace,
                              in_out);
        if (app.got_subcommand(txl))
            return cmd_translate(txl_ckpt, txl_input, txl_alpha, txl_kappa, txl_seed, txl_out);
        if (app.got_subcommand(sw))
            return cmd_sweep(sw_ckpt, sw_seed, sw_domain, sw_alpha_steps, sw_kappa_steps, sw_out);
        if (app.got_subcommand(pa)) return cmd_params(pa_config, pa_domains);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
