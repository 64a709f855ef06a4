#include "wzjscc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "wzjscc/channel.hpp"
#include "wzjscc/checkpoint.hpp"
#include "wzjscc/errors.hpp"
#include "wzjscc/rng.hpp"

namespace wzjscc::exp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (eval_snr_grid_db.empty()) {
        throw ConfigError("eval_snr_grid_db must not be empty");
    }
    if (eval_repeats < 1) {
        throw ConfigError(fmt::format("eval_repeats must be at least 1, got {}", eval_repeats));
    }
    if (eval_threads < 1) {
        throw ConfigError("eval_threads must be at least 1");
    }
    if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos) {
        throw ConfigError(fmt::format("run_id '{}' must be a plain directory name", run_id));
    }
    model.validate();
    train.validate();
    if (model.image.height != dataset.height || model.image.width != dataset.width) {
        throw ConfigError(fmt::format("model image {}x{} differs from dataset resolution {}x{}", model.image.height,
                                      model.image.width, dataset.height, dataset.width));
    }
    if (model.p_avg != train.p_avg) {
        throw ConfigError(fmt::format("model p_avg {} differs from train p_avg {}", model.p_avg, train.p_avg));
    }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"dataset", c.dataset},
                       {"model", c.model},
                       {"train", c.train},
                       {"eval_snr_grid_db", c.eval_snr_grid_db},
                       {"eval_repeats", c.eval_repeats},
                       {"output_dir", c.output_dir.generic_string()},
                       {"run_id", c.run_id},
                       {"lpips_net", c.lpips_net},
                       {"eval_seed", c.eval_seed},
                       {"eval_threads", c.eval_threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    const ExperimentConfig d;
    c.dataset = j.value("dataset", nlohmann::json::object()).get<data::DatasetSpec>();
    c.train = j.value("train", nlohmann::json::object()).get<train::TrainConfig>();
    nlohmann::json model = j.value("model", nlohmann::json::object());
    if (!model.contains("image")) {
        model["image"] = {{"channels", 3}, {"height", c.dataset.height}, {"width", c.dataset.width}};
    }
    if (!model.contains("p_avg")) {
        model["p_avg"] = c.train.p_avg;
    }
    c.model = model.get<codec::ModelConfig>();
    c.eval_snr_grid_db = j.value("eval_snr_grid_db", d.eval_snr_grid_db);
    c.eval_repeats = j.value("eval_repeats", d.eval_repeats);
    c.output_dir = j.value("output_dir", d.output_dir.generic_string());
    c.run_id = j.value("run_id", d.run_id);
    c.lpips_net = j.value("lpips_net", d.lpips_net);
    c.eval_seed = j.value("eval_seed", d.eval_seed);
    c.eval_threads = j.value("eval_threads", d.eval_threads);
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("config file {} cannot be read", path.string()));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    ExperimentConfig config;
    try {
        config = j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    config.validate();
    return config;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = nlohmann::json(config).dump();
    return metrics::sha256_hex({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

metrics::FeatureNet resolve_feature_net(const std::string& spec) {
    if (spec == "surrogate") {
        return metrics::FeatureNet::surrogate();
    }
    if (spec == "official") {
        return metrics::FeatureNet::load(metrics::FeatureNet::default_asset_path());
    }
    return metrics::FeatureNet::load(spec);
}

// ---------------------------------------------------------------- evaluation

std::uint64_t eval_noise_seed(std::uint64_t eval_seed, std::size_t image, int repeat) {
    return derive_seed(derive_seed(eval_seed, "eval-noise", image), "repeat", static_cast<std::uint64_t>(repeat));
}

namespace {

struct ImageScores {
    double psnr = 0.0;
    double msssim = 0.0;
    double lpips = 0.0;
};

constexpr int kEvalChunk = 8;

void evaluate_range(const codec::VariantModel& model, std::span<const data::StereoPair> test_set, double sigma2,
                    int repeats, std::uint64_t eval_seed, const metrics::FeatureNet& net, std::size_t begin,
                    std::size_t end, std::vector<ImageScores>& out) {
    nn::NoGradGuard guard;
    for (std::size_t lo = begin; lo < end; lo += kEvalChunk) {
        const std::size_t hi = std::min(end, lo + kEvalChunk);
        std::vector<ImageTensor> xs;
        std::vector<ImageTensor> sides;
        for (std::size_t i = lo; i < hi; ++i) {
            xs.push_back(test_set[i].x);
            sides.push_back(test_set[i].x_side);
        }
        const nn::Tensor x = to_batch(xs);
        const nn::Tensor side = to_batch(sides);
        const std::vector<double> s2(hi - lo, sigma2);
        for (int r = 0; r < repeats; ++r) {
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = lo; i < hi; ++i) {
                seeds.push_back(eval_noise_seed(eval_seed, i, r));
            }
            const auto link = codec::simulate_link(model, x, side, s2, seeds);
            for (std::size_t i = lo; i < hi; ++i) {
                const ImageTensor x_hat = from_batch(link.reconstruction, static_cast<int>(i - lo));
                ImageScores& s = out[i];
                s.psnr += metrics::psnr(test_set[i].x, x_hat);
                s.msssim += metrics::ms_ssim(test_set[i].x, x_hat);
                s.lpips += metrics::lpips(test_set[i].x, x_hat, net);
            }
        }
        for (std::size_t i = lo; i < hi; ++i) {
            out[i].psnr /= repeats;
            out[i].msssim /= repeats;
            out[i].lpips /= repeats;
        }
    }
}

} // namespace

std::vector<EvalRecord> evaluate(const codec::VariantModel& model, std::span<const data::StereoPair> test_set,
                                 std::span<const double> snr_grid_db, int repeats, std::uint64_t eval_seed,
                                 const metrics::FeatureNet& net, int threads) {
    if (test_set.empty()) {
        throw InvalidArgument("evaluation set is empty");
    }
    if (repeats < 1) {
        throw InvalidArgument("repeats must be at least 1");
    }
    std::vector<double> sigma2;
    for (double snr : snr_grid_db) {
        sigma2.push_back(channel::snr_to_sigma2(snr, model.config().p_avg));
    }
    std::vector<EvalRecord> records;
    const std::size_t n = test_set.size();
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(threads), 1, n);
    for (std::size_t g = 0; g < snr_grid_db.size(); ++g) {
        std::vector<ImageScores> scores(n);
        if (workers == 1) {
            evaluate_range(model, test_set, sigma2[g], repeats, eval_seed, net, 0, n, scores);
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t lo = n * w / workers;
                const std::size_t hi = n * (w + 1) / workers;
                pool.emplace_back([&, lo, hi] {
                    evaluate_range(model, test_set, sigma2[g], repeats, eval_seed, net, lo, hi, scores);
                });
            }
        }
        std::vector<double> p;
        std::vector<double> m;
        std::vector<double> l;
        for (const auto& s : scores) {
            p.push_back(s.psnr);
            m.push_back(s.msssim);
            l.push_back(s.lpips);
        }
        const auto ps = metrics::summarize(p);
        const auto ms = metrics::summarize(m);
        const auto ls = metrics::summarize(l);
        records.push_back({snr_grid_db[g], ps.mean, ps.std, ms.mean, ms.std, ls.mean, ls.std});
    }
    return records;
}

// ---------------------------------------------------------------- CSV

std::string_view to_string(Metric metric) {
    switch (metric) {
    case Metric::psnr:
        return "psnr";
    case Metric::msssim:
        return "msssim";
    case Metric::lpips:
        return "lpips";
    }
    return "unknown";
}

std::string csv_header(Metric metric) {
    return fmt::format("model/snr,test/{0},test/{0}_std", to_string(metric));
}

bool higher_is_better(Metric metric) { return metric != Metric::lpips; }

std::string format_csv(std::span<const EvalRecord> records, Metric metric) {
    std::string out = csv_header(metric) + "\n";
    for (const auto& r : records) {
        double value = r.psnr;
        double std = r.psnr_std;
        if (metric == Metric::msssim) {
            value = r.msssim;
            std = r.msssim_std;
        } else if (metric == Metric::lpips) {
            value = r.lpips;
            std = r.lpips_std;
        }
        out += fmt::format("{},{:.10f},{:.10f}\n", r.snr_db, value, std);
    }
    return out;
}

std::vector<fs::path> write_eval_csvs(const fs::path& dir, std::span<const EvalRecord> records,
                                      const std::string& prefix) {
    fs::create_directories(dir);
    std::vector<fs::path> paths;
    for (Metric m : kMetrics) {
        const fs::path path = dir / fmt::format("{}_{}.csv", prefix, to_string(m));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << format_csv(records, m);
        if (!out) {
            throw ConfigError(fmt::format("cannot write {}", path.string()));
        }
        paths.push_back(path);
    }
    return paths;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_number(const std::string& text, const fs::path& path, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument(text);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}:{}: '{}' is not a number", path.string(), line, text));
    }
}

std::string curve_label(const fs::path& path, Metric metric) {
    const std::string stem = path.stem().string();
    const std::string suffix = fmt::format("_{}", to_string(metric));
    if (stem == fmt::format("eval{}", suffix) && path.has_parent_path() &&
        !path.parent_path().filename().empty()) {
        return path.parent_path().filename().string();
    }
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
        return stem.substr(0, stem.size() - suffix.size());
    }
    return stem;
}

} // namespace

Curve read_curve(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingResource(fmt::format("CSV {} not found", path.string()));
    }
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') {
        header.pop_back();
    }
    std::optional<Metric> metric;
    for (Metric m : kMetrics) {
        if (header == csv_header(m)) {
            metric = m;
        }
    }
    if (!metric) {
        const auto cols = split_csv_line(header);
        if (cols.size() == 2 && cols[0] == "model/snr" && cols[1].starts_with("test/")) {
            throw ConfigError(fmt::format("{}: column '{}_std' is missing", path.string(), cols[1]));
        }
        throw ConfigError(fmt::format("{}: header '{}' is not of the form model/snr,test/<metric>,test/<metric>_std",
                                      path.string(), header));
    }
    Curve curve{curve_label(path, *metric), *metric, {}};
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto cols = split_csv_line(line);
        if (cols.size() != 3) {
            throw ConfigError(fmt::format("{}:{}: expected 3 columns, got {}", path.string(), line_no, cols.size()));
        }
        curve.rows.push_back({parse_number(cols[0], path, line_no), parse_number(cols[1], path, line_no),
                              parse_number(cols[2], path, line_no)});
    }
    if (curve.rows.empty()) {
        throw ConfigError(fmt::format("{} has no data rows", path.string()));
    }
    return curve;
}

// ---------------------------------------------------------------- commands

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw ConfigError(fmt::format("cannot write {}", path.string()));
    }
}

nlohmann::json conventions() {
    return {
        {"complex_packing", "split-half: first half of latent channels real, second half imaginary"},
        {"noise", "CN(0, sigma2), real and imaginary parts each with variance sigma2/2"},
        {"snr_definition", "10*log10(p_avg/sigma2)"},
        {"std_semantics", "population std across per-image means; each image averaged over noise repeats"},
        {"eval_noise", "one seed per (image, repeat), shared across the SNR grid"},
    };
}

nlohmann::json asset_record(const std::string& spec, const metrics::FeatureNet& net) {
    return {{"lpips_net", spec}, {"provenance", net.provenance()}, {"sha256", net.checksum()}};
}

} // namespace

TrainArtifacts cmd_train(const ExperimentConfig& config, bool force) {
    config.validate();
    const fs::path dir = config.run_dir();
    if (fs::exists(dir) && !force) {
        throw ConfigError(fmt::format("run '{}' already exists at {}; pass --force to overwrite", config.run_id,
                                      dir.string()));
    }
    const auto train_set = data::load_split(config.dataset, data::Split::train);
    const auto val_set = data::load_split(config.dataset, data::Split::val);

    std::optional<metrics::FeatureNet> net;
    if (config.train.lambda_lpips > 0.0) {
        net = resolve_feature_net(config.lpips_net);
    }
    const codec::VariantModel model = codec::build_model(config.model);
    auto result = train::fit(model, train_set, val_set, config.train, net ? &*net : nullptr);

    fs::create_directories(dir);
    TrainArtifacts artifacts;
    artifacts.checkpoint = dir / "model.ckpt";
    artifacts.log = dir / "train_log.jsonl";
    artifacts.manifest = dir / "run_manifest.json";
    codec::save_checkpoint(artifacts.checkpoint, result.model);
    result.log.write(artifacts.log);

    nlohmann::json manifest{
        {"run_id", config.run_id},
        {"config_hash", config_hash(config)},
        {"config", config},
        {"seeds", {{"model", config.model.seed}, {"train", config.train.seed}, {"eval", config.eval_seed}}},
        {"variant", std::string(codec::to_string(config.model.variant))},
        {"parameters", result.model.count_parameters()},
        {"bandwidth_k", result.model.bandwidth()},
        {"best_epoch", result.log.best_epoch},
        {"stop_reason", std::string(train::to_string(result.log.stop_reason))},
        {"steps", result.log.steps.size()},
        {"checkpoint_sha256", metrics::sha256_file(artifacts.checkpoint)},
        {"assets", net ? asset_record(config.lpips_net, *net) : nlohmann::json{{"lpips_net", "unused"}}},
        {"conventions", conventions()},
    };
    write_text(artifacts.manifest, manifest.dump(2) + "\n");
    artifacts.train_log = std::move(result.log);
    return artifacts;
}

EvalArtifacts cmd_eval(const fs::path& checkpoint, const ExperimentConfig& config, const fs::path& out_dir) {
    config.validate();
    for (double snr : config.eval_snr_grid_db) {
        channel::snr_to_sigma2(snr, config.model.p_avg);
    }
    const codec::VariantModel model = codec::load_checkpoint(checkpoint);
    const auto& mc = model.config();
    if (mc.image.height != config.dataset.height || mc.image.width != config.dataset.width ||
        mc.image.channels != 3) {
        throw ConfigError(fmt::format("checkpoint expects {}x{}x{} images, the dataset yields 3x{}x{}",
                                      mc.image.channels, mc.image.height, mc.image.width, config.dataset.height,
                                      config.dataset.width));
    }
    const auto test_set = data::load_split(config.dataset, data::Split::test);
    const metrics::FeatureNet net = resolve_feature_net(config.lpips_net);

    EvalArtifacts artifacts;
    artifacts.records = evaluate(model, test_set, config.eval_snr_grid_db, config.eval_repeats, config.eval_seed, net,
                                 config.eval_threads);
    const fs::path dir = out_dir.empty() ? config.run_dir() : out_dir;
    artifacts.csvs = write_eval_csvs(dir, artifacts.records);
    artifacts.manifest = dir / "eval_manifest.json";

    nlohmann::json csvs = nlohmann::json::object();
    for (const auto& p : artifacts.csvs) {
        csvs[p.filename().string()] = metrics::sha256_file(p);
    }
    nlohmann::json manifest{
        {"config_hash", config_hash(config)},
        {"config", config},
        {"checkpoint", checkpoint.generic_string()},
        {"checkpoint_sha256", metrics::sha256_file(checkpoint)},
        {"model", mc},
        {"eval_seed", config.eval_seed},
        {"eval_repeats", config.eval_repeats},
        {"test_images", test_set.size()},
        {"assets", asset_record(config.lpips_net, net)},
        {"csv_sha256", csvs},
        {"conventions", conventions()},
    };
    write_text(artifacts.manifest, manifest.dump(2) + "\n");
    return artifacts;
}

namespace {

std::string grid_diff(const Curve& a, const Curve& b) {
    std::set<double> ga;
    std::set<double> gb;
    for (const auto& r : a.rows) {
        ga.insert(r.snr_db);
    }
    for (const auto& r : b.rows) {
        gb.insert(r.snr_db);
    }
    std::string only_a;
    std::string only_b;
    for (double v : ga) {
        if (!gb.contains(v)) {
            only_a += fmt::format(" {}", v);
        }
    }
    for (double v : gb) {
        if (!ga.contains(v)) {
            only_b += fmt::format(" {}", v);
        }
    }
    std::string out = fmt::format("SNR grids differ between '{}' and '{}':", a.label, b.label);
    if (!only_a.empty()) {
        out += fmt::format(" only in '{}':{};", a.label, only_a);
    }
    if (!only_b.empty()) {
        out += fmt::format(" only in '{}':{};", b.label, only_b);
    }
    if (only_a.empty() && only_b.empty()) {
        out += " same values in a different order or with repeats;";
    }
    return out;
}

std::string render_svg(Metric metric, const std::vector<Curve>& curves) {
    constexpr double kW = 640.0;
    constexpr double kH = 420.0;
    constexpr double kL = 70.0;
    constexpr double kR = 170.0;
    constexpr double kT = 40.0;
    constexpr double kB = 50.0;
    static constexpr std::array<const char*, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    double xmin = curves[0].rows.front().snr_db;
    double xmax = xmin;
    double ymin = curves[0].rows.front().value;
    double ymax = ymin;
    for (const auto& c : curves) {
        for (const auto& r : c.rows) {
            xmin = std::min(xmin, r.snr_db);
            xmax = std::max(xmax, r.snr_db);
            ymin = std::min(ymin, r.value - r.std);
            ymax = std::max(ymax, r.value + r.std);
        }
    }
    if (xmax == xmin) {
        xmax = xmin + 1.0;
    }
    if (ymax == ymin) {
        ymax = ymin + 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
    auto py = [&](double y) { return kT + (ymax - y) / (ymax - ymin) * (kH - kT - kB); };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kW, kH);
    s += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\">test/{} vs SNR ({} is better)</text>\n", kL,
                     to_string(metric), higher_is_better(metric) ? "higher" : "lower");
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kL, kT,
                     kW - kL - kR, kH - kT - kB);
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        const double yv = ymin + (ymax - ymin) * i / 5.0;
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(xv),
                         kH - kB + 16, xv);
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", kL - 6, py(yv) + 4,
                         yv);
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">SNR (dB)</text>\n",
                     (kL + kW - kR) / 2.0, kH - 12);
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const char* color = kColors[ci % kColors.size()];
        std::string points;
        for (const auto& r : curves[ci].rows) {
            points += fmt::format("{:.1f},{:.1f} ", px(r.snr_db), py(r.value));
            s += fmt::format("<line x1=\"{0:.1f}\" x2=\"{0:.1f}\" y1=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"{3}\"/>\n",
                             px(r.snr_db), py(r.value - r.std), py(r.value + r.std), color);
        }
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
        const double ly = kT + 16.0 * static_cast<double>(ci) + 8.0;
        s += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                         kW - kR + 10, kW - kR + 30, ly, color);
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kW - kR + 36, ly + 4, curves[ci].label);
    }
    s += "</svg>\n";
    return s;
}

} // namespace

CompareArtifacts cmd_compare(std::span<const fs::path> csvs, const fs::path& out_dir, const std::string& baseline) {
    if (csvs.empty()) {
        throw InvalidArgument("compare: no CSV files given");
    }
    std::map<Metric, std::vector<Curve>> groups;
    for (const auto& p : csvs) {
        Curve c = read_curve(p);
        groups[c.metric].push_back(std::move(c));
    }
    for (auto& [metric, curves] : groups) {
        std::set<std::string> labels;
        for (auto& c : curves) {
            const std::string stem = c.label;
            for (int n = 2; !labels.insert(c.label).second; ++n) {
                c.label = fmt::format("{}#{}", stem, n);
            }
            std::vector<double> a;
            std::vector<double> b;
            for (const auto& r : c.rows) {
                a.push_back(r.snr_db);
            }
            for (const auto& r : curves.front().rows) {
                b.push_back(r.snr_db);
            }
            if (a != b) {
                throw ConfigError(grid_diff(curves.front(), c));
            }
        }
    }

    fs::create_directories(out_dir);
    CompareArtifacts artifacts;
    std::string table = "metric,run,model/snr,value,baseline_value,delta\n";
    std::string summary;
    for (const auto& [metric, curves] : groups) {
        const fs::path plot = out_dir / fmt::format("compare_{}.svg", to_string(metric));
        write_text(plot, render_svg(metric, curves));
        artifacts.plots.push_back(plot);

        const auto base_it = baseline.empty() ? curves.begin()
                                              : std::find_if(curves.begin(), curves.end(),
                                                             [&](const Curve& c) { return c.label == baseline; });
        if (base_it == curves.end()) {
            throw ConfigError(fmt::format("compare: baseline '{}' not found among the {} curves", baseline,
                                          to_string(metric)));
        }
        const Curve& base = *base_it;
        summary += fmt::format("test/{} ({} is better), delta vs '{}'\n", to_string(metric),
                               higher_is_better(metric) ? "higher" : "lower", base.label);
        summary += fmt::format("{:>10}", "snr");
        for (const auto& c : curves) {
            summary += fmt::format(" {:>14}", c.label.substr(0, 14));
        }
        summary += '\n';
        for (std::size_t i = 0; i < base.rows.size(); ++i) {
            summary += fmt::format("{:>10}", base.rows[i].snr_db);
            for (const auto& c : curves) {
                const double delta = c.rows[i].value - base.rows[i].value;
                summary += fmt::format(" {:>+14.4f}", delta);
                table += fmt::format("{},{},{},{:.10f},{:.10f},{:.10f}\n", to_string(metric), c.label,
                                     c.rows[i].snr_db, c.rows[i].value, base.rows[i].value, delta);
            }
            summary += '\n';
        }
        summary += '\n';
    }
    artifacts.table = out_dir / "compare_deltas.csv";
    write_text(artifacts.table, table);
    artifacts.summary = std::move(summary);
    return artifacts;
}

} // namespace wzjscc::exp
