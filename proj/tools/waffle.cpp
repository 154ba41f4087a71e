// SPDX-License-Identifier: Apache-2.0
//
// waffle: dataset generation, mask export and evaluation from the shell.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "waffle/blocks.hpp"
#include "waffle/dom.hpp"
#include "waffle/image.hpp"
#include "waffle/loss.hpp"
#include "waffle/metrics.hpp"
#include "waffle/mutator.hpp"
#include "waffle/render.hpp"
#include "waffle/struct_attn.hpp"
#include "waffle/token_align.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using namespace waffle;

// Raised for bad flag combinations found after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct Globals {
    std::size_t jobs = 1;
    std::string webdriver;
    std::string extract_script;  // path
    int width = 1280;
    int height = 720;
    int timeout_ms = 15000;
};

WebDriverOptions driver_options(const Globals& g, const std::string& endpoint) {
    WebDriverOptions o;
    o.endpoint = endpoint.empty() ? (g.webdriver.empty() ? webdriver_url_from_env() : g.webdriver) : endpoint;
    if (o.endpoint.empty()) throw UsageError("no WebDriver endpoint: pass --webdriver or set WAFFLE_WEBDRIVER_URL");
    o.viewport = {g.width, g.height};
    o.timeout_ms = g.timeout_ms;
    o.extract_script = g.extract_script.empty() ? extract_script_from_env() : read_file(g.extract_script);
    return o;
}

std::unique_ptr<Renderer> make_renderer(const Globals& g, const std::string& endpoint = {}) {
    return std::make_unique<RenderPool>(driver_options(g, endpoint), std::max<std::size_t>(1, g.jobs));
}

// ---- mask ----

struct MaskArgs {
    std::string html;
    std::string tokens;
    std::string fraction = "1/4";
    std::string depth = "1";
    std::size_t heads = 8;
    std::size_t layers = 1;
    std::size_t prompt = 0;
    bool hide_prompt = false;
    std::string out;
};

MaskConfig mask_config(const MaskArgs& a) {
    MaskConfig c;
    c.n_heads = a.heads;
    c.n_layers = a.layers;
    try {
        c.structural_fraction = Fraction::parse(a.fraction);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--fraction: ") + e.what());
    }
    if (a.depth == "unbounded") {
        c.ancestor_depth.reset();
    } else {
        try {
            c.ancestor_depth = std::stoul(a.depth);
        } catch (const std::exception&) {
            throw UsageError("--ancestor-depth takes a positive integer or 'unbounded'");
        }
        if (*c.ancestor_depth == 0) throw UsageError("--ancestor-depth must be at least 1");
    }
    c.prompt_visible = !a.hide_prompt;
    try {
        c.structural_head_count();  // validates
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

int run_mask(const MaskArgs& a) {
    const MaskConfig config = mask_config(a);
    const DomTree tree = parse_html(read_file(a.html));
    std::vector<ByteSpan> spans;
    if (a.tokens.empty()) {
        spans = reference_tokenize(tree.source());
    } else {
        std::ifstream in(a.tokens);
        if (!in) throw std::runtime_error("cannot read " + a.tokens);
        spans = read_token_spans_jsonl(in);
    }
    const TokenAlignment alignment = align(tree, spans, a.prompt);
    const AttnMaskSet mask = build_mask(tree, alignment, config);
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    export_mask(mask, a.out);

    const MaskStats s = mask_stats(mask);
    json per = json::object();
    for (auto [c, n] : s.per_category) per[std::string(to_string(c))] = n;
    const json j{{"n_tokens", mask.n_tokens},
                 {"n_prompt", mask.n_prompt},
                 {"allowed_cells", s.allowed_cells},
                 {"lower_cells", s.lower_cells},
                 {"density", s.density},
                 {"per_category", per},
                 {"straddling", alignment.straddling.size()},
                 {"structural_heads", config.structural_head_count()}};
    std::cout << j.dump() << "\n";
    return 0;
}

// ---- mutate / dataset ----

CategoryWeights parse_weights(const std::vector<std::uint32_t>& w) {
    if (w.empty()) return kDefaultWeights;
    if (w.size() != kCategoryCount) throw UsageError("--weights takes 7 comma-separated integers");
    CategoryWeights out{};
    std::copy(w.begin(), w.end(), out.begin());
    std::uint64_t total = 0;
    for (auto x : out) total += x;
    if (total == 0) throw UsageError("--weights must not all be zero");
    return out;
}

struct MutateArgs {
    std::string html;
    std::size_t k = 4;
    std::uint64_t seed = 0;
    std::string render;
    bool use_render = false;
    std::vector<std::uint32_t> weights;
    std::size_t attempts = 0;
    std::string out;
};

int run_mutate(const MutateArgs& a, const Globals& g) {
    if (a.k == 0) throw UsageError("-k must be at least 1");
    const std::string source = read_file(a.html);
    std::unique_ptr<Renderer> renderer;
    if (a.use_render) renderer = make_renderer(g, a.render);
    GroupOptions opt;
    opt.k = a.k;
    opt.seed = a.seed;
    opt.weights = parse_weights(a.weights);
    opt.max_attempts = a.attempts;
    opt.renderer = renderer.get();
    const MutantGroup group = build_group(source, opt);
    const std::string text = group.to_json().dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_file(a.out, text);
    }
    for (const auto& w : group.warnings) std::cerr << "waffle: warning: " << w << "\n";
    return 0;
}

struct DatasetArgs {
    std::string in;
    std::string out;
    std::size_t k = 4;
    std::uint64_t seed = 0;
    std::string render;
    bool use_render = false;
    bool masks = false;
    std::vector<std::uint32_t> weights;
};

std::uint64_t name_salt(const std::string& name) { return std::stoull(content_id(name), nullptr, 16); }

void write_group_masks(const MutantGroup& group, const fs::path& dir) {
    auto one = [&](const std::string& html, const std::string& stem) {
        const DomTree tree = parse_html(html);
        const auto alignment = align(tree, reference_tokenize(tree.source()), 0);
        export_mask(build_mask(tree, alignment, {}), dir / (stem + ".mask"));
    };
    fs::create_directories(dir);
    one(group.original, "original");
    for (std::size_t i = 0; i < group.mutants.size(); ++i) {
        if (group.mutants[i].status == MutantStatus::kOk) one(group.mutants[i].html, "mutant_" + std::to_string(i));
    }
}

void write_group_images(const MutantGroup& group, const fs::path& dir) {
    if (group.original_render && !group.original_render->png.empty()) {
        write_file(dir / "original.png", group.original_render->png);
    }
    for (std::size_t i = 0; i < group.mutants.size(); ++i) {
        const auto& r = group.mutants[i].render;
        if (r && !r->png.empty()) write_file(dir / ("mutant_" + std::to_string(i) + ".png"), r->png);
    }
}

int run_dataset(const DatasetArgs& a, const Globals& g) {
    if (a.k == 0) throw UsageError("-k must be at least 1");
    if (!fs::is_directory(a.in)) throw std::runtime_error("not a directory: " + a.in);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.in)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".html" || ext == ".htm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    const CategoryWeights weights = parse_weights(a.weights);
    std::unique_ptr<Renderer> renderer;
    if (a.use_render) renderer = make_renderer(g, a.render);

    const fs::path out(a.out);
    fs::create_directories(out);
    std::vector<std::string> lines(files.size());
    std::atomic<int> failures{0};
    parallel_for(files.size(), g.jobs, [&](std::size_t i) {
        const std::string name = files[i].filename().string();
        try {
            GroupOptions opt;
            opt.k = a.k;
            opt.seed = mix_seed(a.seed, name_salt(name));
            opt.weights = weights;
            opt.renderer = renderer.get();
            const MutantGroup group = build_group(read_file(files[i]), opt);
            if (renderer) write_group_images(group, out / "images" / group.group_id);
            if (a.masks) write_group_masks(group, out / "masks" / group.group_id);
            json j = group.to_json();
            j["source"] = name;
            lines[i] = j.dump();
        } catch (const std::exception& e) {
            ++failures;
            lines[i] = json{{"source", name}, {"error", e.what()}}.dump();
        }
    });
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file(out / "groups.jsonl", text);
    std::cout << files.size() << " input(s), " << failures.load() << " failed\n";
    return failures.load() ? 1 : 0;
}

// ---- render ----

struct RenderArgs {
    std::string html;
    std::string out;
    std::string blocks;
};

int run_render(const RenderArgs& a, const Globals& g) {
    const std::string source = read_file(a.html);
    WebDriverRenderer renderer(driver_options(g, {}));
    const RenderResult r = renderer.render(source);
    json status{{"status", std::string(to_string(r.status))}, {"timing_ms", r.timing_ms}};
    if (r.status == RenderStatus::kFailed) {
        status["reason"] = r.reason;
        std::cout << status.dump() << "\n";
        return 1;
    }
    write_file(a.out, r.png);
    if (!a.blocks.empty()) write_file(a.blocks, blocks_to_json(r.blocks).dump(2) + "\n");
    status["blocks"] = r.blocks.size();
    std::cout << status.dump() << "\n";
    return 0;
}

// ---- eval ----

struct EvalArgs {
    std::string a;
    std::string b;
    std::string batch;
    CwSsimParams cw;
};

struct Row {
    std::string id;
    std::vector<std::pair<std::string, std::string>> values;  // metric, value
    std::string error;
};

std::vector<double> read_vector(const fs::path& path) {
    const json j = read_json(path);
    if (!j.is_array()) throw std::runtime_error(path.string() + ": expected a JSON array of numbers");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw std::runtime_error(path.string() + ": expected a JSON array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

using PairMetric = std::function<std::vector<std::pair<std::string, std::string>>(const fs::path&, const fs::path&)>;

std::vector<std::pair<std::string, std::string>> llem_values(const LlemScore& s) {
    return {{"llem_block_match", fmt(s.block_match)},
            {"llem_text", fmt(s.text)},
            {"llem_position", fmt(s.position)},
            {"llem_color", fmt(s.color)},
            {"llem_average", fmt(s.average)}};
}

int run_eval(const std::string& metric, const EvalArgs& a, const Globals& g) {
    std::unique_ptr<Renderer> renderer;
    PairMetric fn;
    if (metric == "html-match") {
        renderer = make_renderer(g);
        fn = [&](const fs::path& x, const fs::path& y) {
            const bool same = html_match(read_file(x), read_file(y), *renderer);
            return std::vector<std::pair<std::string, std::string>>{{"html_match", same ? "true" : "false"}};
        };
    } else if (metric == "cwssim") {
        a.cw.validate();
        fn = [&](const fs::path& x, const fs::path& y) {
            return std::vector<std::pair<std::string, std::string>>{
                {"cwssim", fmt(cw_ssim(read_png(x), read_png(y), a.cw))}};
        };
    } else if (metric == "llem") {
        const Viewport vp{g.width, g.height};
        fn = [vp](const fs::path& x, const fs::path& y) {
            return llem_values(llem(blocks_from_json(read_json(x)), blocks_from_json(read_json(y)), vp));
        };
    } else {
        fn = [](const fs::path& x, const fs::path& y) {
            return std::vector<std::pair<std::string, std::string>>{
                {"clip_cos", fmt(clip_cosine(read_vector(x), read_vector(y)))}};
        };
    }

    if (a.batch.empty()) {
        if (a.a.empty() || a.b.empty()) throw UsageError("eval " + metric + " needs --a and --b, or --batch");
        const auto values = fn(a.a, a.b);
        if (metric == "llem") {
            json j = json::object();
            for (const auto& [k, v] : values) j[k.substr(5)] = json::parse(v);
            std::cout << j.dump() << "\n";
        } else {
            std::cout << values.front().second << "\n";
        }
        return 0;
    }
    if (!a.a.empty() || !a.b.empty()) throw UsageError("--batch cannot be combined with --a/--b");

    // Batch: JSON lines {"id", "a", "b"}; relative paths resolve against the batch file.
    const fs::path base = fs::path(a.batch).parent_path();
    std::istringstream in(read_file(a.batch));
    std::vector<Row> rows;
    std::vector<std::pair<fs::path, fs::path>> inputs;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
            Row r;
            r.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                    : std::to_string(rows.size());
            rows.push_back(std::move(r));
            inputs.emplace_back(base / j.at("a").get<std::string>(), base / j.at("b").get<std::string>());
        } catch (const json::exception& e) {
            throw std::runtime_error(a.batch + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    // html-match already spreads renders over the session pool.
    const std::size_t jobs = metric == "html-match" ? 1 : g.jobs;
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        try {
            rows[i].values = fn(inputs[i].first, inputs[i].second);
        } catch (const std::exception& e) {
            rows[i].error = e.what();
        }
    });
    int failures = 0;
    std::cout << "id,metric,value\n";
    for (const Row& r : rows) {
        if (!r.error.empty()) {
            ++failures;
            std::cerr << "waffle: " << r.id << ": " << r.error << "\n";
            continue;
        }
        for (const auto& [m, v] : r.values) std::cout << r.id << "," << m << "," << v << "\n";
    }
    return failures ? 1 : 0;
}

// ---- loss ----

struct LossArgs {
    std::string batch;
    std::optional<double> lambda;
    bool log_variant = false;
};

int run_loss(const LossArgs& a) {
    GroupBatch batch = batch_from_json(read_json(a.batch));
    if (a.lambda) batch.lambda = *a.lambda;
    const LossValues v = combined_loss(batch, a.log_variant ? ContrastiveForm::kLog : ContrastiveForm::kVerbatim);
    std::cout << "{\"l_cl\": " << fmt(v.l_cl) << ", \"l_lm\": " << fmt(v.l_lm) << ", \"l_total\": " << fmt(v.l_total)
              << "}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"waffle: structure-aware HTML toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--jobs", g.jobs, "Worker threads / browser sessions")->check(CLI::PositiveNumber);
    app.add_option("--webdriver", g.webdriver, "WebDriver endpoint (default: $WAFFLE_WEBDRIVER_URL)");
    app.add_option("--extract-script", g.extract_script, "Block extraction script run after page load")
        ->check(CLI::ExistingFile);
    app.add_option("--width", g.width, "Viewport width")->check(CLI::PositiveNumber);
    app.add_option("--height", g.height, "Viewport height")->check(CLI::PositiveNumber);
    app.add_option("--timeout-ms", g.timeout_ms, "Per-page render timeout")->check(CLI::PositiveNumber);

    MaskArgs mask;
    auto* mask_cmd = app.add_subcommand("mask", "Export the structure-aware attention mask of a document");
    mask_cmd->add_option("--html", mask.html)->required()->check(CLI::ExistingFile);
    mask_cmd->add_option("--tokens", mask.tokens, "JSON-lines byte spans {i,start,end}")->check(CLI::ExistingFile);
    mask_cmd->add_option("--fraction", mask.fraction, "Structural head fraction p/q");
    mask_cmd->add_option("--ancestor-depth", mask.depth, "1, 2, ... or unbounded");
    mask_cmd->add_option("--heads", mask.heads)->check(CLI::PositiveNumber);
    mask_cmd->add_option("--layers", mask.layers)->check(CLI::PositiveNumber);
    mask_cmd->add_option("--prompt-tokens", mask.prompt, "Prompt tokens before the document");
    mask_cmd->add_flag("--hide-prompt", mask.hide_prompt, "Document tokens do not see the prompt");
    mask_cmd->add_option("-o,--out", mask.out)->required();

    MutateArgs mutate_args;
    auto* mutate_cmd = app.add_subcommand("mutate", "Build one group of mutants");
    mutate_cmd->add_option("--html", mutate_args.html)->required()->check(CLI::ExistingFile);
    mutate_cmd->add_option("-k", mutate_args.k);
    mutate_cmd->add_option("--seed", mutate_args.seed);
    auto* mutate_render = mutate_cmd->add_option("--render", mutate_args.render, "Render and filter via WebDriver")
                              ->expected(0, 1);
    mutate_cmd->add_option("--weights", mutate_args.weights, "Seven category weights")->delimiter(',');
    mutate_cmd->add_option("--max-attempts", mutate_args.attempts);
    mutate_cmd->add_option("-o,--out", mutate_args.out);

    DatasetArgs dataset;
    auto* dataset_cmd = app.add_subcommand("dataset", "Build mutant groups for every HTML file in a directory");
    dataset_cmd->add_option("--in", dataset.in)->required();
    dataset_cmd->add_option("--out", dataset.out)->required();
    dataset_cmd->add_option("-k", dataset.k);
    dataset_cmd->add_option("--seed", dataset.seed);
    auto* dataset_render = dataset_cmd->add_option("--render", dataset.render)->expected(0, 1);
    dataset_cmd->add_flag("--masks", dataset.masks, "Export masks for originals and survivors");
    dataset_cmd->add_option("--weights", dataset.weights)->delimiter(',');

    RenderArgs render;
    auto* render_cmd = app.add_subcommand("render", "Render one document");
    render_cmd->add_option("--html", render.html)->required()->check(CLI::ExistingFile);
    render_cmd->add_option("-o,--out", render.out)->required();
    render_cmd->add_option("--blocks", render.blocks, "Write extracted text blocks as JSON");

    EvalArgs eval;
    std::string metric;
    auto* eval_cmd = app.add_subcommand("eval", "Compare two pages");
    eval_cmd->require_subcommand(1);
    for (const char* name : {"html-match", "cwssim", "llem", "clip-cos"}) {
        auto* sub = eval_cmd->add_subcommand(name);
        sub->add_option("--a,--gt", eval.a)->check(CLI::ExistingFile);
        sub->add_option("--b,--gen", eval.b)->check(CLI::ExistingFile);
        sub->add_option("--batch", eval.batch, "JSON lines {id, a, b}; prints CSV id,metric,value")
            ->check(CLI::ExistingFile);
        if (std::string(name) == "cwssim") {
            sub->add_option("--size", eval.cw.size);
            sub->add_option("--levels", eval.cw.levels);
            sub->add_option("--orientations", eval.cw.orientations);
            sub->add_option("--window", eval.cw.window);
            sub->add_option("--k", eval.cw.k);
        }
        sub->callback([&metric, name] { metric = name; });
    }

    LossArgs loss;
    auto* loss_cmd = app.add_subcommand("loss", "Evaluate the training objective on a batch");
    loss_cmd->add_option("--batch", loss.batch)->required()->check(CLI::ExistingFile);
    loss_cmd->add_option("--lambda", loss.lambda);
    loss_cmd->add_flag("--log-variant", loss.log_variant, "Use -sum log softmax for the contrastive term");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*mask_cmd) return run_mask(mask);
        if (*mutate_cmd) {
            mutate_args.use_render = mutate_render->count() > 0;
            return run_mutate(mutate_args, g);
        }
        if (*dataset_cmd) {
            dataset.use_render = dataset_render->count() > 0;
            return run_dataset(dataset, g);
        }
        if (*render_cmd) return run_render(render, g);
        if (*eval_cmd) return run_eval(metric, eval, g);
        if (*loss_cmd) return run_loss(loss);
    } catch (const UsageError& e) {
        std::cerr << "waffle: usage: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "waffle: error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
