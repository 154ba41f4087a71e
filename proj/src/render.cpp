// SPDX-License-Identifier: Apache-2.0

#include "waffle/render.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "waffle/base64.hpp"

namespace waffle {
namespace {

class WebDriverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

Image crop(const Image& src, int width, int height) {
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        std::copy_n(src.at(0, y), static_cast<std::size_t>(width) * 3, out.at(0, y));
    }
    return out;
}

}  // namespace

std::string_view to_string(RenderStatus s) {
    switch (s) {
        case RenderStatus::kOk: return "ok";
        case RenderStatus::kFailed: return "failed";
        case RenderStatus::kBlank: return "blank";
    }
    return "?";
}

RenderResult classify_screenshot(Image image, std::string png, BlockList blocks, double timing_ms) {
    RenderResult r;
    r.status = is_uniform(image) ? RenderStatus::kBlank : RenderStatus::kOk;
    r.image = std::move(image);
    r.png = std::move(png);
    r.blocks = std::move(blocks);
    r.timing_ms = timing_ms;
    return r;
}

RenderResult render_failure(std::string reason, double timing_ms) {
    RenderResult r;
    r.status = RenderStatus::kFailed;
    r.reason = std::move(reason);
    r.timing_ms = timing_ms;
    return r;
}

std::vector<RenderResult> Renderer::render_batch(std::span<const std::string> docs) {
    std::vector<RenderResult> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(render(d));
    return out;
}

std::string webdriver_url_from_env() {
    const char* v = std::getenv("WAFFLE_WEBDRIVER_URL");
    return v ? std::string(v) : std::string();
}

std::string extract_script_from_env() {
    const char* path = std::getenv("WAFFLE_EXTRACT_SCRIPT");
    if (!path || !*path) return {};
    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("cannot read extraction script ") + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct WebDriverRenderer::Impl {
    WebDriverOptions opt;
    std::unique_ptr<httplib::Client> http;
    std::string base_path;
    std::string session;

    explicit Impl(WebDriverOptions o) : opt(std::move(o)) {
        std::string url = opt.endpoint;
        while (!url.empty() && url.back() == '/') url.pop_back();
        const auto scheme = url.find("://");
        const auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path != std::string::npos) {
            base_path = url.substr(path);
            url = url.substr(0, path);
        }
        http = std::make_unique<httplib::Client>(url);
        const auto secs = std::chrono::milliseconds(opt.timeout_ms + 5000);
        http->set_connection_timeout(std::chrono::seconds(5));
        http->set_read_timeout(secs);
        http->set_write_timeout(secs);
    }

    nlohmann::json call(const std::string& method, const std::string& path, const nlohmann::json& body = nullptr) {
        const std::string full = base_path + path;
        httplib::Result res;
        if (method == "GET") {
            res = http->Get(full);
        } else if (method == "DELETE") {
            res = http->Delete(full);
        } else {
            res = http->Post(full, body.is_null() ? std::string("{}") : body.dump(), "application/json");
        }
        if (!res) {
            throw WebDriverError(method + " " + full + ": connection error (" + httplib::to_string(res.error()) + ")");
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
            throw WebDriverError(method + " " + full + ": HTTP " + std::to_string(res->status) + ", non-JSON reply");
        }
        const nlohmann::json value = j.contains("value") ? j["value"] : nlohmann::json();
        if (res->status >= 400 || (value.is_object() && value.contains("error"))) {
            std::string msg = value.is_object() ? value.value("error", std::string("error")) : "error";
            if (value.is_object() && value.contains("message")) msg += ": " + value["message"].get<std::string>();
            throw WebDriverError(method + " " + full + ": HTTP " + std::to_string(res->status) + " " + msg);
        }
        return value;
    }

    std::string session_path(const std::string& suffix) const { return "/session/" + session + suffix; }

    nlohmann::json execute(const std::string& script, const nlohmann::json& args) {
        return call("POST", session_path("/execute/sync"), {{"script", script}, {"args", args}});
    }

    void ensure_session() {
        if (!session.empty()) return;
        nlohmann::json always{{"pageLoadStrategy", "normal"},
                              {"goog:chromeOptions", {{"args", opt.browser_args}}},
                              {"moz:firefoxOptions", {{"args", {"-headless"}}}}};
        if (!opt.browser_name.empty()) always["browserName"] = opt.browser_name;
        const auto value = call("POST", "/session", {{"capabilities", {{"alwaysMatch", always}}}});
        session = value.value("sessionId", std::string());
        if (session.empty()) throw WebDriverError("new session reply carried no sessionId");
        call("POST", session_path("/timeouts"), {{"pageLoad", opt.timeout_ms}, {"script", opt.timeout_ms}});

        // Size the window so the viewport, not the outer frame, matches.
        call("POST", session_path("/window/rect"), {{"width", opt.viewport.width}, {"height", opt.viewport.height}});
        const auto inner = execute("return [window.innerWidth, window.innerHeight];", nlohmann::json::array());
        if (inner.is_array() && inner.size() == 2) {
            const int dw = opt.viewport.width - inner[0].get<int>();
            const int dh = opt.viewport.height - inner[1].get<int>();
            if (dw != 0 || dh != 0) {
                call("POST", session_path("/window/rect"),
                     {{"width", opt.viewport.width + dw}, {"height", opt.viewport.height + dh}});
            }
        }
    }

    void close() {
        if (session.empty()) return;
        try {
            call("DELETE", session_path(""));
        } catch (const std::exception&) {
        }
        session.clear();
    }

    RenderResult render(std::string_view html) {
        const auto start = std::chrono::steady_clock::now();
        try {
            ensure_session();
            call("POST", session_path("/url"), {{"url", "data:text/html;charset=utf-8;base64," + base64_encode(html)}});
            const auto deadline = start + std::chrono::milliseconds(opt.timeout_ms);
            while (execute("return document.readyState;", nlohmann::json::array()) != "complete") {
                if (std::chrono::steady_clock::now() > deadline) {
                    return render_failure("timeout waiting for document load", elapsed_ms(start));
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            }
            BlockList blocks;
            if (!opt.extract_script.empty()) {
                nlohmann::json v = execute(opt.extract_script, nlohmann::json::array());
                if (v.is_string()) v = nlohmann::json::parse(v.get<std::string>());
                blocks = blocks_from_json(v);
            }
            const auto shot = call("GET", session_path("/screenshot"));
            if (!shot.is_string()) throw WebDriverError("screenshot reply is not a string");
            std::string png = base64_decode(shot.get<std::string>());
            Image image = decode_png(png);
            if (image.width < opt.viewport.width || image.height < opt.viewport.height) {
                return render_failure("screenshot " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                          " is smaller than the viewport",
                                      elapsed_ms(start));
            }
            if (image.width != opt.viewport.width || image.height != opt.viewport.height) {
                image = crop(image, opt.viewport.width, opt.viewport.height);
                png = encode_png(image);
            }
            return classify_screenshot(std::move(image), std::move(png), std::move(blocks), elapsed_ms(start));
        } catch (const WebDriverError& e) {
            // The session may be gone; start fresh next time.
            session.clear();
            return render_failure(e.what(), elapsed_ms(start));
        } catch (const std::exception& e) {
            return render_failure(e.what(), elapsed_ms(start));
        }
    }
};

WebDriverRenderer::WebDriverRenderer(WebDriverOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

WebDriverRenderer::~WebDriverRenderer() { impl_->close(); }

RenderResult WebDriverRenderer::render(std::string_view html) {
    std::lock_guard lock(mu_);
    return impl_->render(html);
}

nlohmann::json WebDriverRenderer::execute(const std::string& script, const nlohmann::json& args) {
    std::lock_guard lock(mu_);
    impl_->ensure_session();
    return impl_->execute(script, args);
}

RenderPool::RenderPool(WebDriverOptions options, std::size_t sessions) {
    if (sessions == 0) sessions = 1;
    for (std::size_t i = 0; i < sessions; ++i) sessions_.push_back(std::make_unique<WebDriverRenderer>(options));
}

RenderResult RenderPool::render(std::string_view html) {
    std::size_t slot;
    {
        std::lock_guard lock(mu_);
        slot = next_++ % sessions_.size();
    }
    return sessions_[slot]->render(html);
}

std::vector<RenderResult> RenderPool::render_batch(std::span<const std::string> docs) {
    std::vector<RenderResult> out(docs.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&](WebDriverRenderer& session) {
        for (std::size_t i = cursor++; i < docs.size(); i = cursor++) out[i] = session.render(docs[i]);
    };
    const std::size_t n = std::min(sessions_.size(), docs.size());
    std::vector<std::thread> threads;
    for (std::size_t s = 1; s < n; ++s) threads.emplace_back(worker, std::ref(*sessions_[s]));
    if (n > 0) worker(*sessions_[0]);
    for (auto& t : threads) t.join();
    return out;
}

}  // namespace waffle
