// SPDX-License-Identifier: Apache-2.0
//
// Rendering HTML through a WebDriver endpoint.

#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "waffle/blocks.hpp"
#include "waffle/image.hpp"

namespace waffle {

struct Viewport {
    int width = 1280;
    int height = 720;
};

enum class RenderStatus { kOk, kFailed, kBlank };
std::string_view to_string(RenderStatus s);

struct RenderResult {
    RenderStatus status = RenderStatus::kFailed;
    std::optional<Image> image;  // absent when failed
    std::string png;             // encoded screenshot, empty when failed
    BlockList blocks;
    std::string reason;          // why rendering failed
    double timing_ms = 0;
};

/// Classifies a decoded screenshot: blank when all pixels are equal.
RenderResult classify_screenshot(Image image, std::string png, BlockList blocks, double timing_ms);
RenderResult render_failure(std::string reason, double timing_ms = 0);

class Renderer {
public:
    virtual ~Renderer() = default;
    virtual RenderResult render(std::string_view html) = 0;
    /// Results are returned in input order. The default renders serially.
    virtual std::vector<RenderResult> render_batch(std::span<const std::string> docs);
};

struct WebDriverOptions {
    std::string endpoint;  // e.g. http://127.0.0.1:9515
    Viewport viewport;
    int timeout_ms = 15000;
    /// Script run via execute/sync after load; must return the block JSON
    /// (array or JSON string). Empty disables block extraction.
    std::string extract_script;
    std::string browser_name;  // optional capability
    std::vector<std::string> browser_args{"--headless=new", "--disable-gpu", "--hide-scrollbars",
                                          "--force-device-scale-factor=1", "--disable-smooth-scrolling",
                                          "--force-prefers-reduced-motion"};
};

/// Reads WAFFLE_WEBDRIVER_URL; empty when unset.
std::string webdriver_url_from_env();
/// Reads the script named by WAFFLE_EXTRACT_SCRIPT; empty when unset.
std::string extract_script_from_env();

/// One WebDriver session, created lazily and deleted on destruction.
/// Commands are serialized: one in flight per session.
class WebDriverRenderer : public Renderer {
public:
    explicit WebDriverRenderer(WebDriverOptions options);
    ~WebDriverRenderer() override;
    WebDriverRenderer(const WebDriverRenderer&) = delete;
    WebDriverRenderer& operator=(const WebDriverRenderer&) = delete;

    RenderResult render(std::string_view html) override;

    /// Runs a script in the current page and returns its value. Used for
    /// cross-checking extracted blocks against the live page.
    nlohmann::json execute(const std::string& script, const nlohmann::json& args = nlohmann::json::array());

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::mutex mu_;
};

/// A fixed set of sessions; render_batch spreads documents over them.
class RenderPool : public Renderer {
public:
    RenderPool(WebDriverOptions options, std::size_t sessions);
    RenderResult render(std::string_view html) override;
    std::vector<RenderResult> render_batch(std::span<const std::string> docs) override;

private:
    std::vector<std::unique_ptr<WebDriverRenderer>> sessions_;
    std::size_t next_ = 0;
    std::mutex mu_;
};

}  // namespace waffle
