#ifndef SAHI_SUBPROCESS_HPP
#define SAHI_SUBPROCESS_HPP

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "sahi/detector.hpp"
#include "sahi/raster.hpp"

namespace sahi {

struct AdapterConfig {
    std::string command;        // run via /bin/sh -c
    double timeout_seconds = 30.0;
    int pool_size = 1;          // children; access serialized per child
    std::string scratch_dir;    // where patch files are written; default tmp
};

namespace detail {

// One adapter child with line-oriented stdin/stdout pipes.
class AdapterChild {
public:
    explicit AdapterChild(std::string const& command) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw std::runtime_error("adapter: pipe() failed");
        pid_ = fork();
        if (pid_ < 0) throw std::runtime_error("adapter: fork() failed");
        if (pid_ == 0) {
            setpgid(0, 0);  // own process group so teardown reaps grandchildren
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        stdin_fd_ = to_child[1];
        stdout_fd_ = from_child[0];
    }

    ~AdapterChild() {
        if (stdin_fd_ >= 0) close(stdin_fd_);
        if (stdout_fd_ >= 0) close(stdout_fd_);
        if (pid_ > 0) {
            kill(-pid_, SIGTERM);
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid_, &status, WNOHANG) != 0) return;
                usleep(10000);
            }
            kill(-pid_, SIGKILL);
            waitpid(pid_, &status, 0);
        }
    }

    AdapterChild(AdapterChild const&) = delete;
    AdapterChild& operator=(AdapterChild const&) = delete;

    void send_line(std::string const& line) {
        std::string payload = line + "\n";
        std::size_t off = 0;
        while (off < payload.size()) {
            ssize_t n = write(stdin_fd_, payload.data() + off, payload.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw std::runtime_error("adapter launch failure: broken stdin pipe");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(double timeout_seconds) {
        std::string line;
        auto deadline_ms = static_cast<long>(timeout_seconds * 1000.0);
        while (true) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            struct pollfd pfd{stdout_fd_, POLLIN, 0};
            int rc = poll(&pfd, 1, static_cast<int>(deadline_ms));
            if (rc == 0) throw std::runtime_error("adapter timeout");
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw std::runtime_error("adapter: poll() failed");
            }
            char buf[4096];
            ssize_t n = read(stdout_fd_, buf, sizeof buf);
            if (n <= 0)
                throw std::runtime_error("adapter launch failure: child closed stdout");
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

    std::mutex mutex;

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
};

}  // namespace detail

// Wire protocol: request is one JSON line
//   {"patch_path":..., "patch_width":..., "patch_height":..., "scale":..., "request_id":...}
// and the response is one JSON document on the child's stdout:
//   {"request_id":..., "detections":[{"class_id":..,"bbox":[x0,y0,x1,y1],"score":..}]}
class SubprocessDetector final : public DetectorBackend {
public:
    explicit SubprocessDetector(AdapterConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.command.empty())
            throw std::invalid_argument("SubprocessDetector: empty command");
        if (cfg_.pool_size < 1)
            throw std::invalid_argument("SubprocessDetector: pool_size must be >= 1");
        if (cfg_.scratch_dir.empty())
            cfg_.scratch_dir = std::filesystem::temp_directory_path().string();
        std::filesystem::create_directories(cfg_.scratch_dir);
        children_.resize(static_cast<std::size_t>(cfg_.pool_size));
    }

    std::vector<Detection> detect(GrayImage const& patch,
                                  FrameTransform const& transform,
                                  DetectContext const&) override {
        std::uint64_t id = next_id_.fetch_add(1);
        auto& slot = children_[id % children_.size()];

        std::string patch_path =
            (std::filesystem::path(cfg_.scratch_dir) /
             ("patch_" + std::to_string(id) + ".pgm")).string();
        write_image(patch, patch_path);

        nlohmann::json request = {{"patch_path", patch_path},
                                  {"patch_width", patch.width},
                                  {"patch_height", patch.height},
                                  {"scale", transform.scale},
                                  {"request_id", id}};

        std::string response_line;
        {
            std::lock_guard<std::mutex> pool_guard(pool_mutex_);
            if (!slot) slot = std::make_unique<detail::AdapterChild>(cfg_.command);
        }
        {
            std::lock_guard<std::mutex> guard(slot->mutex);
            slot->send_line(request.dump());
            response_line = slot->read_line(cfg_.timeout_seconds);
        }
        std::filesystem::remove(patch_path);
        return parse_response(response_line, id);
    }

private:
    static std::vector<Detection> parse_response(std::string const& line,
                                                 std::uint64_t expected_id) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (nlohmann::json::parse_error const& e) {
            throw std::runtime_error(std::string("adapter protocol violation: ") +
                                     e.what());
        }
        if (!j.contains("request_id") ||
            j["request_id"].get<std::uint64_t>() != expected_id)
            throw std::runtime_error("adapter protocol violation: request_id mismatch");
        if (!j.contains("detections") || !j["detections"].is_array())
            throw std::runtime_error("adapter protocol violation: missing detections");
        std::vector<Detection> out;
        for (auto const& jd : j["detections"]) {
            Detection d;
            if (!jd.contains("class_id") || !jd.contains("bbox") || !jd.contains("score"))
                throw std::runtime_error("adapter protocol violation: incomplete detection");
            d.class_id = jd["class_id"].get<int>();
            d.score = jd["score"].get<double>();
            if (!(d.score >= 0.0 && d.score <= 1.0))
                throw std::runtime_error("adapter protocol violation: score out of [0,1]");
            auto const& b = jd["bbox"];
            if (!b.is_array() || b.size() != 4)
                throw std::runtime_error("adapter protocol violation: bad bbox");
            try {
                d.bbox = BBox(b[0].get<double>(), b[1].get<double>(),
                              b[2].get<double>(), b[3].get<double>());
            } catch (std::exception const& e) {
                throw std::runtime_error(std::string("adapter protocol violation: ") +
                                         e.what());
            }
            out.push_back(d);
        }
        return out;
    }

    AdapterConfig cfg_;
    std::vector<std::unique_ptr<detail::AdapterChild>> children_;
    std::mutex pool_mutex_;
    std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace sahi

#endif  // SAHI_SUBPROCESS_HPP
