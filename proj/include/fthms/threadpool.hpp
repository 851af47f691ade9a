#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <thread>
#include <vector>

#include "fthms/core.hpp"

namespace fthms {

// Fixed-size worker pool. Results of parallel loops are written into
// caller-owned slots indexed by iteration, so reductions stay deterministic
// regardless of scheduling.
class ThreadPool {
public:
    explicit ThreadPool(int n_workers) {
        if (n_workers < 1) throw config_error("ThreadPool: need at least one worker");
        workers_.reserve(n_workers);
        for (int i = 0; i < n_workers; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            done_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return static_cast<int>(workers_.size()); }

    // Runs body(i) for i in [0, n). Blocks until every iteration finished;
    // the first exception thrown by any iteration is rethrown here.
    void parallel_for(int n, const std::function<void(int)>& body) {
        if (n <= 0) return;
        if (size() == 1) {
            for (int i = 0; i < n; ++i) body(i);
            return;
        }
        std::atomic<int> next{0};
        std::atomic<int> remaining{n};
        std::exception_ptr error;
        std::mutex err_mu;
        std::mutex wait_mu;
        std::condition_variable wait_cv;

        auto step = [&] {
            const int i = next.fetch_add(1);
            if (i >= n) return false;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!error) error = std::current_exception();
            }
            if (remaining.fetch_sub(1) == 1) {
                std::lock_guard<std::mutex> lk(wait_mu);
                wait_cv.notify_all();
            }
            return true;
        };

        {
            std::lock_guard<std::mutex> lk(mu_);
            for (int t = 0; t < size(); ++t) {
                tasks_.push([&step] {
                    while (step()) {
                    }
                });
            }
        }
        cv_.notify_all();

        // The submitting thread chips in instead of idling.
        while (step()) {
        }
        std::unique_lock<std::mutex> lk(wait_mu);
        wait_cv.wait(lk, [&] { return remaining.load() <= 0; });
        if (error) std::rethrow_exception(error);
    }

private:
    void worker_loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [this] { return done_ || !tasks_.empty(); });
                if (done_ && tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop();
            }
            task();
        }
    }

    std::vector<std::thread> workers_;
    std::queue<std::function<void()>> tasks_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool done_ = false;
};

inline int default_worker_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace fthms
